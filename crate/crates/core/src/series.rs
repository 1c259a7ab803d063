//! Uniformly sampled power time series and CSV ingestion.
//!
//! The on-disk format is two comma-separated columns — epoch milliseconds
//! and power in watts — with an optional header row. Ingestion is strict:
//! rows are never dropped or reordered, spacing must be exactly uniform,
//! and violations are reported with the file, line and timestamp involved.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniformly sampled series: a start timestamp, a fixed period and the
/// sample values. Uniform spacing is structural — there is no per-sample
/// timestamp to fall out of step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<F: Real> {
    start_ms: i64,
    period_ms: i64,
    values: Vec<F>,
}

impl<F: Real> TimeSeries<F> {
    /// Builds a series from its parts.
    ///
    /// # Errors
    ///
    /// Rejects a non-positive period and non-finite values.
    pub fn new(start_ms: i64, period_ms: i64, values: Vec<F>) -> Result<Self> {
        if period_ms <= 0 {
            return Err(Error::InvalidParameter {
                what: "sampling period",
                why: format!("must be positive, got {period_ms} ms"),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "power value",
                value: bad.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            start_ms,
            period_ms,
            values,
        })
    }

    /// Timestamp of the first sample, epoch milliseconds.
    #[inline]
    pub fn start_ms(&self) -> i64 {
        self.start_ms
    }

    /// Sample spacing in milliseconds.
    #[inline]
    pub fn period_ms(&self) -> i64 {
        self.period_ms
    }

    /// Sample spacing in seconds.
    #[inline]
    pub fn period_s(&self) -> f64 {
        self.period_ms as f64 / 1000.0
    }

    /// Number of samples.
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series holds no samples.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample values in time order.
    #[inline]
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Timestamp of sample `i`.
    #[inline]
    pub fn timestamp_ms(&self, i: usize) -> i64 {
        self.start_ms + (i as i64) * self.period_ms
    }

    /// Iterator over `(timestamp_ms, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, F)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.timestamp_ms(i), v))
    }

    /// A copy of the last `n` samples (the whole series when `n` exceeds
    /// its length), keeping timestamps aligned.
    pub fn tail(&self, n: usize) -> Self {
        let keep = n.min(self.values.len());
        let skip = self.values.len() - keep;
        Self {
            start_ms: self.timestamp_ms(skip),
            period_ms: self.period_ms,
            values: self.values[skip..].to_vec(),
        }
    }
}

/// Reads a two-column CSV (`timestamp_ms,power_w`) into a [`TimeSeries`].
///
/// A header row is detected by its first field failing integer parsing.
/// The file must contain at least two data rows (one row cannot establish
/// the sampling period), timestamps must advance by the same positive step
/// on every row, and power values must be finite numbers.
///
/// # Errors
///
/// I/O failures, malformed rows (with line numbers), empty or too-short
/// files, and the first spacing violation (with the offending timestamp)
/// are all reported as distinct errors.
pub fn read_csv<F: Real>(path: impl AsRef<Path>) -> Result<TimeSeries<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut start_ms: Option<i64> = None;
    let mut prev_ms: Option<i64> = None;
    let mut period_ms: Option<i64> = None;
    let mut values: Vec<F> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let ts_field = fields.next().unwrap_or("").trim();
        let power_field = fields.next().map(str::trim);
        let extra = fields.next();

        let ts: i64 = match ts_field.parse() {
            Ok(ts) => ts,
            Err(_) if line_no == 1 => continue, // header row
            Err(_) => {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    line: line_no,
                    why: format!("cannot parse timestamp {ts_field:?} as integer milliseconds"),
                });
            }
        };
        let power_field = power_field.ok_or_else(|| Error::MalformedRow {
            path: path.into(),
            line: line_no,
            why: "missing power column".into(),
        })?;
        if extra.is_some() {
            return Err(Error::MalformedRow {
                path: path.into(),
                line: line_no,
                why: "expected exactly two columns".into(),
            });
        }
        let power: f64 = power_field.parse().map_err(|_| Error::MalformedRow {
            path: path.into(),
            line: line_no,
            why: format!("cannot parse power {power_field:?} as a number"),
        })?;
        if !power.is_finite() {
            return Err(Error::MalformedRow {
                path: path.into(),
                line: line_no,
                why: format!("power value {power} is not finite"),
            });
        }

        match (prev_ms, period_ms) {
            (None, _) => start_ms = Some(ts),
            (Some(prev), None) => {
                let step = ts - prev;
                if step <= 0 {
                    return Err(Error::MalformedRow {
                        path: path.into(),
                        line: line_no,
                        why: format!("timestamp {ts} does not advance past {prev}"),
                    });
                }
                period_ms = Some(step);
            }
            (Some(prev), Some(period)) => {
                let step = ts - prev;
                if step != period {
                    return Err(Error::NonUniformSpacing {
                        path: path.into(),
                        expected_ms: period,
                        found_ms: step,
                        at_ms: ts,
                    });
                }
            }
        }
        prev_ms = Some(ts);
        values.push(F::from_config(power));
    }

    let start_ms = start_ms.ok_or_else(|| Error::EmptyInput { path: path.into() })?;
    let period_ms = period_ms.ok_or_else(|| Error::PeriodUndetermined { path: path.into() })?;
    TimeSeries::new(start_ms, period_ms, values)
}

/// Writes a series as `timestamp_ms,power_w` rows under a header.
///
/// Values are printed with Rust's shortest round-trip formatting, so
/// reading the file back reproduces them exactly.
pub fn write_csv<F: Real>(series: &TimeSeries<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    write(&mut out, "timestamp_ms,power_w\n".to_string())?;
    for (ts, v) in series.iter() {
        write(&mut out, format!("{ts},{v}\n"))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
