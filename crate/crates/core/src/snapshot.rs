//! Binary persistence for a running estimator.
//!
//! A snapshot captures the estimator's complete state — configuration,
//! fitted clusters, every histogram's raw weights and lazy scale, and the
//! last stream sample — so a process can stop and a successor can continue
//! producing bit-for-bit the same intervals the uninterrupted process
//! would have.
//!
//! The format is a fixed little-endian layout:
//!
//! ```text
//! "USTPISNP" | version u32 | payload length u64 | payload | SHA-256(payload)
//! ```
//!
//! Every scalar travels as its `f64` bit pattern, which is lossless for
//! both the `f64` and `f32` instantiations. The trailing digest makes
//! corruption (truncation, bit rot, concatenation accidents) a hard load
//! error rather than a subtly wrong estimator.

use std::io::{Read as _, Write as _};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::cluster::{ClusterModel, FeatureMap, FeatureSpec, Standardizer};
use crate::domain::QuantizedDomain;
use crate::error::{Error, Result};
use crate::estimator::{Estimator, EstimatorConfig, Variant};
use crate::histogram::ForgettingHistogram;
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"USTPISNP";
const VERSION: u32 = 1;
/// Sentinel for "no training window" in the fixed-width layout.
const NO_WINDOW: u64 = u64::MAX;

/// Serializes the estimator's full state to `path`, atomically enough for
/// a single writer: the file is written once, front to back.
///
/// # Errors
///
/// Fails only on I/O problems; every estimator state is representable.
pub fn save_snapshot<F: Real>(estimator: &Estimator<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = encode_payload(estimator);

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::with_capacity(20);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    file.write_all(&header).map_err(|e| Error::io(path, e))?;
    file.write_all(&payload).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&payload);
    file.write_all(&digest).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Restores an estimator previously written by [`save_snapshot`].
///
/// # Errors
///
/// [`Error::SnapshotFormat`] for wrong magic, unsupported version,
/// truncation or inconsistent contents; [`Error::SnapshotChecksum`] when
/// the payload digest does not match; I/O errors pass through.
pub fn load_snapshot<F: Real>(path: impl AsRef<Path>) -> Result<Estimator<F>> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;

    if bytes.len() < MAGIC.len() + 4 + 8 {
        return Err(Error::SnapshotFormat {
            why: format!("file is only {} bytes, shorter than the header", bytes.len()),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::SnapshotFormat {
            why: "wrong magic; not an estimator snapshot".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("sized above"));
    if version != VERSION {
        return Err(Error::SnapshotFormat {
            why: format!("snapshot version {version} is not supported (expected {VERSION})"),
        });
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().expect("sized above")) as usize;
    let expected_total = 20usize
        .checked_add(payload_len)
        .and_then(|n| n.checked_add(32))
        .ok_or(Error::SnapshotFormat {
            why: "declared payload length overflows".into(),
        })?;
    if bytes.len() != expected_total {
        return Err(Error::SnapshotFormat {
            why: format!(
                "file holds {} bytes but the header promises {expected_total}",
                bytes.len()
            ),
        });
    }
    let payload = &bytes[20..20 + payload_len];
    let digest = Sha256::digest(payload);
    if digest.as_slice() != &bytes[20 + payload_len..] {
        return Err(Error::SnapshotChecksum);
    }
    decode_payload(payload)
}

fn encode_payload<F: Real>(estimator: &Estimator<F>) -> Vec<u8> {
    let parts = estimator.parts();
    let config = parts.config;
    let mut w = Writer::default();

    w.u8(match config.variant {
        Variant::Absolute => 0,
        Variant::Differential => 1,
    });
    w.u64(config.clusters as u64);
    w.f64(config.forgetting_time_s);
    w.u64(config.domain_bins as u64);
    w.f64(config.domain_margin);
    let spec = config.features;
    w.u8(u8::from(spec.use_power) | (u8::from(spec.use_time_of_day) << 1));
    w.u64(config.training_window.map_or(NO_WINDOW, |n| n as u64));
    w.u64(config.seed);
    w.i64(parts.period_ms);
    w.real(parts.nominal_power);

    let features = parts.clusters.features();
    for norm in [features.power_norm(), features.tod_norm()] {
        w.real(norm.mean);
        w.real(norm.inv_sd);
    }
    for centroid in parts.clusters.centroids() {
        w.real(centroid[0]);
        w.real(centroid[1]);
    }

    let domain = parts.histograms[0].domain();
    w.real(domain.p_min());
    w.real(domain.p_max());
    w.u64(domain.n_bins() as u64);
    for hist in parts.histograms {
        w.real(hist.total_weight());
        w.real(hist.scale());
        w.u64(hist.update_count());
        for &weight in hist.raw_weights() {
            w.real(weight);
        }
    }

    match parts.last {
        None => w.u8(0),
        Some((timestamp_ms, power, label)) => {
            w.u8(1);
            w.i64(timestamp_ms);
            w.real(power);
            w.u64(label as u64);
        }
    }
    w.into_bytes()
}

fn decode_payload<F: Real>(payload: &[u8]) -> Result<Estimator<F>> {
    let mut r = Reader::new(payload);

    let variant = match r.u8()? {
        0 => Variant::Absolute,
        1 => Variant::Differential,
        other => {
            return Err(Error::SnapshotFormat {
                why: format!("unknown variant tag {other}"),
            })
        }
    };
    let clusters = r.usize()?;
    let forgetting_time_s = r.f64()?;
    let domain_bins = r.usize()?;
    let domain_margin = r.f64()?;
    let flags = r.u8()?;
    let features = FeatureSpec {
        use_power: flags & 1 != 0,
        use_time_of_day: flags & 2 != 0,
    };
    let training_window = match r.u64()? {
        NO_WINDOW => None,
        n => Some(n as usize),
    };
    let seed = r.u64()?;
    let config = EstimatorConfig {
        variant,
        clusters,
        forgetting_time_s,
        domain_bins,
        domain_margin,
        features,
        training_window,
        seed,
    };
    let period_ms = r.i64()?;
    let nominal_power = r.real::<F>()?;

    let power_norm = Standardizer {
        mean: r.real::<F>()?,
        inv_sd: r.real::<F>()?,
    };
    let tod_norm = Standardizer {
        mean: r.real::<F>()?,
        inv_sd: r.real::<F>()?,
    };
    let feature_map = FeatureMap::from_parts(features, power_norm, tod_norm)?;
    let mut centroids = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        centroids.push([r.real::<F>()?, r.real::<F>()?]);
    }
    let cluster_model = ClusterModel::from_parts(feature_map, centroids)?;

    let p_min = r.real::<F>()?;
    let p_max = r.real::<F>()?;
    let n_bins = r.usize()?;
    let domain = QuantizedDomain::new(p_min, p_max, n_bins)?;
    let mut histograms = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        let total_weight = r.real::<F>()?;
        let scale = r.real::<F>()?;
        let update_count = r.u64()?;
        let mut weights = Vec::with_capacity(n_bins);
        for _ in 0..n_bins {
            weights.push(r.real::<F>()?);
        }
        histograms.push(ForgettingHistogram::from_parts(
            domain,
            weights,
            total_weight,
            scale,
            update_count,
        )?);
    }

    let last = match r.u8()? {
        0 => None,
        1 => {
            let timestamp_ms = r.i64()?;
            let power = r.real::<F>()?;
            let label = r.usize()?;
            Some((timestamp_ms, power, label))
        }
        other => {
            return Err(Error::SnapshotFormat {
                why: format!("unknown last-sample tag {other}"),
            })
        }
    };
    r.finish()?;

    Estimator::from_parts(config, period_ms, cluster_model, histograms, nominal_power, last)
}

/// Little-endian byte sink for the payload.
#[derive(Default)]
struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.bytes.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    /// Any scalar travels as f64 bits; exact for both lanes.
    fn real<F: Real>(&mut self, v: F) {
        self.f64(v.to_f64().expect("finite scalar"));
    }
    fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Little-endian payload reader with hard bounds checks.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::SnapshotFormat {
            why: "payload cursor overflow".into(),
        })?;
        if end > self.bytes.len() {
            return Err(Error::SnapshotFormat {
                why: format!(
                    "payload ends at byte {} but a field needs bytes {}..{end}",
                    self.bytes.len(),
                    self.pos
                ),
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("sized")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn real<F: Real>(&mut self) -> Result<F> {
        let v = self.f64()?;
        F::from_f64(v).ok_or(Error::SnapshotFormat {
            why: format!("scalar {v} is not representable in the target precision"),
        })
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::SnapshotFormat {
            why: format!("count {v} does not fit this platform"),
        })
    }

    /// Asserts the payload was consumed exactly.
    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::SnapshotFormat {
                why: format!(
                    "{} unread bytes after the last field",
                    self.bytes.len() - self.pos
                ),
            });
        }
        Ok(())
    }
}
