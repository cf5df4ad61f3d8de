//! Seeded random streams, bootstrap draws and the synthetic history
//! generator.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is built from the
//! base seed, a domain tag and the replication index, and whose 64-bit
//! stream id encodes the facility and purpose. Distinct keys therefore never
//! share keystream, and a given key always replays the same sequence no
//! matter how many draws other streams consume.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FacilityHistory, FacilityId, HistoryDataset, Units};

pub type Stream = ChaCha8Rng;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("empty history for facility {facility} ({purpose:?})")]
    EmptyHistory {
        facility: FacilityId,
        purpose: StreamPurpose,
    },
    #[error("cannot bootstrap from an empty sample list")]
    EmptySamples,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamPurpose {
    Demand,
    Lead,
}

const DOMAIN_SIMULATION: u32 = 0;
const DOMAIN_SYNTHETIC: u32 = 1;

/// Identifies one independent random stream of a simulation replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub base_seed: u64,
    pub replication: u32,
    pub facility: FacilityId,
    pub purpose: StreamPurpose,
}

impl StreamKey {
    pub fn new(base_seed: u64, replication: u32, facility: FacilityId, purpose: StreamPurpose) -> Self {
        Self {
            base_seed,
            replication,
            facility,
            purpose,
        }
    }

    pub fn stream(&self) -> Stream {
        keyed_stream(DOMAIN_SIMULATION, self.base_seed, self.replication, self.facility, self.purpose)
    }
}

fn keyed_stream(domain: u32, seed: u64, index: u32, facility: FacilityId, purpose: StreamPurpose) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&index.to_le_bytes());
    key[12..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    let purpose_bit = match purpose {
        StreamPurpose::Demand => 0,
        StreamPurpose::Lead => 1,
    };
    rng.set_stream(((facility.0 as u64) << 1) | purpose_bit);
    rng
}

/// Generic seeded stream for optimizer-side randomness (designs, restarts).
pub fn seeded_stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw with replacement from an empirical sample.
pub fn bootstrap_draw<T: Copy, R: Rng + ?Sized>(samples: &[T], rng: &mut R) -> Result<T, SamplingError> {
    if samples.is_empty() {
        return Err(SamplingError::EmptySamples);
    }
    Ok(samples[rng.random_range(0..samples.len())])
}

/// A sample list bound to its own stream; construction checks nonemptiness
/// once so that draws are infallible.
#[derive(Clone, Debug)]
pub struct Bootstrap<'a> {
    samples: &'a [Units],
    rng: Stream,
}

impl<'a> Bootstrap<'a> {
    pub fn new(samples: &'a [Units], key: StreamKey) -> Result<Self, SamplingError> {
        if samples.is_empty() {
            return Err(SamplingError::EmptyHistory {
                facility: key.facility,
                purpose: key.purpose,
            });
        }
        Ok(Self {
            samples,
            rng: key.stream(),
        })
    }

    pub fn draw(&mut self) -> Units {
        self.samples[self.rng.random_range(0..self.samples.len())]
    }
}

/// Discretized normal truncated at zero: draws are rounded and negative
/// values are rejected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    #[serde(default)]
    pub spread: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, spread: f64) -> Self {
        Self { mean, spread }
    }

    fn check(&self) -> Result<(), SamplingError> {
        if !self.mean.is_finite() || !self.spread.is_finite() {
            return Err(SamplingError::InvalidParams("mean and spread must be finite".into()));
        }
        if self.mean < 0.0 {
            return Err(SamplingError::InvalidParams(format!(
                "mean {} is negative; cannot truncate to nonnegative support",
                self.mean
            )));
        }
        if self.spread < 0.0 {
            return Err(SamplingError::InvalidParams(format!("spread {} is negative", self.spread)));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, normal: &Normal<f64>, rng: &mut R) -> Units {
        // Acceptance probability is at least one half because mean >= 0.
        loop {
            let v = normal.sample(rng).round();
            if v >= 0.0 {
                return v as Units;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacilityGenParams {
    pub id: FacilityId,
    /// `None` for facilities without customer demand.
    pub demand: Option<TruncatedNormal>,
    pub lead_delta: TruncatedNormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Number of samples per series.
    pub length: usize,
    pub facilities: Vec<FacilityGenParams>,
}

pub const DEFAULT_HISTORY_LENGTH: usize = 360;

/// Builds a synthetic history, deterministic in `seed`.
pub fn generate_synthetic_history(params: &GeneratorParams, seed: u64) -> Result<HistoryDataset, SamplingError> {
    if params.length == 0 {
        return Err(SamplingError::InvalidParams("sample length must be positive".into()));
    }
    let mut facilities = BTreeMap::new();
    for fp in &params.facilities {
        let series = |dist: &TruncatedNormal, purpose| -> Result<Vec<Units>, SamplingError> {
            dist.check()?;
            let normal = Normal::new(dist.mean, dist.spread)
                .map_err(|e| SamplingError::InvalidParams(e.to_string()))?;
            let mut rng = keyed_stream(DOMAIN_SYNTHETIC, seed, 0, fp.id, purpose);
            Ok((0..params.length).map(|_| dist.sample(&normal, &mut rng)).collect())
        };
        let demand = match &fp.demand {
            Some(d) => series(d, StreamPurpose::Demand)?,
            None => Vec::new(),
        };
        let lead_delta = series(&fp.lead_delta, StreamPurpose::Lead)?;
        if facilities
            .insert(fp.id, FacilityHistory { demand, lead_delta })
            .is_some()
        {
            return Err(SamplingError::InvalidParams(format!("facility {} listed twice", fp.id)));
        }
    }
    Ok(HistoryDataset { facilities })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(facility: u32, purpose: StreamPurpose) -> StreamKey {
        StreamKey::new(42, 3, FacilityId(facility), purpose)
    }

    #[test]
    fn singleton_support() {
        let mut rng = key(1, StreamPurpose::Demand).stream();
        for _ in 0..20 {
            assert_eq!(bootstrap_draw(&[7], &mut rng), Ok(7));
        }
    }

    #[test]
    fn empty_samples_error() {
        let mut rng = key(1, StreamPurpose::Demand).stream();
        assert_eq!(bootstrap_draw::<i64, _>(&[], &mut rng), Err(SamplingError::EmptySamples));
        let err = Bootstrap::new(&[], key(4, StreamPurpose::Lead)).unwrap_err();
        assert_eq!(
            err,
            SamplingError::EmptyHistory {
                facility: FacilityId(4),
                purpose: StreamPurpose::Lead
            }
        );
    }

    #[test]
    fn uniform_over_support() {
        // Binomial(n = 1e5, p = 1/3): sigma = sqrt(n p (1 - p)) ~= 149.07.
        let n = 100_000usize;
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        let samples = [2i64, 4, 6];
        let mut rng = key(2, StreamPurpose::Demand).stream();
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let v = bootstrap_draw(&samples, &mut rng).unwrap();
            counts[(v / 2 - 1) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() <= 3.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn same_key_replays() {
        let samples: Vec<i64> = (0..50).collect();
        let mut a = Bootstrap::new(&samples, key(1, StreamPurpose::Lead)).unwrap();
        let mut b = Bootstrap::new(&samples, key(1, StreamPurpose::Lead)).unwrap();
        let da: Vec<_> = (0..100).map(|_| a.draw()).collect();
        let db: Vec<_> = (0..100).map(|_| b.draw()).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn distinct_keys_differ() {
        let base = key(1, StreamPurpose::Demand);
        let variants = [
            StreamKey { base_seed: 43, ..base },
            StreamKey { replication: 4, ..base },
            StreamKey { facility: FacilityId(2), ..base },
            StreamKey { purpose: StreamPurpose::Lead, ..base },
        ];
        let first: Vec<u64> = {
            let mut rng = base.stream();
            (0..8).map(|_| rng.random()).collect()
        };
        for v in variants {
            let mut rng = v.stream();
            let other: Vec<u64> = (0..8).map(|_| rng.random()).collect();
            assert_ne!(first, other, "{v:?}");
        }
    }

    #[test]
    fn streams_do_not_cross_contaminate() {
        let samples: Vec<i64> = (0..1000).collect();
        let alone: Vec<_> = {
            let mut a = Bootstrap::new(&samples, key(1, StreamPurpose::Demand)).unwrap();
            (0..50).map(|_| a.draw()).collect()
        };
        let mut a = Bootstrap::new(&samples, key(1, StreamPurpose::Demand)).unwrap();
        let mut b = Bootstrap::new(&samples, key(2, StreamPurpose::Lead)).unwrap();
        let interleaved: Vec<_> = (0..50)
            .map(|i| {
                for _ in 0..i % 3 {
                    b.draw();
                }
                a.draw()
            })
            .collect();
        assert_eq!(alone, interleaved);
    }

    fn params(mean: f64, spread: f64, length: usize) -> GeneratorParams {
        GeneratorParams {
            length,
            facilities: vec![FacilityGenParams {
                id: FacilityId(1),
                demand: Some(TruncatedNormal::new(mean, spread)),
                lead_delta: TruncatedNormal::new(1.0, 0.0),
            }],
        }
    }

    #[test]
    fn degenerate_distribution_is_constant() {
        let h = generate_synthetic_history(&params(50.0, 0.0, 360), 1).unwrap();
        let f = h.get(FacilityId(1)).unwrap();
        assert_eq!(f.demand.len(), 360);
        assert!(f.demand.iter().all(|&d| d == 50));
        assert!(f.lead_delta.iter().all(|&d| d == 1));
    }

    #[test]
    fn generator_is_deterministic() {
        let p = params(30.0, 12.0, 360);
        assert_eq!(generate_synthetic_history(&p, 9).unwrap(), generate_synthetic_history(&p, 9).unwrap());
        assert_ne!(generate_synthetic_history(&p, 9).unwrap(), generate_synthetic_history(&p, 10).unwrap());
    }

    #[test]
    fn large_sample_mean() {
        // Standard error of the mean is 20 / sqrt(1e4) = 0.2, so a 1% band
        // (1.0) is five standard errors; truncation at zero is 5 sigma away.
        let h = generate_synthetic_history(&params(100.0, 20.0, 10_000), 5).unwrap();
        let d = &h.get(FacilityId(1)).unwrap().demand;
        let mean = d.iter().sum::<i64>() as f64 / d.len() as f64;
        assert!((mean - 100.0).abs() <= 1.0, "mean {mean}");
        assert!(d.iter().all(|&v| v >= 0));
    }

    #[test]
    fn invalid_params() {
        assert!(generate_synthetic_history(&params(10.0, 1.0, 0), 1).is_err());
        assert!(generate_synthetic_history(&params(-1.0, 1.0, 10), 1).is_err());
        assert!(generate_synthetic_history(&params(1.0, -1.0, 10), 1).is_err());
    }

    #[test]
    fn truncation_keeps_support_nonnegative() {
        let h = generate_synthetic_history(&params(0.5, 5.0, 5000), 2).unwrap();
        assert!(h.get(FacilityId(1)).unwrap().demand.iter().all(|&v| v >= 0));
    }
}
