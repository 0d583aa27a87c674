//! Estimation, gating, and reproducible random streams.
//!
//! Every replicate draws from its own ChaCha stream. The key of the stream is
//! derived from `(master_seed, scenario_id)` and the replicate index selects the
//! ChaCha stream number, so a replicate's random numbers never depend on which
//! worker ran it or in what order. Aggregation is a fold over replicate slots in
//! index order, which makes results bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub scenario_id: String,
    pub replicate_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, scenario_id: impl Into<String>, replicate_index: u64) -> Self {
        Self {
            master_seed,
            scenario_id: scenario_id.into(),
            replicate_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        StreamFamily::new(self.master_seed, &self.scenario_id).stream(self.replicate_index)
    }
}

/// All streams sharing a `(master_seed, scenario_id)` pair.
///
/// Hashing happens once per family; opening a replicate stream only sets the
/// ChaCha stream word.
#[derive(Debug, Clone)]
pub struct StreamFamily {
    key: [u8; 32],
}

impl StreamFamily {
    pub fn new(master_seed: u64, scenario_id: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"mecke-stream-v1");
        hasher.update(master_seed.to_le_bytes());
        hasher.update((scenario_id.len() as u64).to_le_bytes());
        hasher.update(scenario_id.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self { key }
    }

    pub fn stream(&self, replicate_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(replicate_index);
        rng
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: usize,
}

impl Estimate {
    /// A deterministic value (standard error 0).
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            replicates: 1,
        }
    }

    /// Sum of independent estimates; standard errors combine in quadrature.
    pub fn sum_independent<'a>(parts: impl IntoIterator<Item = &'a Estimate>) -> Self {
        let mut mean = NeumaierSum::default();
        let mut var = NeumaierSum::default();
        let mut replicates = 0usize;
        for part in parts {
            mean.add(part.mean);
            var.add(part.std_error * part.std_error);
            replicates = replicates.max(part.replicates);
        }
        Self {
            mean: mean.value(),
            std_error: var.value().sqrt(),
            replicates: replicates.max(1),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            replicates: self.replicates,
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn aggregate(samples: &[f64]) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    // Shifting by the first sample keeps constant input exact (SE exactly 0).
    let shift = samples[0];
    let mut sum = NeumaierSum::default();
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteSample { index, value });
        }
        sum.add(value - shift);
    }
    let n = samples.len() as f64;
    let mean = shift + sum.value() / n;
    let mut squares = NeumaierSum::default();
    for &value in samples {
        let d = value - mean;
        squares.add(d * d);
    }
    let variance = squares.value() / (n - 1.0);
    Ok(Estimate {
        mean,
        std_error: (variance / n).sqrt(),
        replicates: samples.len(),
    })
}

/// Statistical comparison parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub z_max: f64,
    pub abs_floor: f64,
}

impl Gate {
    pub fn new(z_max: f64, abs_floor: f64) -> Self {
        Self { z_max, abs_floor }
    }

    /// `z_max = 4`, `abs_floor = 1e-9 * max(1, |lhs|)`.
    pub fn default_for(lhs: f64) -> Self {
        Self {
            z_max: 4.0,
            abs_floor: 1e-9 * lhs.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub difference: f64,
    pub combined_se: f64,
    /// `|difference| / combined_se`; infinite when the standard errors vanish
    /// and the means differ.
    pub z_score: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Passes iff `|a - b| <= z_max * sqrt(a.se^2 + b.se^2) + abs_floor`.
pub fn gate(a: &Estimate, b: &Estimate, z_max: f64, abs_floor: f64) -> GateOutcome {
    let difference = a.mean - b.mean;
    let combined_se = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
    let threshold = z_max * combined_se + abs_floor;
    let z_score = if combined_se > 0.0 {
        difference.abs() / combined_se
    } else if difference == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    GateOutcome {
        difference,
        combined_se,
        z_score,
        threshold,
        passed: difference.abs() <= threshold,
    }
}

/// Number of workers from `MECKE_WORKERS`, falling back to available parallelism.
pub fn default_workers() -> usize {
    std::env::var("MECKE_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs `work` for every replicate index and returns the results in index order.
///
/// When several replicates fail, the error of the lowest index is returned so
/// the outcome does not depend on scheduling.
pub fn run_replicates<T, F>(count: usize, workers: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let slots: Vec<Result<T>> = if workers <= 1 {
        (0..count).map(&work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?;
        pool.install(|| (0..count).into_par_iter().map(&work).collect())
    };
    slots.into_iter().collect()
}

/// Runs replicates producing one scalar each and aggregates them.
pub fn estimate_replicates<F>(count: usize, workers: usize, work: F) -> Result<Estimate>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let samples = run_replicates(count, workers, work)?;
    aggregate(&samples)
}
