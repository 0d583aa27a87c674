//! Compound Poisson paths with optional deterministic drift.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use super::measure::LevyMeasureSpec;
use crate::error::{Error, Result};
use crate::space_measure::Point;

/// One simulated path on `[0, T]`: `X_t = x₀ + b·t + Σ_{u_i ≤ t} z_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    horizon: f64,
    start: Point,
    drift: Point,
    times: Vec<f64>,
    sizes: Vec<Point>,
    /// `cumulative[i] = z_0 + … + z_{i-1}`; one entry longer than `sizes`.
    #[serde(skip)]
    cumulative: Vec<Point>,
}

impl PathRecord {
    /// Builds a path from explicit jumps. Times must lie in `(0, T]` and be
    /// strictly increasing.
    pub fn new(horizon: f64, start: Point, drift: Point, times: Vec<f64>, sizes: Vec<Point>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be finite and positive, got {horizon}")));
        }
        let d = start.len();
        if drift.len() != d {
            return Err(Error::ArityMismatch {
                expected: d,
                got: drift.len(),
            });
        }
        if times.len() != sizes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} jump times but {} jump sizes",
                times.len(),
                sizes.len()
            )));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t <= horizon) {
                return Err(Error::InvalidParameter(format!(
                    "jump times must be strictly increasing in (0, {horizon}], got {t} after {prev}"
                )));
            }
            prev = t;
        }
        if let Some(z) = sizes.iter().find(|z| z.len() != d) {
            return Err(Error::ArityMismatch { expected: d, got: z.len() });
        }
        let mut cumulative = Vec::with_capacity(sizes.len() + 1);
        let mut acc: Point = std::iter::repeat_n(0.0, d).collect();
        cumulative.push(acc.clone());
        for z in &sizes {
            for (a, v) in acc.iter_mut().zip(z) {
                *a += v;
            }
            cumulative.push(acc.clone());
        }
        Ok(Self {
            horizon,
            start,
            drift,
            times,
            sizes,
            cumulative,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sizes(&self) -> &[Point] {
        &self.sizes
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|b| *b != 0.0)
    }

    /// Number of jumps in `(0, t]`.
    pub fn count_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&u| u <= t)
    }

    /// Number of jumps in `(0, t)`.
    pub fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&u| u < t)
    }

    /// `x₀ + b·t` plus the first `jumps` jump sizes.
    pub fn position_with(&self, t: f64, jumps: usize) -> Point {
        self.start
            .iter()
            .zip(&self.drift)
            .zip(&self.cumulative[jumps])
            .map(|((x, b), c)| x + b * t + c)
            .collect()
    }

    /// `X_{t−}`.
    pub fn position_before(&self, t: f64) -> Point {
        self.position_with(t, self.count_before(t))
    }

    /// `X_t`.
    pub fn position_at(&self, t: f64) -> Point {
        self.position_with(t, self.count_up_to(t))
    }

    /// `X_T`.
    pub fn terminal_position(&self) -> Point {
        self.position_with(self.horizon, self.jump_count())
    }
}

/// Draws a path on `[0, T]` started at the origin.
pub fn simulate_path<R: Rng + ?Sized>(levy: &LevyMeasureSpec, drift: &[f64], horizon: f64, rng: &mut R) -> Result<PathRecord> {
    let start: Point = std::iter::repeat_n(0.0, levy.dim()).collect();
    simulate_path_from(levy, &start, drift, horizon, rng)
}

/// Draws a path on `[0, T]` started at `start`: a Poisson(`|ν|T`) number of
/// jumps at sorted uniform times in `(0, T]` with i.i.d. sizes from `ν/|ν|`.
pub fn simulate_path_from<R: Rng + ?Sized>(
    levy: &LevyMeasureSpec,
    start: &[f64],
    drift: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<PathRecord> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be finite and positive, got {horizon}")));
    }
    if drift.len() != levy.dim() || start.len() != levy.dim() {
        return Err(Error::ArityMismatch {
            expected: levy.dim(),
            got: if drift.len() != levy.dim() { drift.len() } else { start.len() },
        });
    }
    let poisson = Poisson::new(levy.mass() * horizon)
        .map_err(|e| Error::InvalidParameter(format!("cannot sample jump count: {e}")))?;
    let count = poisson.sample(rng) as usize;
    let mut times: Vec<f64> = (0..count).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
    times.sort_by(f64::total_cmp);
    // Ties have probability zero but are possible in floating point; nudge them apart.
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1].next_up();
        }
    }
    if let Some(&last) = times.last() {
        if last > horizon {
            return Err(Error::InvalidParameter("jump times collided at the horizon".into()));
        }
    }
    let sizes = (0..count).map(|_| levy.sample_jump(rng)).collect::<Result<Vec<_>>>()?;
    PathRecord::new(horizon, Point::from_slice(start), Point::from_slice(drift), times, sizes)
}

/// Per-path summary for offline analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub path: usize,
    pub jumps: usize,
    pub first_jump: Option<f64>,
    pub last_jump: Option<f64>,
    /// First coordinate of `X_T`.
    pub terminal: f64,
    /// Largest jump norm, 0 without jumps.
    pub max_jump: f64,
}

impl PathSummary {
    pub fn of(index: usize, path: &PathRecord) -> Self {
        Self {
            path: index,
            jumps: path.jump_count(),
            first_jump: path.times().first().copied(),
            last_jump: path.times().last().copied(),
            terminal: path.terminal_position()[0],
            max_jump: path
                .sizes()
                .iter()
                .map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }
}
