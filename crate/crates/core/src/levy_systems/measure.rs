//! Finite Lévy measures: a jump density on a bounded window with an excluded
//! core `{|z| < core}` around the origin.

use std::sync::Arc;

use gauss_quad::GaussLegendre;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc_stats::NeumaierSum;
use crate::space_measure::{sample_sigma_point, DensityCatalog, IntensitySpec, Point, PointMask, Window};

/// Gauss–Legendre nodes and weights on `[-1, 1]`; a single midpoint node for `n = 1`.
pub(crate) fn legendre_pairs(n: usize) -> Result<Vec<(f64, f64)>> {
    match n {
        0 => Err(Error::InvalidParameter("Gauss-Legendre rule needs at least one node".into())),
        1 => Ok(vec![(0.0, 2.0)]),
        _ => {
            let mut pairs = GaussLegendre::new(n)
                .map_err(|e| Error::InvalidParameter(format!("Gauss-Legendre rule: {e}")))?
                .into_node_weight_pairs();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(pairs)
        }
    }
}

/// Weighted jump-size nodes for integrals against ν.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl JumpRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        let mut s = NeumaierSum::default();
        for w in &self.weights {
            s.add(*w);
        }
        s.value()
    }
}

/// Declarative description of a Lévy measure, as found in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyMeasureConfig {
    pub window: Window,
    pub density: DensityCatalog,
    /// Jumps with Euclidean norm below `core` are excluded.
    #[serde(default)]
    pub core: f64,
}

/// A finite Lévy measure `ν` on `ℝᵈ`.
///
/// `ν` is the density of `base` restricted to `{|z| ≥ core}`. Since the
/// density is bounded, `ν({0}) = 0` even when `core = 0`.
#[derive(Debug, Clone)]
pub struct LevyMeasureSpec {
    base: IntensitySpec,
    restricted: IntensitySpec,
    core: f64,
    mass: f64,
}

const MASS_NODES: usize = 48;

impl LevyMeasureSpec {
    pub fn new(base: IntensitySpec, core: f64) -> Result<Self> {
        if !(core.is_finite() && core >= 0.0) {
            return Err(Error::InvalidIntensity(format!("core radius must be finite and >= 0, got {core}")));
        }
        let mask: PointMask =
            Arc::new(move |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>() >= core * core);
        let mut spec = Self {
            restricted: base.clone(),
            base,
            core,
            mass: 0.0,
        };
        let mass = if spec.dim() == 1 {
            spec.interval_mass(f64::NEG_INFINITY, f64::INFINITY)?
        } else {
            spec.fine_rule()?.total_weight()
        };
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "Lévy measure must have finite positive mass, got {mass}"
            )));
        }
        spec.restricted = spec.base.masked(mask, mass)?;
        spec.mass = mass;
        Ok(spec)
    }

    pub fn from_config(config: &LevyMeasureConfig) -> Result<Self> {
        let base = IntensitySpec::from_catalog(config.window.clone(), config.density.clone())?;
        Self::new(base, config.core)
    }

    /// Constant density on `[lo, hi]ᵈ` minus the core.
    pub fn uniform(dim: usize, lo: f64, hi: f64, density: f64, core: f64) -> Result<Self> {
        let window = Window::new(vec![lo; dim], vec![hi; dim])?;
        let base = IntensitySpec::from_catalog(window, DensityCatalog::Constant { value: density })?;
        Self::new(base, core)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn window(&self) -> &Window {
        self.base.window()
    }

    pub fn core(&self) -> f64 {
        self.core
    }

    /// `|ν| = ν(ℝᵈ)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn catalog(&self) -> Option<&DensityCatalog> {
        self.base.catalog()
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.restricted.density(z)
    }

    /// Draws one jump from `ν / |ν|`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        sample_sigma_point(&self.restricted, rng)
    }

    fn axis_breaks(&self, lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
        let w = self.window();
        let (a, b) = (lo.max(w.lo()[0]), hi.min(w.hi()[0]));
        if a >= b {
            return Vec::new();
        }
        let mut breaks = vec![a, b];
        let mut push = |x: f64| {
            if x > a && x < b {
                breaks.push(x);
            }
        };
        if self.core > 0.0 {
            push(-self.core);
            push(self.core);
        }
        if let Some(DensityCatalog::TabulatedGrid { cells, .. }) = self.catalog() {
            let n = cells[0];
            for i in 1..n {
                push(w.lo()[0] + (w.hi()[0] - w.lo()[0]) * i as f64 / n as f64);
            }
        }
        for &x in extra {
            push(x);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }

    /// Pieces of `[lo, hi] ∩ window` outside the core, split at the density's
    /// own breakpoints and at `extra` (one dimension only).
    fn pieces(&self, lo: f64, hi: f64, extra: &[f64]) -> Vec<(f64, f64)> {
        let breaks = self.axis_breaks(lo, hi, extra);
        breaks
            .windows(2)
            .filter(|p| p[1] > p[0])
            .filter(|p| {
                let mid = 0.5 * (p[0] + p[1]);
                mid.abs() >= self.core
            })
            .map(|p| (p[0], p[1]))
            .collect()
    }

    /// `ν([lo, hi])` in one dimension, by Gauss–Legendre on smooth pieces.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter("interval mass is only defined for d = 1".into()));
        }
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Ok(0.0);
        }
        let pairs = legendre_pairs(MASS_NODES)?;
        let mut total = NeumaierSum::default();
        for (a, b) in self.pieces(lo, hi, &[]) {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for &(t, w) in &pairs {
                total.add(w * half * self.base.density(&[mid + half * t]));
            }
        }
        Ok(total.value())
    }

    /// `ν({|z| > a})`.
    pub fn tail_mass(&self, a: f64) -> Result<f64> {
        if self.dim() == 1 {
            let a = a.max(0.0);
            Ok(self.interval_mass(a, f64::INFINITY)? + self.interval_mass(f64::NEG_INFINITY, -a)?)
        } else {
            let rule = self.fine_rule()?;
            let mut s = NeumaierSum::default();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                if p.iter().map(|v| v * v).sum::<f64>().sqrt() > a {
                    s.add(*w);
                }
            }
            Ok(s.value())
        }
    }

    /// Node rule for `∫ · ν(dz)`.
    ///
    /// In one dimension: `nodes` Gauss–Legendre points on every piece between
    /// the core edges, density breakpoints and the supplied `breaks`. In higher
    /// dimensions: a tensor midpoint rule with `nodes` points per axis, the
    /// core removed by masking.
    pub fn jump_rule(&self, nodes: usize, breaks: &[f64]) -> Result<JumpRule> {
        if nodes == 0 {
            return Err(Error::InvalidParameter("jump rule needs at least one node".into()));
        }
        if self.dim() == 1 {
            let pairs = legendre_pairs(nodes)?;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (a, b) in self.pieces(f64::NEG_INFINITY, f64::INFINITY, breaks) {
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(t, w) in &pairs {
                    let z = mid + half * t;
                    points.push(Point::from_slice(&[z]));
                    weights.push(w * half * self.base.density(&[z]));
                }
            }
            Ok(JumpRule { points, weights })
        } else {
            self.midpoint_rule(nodes)
        }
    }

    fn midpoint_rule(&self, per_axis: usize) -> Result<JumpRule> {
        let d = self.dim();
        let w = self.window();
        let total = (per_axis as u128).pow(d as u32);
        if total > 50_000_000 {
            return Err(Error::QuadratureCap {
                evaluations: total,
                cap: 50_000_000,
            });
        }
        let cell: f64 = (0..d).map(|a| (w.hi()[a] - w.lo()[a]) / per_axis as f64).product();
        let mut points = Vec::with_capacity(total as usize);
        let mut weights = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; d];
        loop {
            let p: Point = (0..d)
                .map(|a| w.lo()[a] + (w.hi()[a] - w.lo()[a]) * (idx[a] as f64 + 0.5) / per_axis as f64)
                .collect();
            let r2: f64 = p.iter().map(|v| v * v).sum();
            if r2 >= self.core * self.core {
                let rho = self.base.density(&p);
                if rho != 0.0 {
                    weights.push(rho * cell);
                    points.push(p);
                }
            }
            let mut a = 0;
            loop {
                if a == d {
                    return Ok(JumpRule { points, weights });
                }
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    fn fine_rule(&self) -> Result<JumpRule> {
        let per_axis = match self.dim() {
            1 => 4096,
            2 => 512,
            3 => 96,
            _ => 16,
        };
        self.midpoint_rule(per_axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_masses_are_exact() {
        let nu = LevyMeasureSpec::uniform(1, -1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((nu.mass() - 2.0).abs() < 1e-14);
        assert!((nu.tail_mass(0.25).unwrap() - 1.5).abs() < 1e-14);
        let cored = LevyMeasureSpec::uniform(1, -2.0, 2.0, 0.5, 0.05).unwrap();
        assert!((cored.mass() - 0.5 * 3.9).abs() < 1e-14);
        assert!((cored.interval_mass(-0.5, 0.5).unwrap() - 0.45).abs() < 1e-14);
        assert_eq!(cored.density(&[0.01]), 0.0);
    }

    #[test]
    fn jump_rule_integrates_polynomials() {
        let nu = LevyMeasureSpec::uniform(1, -1.0, 2.0, 1.0, 0.1).unwrap();
        let rule = nu.jump_rule(6, &[0.5]).unwrap();
        let second: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        let exact = (8.0 + 1.0) / 3.0 - 2.0 * 0.001 / 3.0;
        assert!((second - exact).abs() < 1e-13);
        assert!((rule.total_weight() - nu.mass()).abs() < 1e-13);
    }

    #[test]
    fn tabulated_density_is_split_at_cells() {
        let base = IntensitySpec::from_catalog(
            Window::interval(-1.0, 1.0).unwrap(),
            DensityCatalog::TabulatedGrid {
                cells: vec![4],
                values: vec![1.0, 2.0, 3.0, 4.0],
            },
        )
        .unwrap();
        let nu = LevyMeasureSpec::new(base, 0.0).unwrap();
        assert!((nu.mass() - 5.0).abs() < 1e-13);
        assert!((nu.interval_mass(-0.75, 0.25).unwrap() - (0.25 + 1.0 + 0.75)).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_core_and_empty_measure() {
        assert!(LevyMeasureSpec::uniform(1, -1.0, 1.0, 1.0, -0.1).is_err());
        assert!(LevyMeasureSpec::uniform(1, -1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn two_dimensional_mass_removes_the_core() {
        let nu = LevyMeasureSpec::uniform(2, -1.0, 1.0, 1.0, 0.5).unwrap();
        let exact = 4.0 - std::f64::consts::PI * 0.25;
        assert!((nu.mass() - exact).abs() < 2e-3);
    }
}
