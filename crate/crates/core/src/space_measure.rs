//! Observation window, intensity measure and deterministic integration against it.
//!
//! The intensity is always a density over a bounded box. Integrals against
//! tensor powers of the intensity use either a tensor midpoint rule or a Halton
//! rule. In the tensor rule every coordinate gets its own node count, chosen so
//! that no two coordinates ever share a node: the counts have pairwise distinct
//! 2-adic valuations, and midpoints `(2i+1)/2p` and `(2j+1)/2q` can only
//! coincide when `p/gcd(p,q)` and `q/gcd(p,q)` are both odd. Diagonal sets then
//! carry zero weight, as they do for a non-atomic measure.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of the state space.
pub type Point = SmallVec<[f64; 3]>;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Membership test restricting an intensity to a subset of its window.
pub(crate) type PointMask = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::InvalidWindow(format!(
                "{} lower bounds but {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (axis, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidWindow(format!(
                    "axis {axis}: need lo < hi, got [{a}, {b}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Strict interior membership.
    pub fn contains_open(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *a < *x && *x < *b)
    }

    /// Volume of the intersection with `other`.
    pub fn overlap_volume(&self, other: &Window) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((a, b), (c, d))| (b.min(*d) - a.max(*c)).max(0.0))
            .product()
    }

    fn map_unit(&self, u: &[f64]) -> Point {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }
}

/// Named densities selectable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityCatalog {
    Constant {
        value: f64,
    },
    /// `intercept + slope . x`
    Linear {
        intercept: f64,
        slope: Vec<f64>,
    },
    /// `base + height * exp(-|x - center|^2 / (2 width^2))`
    GaussianBump {
        #[serde(default)]
        base: f64,
        height: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// Piecewise constant on a regular grid; `values` is row-major with the
    /// last axis varying fastest.
    TabulatedGrid {
        cells: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Intensity measure: a density over a window, with its total mass and a bound
/// used for rejection sampling.
#[derive(Clone)]
pub struct IntensitySpec {
    window: Window,
    density: DensityFn,
    catalog: Option<DensityCatalog>,
    sup_bound: f64,
    mass: f64,
}

impl fmt::Debug for IntensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensitySpec")
            .field("window", &self.window)
            .field("catalog", &self.catalog)
            .field("sup_bound", &self.sup_bound)
            .field("mass", &self.mass)
            .finish()
    }
}

impl IntensitySpec {
    /// Uniform intensity with total mass `mass` on `window`.
    pub fn uniform(window: Window, mass: f64) -> Result<Self> {
        let value = mass / window.volume();
        Self::from_catalog(window, DensityCatalog::Constant { value })
    }

    pub fn from_catalog(window: Window, catalog: DensityCatalog) -> Result<Self> {
        let d = window.dim();
        let vol = window.volume();
        let check_len = |what: &str, len: usize| {
            if len != d {
                Err(Error::InvalidIntensity(format!(
                    "{what} has length {len}, window dimension is {d}"
                )))
            } else {
                Ok(())
            }
        };
        let (density, sup_bound, mass): (DensityFn, f64, Option<f64>) = match &catalog {
            DensityCatalog::Constant { value } => {
                let c = *value;
                (Arc::new(move |_: &[f64]| c), c, Some(c * vol))
            }
            DensityCatalog::Linear { intercept, slope } => {
                check_len("slope", slope.len())?;
                let a = *intercept;
                let s = slope.clone();
                let mut sup = a;
                let mut mean_value = a;
                for (i, si) in s.iter().enumerate() {
                    sup += (si * window.lo[i]).max(si * window.hi[i]);
                    mean_value += si * 0.5 * (window.lo[i] + window.hi[i]);
                }
                let mut inf = a;
                for (i, si) in s.iter().enumerate() {
                    inf += (si * window.lo[i]).min(si * window.hi[i]);
                }
                if inf < 0.0 {
                    return Err(Error::InvalidIntensity(
                        "linear density is negative somewhere on the window".into(),
                    ));
                }
                (
                    Arc::new(move |x: &[f64]| a + s.iter().zip(x).map(|(si, xi)| si * xi).sum::<f64>()),
                    sup,
                    Some(mean_value * vol),
                )
            }
            DensityCatalog::GaussianBump {
                base,
                height,
                center,
                width,
            } => {
                check_len("center", center.len())?;
                if *width <= 0.0 || *height < 0.0 || *base < 0.0 {
                    return Err(Error::InvalidIntensity(
                        "gaussian bump needs width > 0, height >= 0, base >= 0".into(),
                    ));
                }
                let (b, h, c, w) = (*base, *height, center.clone(), *width);
                (
                    Arc::new(move |x: &[f64]| {
                        let r2: f64 = x.iter().zip(&c).map(|(xi, ci)| (xi - ci).powi(2)).sum();
                        b + h * (-r2 / (2.0 * w * w)).exp()
                    }),
                    b + h,
                    None,
                )
            }
            DensityCatalog::TabulatedGrid { cells, values } => {
                check_len("cells", cells.len())?;
                let total: usize = cells.iter().product();
                if total == 0 || values.len() != total {
                    return Err(Error::InvalidIntensity(format!(
                        "grid has {total} cells but {} values",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidIntensity(
                        "tabulated values must be finite and nonnegative".into(),
                    ));
                }
                let sup = values.iter().cloned().fold(0.0, f64::max);
                let mass = values.iter().sum::<f64>() * vol / total as f64;
                let (cells, values, win) = (cells.clone(), values.clone(), window.clone());
                (
                    Arc::new(move |x: &[f64]| {
                        let mut index = 0usize;
                        for (axis, &n) in cells.iter().enumerate() {
                            let t = (x[axis] - win.lo[axis]) / (win.hi[axis] - win.lo[axis]);
                            let cell = ((t * n as f64).floor() as isize).clamp(0, n as isize - 1);
                            index = index * n + cell as usize;
                        }
                        values[index]
                    }),
                    sup,
                    Some(mass),
                )
            }
        };
        let mut spec = Self {
            window,
            density,
            catalog: Some(catalog),
            sup_bound,
            mass: 0.0,
        };
        spec.mass = match mass {
            Some(m) => m,
            None => sigma_mass(&spec, &QuadratureSpec::tensor(fine_nodes(d)))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// User-supplied density. Without `sup_bound` the rejection bound is taken
    /// as 1.25 times the maximum over a grid; without `mass_hint` the mass is
    /// computed by quadrature.
    pub fn custom(
        window: Window,
        density: DensityFn,
        sup_bound: Option<f64>,
        mass_hint: Option<f64>,
    ) -> Result<Self> {
        let d = window.dim();
        let mut spec = Self {
            window,
            density,
            catalog: None,
            sup_bound: sup_bound.unwrap_or(f64::INFINITY),
            mass: 0.0,
        };
        if sup_bound.is_none() {
            let rule = CoordinateRule::midpoint(&spec, fine_nodes(d));
            let mut max = 0.0f64;
            for p in &rule.points {
                max = max.max(spec.density(p));
            }
            spec.sup_bound = 1.25 * max;
        }
        spec.mass = match mass_hint {
            Some(m) => m,
            None => sigma_mass(&spec, &QuadratureSpec::tensor(fine_nodes(d)))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "total mass must be finite and positive, got {}",
                self.mass
            )));
        }
        if !(self.sup_bound.is_finite() && self.sup_bound > 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "density bound must be finite and positive, got {}",
                self.sup_bound
            )));
        }
        let rule = CoordinateRule::midpoint(self, 8);
        for p in &rule.points {
            let v = self.density(p);
            if !v.is_finite() {
                return Err(Error::NonFiniteDensity {
                    point: p.to_vec(),
                    value: v,
                });
            }
            if v < 0.0 {
                return Err(Error::InvalidIntensity(format!("negative density {v} at {p:?}")));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn density(&self, p: &[f64]) -> f64 {
        (self.density)(p)
    }

    pub fn density_fn(&self) -> &DensityFn {
        &self.density
    }

    pub fn catalog(&self) -> Option<&DensityCatalog> {
        self.catalog.as_ref()
    }

    /// Total mass of the intensity on the window.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Multiplies the density by `mask` (a 0/1 indicator), keeping the window.
    /// The caller supplies the new mass.
    pub(crate) fn masked(&self, mask: PointMask, mass: f64) -> Result<Self> {
        let inner = self.density.clone();
        let spec = Self {
            window: self.window.clone(),
            density: Arc::new(move |x: &[f64]| if mask(x) { inner(x) } else { 0.0 }),
            catalog: self.catalog.clone(),
            sup_bound: self.sup_bound,
            mass,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn fine_nodes(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        3 => 48,
        _ => 12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuadratureScheme {
    TensorMidpoint { points_per_axis: usize },
    QuasiRandom { total_points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    #[serde(default = "default_cap")]
    pub max_evaluations: u64,
}

fn default_cap() -> u64 {
    50_000_000
}

impl QuadratureSpec {
    pub fn tensor(points_per_axis: usize) -> Self {
        Self {
            scheme: QuadratureScheme::TensorMidpoint { points_per_axis },
            max_evaluations: default_cap(),
        }
    }

    pub fn quasi_random(total_points: usize) -> Self {
        Self {
            scheme: QuadratureScheme::QuasiRandom { total_points },
            max_evaluations: default_cap(),
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.max_evaluations = cap;
        self
    }

    /// Default rule for a `k`-fold integral over a `dim`-dimensional window:
    /// tensor midpoint with 64/32/16 nodes per axis for d = 1/2/3, Halton with
    /// 2^16 points once `k * d > 4`.
    pub fn default_for(k: usize, dim: usize) -> Self {
        if k * dim > 4 {
            Self::quasi_random(1 << 16)
        } else {
            Self::tensor(match dim {
                1 => 64,
                2 => 32,
                3 => 16,
                _ => 8,
            })
        }
    }

    fn validate(&self) -> Result<()> {
        let n = match self.scheme {
            QuadratureScheme::TensorMidpoint { points_per_axis } => points_per_axis,
            QuadratureScheme::QuasiRandom { total_points } => total_points,
        };
        if n == 0 {
            return Err(Error::InvalidParameter("quadrature node count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weighted nodes of a one-coordinate rule for the intensity.
#[derive(Debug, Clone)]
pub struct CoordinateRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl CoordinateRule {
    /// Midpoint rule with `per_axis` cells on every axis; weights are density
    /// times cell volume. Zero-weight nodes are kept so node positions do not
    /// depend on the density.
    pub fn midpoint(intensity: &IntensitySpec, per_axis: usize) -> Self {
        let w = intensity.window();
        let d = w.dim();
        let total = per_axis.pow(d as u32);
        let cell_volume = w.volume() / total as f64;
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let p: Point = (0..d)
                .map(|a| w.lo[a] + (idx[a] as f64 + 0.5) * (w.hi[a] - w.lo[a]) / per_axis as f64)
                .collect();
            weights.push(intensity.density(&p) * cell_volume);
            points.push(p);
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_finite(&self) -> Result<()> {
        for (p, w) in self.points.iter().zip(&self.weights) {
            if !w.is_finite() {
                return Err(Error::NonFiniteDensity {
                    point: p.to_vec(),
                    value: *w,
                });
            }
        }
        Ok(())
    }
}

fn two_adic_valuation(n: usize) -> u32 {
    n.trailing_zeros()
}

/// Per-coordinate node counts: the first is `base`, later ones are the next
/// integers whose 2-adic valuations are not yet used.
pub fn node_counts(base: usize, k: usize) -> Vec<usize> {
    let mut counts = Vec::with_capacity(k);
    let mut used = Vec::new();
    let mut candidate = base;
    while counts.len() < k {
        let v = two_adic_valuation(candidate);
        if !used.contains(&v) {
            used.push(v);
            counts.push(candidate);
        }
        candidate += 1;
    }
    counts
}

const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % b) as f64 * factor;
        index /= b;
        factor *= inv;
    }
    value
}

/// Visits every node tuple of the `k`-fold rule with its weight, coordinate 0
/// varying fastest.
pub fn for_each_tuple<F>(intensity: &IntensitySpec, quad: &QuadratureSpec, k: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[Point], f64),
{
    quad.validate()?;
    if k == 0 {
        visit(&[], 1.0);
        return Ok(());
    }
    let d = intensity.dim();
    match quad.scheme {
        QuadratureScheme::TensorMidpoint { points_per_axis } => {
            let rules: Vec<CoordinateRule> = node_counts(points_per_axis, k)
                .into_iter()
                .map(|n| CoordinateRule::midpoint(intensity, n))
                .collect();
            let evaluations: u128 = rules.iter().map(|r| r.len() as u128).product();
            if evaluations > quad.max_evaluations as u128 {
                return Err(Error::QuadratureCap {
                    evaluations,
                    cap: quad.max_evaluations,
                });
            }
            for r in &rules {
                r.check_finite()?;
            }
            let mut idx = vec![0usize; k];
            let mut tuple: Vec<Point> = rules.iter().map(|r| r.points[0].clone()).collect();
            loop {
                let mut w = 1.0;
                for (j, r) in rules.iter().enumerate() {
                    w *= r.weights[idx[j]];
                }
                visit(&tuple, w);
                let mut j = 0;
                loop {
                    if j == k {
                        return Ok(());
                    }
                    idx[j] += 1;
                    if idx[j] < rules[j].len() {
                        tuple[j].clone_from(&rules[j].points[idx[j]]);
                        break;
                    }
                    idx[j] = 0;
                    tuple[j].clone_from(&rules[j].points[0]);
                    j += 1;
                }
            }
        }
        QuadratureScheme::QuasiRandom { total_points } => {
            let dims = k * d;
            if dims > PRIMES.len() {
                return Err(Error::InvalidParameter(format!(
                    "Halton rule supports at most {} dimensions, need {dims}",
                    PRIMES.len()
                )));
            }
            if total_points as u128 > quad.max_evaluations as u128 {
                return Err(Error::QuadratureCap {
                    evaluations: total_points as u128,
                    cap: quad.max_evaluations,
                });
            }
            let w = intensity.window();
            let base_weight = w.volume().powi(k as i32) / total_points as f64;
            let mut unit = vec![0.0; d];
            let mut tuple: Vec<Point> = vec![Point::new(); k];
            for i in 1..=total_points as u64 {
                let mut weight = base_weight;
                for (j, slot) in tuple.iter_mut().enumerate() {
                    for (a, u) in unit.iter_mut().enumerate() {
                        *u = radical_inverse(i, PRIMES[j * d + a]);
                    }
                    *slot = w.map_unit(&unit);
                    let rho = intensity.density(slot);
                    if !rho.is_finite() {
                        return Err(Error::NonFiniteDensity {
                            point: slot.to_vec(),
                            value: rho,
                        });
                    }
                    weight *= rho;
                }
                visit(&tuple, weight);
            }
            Ok(())
        }
    }
}

/// Number of node tuples `for_each_tuple` would visit.
pub fn tuple_count(intensity: &IntensitySpec, quad: &QuadratureSpec, k: usize) -> u128 {
    if k == 0 {
        return 1;
    }
    match quad.scheme {
        QuadratureScheme::TensorMidpoint { points_per_axis } => node_counts(points_per_axis, k)
            .into_iter()
            .map(|n| (n as u128).pow(intensity.dim() as u32))
            .product(),
        QuadratureScheme::QuasiRandom { total_points } => total_points as u128,
    }
}

/// Quadrature approximation of the total mass.
pub fn sigma_mass(intensity: &IntensitySpec, quad: &QuadratureSpec) -> Result<f64> {
    let mut total = 0.0;
    for_each_tuple(intensity, quad, 1, |_, w| total += w)?;
    Ok(total)
}

/// Integral of `g` against the `k`-th tensor power of the intensity.
pub fn quadrature_integrate<G>(g: G, k: usize, intensity: &IntensitySpec, quad: &QuadratureSpec) -> Result<f64>
where
    G: Fn(&[Point]) -> f64,
{
    if k == 0 {
        return Err(Error::InvalidParameter("integral arity must be at least 1".into()));
    }
    let mut total = crate::mc_stats::NeumaierSum::default();
    for_each_tuple(intensity, quad, k, |y, w| {
        if w != 0.0 {
            total.add(w * g(y));
        }
    })?;
    Ok(total.value())
}

/// Draws a point with law `density / mass` by rejection from the window.
pub fn sample_sigma_point<R: Rng + ?Sized>(intensity: &IntensitySpec, rng: &mut R) -> Result<Point> {
    let w = intensity.window();
    let bound = intensity.sup_bound();
    const MAX_ATTEMPTS: usize = 10_000_000;
    for _ in 0..MAX_ATTEMPTS {
        let p: Point = (0..w.dim())
            .map(|a| w.lo[a] + rng.random::<f64>() * (w.hi[a] - w.lo[a]))
            .collect();
        let rho = intensity.density(&p);
        if !rho.is_finite() {
            return Err(Error::NonFiniteDensity {
                point: p.to_vec(),
                value: rho,
            });
        }
        if rho > bound {
            return Err(Error::DensityBoundExceeded {
                point: p.to_vec(),
                value: rho,
                bound,
            });
        }
        if rng.random::<f64>() * bound < rho {
            return Ok(p);
        }
    }
    Err(Error::InvalidIntensity(format!(
        "rejection sampler accepted nothing in {MAX_ATTEMPTS} proposals"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_stats::{aggregate, StreamFamily};
    use proptest::prelude::*;

    fn unit_uniform() -> IntensitySpec {
        IntensitySpec::uniform(Window::unit(1), 1.0).unwrap()
    }

    fn linear_unit() -> IntensitySpec {
        IntensitySpec::from_catalog(
            Window::unit(1),
            DensityCatalog::Linear {
                intercept: 0.0,
                slope: vec![1.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(vec![], vec![]).is_err());
        assert!(Window::new(vec![1.0], vec![0.0]).is_err());
        assert!(Window::new(vec![0.0, 0.0], vec![1.0]).is_err());
        let w = Window::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(w.volume(), 4.0);
        assert!(w.contains(&[2.0, 1.0]));
        assert!(!w.contains_open(&[2.0, 0.0]));
    }

    #[test]
    fn sigma_mass_examples() {
        for quad in [QuadratureSpec::tensor(7), QuadratureSpec::quasi_random(100)] {
            assert!((sigma_mass(&unit_uniform(), &quad).unwrap() - 1.0).abs() < 1e-12);
        }
        let two = IntensitySpec::from_catalog(Window::interval(0.0, 3.0).unwrap(), DensityCatalog::Constant { value: 2.0 })
            .unwrap();
        assert_eq!(two.mass(), 6.0);
        assert!((sigma_mass(&two, &QuadratureSpec::tensor(64)).unwrap() - 6.0).abs() < 1e-12);
        let m = sigma_mass(&linear_unit(), &QuadratureSpec::tensor(1000)).unwrap();
        assert!((m - 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_density_is_reported() {
        let spec = IntensitySpec::custom(
            Window::unit(1),
            Arc::new(|x: &[f64]| 1.0 / x[0]),
            Some(1e9),
            Some(1.0),
        );
        // midpoint nodes avoid 0 so construction succeeds
        let spec = spec.unwrap();
        let bad = IntensitySpec {
            density: Arc::new(|x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 1.0 }),
            ..spec
        };
        assert!(matches!(
            sigma_mass(&bad, &QuadratureSpec::tensor(4)),
            Err(Error::NonFiniteDensity { .. })
        ));
    }

    #[test]
    fn coordinate_rules_never_share_nodes() {
        for base in [1usize, 2, 7, 16, 64, 65, 1000] {
            let counts = node_counts(base, 5);
            assert_eq!(counts[0], base);
            for i in 0..counts.len() {
                for j in (i + 1)..counts.len() {
                    let (p, q) = (counts[i], counts[j]);
                    for a in 0..p {
                        for b in 0..q {
                            assert_ne!((2 * a + 1) * q, (2 * b + 1) * p, "counts {p} {q} collide");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_power_examples() {
        let s = unit_uniform();
        let q = QuadratureSpec::tensor(64);
        assert!((quadrature_integrate(|_| 1.0, 2, &s, &q).unwrap() - 1.0).abs() < 1e-12);
        let diag = quadrature_integrate(|y| if y[0] == y[1] { 1.0 } else { 0.0 }, 2, &s, &q).unwrap();
        assert_eq!(diag, 0.0);
        let prod = quadrature_integrate(|y| y[0][0] * y[1][0], 2, &s, &q).unwrap();
        assert!((prod - 0.25).abs() < 1e-4);
    }

    #[test]
    fn quadrature_cap_is_enforced() {
        let s = unit_uniform();
        let q = QuadratureSpec::tensor(64).with_cap(1000);
        assert!(matches!(
            quadrature_integrate(|_| 1.0, 2, &s, &q),
            Err(Error::QuadratureCap { .. })
        ));
        assert!(quadrature_integrate(|_| 1.0, 0, &s, &q).is_err());
    }

    #[test]
    fn halton_rule_integrates_smooth_functions() {
        let s = IntensitySpec::uniform(Window::unit(2), 1.0).unwrap();
        let v = quadrature_integrate(
            |y| y[0][0] * y[0][1] * y[1][0] * y[1][1],
            2,
            &s,
            &QuadratureSpec::quasi_random(1 << 14),
        )
        .unwrap();
        assert!((v - 1.0 / 16.0).abs() < 1e-3, "{v}");
    }

    fn sample_mean(spec: &IntensitySpec, n: u64, seed: u64) -> (f64, f64) {
        let fam = StreamFamily::new(seed, "sigma-point");
        let xs: Vec<f64> = (0..n)
            .map(|i| sample_sigma_point(spec, &mut fam.stream(i)).unwrap()[0])
            .collect();
        let e = aggregate(&xs).unwrap();
        (e.mean, e.std_error)
    }

    #[test]
    fn sampled_points_follow_normalized_density() {
        let (m, se) = sample_mean(&unit_uniform(), 100_000, 1);
        assert!((m - 0.5).abs() < 4.0 * se);
        let (m, se) = sample_mean(&linear_unit(), 100_000, 2);
        assert!((m - 2.0 / 3.0).abs() < 4.0 * se, "{m} {se}");
        // scaling the density leaves the law unchanged
        let scaled = IntensitySpec::uniform(Window::unit(1), 37.0).unwrap();
        let (a, _) = sample_mean(&scaled, 1000, 3);
        let (b, _) = sample_mean(&unit_uniform(), 1000, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn ks_test_for_linear_density() {
        let spec = linear_unit();
        let fam = StreamFamily::new(9, "ks");
        let n = 100_000u64;
        let mut xs: Vec<f64> = (0..n)
            .map(|i| sample_sigma_point(&spec, &mut fam.stream(i)).unwrap()[0])
            .collect();
        xs.sort_by(f64::total_cmp);
        let mut d = 0.0f64;
        for (i, x) in xs.iter().enumerate() {
            let cdf = x * x;
            d = d.max((cdf - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        // Kolmogorov critical value at significance 1e-3
        let critical = (-(1e-3f64 / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d < critical, "D = {d}, critical = {critical}");
    }

    #[test]
    fn density_bound_violation_is_an_error() {
        let spec = IntensitySpec::custom(Window::unit(1), Arc::new(|x: &[f64]| 10.0 * x[0]), Some(1.0), Some(5.0))
            .unwrap();
        let mut rng = StreamFamily::new(0, "bound").stream(0);
        let mut saw_error = false;
        for _ in 0..100 {
            if let Err(Error::DensityBoundExceeded { .. }) = sample_sigma_point(&spec, &mut rng) {
                saw_error = true;
                break;
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn tabulated_and_gaussian_catalogs() {
        let t = IntensitySpec::from_catalog(
            Window::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap(),
            DensityCatalog::TabulatedGrid {
                cells: vec![2, 1],
                values: vec![1.0, 3.0],
            },
        )
        .unwrap();
        assert_eq!(t.mass(), 4.0);
        assert_eq!(t.density(&[1.5, 0.5]), 3.0);
        let g = IntensitySpec::from_catalog(
            Window::interval(-10.0, 10.0).unwrap(),
            DensityCatalog::GaussianBump {
                base: 0.0,
                height: 1.0,
                center: vec![0.0],
                width: 1.0,
            },
        )
        .unwrap();
        assert!((g.mass() - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn mass_is_monotone_in_density(a in 0.0f64..5.0, b in 0.0f64..5.0, extra in 0.0f64..3.0) {
            let w = Window::unit(1);
            let low = IntensitySpec::from_catalog(w.clone(), DensityCatalog::Linear { intercept: a + 0.1, slope: vec![b] }).unwrap();
            let high = IntensitySpec::from_catalog(w, DensityCatalog::Linear { intercept: a + 0.1 + extra, slope: vec![b] }).unwrap();
            let q = QuadratureSpec::tensor(16);
            prop_assert!(sigma_mass(&high, &q).unwrap() >= sigma_mass(&low, &q).unwrap());
        }

        #[test]
        fn product_integrand_factorizes(p in 1.0f64..3.0, r in 1.0f64..3.0) {
            let s = IntensitySpec::from_catalog(Window::unit(1), DensityCatalog::Linear { intercept: 1.0, slope: vec![1.0] }).unwrap();
            let q = QuadratureSpec::tensor(32);
            let joint = quadrature_integrate(|y| y[0][0].powf(p) * y[1][0].powf(r), 2, &s, &q).unwrap();
            let one = |e: f64| quadrature_integrate(|y| y[0][0].powf(e), 1, &s, &QuadratureSpec::tensor(2048)).unwrap();
            prop_assert!((joint - one(p) * one(r)).abs() < 1e-3 * (1.0 + joint.abs()));
        }
    }
}
