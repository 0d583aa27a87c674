//! Poisson configurations, processes evaluated on them, and pathwise mixed
//! multiple integrals in which every coordinate integrates against either the
//! configuration (`ε = 1`) or the intensity (`ε = 0`).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space_measure::{for_each_tuple, sample_sigma_point, tuple_count, IntensitySpec, Point, QuadratureSpec};

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// A finite set of distinct points kept in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Configuration {
    points: Vec<Point>,
}

impl Configuration {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a configuration from distinct points (order irrelevant).
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        points.sort_by(|a, b| lex_cmp(a, b));
        if let Some(w) = points.windows(2).find(|w| lex_cmp(&w[0], &w[1]) == Ordering::Equal) {
            return Err(Error::InvalidConfiguration(format!("duplicate point {:?}", w[0].as_slice())));
        }
        Ok(Self { points })
    }

    /// Convenience constructor for one-dimensional configurations.
    pub fn from_reals(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Point::from_slice(&[x])).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.points.binary_search_by(|q| lex_cmp(q, p)).is_ok()
    }

    /// Number of atoms in the closed box `[lo, hi]`.
    pub fn count_in(&self, lo: &[f64], hi: &[f64]) -> usize {
        self.points
            .iter()
            .filter(|p| p.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a <= x && x <= b))
            .count()
    }

    /// The set union `ω ∪ {extra}`; points already present are not repeated.
    pub fn augmented(&self, extra: &[Point]) -> Self {
        if extra.is_empty() {
            return self.clone();
        }
        let mut points = self.points.clone();
        for p in extra {
            if let Err(pos) = points.binary_search_by(|q| lex_cmp(q, p)) {
                points.insert(pos, p.clone());
            }
        }
        Self { points }
    }
}

pub type ProcessFn = Arc<dyn Fn(&[Point], &Configuration) -> f64 + Send + Sync>;

/// Named processes selectable from configuration files. `off_diagonal`
/// multiplies the process by the indicator that all arguments are distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessCatalog {
    /// `f ≡ value`
    Const {
        value: f64,
        arity: usize,
        #[serde(default)]
        off_diagonal: bool,
    },
    /// `f(x) = ∏ (shift + x_i[0])^{e_i}`
    CoordinateProduct {
        exponents: Vec<f64>,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        off_diagonal: bool,
    },
    /// `f(x₁, x₂) = 1{x₁ = x₂}`
    DiagIndicator,
    /// `f(x; ω) = ∏ (shift + x_i[0])^{e_i} · ω(B)` with `B = [lo, hi]`
    /// (the whole space when the bounds are omitted).
    CountWeighted {
        exponents: Vec<f64>,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        lo: Option<Vec<f64>>,
        #[serde(default)]
        hi: Option<Vec<f64>>,
        #[serde(default)]
        off_diagonal: bool,
    },
    /// `f(ω) = exp(-θ |ω|)`
    ExpCount { theta: f64 },
}

impl ProcessCatalog {
    pub fn arity(&self) -> usize {
        match self {
            Self::Const { arity, .. } => *arity,
            Self::CoordinateProduct { exponents, .. } | Self::CountWeighted { exponents, .. } => exponents.len(),
            Self::DiagIndicator => 2,
            Self::ExpCount { .. } => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Const { .. } => "const",
            Self::CoordinateProduct { .. } => "coordinate-product",
            Self::DiagIndicator => "diag-indicator",
            Self::CountWeighted { .. } => "count-weighted",
            Self::ExpCount { .. } => "exp-count",
        }
    }
}

fn all_distinct(x: &[Point]) -> bool {
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if x[i] == x[j] {
                return false;
            }
        }
    }
    true
}

fn coordinate_product(exponents: &[f64], shift: f64, x: &[Point]) -> f64 {
    exponents
        .iter()
        .zip(x)
        .map(|(e, p)| if *e == 0.0 { 1.0 } else { (shift + p[0]).powf(*e) })
        .product()
}

/// A k-process `f(x₁, …, x_k; ω)`.
#[derive(Clone)]
pub struct ProcessSpec {
    arity: usize,
    evaluator: ProcessFn,
    vanishes_on_diagonals: bool,
    catalog: Option<ProcessCatalog>,
    label: String,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .field("vanishes_on_diagonals", &self.vanishes_on_diagonals)
            .field("catalog", &self.catalog)
            .finish()
    }
}

impl ProcessSpec {
    /// Wraps a user evaluator. A process of arity ≤ 1 has no diagonals, so the
    /// flag is forced on for it.
    pub fn custom<F>(label: impl Into<String>, arity: usize, vanishes_on_diagonals: bool, f: F) -> Self
    where
        F: Fn(&[Point], &Configuration) -> f64 + Send + Sync + 'static,
    {
        Self {
            arity,
            evaluator: Arc::new(f),
            vanishes_on_diagonals: vanishes_on_diagonals || arity <= 1,
            catalog: None,
            label: label.into(),
        }
    }

    pub fn from_catalog(catalog: ProcessCatalog) -> Result<Self> {
        let arity = catalog.arity();
        let (f, off_diagonal): (ProcessFn, bool) = match catalog.clone() {
            ProcessCatalog::Const {
                value, off_diagonal, ..
            } => {
                check_nonnegative("const value", value)?;
                (Arc::new(move |_: &[Point], _: &Configuration| value), off_diagonal)
            }
            ProcessCatalog::CoordinateProduct {
                exponents,
                shift,
                off_diagonal,
            } => (
                Arc::new(move |x: &[Point], _: &Configuration| coordinate_product(&exponents, shift, x)),
                off_diagonal,
            ),
            ProcessCatalog::DiagIndicator => (
                Arc::new(|x: &[Point], _: &Configuration| if x[0] == x[1] { 1.0 } else { 0.0 }),
                false,
            ),
            ProcessCatalog::CountWeighted {
                exponents,
                shift,
                lo,
                hi,
                off_diagonal,
            } => {
                let bounds = match (lo, hi) {
                    (Some(lo), Some(hi)) => {
                        if lo.len() != hi.len() {
                            return Err(Error::InvalidParameter(
                                "count-weighted box bounds differ in length".into(),
                            ));
                        }
                        Some((lo, hi))
                    }
                    (None, None) => None,
                    _ => {
                        return Err(Error::InvalidParameter(
                            "count-weighted needs both lo and hi, or neither".into(),
                        ))
                    }
                };
                (
                    Arc::new(move |x: &[Point], w: &Configuration| {
                        let count = match &bounds {
                            Some((lo, hi)) => w.count_in(lo, hi),
                            None => w.len(),
                        };
                        coordinate_product(&exponents, shift, x) * count as f64
                    }),
                    off_diagonal,
                )
            }
            ProcessCatalog::ExpCount { theta } => {
                check_nonnegative("theta", theta)?;
                (
                    Arc::new(move |_: &[Point], w: &Configuration| (-theta * w.len() as f64).exp()),
                    false,
                )
            }
        };
        let evaluator: ProcessFn = if off_diagonal && arity >= 2 {
            Arc::new(move |x: &[Point], w: &Configuration| if all_distinct(x) { f(x, w) } else { 0.0 })
        } else {
            f
        };
        Ok(Self {
            arity,
            evaluator,
            vanishes_on_diagonals: off_diagonal || arity <= 1,
            label: catalog.name().to_string(),
            catalog: Some(catalog),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn vanishes_on_diagonals(&self) -> bool {
        self.vanishes_on_diagonals
    }

    pub fn catalog(&self) -> Option<&ProcessCatalog> {
        self.catalog.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn evaluate(&self, x: &[Point], omega: &Configuration) -> f64 {
        debug_assert_eq!(x.len(), self.arity);
        (self.evaluator)(x, omega)
    }

    /// Spot-tests the diagonal-vanishing flag: for random arguments with two
    /// coordinates forced equal, the process must return 0.
    pub fn spot_check_diagonals<R: Rng + ?Sized>(
        &self,
        intensity: &IntensitySpec,
        trials: usize,
        rng: &mut R,
    ) -> Result<()> {
        if !self.vanishes_on_diagonals || self.arity < 2 {
            return Ok(());
        }
        for _ in 0..trials {
            let omega = sample_configuration(intensity, rng)?;
            let mut x: Vec<Point> = (0..self.arity)
                .map(|_| sample_sigma_point(intensity, rng))
                .collect::<Result<_>>()?;
            let i = rng.random_range(0..self.arity);
            let mut j = rng.random_range(0..self.arity - 1);
            if j >= i {
                j += 1;
            }
            x[j] = x[i].clone();
            let v = self.evaluate(&x, &omega);
            if v != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "process '{}' is flagged diagonal-vanishing but returned {v} with arguments {i} and {j} equal",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

fn check_nonnegative(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be finite and nonnegative, got {v}")))
    }
}

/// Integration selector `ε ∈ {0,1}ⁿ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpsilonVector(Vec<bool>);

impl EpsilonVector {
    pub fn new(entries: Vec<bool>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidEpsilon("length must be at least 1".into()));
        }
        Ok(Self(entries))
    }

    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![true; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn entries(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|e| **e).count()
    }
}

impl fmt::Display for EpsilonVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            f.write_str(if *e { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for EpsilonVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidEpsilon(format!("unexpected character '{other}' in \"{s}\""))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

impl Serialize for EpsilonVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EpsilonVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Draws ω from the Poisson law with intensity σ.
pub fn sample_configuration<R: Rng + ?Sized>(intensity: &IntensitySpec, rng: &mut R) -> Result<Configuration> {
    let poisson = Poisson::new(intensity.mass())
        .map_err(|e| Error::InvalidIntensity(format!("cannot sample Poisson count: {e}")))?;
    let n = poisson.sample(rng) as usize;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(sample_sigma_point(intensity, rng)?);
    }
    points.sort_by(|a, b| lex_cmp(a, b));
    // Coincident draws have probability zero; redraw if one ever happens.
    let mut i = 1;
    while i < points.len() {
        if lex_cmp(&points[i - 1], &points[i]) == Ordering::Equal {
            points[i] = sample_sigma_point(intensity, rng)?;
            points.sort_by(|a, b| lex_cmp(a, b));
            i = 1;
        } else {
            i += 1;
        }
    }
    Ok(Configuration { points })
}

/// `∫ f(x; ω) ω(dx)` as the finite sum over atoms.
pub fn point_integral(f: &ProcessSpec, omega: &Configuration) -> Result<f64> {
    if f.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            got: f.arity(),
        });
    }
    let mut x = [Point::new()];
    let mut total = 0.0;
    for p in omega.points() {
        x[0].clone_from(p);
        total += f.evaluate(&x, omega);
    }
    Ok(total)
}

/// `∫ f(x; ω) ω_{ε₁}(dx₁)⋯ω_{ε_n}(dx_n)` for one configuration. Coordinates
/// with `ε = 1` run over all atoms (repeats included), coordinates with
/// `ε = 0` use the tensor rule `quad` for σ.
pub fn mixed_multiple_integral(
    f: &ProcessSpec,
    omega: &Configuration,
    epsilon: &EpsilonVector,
    intensity: &IntensitySpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let n = f.arity();
    if epsilon.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: epsilon.len(),
        });
    }
    let atom_coords: Vec<usize> = (0..n).filter(|&i| epsilon.get(i)).collect();
    let sigma_coords: Vec<usize> = (0..n).filter(|&i| !epsilon.get(i)).collect();
    let atoms = omega.points();
    let atom_tuples = (atoms.len() as u128).pow(atom_coords.len() as u32);
    let evaluations = tuple_count(intensity, quad, sigma_coords.len()).saturating_mul(atom_tuples);
    if evaluations > quad.max_evaluations as u128 {
        return Err(Error::QuadratureCap {
            evaluations,
            cap: quad.max_evaluations,
        });
    }
    if atom_tuples == 0 {
        return Ok(0.0);
    }
    let mut x: Vec<Point> = vec![Point::new(); n];
    let mut total = 0.0;
    let mut idx = vec![0usize; atom_coords.len()];
    for_each_tuple(intensity, quad, sigma_coords.len(), |y, w| {
        if w == 0.0 {
            return;
        }
        for (slot, &c) in sigma_coords.iter().enumerate() {
            x[c].clone_from(&y[slot]);
        }
        idx.iter_mut().for_each(|i| *i = 0);
        for &c in &atom_coords {
            x[c].clone_from(&atoms[0]);
        }
        let mut inner = 0.0;
        'atoms: loop {
            inner += f.evaluate(&x, omega);
            let mut j = 0;
            loop {
                if j == atom_coords.len() {
                    break 'atoms;
                }
                idx[j] += 1;
                if idx[j] < atoms.len() {
                    x[atom_coords[j]].clone_from(&atoms[idx[j]]);
                    break;
                }
                idx[j] = 0;
                x[atom_coords[j]].clone_from(&atoms[0]);
                j += 1;
            }
        }
        total += w * inner;
    })?;
    Ok(total)
}
