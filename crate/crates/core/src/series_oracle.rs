//! Simulation-free evaluation of `E g(ω)` for a 0-process from the
//! exponential series of the Poisson law on a bounded window:
//!
//! `E g(ω) = e^{-σ(𝒳)} Σ_n (1/n!) ∫ g({y₁,…,y_n}) σⁿ(dy)`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configurations::{Configuration, ProcessSpec};
use crate::error::{Error, Result};
use crate::mc_stats::NeumaierSum;
use crate::space_measure::{for_each_tuple, sample_sigma_point, IntensitySpec, Point, QuadratureSpec};

pub type CoefficientFn = Arc<dyn Fn(&[Point]) -> f64 + Send + Sync>;

/// `g_(n)(y₁..y_n) = g({y₁..y_n})` together with the truncation order.
#[derive(Clone)]
pub struct SeriesSpec {
    /// `None` uses `⌈σ + 10√σ + 10⌉`.
    pub n_max: Option<usize>,
    coefficient: CoefficientFn,
    /// `sup |g|`, used for the truncation bound.
    pub bound_hint: Option<f64>,
    pub label: String,
}

impl std::fmt::Debug for SeriesSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeriesSpec")
            .field("label", &self.label)
            .field("n_max", &self.n_max)
            .field("bound_hint", &self.bound_hint)
            .finish()
    }
}

impl SeriesSpec {
    /// Series for a 0-process evaluated on explicit configurations.
    pub fn from_process(g: &ProcessSpec, n_max: Option<usize>, bound_hint: Option<f64>) -> Result<Self> {
        if g.arity() != 0 {
            return Err(Error::ArityMismatch {
                expected: 0,
                got: g.arity(),
            });
        }
        let g = g.clone();
        let label = g.label().to_string();
        Ok(Self {
            n_max,
            coefficient: Arc::new(move |y: &[Point]| {
                // coincident nodes carry no σⁿ-mass; collapse them if they occur
                let omega = Configuration::new(y.to_vec()).unwrap_or_else(|_| Configuration::empty().augmented(y));
                g.evaluate(&[], &omega)
            }),
            bound_hint,
            label,
        })
    }

    /// Series from a coefficient evaluator, which must be symmetric in its
    /// arguments.
    pub fn from_coefficients(
        label: impl Into<String>,
        coefficient: CoefficientFn,
        n_max: Option<usize>,
        bound_hint: Option<f64>,
    ) -> Self {
        Self {
            n_max,
            coefficient,
            bound_hint,
            label: label.into(),
        }
    }

    pub fn coefficient(&self, y: &[Point]) -> f64 {
        (self.coefficient)(y)
    }

    pub fn resolved_n_max(&self, intensity: &IntensitySpec) -> usize {
        self.n_max.unwrap_or_else(|| default_n_max(intensity.mass()))
    }

    /// Spot-tests permutation invariance of the coefficients on random points.
    pub fn spot_check_symmetry<R: Rng + ?Sized>(
        &self,
        intensity: &IntensitySpec,
        max_order: usize,
        rng: &mut R,
    ) -> Result<()> {
        for n in 2..=max_order {
            let mut y: Vec<Point> = (0..n)
                .map(|_| sample_sigma_point(intensity, rng))
                .collect::<Result<_>>()?;
            let a = self.coefficient(&y);
            y.reverse();
            let b = self.coefficient(&y);
            y.rotate_left(1);
            let c = self.coefficient(&y);
            let tol = 1e-12 * a.abs().max(1.0);
            if (a - b).abs() > tol || (a - c).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "series coefficient of order {n} is not symmetric ({a}, {b}, {c})"
                )));
            }
        }
        Ok(())
    }
}

pub fn default_n_max(mass: f64) -> usize {
    (mass + 10.0 * mass.sqrt() + 10.0).ceil() as usize
}

/// Contribution `e^{-σ} (1/n!) ∫ g_(n) dσⁿ` of one order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderTerm {
    pub n: usize,
    pub contribution: f64,
    pub evaluations: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    /// `sup|g| · P(N > n_max)` when a bound on g is known.
    pub truncation_bound: Option<f64>,
    pub n_max: usize,
    pub orders: Vec<OrderTerm>,
    /// First order whose quadrature exceeded the cap; the value then only
    /// contains lower orders.
    pub incomplete_from: Option<usize>,
}

/// `P(N > n)` for `N ~ Poisson(mass)`, summed directly over the tail.
pub fn poisson_tail(mass: f64, n: usize) -> f64 {
    let mut log_pmf = -mass;
    for j in 1..=n + 1 {
        log_pmf += mass.ln() - (j as f64).ln();
    }
    let mut term = log_pmf.exp();
    let mut total = 0.0;
    let mut j = n + 1;
    while term > 0.0 && (term > 1e-18 * total || (j as f64) < mass) {
        total += term;
        j += 1;
        term *= mass / j as f64;
        if j > n + 100_000 {
            break;
        }
    }
    total
}

fn log_factorial(n: usize) -> f64 {
    (1..=n).map(|j| (j as f64).ln()).sum()
}

/// Truncated series with per-order contributions. Orders are evaluated in
/// parallel and summed in ascending order.
pub fn expectation_series(
    spec: &SeriesSpec,
    intensity: &IntensitySpec,
    quad: Option<QuadratureSpec>,
    workers: usize,
) -> Result<SeriesResult> {
    let n_max = spec.resolved_n_max(intensity);
    let mass = intensity.mass();
    let d = intensity.dim();
    let evaluate_order = |n: usize| -> Result<OrderTerm> {
        let scale = (-mass - log_factorial(n)).exp();
        if n == 0 {
            return Ok(OrderTerm {
                n,
                contribution: scale * spec.coefficient(&[]),
                evaluations: 1,
            });
        }
        let rule = quad.unwrap_or_else(|| QuadratureSpec::default_for(n, d));
        let mut sum = NeumaierSum::default();
        let mut evaluations = 0u128;
        for_each_tuple(intensity, &rule, n, |y, w| {
            evaluations += 1;
            if w != 0.0 {
                sum.add(w * spec.coefficient(y));
            }
        })?;
        Ok(OrderTerm {
            n,
            contribution: scale * sum.value(),
            evaluations,
        })
    };
    let results: Vec<Result<OrderTerm>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?;
        pool.install(|| (0..=n_max).into_par_iter().map(evaluate_order).collect())
    } else {
        (0..=n_max).map(evaluate_order).collect()
    };

    let mut orders = Vec::with_capacity(n_max + 1);
    let mut incomplete_from = None;
    for r in results {
        match r {
            Ok(term) => orders.push(term),
            Err(Error::QuadratureCap { .. }) => {
                incomplete_from = Some(orders.len());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut value = NeumaierSum::default();
    for o in &orders {
        value.add(o.contribution);
    }
    let last = orders.len().saturating_sub(1);
    let truncation_bound = spec.bound_hint.map(|b| {
        if orders.is_empty() {
            b
        } else {
            b * poisson_tail(mass, last)
        }
    });
    Ok(SeriesResult {
        value: value.value(),
        truncation_bound,
        n_max,
        orders,
        incomplete_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::{sample_configuration, ProcessCatalog};
    use crate::mc_stats::{estimate_replicates, StreamFamily};
    use crate::space_measure::{DensityCatalog, Window};

    fn unit(mass: f64) -> IntensitySpec {
        IntensitySpec::uniform(Window::unit(1), mass).unwrap()
    }

    fn count_process() -> ProcessSpec {
        ProcessSpec::from_catalog(ProcessCatalog::CountWeighted {
            exponents: vec![],
            shift: 0.0,
            lo: None,
            hi: None,
            off_diagonal: false,
        })
        .unwrap()
    }

    fn exp_count(theta: f64) -> ProcessSpec {
        ProcessSpec::from_catalog(ProcessCatalog::ExpCount { theta }).unwrap()
    }

    #[test]
    fn total_probability() {
        let one = ProcessSpec::from_catalog(ProcessCatalog::Const {
            value: 1.0,
            arity: 0,
            off_diagonal: false,
        })
        .unwrap();
        for n_max in [0usize, 3, 9] {
            let spec = SeriesSpec::from_process(&one, Some(n_max), Some(1.0)).unwrap();
            let r = expectation_series(&spec, &unit(1.0), None, 4).unwrap();
            let partial: f64 = (0..=n_max).map(|n| (-1f64).exp() / (log_factorial(n)).exp()).sum();
            assert!((r.value - partial).abs() < 1e-14);
            assert!((r.value + r.truncation_bound.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_mean_and_generating_function() {
        let spec = SeriesSpec::from_process(&count_process(), Some(20), None).unwrap();
        let r = expectation_series(&spec, &unit(1.0), None, 4).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
        assert!(r.truncation_bound.is_none());

        let spec = SeriesSpec::from_process(&exp_count(1.0), Some(20), Some(1.0)).unwrap();
        let r = expectation_series(&spec, &unit(1.0), None, 4).unwrap();
        let exact = ((-1f64).exp() - 1.0).exp();
        assert!((r.value - exact).abs() < 1e-10, "{} vs {exact}", r.value);
    }

    #[test]
    fn order_zero_is_empty_configuration_value() {
        let s = unit(2.0);
        let spec = SeriesSpec::from_process(&exp_count(0.3), Some(0), Some(1.0)).unwrap();
        let r = expectation_series(&spec, &s, None, 1).unwrap();
        assert_eq!(r.orders.len(), 1);
        assert!((r.value - (-2f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn partial_sums_increase_for_nonnegative_g() {
        let s = IntensitySpec::from_catalog(
            Window::unit(1),
            DensityCatalog::Linear {
                intercept: 0.5,
                slope: vec![1.0],
            },
        )
        .unwrap();
        let g = ProcessSpec::custom("sum-x", 0, false, |_, w| w.points().iter().map(|p| p[0]).sum());
        let mut previous = -1.0;
        for n_max in 0..8 {
            let spec = SeriesSpec::from_process(&g, Some(n_max), None).unwrap();
            let v = expectation_series(&spec, &s, Some(QuadratureSpec::quasi_random(4096)), 2)
                .unwrap()
                .value;
            assert!(v >= previous);
            previous = v;
        }
    }

    #[test]
    fn cap_gives_partial_result() {
        let spec = SeriesSpec::from_process(&exp_count(1.0), Some(6), Some(1.0)).unwrap();
        let r = expectation_series(&spec, &unit(1.0), Some(QuadratureSpec::tensor(10).with_cap(5_000)), 1).unwrap();
        assert_eq!(r.incomplete_from, Some(4));
        assert_eq!(r.orders.len(), 4);
        assert!(r.truncation_bound.unwrap() > 0.01);
    }

    #[test]
    fn default_order_and_tail() {
        assert_eq!(default_n_max(1.0), 21);
        assert_eq!(default_n_max(4.0), 34);
        let tail = poisson_tail(1.0, 0);
        assert!((tail - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!(poisson_tail(1.0, 21) < 1e-20);
    }

    #[test]
    fn symmetry_spot_check() {
        let s = unit(1.0);
        let mut rng = StreamFamily::new(0, "sym").stream(0);
        let sym = SeriesSpec::from_coefficients("sum", Arc::new(|y: &[Point]| y.iter().map(|p| p[0]).sum()), None, None);
        sym.spot_check_symmetry(&s, 5, &mut rng).unwrap();
        let asym = SeriesSpec::from_coefficients("first", Arc::new(|y: &[Point]| y.first().map_or(0.0, |p| p[0])), None, None);
        assert!(asym.spot_check_symmetry(&s, 5, &mut rng).is_err());
    }

    #[test]
    fn agrees_with_monte_carlo() {
        let s = unit(1.5);
        for g in [exp_count(0.7), count_process()] {
            let bound = if g.label() == "exp-count" { Some(1.0) } else { None };
            let spec = SeriesSpec::from_process(&g, None, bound).unwrap();
            let series = expectation_series(&spec, &s, Some(QuadratureSpec::quasi_random(4096)), 4).unwrap();
            let fam = StreamFamily::new(3, "series-mc");
            let mc = estimate_replicates(100_000, 4, |r| {
                let w = sample_configuration(&s, &mut fam.stream(r as u64))?;
                Ok(g.evaluate(&[], &w))
            })
            .unwrap();
            let slack = 4.0 * mc.std_error + series.truncation_bound.unwrap_or(1e-9);
            assert!((series.value - mc.mean).abs() <= slack, "{} vs {:?}", series.value, mc);
        }
    }
}
