//! Both sides of the multiple mixed Mecke–Palm identity
//!
//! `E ∫ f(x; ω) ω_{ε₁}(dx₁)⋯ω_{ε_n}(dx_n)
//!     = Σ_{P admissible} ∫ E f(y^{[P]}; ω ∪ y_{ε^{[P]}}) σ^k(dy)`
//!
//! as independent estimators, plus the generic machinery that evaluates any
//! list of partition-indexed terms (shared with the moment engine).

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::configurations::{mixed_multiple_integral, sample_configuration, Configuration, EpsilonVector, ProcessSpec};
use crate::error::{Error, Result};
use crate::mc_stats::{aggregate, estimate_replicates, run_replicates, Estimate, StreamFamily};
use crate::partitions::{enumerate_epsilon_partitions, Partition};
use crate::report::{TermEstimate, VerificationReport};
use crate::settings::{Budgets, RhsMode, StreamPolicy};
use crate::space_measure::{for_each_tuple, sample_sigma_point, IntensitySpec, Point};

/// Largest term arity the permutation-symmetrized mode accepts (7! = 5040).
pub const MAX_SYMMETRIZED_ARITY: usize = 7;

/// One right-hand-side summand: an integrand over `k` points and ω whose
/// contribution is `multiplicity · ∫ E g(y; ω ∪ {y_i : mask_i}) σ^k(dy)`.
pub trait TermIntegrand: Send + Sync {
    fn label(&self) -> String;

    /// Which `y_i` join the configuration.
    fn augment_mask(&self) -> &[bool];

    /// The integrand, given the configuration already augmented.
    fn evaluate_augmented(&self, y: &[Point], augmented: &Configuration) -> f64;

    fn arity(&self) -> usize {
        self.augment_mask().len()
    }

    fn multiplicity(&self) -> usize {
        1
    }

    fn partition(&self) -> Option<&Partition> {
        None
    }

    fn evaluate(&self, y: &[Point], omega: &Configuration) -> f64 {
        let extra: Vec<Point> = y
            .iter()
            .zip(self.augment_mask())
            .filter(|(_, m)| **m)
            .map(|(p, _)| p.clone())
            .collect();
        self.evaluate_augmented(y, &omega.augmented(&extra))
    }
}

/// Summand of the Mecke–Palm right side for one admissible partition.
#[derive(Debug, Clone)]
pub struct PalmTerm {
    partition: Partition,
    block_epsilon: Vec<bool>,
    process: ProcessSpec,
}

impl PalmTerm {
    pub fn new(partition: Partition, epsilon: &EpsilonVector, process: ProcessSpec) -> Result<Self> {
        if partition.n() != process.arity() {
            return Err(Error::ArityMismatch {
                expected: process.arity(),
                got: partition.n(),
            });
        }
        let block_epsilon = partition.block_epsilon(epsilon)?;
        Ok(Self {
            partition,
            block_epsilon,
            process,
        })
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn block_epsilon(&self) -> &[bool] {
        &self.block_epsilon
    }
}

impl TermIntegrand for PalmTerm {
    fn label(&self) -> String {
        self.partition.to_string()
    }

    fn augment_mask(&self) -> &[bool] {
        &self.block_epsilon
    }

    fn evaluate_augmented(&self, y: &[Point], augmented: &Configuration) -> f64 {
        let mut x = Vec::with_capacity(self.partition.n());
        self.partition.expand_into(y, &mut x);
        self.process.evaluate(&x, augmented)
    }

    fn partition(&self) -> Option<&Partition> {
        Some(&self.partition)
    }
}

/// Which partitions the right side runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expansion {
    /// Every ε-admissible partition (the correct identity).
    #[default]
    Admissible,
    /// Only the all-singletons partition, which is the right side valid for
    /// processes vanishing on diagonals. Used as a negative control: for
    /// processes that charge diagonals it must fail.
    SingletonsOnly,
}

/// Monte Carlo estimate of the left side.
pub fn estimate_lhs(
    f: &ProcessSpec,
    epsilon: &EpsilonVector,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<Estimate> {
    if f.arity() != epsilon.len() {
        return Err(Error::ArityMismatch {
            expected: f.arity(),
            got: epsilon.len(),
        });
    }
    let quad = budgets.quadrature_for(epsilon.len() - epsilon.count_ones(), intensity.dim());
    let family = StreamFamily::new(budgets.seed, &budgets.stream_name(lhs_stream(budgets)));
    estimate_replicates(budgets.replicates, budgets.workers, |r| {
        let omega = sample_configuration(intensity, &mut family.stream(r as u64))?;
        mixed_multiple_integral(f, &omega, epsilon, intensity, &quad)
    })
}

pub(crate) fn lhs_stream(budgets: &Budgets) -> &'static str {
    match budgets.streams {
        StreamPolicy::Independent => "lhs",
        StreamPolicy::Common => "omega",
    }
}

/// One term per admissible partition, in canonical order.
pub fn expand_rhs(f: &ProcessSpec, epsilon: &EpsilonVector) -> Result<Vec<PalmTerm>> {
    expand_rhs_with(f, epsilon, Expansion::Admissible)
}

pub fn expand_rhs_with(f: &ProcessSpec, epsilon: &EpsilonVector, expansion: Expansion) -> Result<Vec<PalmTerm>> {
    if f.arity() != epsilon.len() {
        return Err(Error::ArityMismatch {
            expected: f.arity(),
            got: epsilon.len(),
        });
    }
    let partitions = match expansion {
        Expansion::Admissible => enumerate_epsilon_partitions(epsilon.len(), epsilon)?,
        Expansion::SingletonsOnly => vec![Partition::singletons(epsilon.len())],
    };
    partitions
        .into_iter()
        .map(|p| PalmTerm::new(p, epsilon, f.clone()))
        .collect()
}

/// Right side estimate with its per-term breakdown.
#[derive(Debug, Clone)]
pub struct RhsEstimate {
    pub total: Estimate,
    pub terms: Vec<TermEstimate>,
    pub notes: Vec<String>,
}

pub fn estimate_rhs<T: TermIntegrand>(terms: &[T], intensity: &IntensitySpec, budgets: &Budgets) -> Result<RhsEstimate> {
    estimate_terms(terms, intensity, budgets)
}

/// Draws `k` pairwise distinct points from the normalized intensity.
fn sample_distinct_points<R: Rng + ?Sized>(intensity: &IntensitySpec, k: usize, rng: &mut R) -> Result<Vec<Point>> {
    let mut y: Vec<Point> = Vec::with_capacity(k);
    while y.len() < k {
        let p = sample_sigma_point(intensity, rng)?;
        if !y.contains(&p) {
            y.push(p);
        }
    }
    Ok(y)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
}

/// Evaluates every term on every replicate. Each replicate yields one row of
/// term values; the total is estimated from row sums, so shared randomness
/// between terms is accounted for in its standard error.
pub(crate) fn estimate_terms<T: TermIntegrand>(
    terms: &[T],
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<RhsEstimate> {
    let d = intensity.dim();
    let mass = intensity.mass();
    let mut notes = Vec::new();
    let max_k = terms.iter().map(|t| t.arity()).max().unwrap_or(0);

    let omega_shared = StreamFamily::new(budgets.seed, &budgets.stream_name("omega"));
    let y_shared = StreamFamily::new(budgets.seed, &budgets.stream_name("y"));
    // Streams are keyed by term label, so a term draws the same numbers
    // whatever else is in the list.
    let per_term: Vec<(StreamFamily, StreamFamily)> = terms
        .iter()
        .map(|t| {
            let label = t.label();
            (
                StreamFamily::new(budgets.seed, &budgets.stream_name(&format!("rhs/{label}"))),
                StreamFamily::new(budgets.seed, &budgets.stream_name(&format!("rhs/{label}/y"))),
            )
        })
        .collect();

    let rows: Vec<Vec<f64>> = match budgets.rhs_mode {
        RhsMode::SharedSymmetrized => {
            if max_k > MAX_SYMMETRIZED_ARITY {
                return Err(Error::InvalidParameter(format!(
                    "symmetrized evaluation supports term arity up to {MAX_SYMMETRIZED_ARITY}, got {max_k}"
                )));
            }
            let perms: Vec<Vec<Vec<usize>>> = (0..=max_k).map(permutations).collect();
            notes.push("rhs: one shared configuration and point sample per replicate, permutation-symmetrized".into());
            run_replicates(budgets.replicates, budgets.workers, |r| {
                let omega = sample_configuration(intensity, &mut omega_shared.stream(r as u64))?;
                let y = sample_distinct_points(intensity, max_k, &mut y_shared.stream(r as u64))?;
                let mut cache: HashMap<Vec<usize>, Configuration> = HashMap::new();
                let mut row = Vec::with_capacity(terms.len());
                for term in terms {
                    let k = term.arity();
                    let mask = term.augment_mask();
                    let mut sum = 0.0;
                    let mut yp: Vec<Point> = Vec::with_capacity(k);
                    for pi in &perms[k] {
                        yp.clear();
                        yp.extend(pi.iter().map(|&j| y[j].clone()));
                        let mut key: Vec<usize> = pi.iter().zip(mask).filter(|(_, m)| **m).map(|(j, _)| *j).collect();
                        key.sort_unstable();
                        let aug = cache.entry(key).or_insert_with_key(|key| {
                            let extra: Vec<Point> = key.iter().map(|&j| y[j].clone()).collect();
                            omega.augmented(&extra)
                        });
                        sum += term.evaluate_augmented(&yp, aug);
                    }
                    let avg = sum / perms[k].len() as f64;
                    row.push(term.multiplicity() as f64 * mass.powi(k as i32) * avg);
                }
                Ok(row)
            })?
        }
        RhsMode::McOuter | RhsMode::QuadratureOuter => {
            let quadrature_terms: Vec<bool> = terms
                .iter()
                .map(|t| budgets.rhs_mode == RhsMode::QuadratureOuter && t.arity() * d <= 3)
                .collect();
            if budgets.rhs_mode == RhsMode::QuadratureOuter {
                let fallback = quadrature_terms.iter().filter(|q| !**q).count();
                notes.push(format!(
                    "rhs: quadrature over y for {} term(s), Monte Carlo fallback for {fallback} term(s) with k·d > 3",
                    terms.len() - fallback
                ));
            } else {
                notes.push("rhs: y sampled from the normalized intensity".into());
            }
            run_replicates(budgets.replicates, budgets.workers, |r| {
                let shared_omega = match budgets.streams {
                    StreamPolicy::Common => Some(sample_configuration(intensity, &mut omega_shared.stream(r as u64))?),
                    StreamPolicy::Independent => None,
                };
                let mut row = Vec::with_capacity(terms.len());
                for (i, term) in terms.iter().enumerate() {
                    let (omega_family, y_family) = &per_term[i];
                    let omega = match &shared_omega {
                        Some(w) => w.clone(),
                        None => sample_configuration(intensity, &mut omega_family.stream(r as u64))?,
                    };
                    let k = term.arity();
                    let value = if quadrature_terms[i] {
                        let quad = budgets.quadrature_for(k, d);
                        let mut sum = 0.0;
                        for_each_tuple(intensity, &quad, k, |y, w| {
                            if w != 0.0 {
                                sum += w * term.evaluate(y, &omega);
                            }
                        })?;
                        sum
                    } else {
                        let y = sample_distinct_points(intensity, k, &mut y_family.stream(r as u64))?;
                        mass.powi(k as i32) * term.evaluate(&y, &omega)
                    };
                    row.push(term.multiplicity() as f64 * value);
                }
                Ok(row)
            })?
        }
    };

    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let total = aggregate(&row_sums)?;
    let mut estimates = Vec::with_capacity(terms.len());
    let mut column = vec![0.0; rows.len()];
    for (i, term) in terms.iter().enumerate() {
        for (slot, row) in column.iter_mut().zip(&rows) {
            *slot = row[i];
        }
        estimates.push(TermEstimate {
            label: term.label(),
            k: term.arity(),
            multiplicity: term.multiplicity(),
            partition: term.partition().cloned(),
            estimate: aggregate(&column)?,
        });
    }
    Ok(RhsEstimate {
        total,
        terms: estimates,
        notes,
    })
}

/// Estimates both sides and gates them.
pub fn verify_identity(
    f: &ProcessSpec,
    epsilon: &EpsilonVector,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    verify_identity_with(f, epsilon, intensity, budgets, Expansion::Admissible)
}

pub fn verify_identity_with(
    f: &ProcessSpec,
    epsilon: &EpsilonVector,
    intensity: &IntensitySpec,
    budgets: &Budgets,
    expansion: Expansion,
) -> Result<VerificationReport> {
    let mut check_rng = StreamFamily::new(budgets.seed, &budgets.stream_name("diagonal-check")).stream(0);
    f.spot_check_diagonals(intensity, 32, &mut check_rng)?;
    let terms = expand_rhs_with(f, epsilon, expansion)?;
    let lhs = estimate_lhs(f, epsilon, intensity, budgets)?;
    let rhs = estimate_rhs(&terms, intensity, budgets)?;
    let gate = budgets.gate_for(lhs.mean);
    let mut report = VerificationReport::new("mecke-palm", lhs, rhs.total, gate).with_terms(rhs.terms);
    report.notes = rhs.notes;
    if expansion == Expansion::SingletonsOnly {
        report.push_note("rhs restricted to the all-singletons partition (negative control)");
    }
    Ok(report)
}

/// Signed processes are verified through a user-declared split `f = f₊ − f₋`
/// into nonnegative parts; each part is checked on its own.
pub fn verify_signed_identity(
    positive: &ProcessSpec,
    negative: &ProcessSpec,
    epsilon: &EpsilonVector,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<(VerificationReport, VerificationReport)> {
    let plus = verify_identity(positive, epsilon, intensity, &budgets.clone().with_scenario(budgets.stream_name("plus")))?;
    let minus = verify_identity(negative, epsilon, intensity, &budgets.clone().with_scenario(budgets.stream_name("minus")))?;
    Ok((plus, minus))
}
