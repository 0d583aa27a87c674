//! Moments of products of powers of mixed multiple integrals.
//!
//! A product `f₀(ω) ∏_α (∫ f_α dω_{ε_(α)})^{n_α}` is linearized into a single
//! multiple integral over the labeled set `S = {(α, β, γ)}` and expanded with
//! the Mecke–Palm right side over the ε-admissible partitions of `S`. The
//! module also carries two hand-expanded second moments used as independent
//! cross-checks of the generic expansion.

use std::ops::Range;

use serde::Serialize;

use crate::configurations::{mixed_multiple_integral, sample_configuration, Configuration, EpsilonVector, ProcessSpec};
use crate::error::{Error, Result};
use crate::mc_stats::{estimate_replicates, run_replicates, aggregate, Estimate, StreamFamily};
use crate::palm_engine::{estimate_terms, lhs_stream, RhsEstimate, TermIntegrand};
use crate::partitions::{enumerate_labeled_partitions, LabeledIndex, Partition, MAX_PARTITION_SIZE};
use crate::report::{Comparison, VerificationReport};
use crate::settings::Budgets;
use crate::space_measure::{IntensitySpec, Point};

/// One factor `(∫ f_α dω_{ε_(α)})^{n_α}`.
#[derive(Debug, Clone)]
pub struct MomentFactor {
    pub process: ProcessSpec,
    pub power: usize,
    pub epsilon: EpsilonVector,
}

impl MomentFactor {
    pub fn new(process: ProcessSpec, power: usize, epsilon: EpsilonVector) -> Self {
        Self {
            process,
            power,
            epsilon,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentSpec {
    pub factors: Vec<MomentFactor>,
    /// Optional 0-process weight `f₀`.
    pub weight: Option<ProcessSpec>,
}

impl MomentSpec {
    pub fn new(factors: Vec<MomentFactor>, weight: Option<ProcessSpec>) -> Result<Self> {
        let spec = Self { factors, weight };
        spec.validate()?;
        Ok(spec)
    }

    /// `(∫ f dω_ε)^power`
    pub fn single(process: ProcessSpec, power: usize, epsilon: EpsilonVector) -> Result<Self> {
        Self::new(vec![MomentFactor::new(process, power, epsilon)], None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidParameter("a moment needs at least one factor".into()));
        }
        let mut size = 0usize;
        for (alpha, f) in self.factors.iter().enumerate() {
            if f.process.arity() == 0 {
                return Err(Error::InvalidParameter(format!(
                    "factor {alpha} has arity 0; use the weight for 0-processes"
                )));
            }
            if f.power == 0 {
                return Err(Error::InvalidParameter(format!("factor {alpha} has power 0")));
            }
            if f.epsilon.len() != f.process.arity() {
                return Err(Error::ArityMismatch {
                    expected: f.process.arity(),
                    got: f.epsilon.len(),
                });
            }
            size += f.process.arity() * f.power;
        }
        if size > MAX_PARTITION_SIZE {
            return Err(Error::PartitionSize {
                n: size,
                max: MAX_PARTITION_SIZE,
            });
        }
        if let Some(w) = &self.weight {
            if w.arity() != 0 {
                return Err(Error::ArityMismatch {
                    expected: 0,
                    got: w.arity(),
                });
            }
        }
        Ok(())
    }

    pub fn labeled_index(&self) -> Result<LabeledIndex> {
        LabeledIndex::new(self.factors.iter().map(|f| (f.process.arity(), f.power)).collect())
    }

    fn epsilons(&self) -> Vec<EpsilonVector> {
        self.factors.iter().map(|f| f.epsilon.clone()).collect()
    }
}

/// One summand of the linearized moment formula.
#[derive(Debug, Clone)]
pub struct MomentTerm {
    partition: Partition,
    block_epsilon: Vec<bool>,
    /// `(α, S_{α,γ})` for every factor copy.
    groups: Vec<(usize, Range<usize>)>,
    processes: Vec<ProcessSpec>,
    weight: Option<ProcessSpec>,
}

impl MomentTerm {
    pub fn k(&self) -> usize {
        self.partition.k()
    }
}

impl TermIntegrand for MomentTerm {
    fn label(&self) -> String {
        self.partition.to_string()
    }

    fn augment_mask(&self) -> &[bool] {
        &self.block_epsilon
    }

    fn evaluate_augmented(&self, y: &[Point], augmented: &Configuration) -> f64 {
        let mut x = Vec::with_capacity(self.partition.n());
        self.partition.expand_into(y, &mut x);
        let mut value = match &self.weight {
            Some(w) => w.evaluate(&[], augmented),
            None => 1.0,
        };
        for (alpha, range) in &self.groups {
            if value == 0.0 {
                break;
            }
            value *= self.processes[*alpha].evaluate(&x[range.clone()], augmented);
        }
        value
    }

    fn partition(&self) -> Option<&Partition> {
        Some(&self.partition)
    }
}

/// One term per admissible partition of the labeled set, canonical order.
pub fn expand_moment_terms(spec: &MomentSpec) -> Result<Vec<MomentTerm>> {
    spec.validate()?;
    let index = spec.labeled_index()?;
    let per_factor = spec.epsilons();
    let flat = index.flatten_epsilon(&per_factor)?;
    let groups: Vec<(usize, Range<usize>)> = index.groups().into_iter().map(|(a, _, r)| (a, r)).collect();
    let processes: Vec<ProcessSpec> = spec.factors.iter().map(|f| f.process.clone()).collect();
    enumerate_labeled_partitions(&index, &per_factor)?
        .into_iter()
        .map(|partition| {
            Ok(MomentTerm {
                block_epsilon: partition.block_epsilon(&flat)?,
                partition,
                groups: groups.clone(),
                processes: processes.clone(),
                weight: spec.weight.clone(),
            })
        })
        .collect()
}

/// Monte Carlo estimate of `E f₀(ω) ∏_α (∫ f_α dω_{ε_(α)})^{n_α}`.
pub fn estimate_moment_lhs(spec: &MomentSpec, intensity: &IntensitySpec, budgets: &Budgets) -> Result<Estimate> {
    spec.validate()?;
    let d = intensity.dim();
    let family = StreamFamily::new(budgets.seed, &budgets.stream_name(lhs_stream(budgets)));
    estimate_replicates(budgets.replicates, budgets.workers, |r| {
        let omega = sample_configuration(intensity, &mut family.stream(r as u64))?;
        moment_lhs_sample(spec, &omega, intensity, budgets, d)
    })
}

fn moment_lhs_sample(
    spec: &MomentSpec,
    omega: &Configuration,
    intensity: &IntensitySpec,
    budgets: &Budgets,
    d: usize,
) -> Result<f64> {
    let mut value = match &spec.weight {
        Some(w) => w.evaluate(&[], omega),
        None => 1.0,
    };
    for f in &spec.factors {
        let zeros = f.epsilon.len() - f.epsilon.count_ones();
        let quad = budgets.quadrature_for(zeros, d);
        let integral = mixed_multiple_integral(&f.process, omega, &f.epsilon, intensity, &quad)?;
        value *= integral.powi(f.power as i32);
    }
    Ok(value)
}

/// Both sides of the moment formula, gated.
pub fn evaluate_moment(spec: &MomentSpec, intensity: &IntensitySpec, budgets: &Budgets) -> Result<VerificationReport> {
    let terms = expand_moment_terms(spec)?;
    let lhs = estimate_moment_lhs(spec, intensity, budgets)?;
    let rhs = estimate_terms(&terms, intensity, budgets)?;
    let gate = budgets.gate_for(lhs.mean);
    let mut report = VerificationReport::new("moment", lhs, rhs.total, gate).with_terms(rhs.terms);
    report.notes = rhs.notes;
    Ok(report)
}

/// A displayed group of the explicit second moment of a 2-process:
/// `multiplicity · ∫ f(y_a; ω ∪ y) f(y_b; ω ∪ y) σ^k(dy)`.
#[derive(Debug, Clone)]
pub struct ExplicitGroup {
    k: usize,
    multiplicity: usize,
    first: [usize; 2],
    second: [usize; 2],
    mask: Vec<bool>,
    process: ProcessSpec,
}

/// `(k, multiplicity, first argument pair, second argument pair)`.
const SECOND_MOMENT_GROUPS: [(usize, usize, [usize; 2], [usize; 2]); 11] = [
    (1, 1, [0, 0], [0, 0]),
    (2, 2, [0, 0], [0, 1]),
    (2, 2, [0, 0], [1, 0]),
    (2, 1, [0, 0], [1, 1]),
    (2, 1, [0, 1], [0, 1]),
    (2, 1, [0, 1], [1, 0]),
    (3, 2, [0, 0], [1, 2]),
    (3, 2, [0, 1], [2, 0]),
    (3, 1, [0, 1], [0, 2]),
    (3, 1, [1, 0], [2, 0]),
    (4, 1, [0, 1], [2, 3]),
];

impl ExplicitGroup {
    fn signature(&self) -> Signature {
        canonical_signature(self.k, self.first, self.second)
    }
}

impl TermIntegrand for ExplicitGroup {
    fn label(&self) -> String {
        let [a, b] = self.first;
        let [c, e] = self.second;
        format!("k={} f(y{},y{})f(y{},y{})", self.k, a + 1, b + 1, c + 1, e + 1)
    }

    fn augment_mask(&self) -> &[bool] {
        &self.mask
    }

    fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    fn evaluate_augmented(&self, y: &[Point], augmented: &Configuration) -> f64 {
        let a = self
            .process
            .evaluate(&[y[self.first[0]].clone(), y[self.first[1]].clone()], augmented);
        if a == 0.0 {
            return 0.0;
        }
        a * self
            .process
            .evaluate(&[y[self.second[0]].clone(), y[self.second[1]].clone()], augmented)
    }
}

/// The eleven groups of the explicit expansion of `E (∫∫ f dω dω)²`.
pub fn second_moment_groups(f: &ProcessSpec) -> Result<Vec<ExplicitGroup>> {
    if f.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: f.arity(),
        });
    }
    Ok(SECOND_MOMENT_GROUPS
        .iter()
        .map(|&(k, multiplicity, first, second)| ExplicitGroup {
            k,
            multiplicity,
            first,
            second,
            mask: vec![true; k],
            process: f.clone(),
        })
        .collect())
}

/// Explicit eleven-group evaluation of `E (∫∫ f(x₁,x₂; ω) ω(dx₁) ω(dx₂))²`.
pub fn second_moment_2process_explicit(f: &ProcessSpec, intensity: &IntensitySpec, budgets: &Budgets) -> Result<RhsEstimate> {
    let groups = second_moment_groups(f)?;
    estimate_terms(&groups, intensity, budgets)
}

type Signature = (usize, [usize; 4]);

/// Canonical form of a product `f(a₀,a₁) f(b₀,b₁)` of two 2-process factors
/// over k points, up to relabeling the points and swapping the factors.
fn canonical_signature(k: usize, first: [usize; 2], second: [usize; 2]) -> Signature {
    let mut best: Option<[usize; 4]> = None;
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        for (p, q) in [(first, second), (second, first)] {
            let candidate = [perm[p[0]], perm[p[1]], perm[q[0]], perm[q[1]]];
            if best.is_none_or(|b| candidate < b) {
                best = Some(candidate);
            }
        }
        let Some(i) = (1..k).rev().find(|&i| perm[i - 1] < perm[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
    (k, best.unwrap_or([0; 4]))
}

/// Per-group agreement between the explicit and the generic expansion.
#[derive(Debug, Clone, Serialize)]
pub struct GroupComparison {
    pub label: String,
    pub multiplicity: usize,
    pub generic_terms: usize,
    pub explicit: Estimate,
    pub generic: Estimate,
    pub abs_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplicitComparison {
    pub explicit_total: Estimate,
    pub generic_total: Estimate,
    pub groups: Vec<GroupComparison>,
    pub multiplicity_sum: usize,
    pub max_abs_difference: f64,
}

/// Evaluates the explicit groups and the generic expansion of
/// `(∫∫ f dω dω)²` with the same budgets and matches them group by group.
/// With `RhsMode::SharedSymmetrized` both use the same random numbers, and
/// matching groups agree up to rounding.
pub fn compare_explicit_with_generic(
    f: &ProcessSpec,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<ExplicitComparison> {
    let groups = second_moment_groups(f)?;
    let spec = MomentSpec::single(f.clone(), 2, EpsilonVector::ones(2)?)?;
    let generic_terms = expand_moment_terms(&spec)?;
    let explicit = estimate_terms(&groups, intensity, budgets)?;
    let generic = estimate_terms(&generic_terms, intensity, budgets)?;

    let mut out = Vec::with_capacity(groups.len());
    let mut max_abs_difference = 0.0f64;
    for (g, est) in groups.iter().zip(&explicit.terms) {
        let sig = g.signature();
        let members: Vec<usize> = generic_terms
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let labels = t.partition.labels();
                let l = |i: usize| labels[i] as usize;
                canonical_signature(t.k(), [l(0), l(1)], [l(2), l(3)]) == sig
            })
            .map(|(i, _)| i)
            .collect();
        let parts: Vec<&Estimate> = members.iter().map(|&i| &generic.terms[i].estimate).collect();
        let generic_sum = Estimate::sum_independent(parts);
        let abs_difference = (est.estimate.mean - generic_sum.mean).abs();
        max_abs_difference = max_abs_difference.max(abs_difference);
        out.push(GroupComparison {
            label: g.label(),
            multiplicity: g.multiplicity,
            generic_terms: members.len(),
            explicit: est.estimate,
            generic: generic_sum,
            abs_difference,
        });
    }
    max_abs_difference = max_abs_difference.max((explicit.total.mean - generic.total.mean).abs());
    Ok(ExplicitComparison {
        explicit_total: explicit.total,
        generic_total: generic.total,
        multiplicity_sum: groups.iter().map(|g| g.multiplicity).sum(),
        groups: out,
        max_abs_difference,
    })
}

/// Terms of the two-term expansion of `E (∫∫ f(x, y; ω) σ(dx) ω(dy))²`.
#[derive(Debug, Clone)]
pub struct MixedSecondMomentTerm {
    merged: bool,
    mask: Vec<bool>,
    process: ProcessSpec,
}

impl TermIntegrand for MixedSecondMomentTerm {
    fn label(&self) -> String {
        if self.merged {
            "k=3 f(x,y)f(z,y)".into()
        } else {
            "k=4 f(x,y)f(z,t)".into()
        }
    }

    fn augment_mask(&self) -> &[bool] {
        &self.mask
    }

    fn evaluate_augmented(&self, y: &[Point], augmented: &Configuration) -> f64 {
        // y = (x, y, z) or (x, y, z, t)
        let second = if self.merged { &y[1] } else { &y[3] };
        let a = self.process.evaluate(&[y[0].clone(), y[1].clone()], augmented);
        if a == 0.0 {
            return 0.0;
        }
        a * self.process.evaluate(&[y[2].clone(), second.clone()], augmented)
    }
}

pub fn mixed_second_moment_terms(f: &ProcessSpec) -> Result<Vec<MixedSecondMomentTerm>> {
    if f.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: f.arity(),
        });
    }
    Ok(vec![
        MixedSecondMomentTerm {
            merged: true,
            mask: vec![false, true, false],
            process: f.clone(),
        },
        MixedSecondMomentTerm {
            merged: false,
            mask: vec![false, true, false, true],
            process: f.clone(),
        },
    ])
}

/// `∫ ω(dy) ∫ σ(dx) f(x, y; ω)`: the mixed integral with the atom sum outside.
fn swapped_mixed_integral(
    f: &ProcessSpec,
    omega: &Configuration,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<f64> {
    let quad = budgets.quadrature_for(1, intensity.dim());
    let mut total = 0.0;
    for atom in omega.points() {
        let a = atom.clone();
        let fx = ProcessSpec::custom("section", 1, false, {
            let f = f.clone();
            move |x: &[Point], w: &Configuration| f.evaluate(&[x[0].clone(), a.clone()], w)
        });
        total += mixed_multiple_integral(&fx, omega, &EpsilonVector::zeros(1)?, intensity, &quad)?;
    }
    Ok(total)
}

/// Checks the mixed second moment with `ε = (0, 1)`:
/// the squared mixed integral against its two-term expansion, the two
/// integration orders against each other, and the generic expansion as a
/// further comparison.
pub fn second_moment_mixed_explicit(
    f: &ProcessSpec,
    intensity: &IntensitySpec,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    if f.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: f.arity(),
        });
    }
    let epsilon: EpsilonVector = EpsilonVector::new(vec![false, true])?;
    let quad = budgets.quadrature_for(1, intensity.dim());
    let family = StreamFamily::new(budgets.seed, &budgets.stream_name(lhs_stream(budgets)));
    let pairs = run_replicates(budgets.replicates, budgets.workers, |r| {
        let omega = sample_configuration(intensity, &mut family.stream(r as u64))?;
        let inner = mixed_multiple_integral(f, &omega, &epsilon, intensity, &quad)?;
        let swapped = swapped_mixed_integral(f, &omega, intensity, budgets)?;
        Ok((inner * inner, swapped * swapped))
    })?;
    let lhs = aggregate(&pairs.iter().map(|p| p.0).collect::<Vec<_>>())?;
    let swapped = aggregate(&pairs.iter().map(|p| p.1).collect::<Vec<_>>())?;

    let terms = mixed_second_moment_terms(f)?;
    let rhs = estimate_terms(&terms, intensity, budgets)?;
    let generic_spec = MomentSpec::single(f.clone(), 2, epsilon)?;
    let generic_terms = expand_moment_terms(&generic_spec)?;
    let generic = estimate_terms(&generic_terms, intensity, &budgets.clone().with_scenario(budgets.stream_name("generic")))?;

    let gate = budgets.gate_for(lhs.mean);
    let mut report = VerificationReport::new("mixed-second-moment", lhs, rhs.total, gate).with_terms(rhs.terms);
    report.push_comparison(Comparison::new("integration-order", lhs, swapped, gate));
    report.push_comparison(Comparison::new("generic-expansion", rhs.total, generic.total, budgets.gate_for(rhs.total.mean)));
    report.notes = rhs.notes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::ProcessCatalog;
    use crate::partitions::{bell_number, count_epsilon_partitions};
    use crate::series_oracle::{expectation_series, SeriesSpec};
    use crate::settings::RhsMode;
    use crate::space_measure::{quadrature_integrate, QuadratureSpec, Window};

    fn unit(mass: f64) -> IntensitySpec {
        IntensitySpec::uniform(Window::unit(1), mass).unwrap()
    }

    fn one(arity: usize) -> ProcessSpec {
        ProcessSpec::from_catalog(ProcessCatalog::Const {
            value: 1.0,
            arity,
            off_diagonal: false,
        })
        .unwrap()
    }

    fn eps(s: &str) -> EpsilonVector {
        s.parse().unwrap()
    }

    fn budgets(replicates: usize, seed: u64) -> Budgets {
        Budgets::new(replicates, seed).with_workers(2)
    }

    /// Touchard polynomial `Σ_k S(n,k) σ^k` from the Stirling recurrence.
    fn poisson_raw_moment(n: usize, sigma: f64) -> f64 {
        let mut s = vec![vec![0f64; n + 1]; n + 1];
        s[0][0] = 1.0;
        for m in 1..=n {
            for k in 1..=m {
                s[m][k] = k as f64 * s[m - 1][k] + s[m - 1][k - 1];
            }
        }
        (0..=n).map(|k| s[n][k] * sigma.powi(k as i32)).sum()
    }

    #[test]
    fn validation() {
        assert!(MomentSpec::new(vec![], None).is_err());
        assert!(MomentSpec::single(one(1), 0, eps("1")).is_err());
        assert!(MomentSpec::single(one(2), 1, eps("1")).is_err());
        assert!(MomentSpec::single(one(3), 5, eps("111")).is_err());
        assert!(MomentSpec::new(vec![MomentFactor::new(one(1), 1, eps("1"))], Some(one(1))).is_err());
    }

    #[test]
    fn campbell_second_moment_terms() {
        let s = unit(1.0);
        let phi = ProcessSpec::custom("x", 1, false, |x, _| x[0][0]);
        let terms = expand_moment_terms(&MomentSpec::single(phi, 2, eps("1")).unwrap()).unwrap();
        assert_eq!(terms.len(), 2);
        let b = budgets(200, 1).with_rhs_mode(RhsMode::QuadratureOuter);
        let rhs = estimate_terms(&terms, &s, &b).unwrap();
        // ∫x² = 1/3 and (∫x)² = 1/4
        assert!((rhs.terms[0].estimate.mean - 1.0 / 3.0).abs() < 1e-4);
        assert!((rhs.terms[1].estimate.mean - 0.25).abs() < 1e-4);
    }

    #[test]
    fn term_counts() {
        let f2 = one(2);
        let spec = MomentSpec::single(f2.clone(), 2, eps("11")).unwrap();
        assert_eq!(expand_moment_terms(&spec).unwrap().len(), 15);
        let spec = MomentSpec::new(
            vec![MomentFactor::new(one(1), 1, eps("1")), MomentFactor::new(one(1), 1, eps("0"))],
            None,
        )
        .unwrap();
        assert_eq!(expand_moment_terms(&spec).unwrap().len(), 1);
        let spec = MomentSpec::new(
            vec![MomentFactor::new(f2, 2, eps("01")), MomentFactor::new(one(1), 2, eps("1"))],
            None,
        )
        .unwrap();
        let index = spec.labeled_index().unwrap();
        let flat = index.flatten_epsilon(&spec.epsilons()).unwrap();
        assert_eq!(
            expand_moment_terms(&spec).unwrap().len() as u64,
            count_epsilon_partitions(index.len(), &flat).unwrap()
        );
    }

    #[test]
    fn poisson_moments_are_touchard() {
        for (n, sigma) in [(1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0), (3, 2.5)] {
            let spec = MomentSpec::single(one(1), n, eps("1")).unwrap();
            let r = evaluate_moment(&spec, &unit(sigma), &budgets(40_000, n as u64)).unwrap();
            let exact = poisson_raw_moment(n, sigma);
            assert!((r.rhs.mean - exact).abs() < 1e-9 * exact, "rhs {} vs {exact}", r.rhs.mean);
            assert!(r.passed, "n = {n}: {r:?}");
            if sigma == 1.0 {
                assert_eq!(exact, bell_number(n) as f64);
            }
        }
    }

    #[test]
    fn weighted_moment_matches_series() {
        let sigma = 1.4;
        let s = unit(sigma);
        let weight = ProcessSpec::from_catalog(ProcessCatalog::ExpCount { theta: 1.0 }).unwrap();
        let phi = ProcessSpec::custom("1+x", 1, false, |x, _| 1.0 + x[0][0]);
        let spec = MomentSpec::new(vec![MomentFactor::new(phi, 1, eps("1"))], Some(weight.clone())).unwrap();
        let r = evaluate_moment(&spec, &s, &budgets(50_000, 3)).unwrap();
        assert!(r.passed, "{r:?}");
        // E e^{-|ω ∪ {y}|} = e^{-1} E e^{-|ω|}, the latter from the series
        let series = expectation_series(&SeriesSpec::from_process(&weight, None, Some(1.0)).unwrap(), &s, None, 1).unwrap();
        let int_phi = 1.5 * sigma;
        let exact = (-1f64).exp() * series.value * int_phi;
        let closed = (-1f64).exp() * (sigma * ((-1f64).exp() - 1.0)).exp() * int_phi;
        assert!((exact - closed).abs() < 1e-9);
        assert!((r.rhs.mean - exact).abs() < 4.0 * r.rhs.std_error);
    }

    #[test]
    fn all_zero_epsilon_is_deterministic() {
        let s = unit(1.3);
        let g = ProcessSpec::custom("g", 1, false, |x, _| 1.0 + x[0][0] * x[0][0]);
        let spec = MomentSpec::single(g, 2, eps("0")).unwrap();
        let b = budgets(50, 4).with_rhs_mode(RhsMode::QuadratureOuter);
        let r = evaluate_moment(&spec, &s, &b).unwrap();
        let single = quadrature_integrate(|y| 1.0 + y[0][0] * y[0][0], 1, &s, &QuadratureSpec::tensor(4096)).unwrap();
        assert_eq!(r.lhs.std_error, 0.0);
        assert!((r.lhs.mean - single * single).abs() < 1e-4);
        assert!((r.rhs.mean - single * single).abs() < 1e-4);
    }

    #[test]
    fn explicit_groups_cover_the_generic_terms() {
        let f = ProcessSpec::custom("f", 2, false, |x, _| x[0][0] + 2.0 * x[1][0]);
        let groups = second_moment_groups(&f).unwrap();
        assert_eq!(groups.iter().map(|g| g.multiplicity).sum::<usize>(), 15);
        let c = compare_explicit_with_generic(&f, &unit(1.0), &budgets(500, 5).with_rhs_mode(RhsMode::SharedSymmetrized))
            .unwrap();
        for g in &c.groups {
            assert_eq!(g.generic_terms, g.multiplicity, "{}", g.label);
        }
        assert!(c.max_abs_difference < 1e-12, "{}", c.max_abs_difference);
    }

    #[test]
    fn explicit_second_moment_examples() {
        let s = unit(1.5);
        let diag = ProcessSpec::from_catalog(ProcessCatalog::DiagIndicator).unwrap();
        let e = second_moment_2process_explicit(&diag, &s, &budgets(2_000, 6)).unwrap();
        assert!((e.total.mean - (1.5 + 1.5 * 1.5)).abs() < 1e-12);
        let zero = ProcessSpec::custom("0", 2, false, |_, _| 0.0);
        assert_eq!(second_moment_2process_explicit(&zero, &s, &budgets(100, 6)).unwrap().total.mean, 0.0);
    }

    #[test]
    fn mixed_second_moment_examples() {
        let sigma = 1.2;
        let s = unit(sigma);
        let gh = ProcessSpec::custom("gh", 2, false, |x, _| (0.5 + x[0][0]) * (1.0 + x[1][0]));
        let r = second_moment_mixed_explicit(&gh, &s, &budgets(40_000, 7)).unwrap();
        assert!(r.passed, "{r:?}");
        let (ig, ih, ih2) = (sigma, 1.5 * sigma, sigma * (1.0 + 1.0 + 1.0 / 3.0));
        let closed = ig * ig * (ih2 + ih * ih);
        assert!((r.rhs.mean - closed).abs() < 4.0 * r.rhs.std_error, "{} vs {closed}", r.rhs.mean);
        assert!((r.lhs.mean - closed).abs() < 4.0 * r.lhs.std_error);

        let r = second_moment_mixed_explicit(&one(2), &s, &budgets(40_000, 8)).unwrap();
        let closed = sigma * sigma * (sigma + sigma * sigma);
        assert!(r.passed);
        assert!((r.rhs.mean - closed).abs() < 1e-12);
        let order = r.comparison("integration-order").unwrap();
        assert!(order.outcome.difference.abs() < 1e-9);
    }
}
