//! Checks that span several modules, each against an oracle computed here
//! independently of the engine (Stirling numbers, closed-form Poisson
//! moments, direct counting).

use mecke_core::levy_systems::{levy_system_general, path_summaries};
use mecke_core::mc_stats::aggregate;
use mecke_core::moment_engine::{evaluate_moment, MomentSpec};
use mecke_core::palm_engine::{estimate_rhs, expand_rhs, verify_identity};
use mecke_core::partitions::{bell_number, count_epsilon_partitions, enumerate_epsilon_partitions};
use mecke_core::series_oracle::{expectation_series, SeriesSpec};
use mecke_core::{
    Budgets, EpsilonVector, IntensitySpec, JumpCatalog, JumpFunctional, LevyMeasureSpec, ProcessCatalog, ProcessSpec,
    QuadratureSpec, RhsMode, StreamPolicy, Window,
};
use proptest::prelude::*;

fn unit(mass: f64) -> IntensitySpec {
    IntensitySpec::uniform(Window::unit(1), mass).unwrap()
}

/// Stirling numbers of the second kind by the triangle recurrence.
fn stirling2(n: usize, k: usize) -> f64 {
    let mut row = vec![1.0f64];
    for m in 1..=n {
        let mut next = vec![0.0; m + 1];
        for j in 1..=m {
            let stay = if j < m { j as f64 * row[j] } else { 0.0 };
            next[j] = stay + row[j - 1];
        }
        row = next;
    }
    row.get(k).copied().unwrap_or(0.0)
}

/// `E N^m` for `N ~ Poisson(s)`.
fn touchard(m: usize, s: f64) -> f64 {
    (0..=m).map(|k| stirling2(m, k) * s.powi(k as i32)).sum()
}

#[test]
fn stirling_oracle_sanity() {
    assert_eq!(stirling2(4, 2), 7.0);
    assert_eq!(stirling2(5, 3), 25.0);
    assert_eq!(touchard(5, 1.0), 52.0);
}

#[test]
fn series_oracle_reproduces_poisson_moments() {
    let s = unit(1.7);
    for m in 1..=4 {
        let g = ProcessSpec::custom(format!("count^{m}"), 0, false, move |_, w| (w.len() as f64).powi(m as i32));
        let spec = SeriesSpec::from_process(&g, Some(60), None).unwrap();
        // the coefficients are constant, so any rule with exact total weight is exact
        let series = expectation_series(&spec, &s, Some(QuadratureSpec::quasi_random(64)), 2).unwrap();
        let exact = touchard(m, 1.7);
        assert!((series.value - exact).abs() < 1e-10 * exact, "m = {m}: {} vs {exact}", series.value);
    }
}

#[test]
fn moment_rhs_matches_series_oracle() {
    let s = unit(1.3);
    let one = ProcessSpec::from_catalog(ProcessCatalog::Const {
        value: 1.0,
        arity: 1,
        off_diagonal: false,
    })
    .unwrap();
    let spec = MomentSpec::single(one, 3, "1".parse().unwrap()).unwrap();
    let r = evaluate_moment(&spec, &s, &Budgets::new(2_000, 1).with_workers(2)).unwrap();
    let g = ProcessSpec::custom("count^3", 0, false, |_, w| (w.len() as f64).powi(3));
    let spec = SeriesSpec::from_process(&g, None, None).unwrap();
    let series = expectation_series(&spec, &s, Some(QuadratureSpec::quasi_random(64)), 1).unwrap();
    assert!((r.rhs.mean - series.value).abs() < 1e-9 * series.value);
}

#[test]
fn count_weighted_identity_against_closed_form() {
    // Σ_{x∈ω} ω(𝒳) = N², whose mean is σ + σ².
    let s = unit(2.0);
    let f = ProcessSpec::from_catalog(ProcessCatalog::CountWeighted {
        exponents: vec![0.0],
        shift: 0.0,
        lo: None,
        hi: None,
        off_diagonal: false,
    })
    .unwrap();
    for streams in [StreamPolicy::Independent, StreamPolicy::Common] {
        let b = Budgets::new(40_000, 5).with_workers(2).with_streams(streams);
        let r = verify_identity(&f, &"1".parse().unwrap(), &s, &b).unwrap();
        assert!(r.passed, "{streams:?}: {r:?}");
        assert!((r.lhs.mean - 6.0).abs() < 4.0 * r.lhs.std_error);
        assert!((r.rhs.mean - 6.0).abs() < 4.0 * r.rhs.std_error.max(1e-12));
    }
}

#[test]
fn levy_pair_counts_match_poisson_factorial_moment() {
    // Ordered jump pairs: N(N-1)/2 with E = (|ν|T)²/2.
    let nu = LevyMeasureSpec::uniform(1, -0.5, 0.5, 1.5, 0.0).unwrap();
    let f = JumpFunctional::from_catalog(JumpCatalog::OrderedCount { arity: 2 }).unwrap();
    let horizon = 2.0;
    let lambda_t = nu.mass() * horizon;
    let r = levy_system_general(&f, &"11".parse().unwrap(), &nu, &[0.0], horizon, &Budgets::new(20_000, 9)).unwrap();
    assert!(r.passed, "{r:?}");
    assert!((r.rhs.mean - lambda_t * lambda_t / 2.0).abs() < 4.0 * r.rhs.std_error.max(1e-9));

    let summaries = path_summaries(&nu, &[0.0], horizon, &Budgets::new(20_000, 9), 20_000).unwrap();
    let counts: Vec<f64> = summaries.iter().map(|p| p.jumps as f64).collect();
    let pairs: Vec<f64> = counts.iter().map(|n| n * (n - 1.0) / 2.0).collect();
    let mean_count = aggregate(&counts).unwrap();
    let mean_pairs = aggregate(&pairs).unwrap();
    assert!((mean_count.mean - lambda_t).abs() < 4.0 * mean_count.std_error);
    // the summaries are the left-hand-side paths of the scenario
    assert_eq!(mean_pairs.mean, r.lhs.mean);
}

#[test]
fn budgets_files_reject_unknown_fields() {
    let ok: Budgets = serde_json::from_str(r#"{"replicates": 10, "seed": 4, "rhs_mode": "shared-symmetrized"}"#).unwrap();
    assert_eq!(ok.rhs_mode, RhsMode::SharedSymmetrized);
    assert!(serde_json::from_str::<Budgets>(r#"{"replicate": 10}"#).is_err());
    assert!(serde_json::from_str::<Budgets>(r#"{"levy": {"time_node": 2}}"#).is_err());
}

fn epsilon_strategy() -> impl Strategy<Value = EpsilonVector> {
    prop::collection::vec(any::<bool>(), 1..=6).prop_map(|bits| EpsilonVector::new(bits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// σ-coordinates must stay singletons, so the admissible partitions are
    /// the partitions of the ω-coordinates.
    #[test]
    fn admissible_count_is_bell_of_the_jump_coordinates(eps in epsilon_strategy()) {
        let n = eps.len();
        let count = count_epsilon_partitions(n, &eps).unwrap();
        prop_assert_eq!(count as u128, bell_number(eps.count_ones()));
        prop_assert_eq!(enumerate_epsilon_partitions(n, &eps).unwrap().len() as u64, count);
    }

    /// For a constant process the right side is deterministic:
    /// `c σ^{#zeros} E N^{#ones}`.
    #[test]
    fn constant_process_rhs_is_a_touchard_polynomial(
        eps in prop::collection::vec(any::<bool>(), 1..=4).prop_map(|b| EpsilonVector::new(b).unwrap()),
        sigma in 0.2f64..3.0,
        c in 0.5f64..2.0,
    ) {
        let n = eps.len();
        let f = ProcessSpec::from_catalog(ProcessCatalog::Const { value: c, arity: n, off_diagonal: false }).unwrap();
        let s = unit(sigma);
        let terms = expand_rhs(&f, &eps).unwrap();
        let b = Budgets::new(20, 3)
            .with_workers(1)
            .with_rhs_mode(RhsMode::QuadratureOuter)
            .with_quadrature(QuadratureSpec::tensor(4));
        let rhs = estimate_rhs(&terms, &s, &b).unwrap();
        let zeros = n - eps.count_ones();
        let exact = c * sigma.powi(zeros as i32) * touchard(eps.count_ones(), sigma);
        prop_assert!((rhs.total.mean - exact).abs() <= 1e-9 * exact.max(1.0), "{} vs {}", rhs.total.mean, exact);
    }
}
