//! Turns a validated [`ScenarioConfig`] into core calls and collects the
//! resulting reports.

use mecke_core::configurations::sample_configuration;
use mecke_core::levy_systems::{
    exit_law_check, levy_system_general, levy_system_simple, martingale_checks, path_summaries,
    predictable_factor_check, PathSummary,
};
use mecke_core::mc_stats::estimate_replicates;
use mecke_core::moment_engine::{
    compare_explicit_with_generic, evaluate_moment, second_moment_mixed_explicit, MomentFactor, MomentSpec,
};
use mecke_core::palm_engine::{verify_identity_with, Expansion};
use mecke_core::partitions::{bell_number, enumerate_epsilon_partitions, enumerate_partitions, type_multiplicities};
use mecke_core::series_oracle::{expectation_series, SeriesSpec};
use mecke_core::{
    Comparison, Estimate, Gate, IntensitySpec, JumpFunctional, LevyMeasureSpec, ProcessCatalog, ProcessSpec,
    VerificationReport,
};
use serde_json::{json, Value};

use crate::config::{ExpansionChoice, IntensityConfig, LevyConfig, MomentCheck, ScenarioConfig, ScenarioKind, SchemaError};

/// Why a scenario could not produce a verdict.
#[derive(Debug)]
pub enum RunError {
    /// The configuration is malformed (exit status 2).
    Schema(SchemaError),
    /// A computation failed (exit status 3).
    Numeric { context: String, source: mecke_core::Error },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Schema(e) => write!(f, "invalid configuration: {e}"),
            Self::Numeric { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl From<SchemaError> for RunError {
    fn from(e: SchemaError) -> Self {
        Self::Schema(e)
    }
}

/// Everything a scenario produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<VerificationReport>,
    /// Scenario-specific results without a left/right structure.
    pub details: Value,
    pub paths: Vec<PathSummary>,
    /// Extra human-readable output printed before the verdict lines.
    pub listing: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

fn numeric(context: impl Into<String>) -> impl FnOnce(mecke_core::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Numeric { context, source }
}

fn schema(field: &str) -> impl FnOnce(mecke_core::Error) -> RunError + '_ {
    move |e| RunError::Schema(SchemaError::new(field, e.to_string()))
}

fn intensity(block: &IntensityConfig) -> Result<IntensitySpec, RunError> {
    IntensitySpec::from_catalog(block.window.clone(), block.density.clone()).map_err(schema("intensity"))
}

fn process(catalog: &ProcessCatalog, field: &str) -> Result<ProcessSpec, RunError> {
    ProcessSpec::from_catalog(catalog.clone()).map_err(schema(field))
}

/// Runs a configuration that has passed [`ScenarioConfig::validate`].
pub fn run(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    match config.scenario {
        ScenarioKind::VerifyMeckePalm => mecke_palm(config),
        ScenarioKind::Moments => moments(config),
        ScenarioKind::Oracle => oracle(config),
        ScenarioKind::LevySystem => levy_system(config),
        ScenarioKind::Martingale => martingale(config),
        ScenarioKind::ExitLaw => exit_law(config),
        ScenarioKind::Partitions => partitions(config),
    }
}

fn mecke_palm(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.mecke_palm.as_ref().expect("validated");
    let sigma = intensity(config.intensity.as_ref().expect("validated"))?;
    let f = process(&block.process, "mecke_palm.process")?;
    let expansion = match block.expansion {
        ExpansionChoice::Admissible => Expansion::Admissible,
        ExpansionChoice::SingletonsOnly => Expansion::SingletonsOnly,
    };
    let report = verify_identity_with(&f, &block.epsilon, &sigma, &config.budgets, expansion)
        .map_err(numeric("verify-mecke-palm"))?;
    Ok(Outcome {
        reports: vec![report],
        ..Outcome::default()
    })
}

fn moments(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.moments.as_ref().expect("validated");
    let sigma = intensity(config.intensity.as_ref().expect("validated"))?;
    let factors = block
        .factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Ok(MomentFactor::new(
                process(&f.process, &format!("moments.factors[{i}].process"))?,
                f.power,
                f.epsilon.clone(),
            ))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let budgets = &config.budgets;
    match block.check {
        MomentCheck::Generic => {
            let weight = block
                .weight
                .as_ref()
                .map(|w| process(w, "moments.weight"))
                .transpose()?;
            let spec = MomentSpec::new(factors, weight).map_err(schema("moments"))?;
            let report = evaluate_moment(&spec, &sigma, budgets).map_err(numeric("moments"))?;
            Ok(Outcome {
                reports: vec![report],
                ..Outcome::default()
            })
        }
        MomentCheck::ExplicitSecond => {
            let f = &factors[0].process;
            let c = compare_explicit_with_generic(f, &sigma, budgets).map_err(numeric("explicit second moment"))?;
            let gate = budgets.gate_for(c.explicit_total.mean);
            let report = VerificationReport::new(
                "explicit-second-moment",
                c.explicit_total,
                c.generic_total,
                gate,
            );
            Ok(Outcome {
                reports: vec![report],
                details: serde_json::to_value(&c).expect("comparison serializes"),
                ..Outcome::default()
            })
        }
        MomentCheck::MixedSecond => {
            let f = &factors[0].process;
            let report = second_moment_mixed_explicit(f, &sigma, budgets).map_err(numeric("mixed second moment"))?;
            Ok(Outcome {
                reports: vec![report],
                ..Outcome::default()
            })
        }
    }
}

fn oracle(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.oracle.as_ref().expect("validated");
    let sigma = intensity(config.intensity.as_ref().expect("validated"))?;
    let g = process(&block.g, "oracle.g")?;
    let budgets = &config.budgets;
    let spec = SeriesSpec::from_process(&g, block.n_max, block.bound).map_err(schema("oracle.g"))?;
    let series = expectation_series(&spec, &sigma, block.quadrature, budgets.workers).map_err(numeric("series"))?;
    let mut listing = vec![format!(
        "series value {:.12} from orders 0..={} (truncation bound {})",
        series.value,
        series.n_max,
        series
            .truncation_bound
            .map_or_else(|| "unknown".to_string(), |b| format!("{b:.3e}"))
    )];
    if let Some(n) = series.incomplete_from {
        listing.push(format!("orders from {n} exceeded the quadrature cap and were dropped"));
    }
    let mut reports = Vec::new();
    if block.monte_carlo {
        let family = mecke_core::StreamFamily::new(budgets.seed, &budgets.stream_name("oracle/mc"));
        let mc = estimate_replicates(budgets.replicates, budgets.workers, |r| {
            let omega = sample_configuration(&sigma, &mut family.stream(r as u64))?;
            Ok(g.evaluate(&[], &omega))
        })
        .map_err(numeric("oracle monte carlo"))?;
        let base = budgets.gate_for(mc.mean);
        let slack = series.truncation_bound.unwrap_or(0.0);
        let gate = Gate::new(base.z_max, base.abs_floor + slack);
        let mut report = VerificationReport::new("series-oracle", mc, Estimate::exact(series.value), gate);
        if series.incomplete_from.is_some() {
            report.push_note("series is incomplete; the comparison is against a partial sum");
        }
        reports.push(report);
    }
    Ok(Outcome {
        reports,
        details: serde_json::to_value(&series).expect("series serializes"),
        listing,
        ..Outcome::default()
    })
}

struct LevySetup {
    measure: LevyMeasureSpec,
    drift: Vec<f64>,
}

fn levy_setup(block: &LevyConfig) -> Result<LevySetup, RunError> {
    let measure = LevyMeasureSpec::from_config(&block.measure).map_err(schema("levy.measure"))?;
    let drift = block.drift.clone().unwrap_or_else(|| vec![0.0; measure.dim()]);
    Ok(LevySetup { measure, drift })
}

fn functional(block: &LevyConfig) -> Result<JumpFunctional, RunError> {
    let catalog = block.functional.clone().expect("validated");
    JumpFunctional::from_catalog(catalog).map_err(schema("levy.functional"))
}

fn summaries(block: &LevyConfig, setup: &LevySetup, horizon: f64, config: &ScenarioConfig) -> Result<Vec<PathSummary>, RunError> {
    if block.path_summaries == 0 {
        return Ok(Vec::new());
    }
    path_summaries(&setup.measure, &setup.drift, horizon, &config.budgets, block.path_summaries)
        .map_err(numeric("path summaries"))
}

fn levy_system(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.levy.as_ref().expect("validated");
    let setup = levy_setup(block)?;
    let f = functional(block)?;
    let horizon = block.horizon.expect("validated");
    let budgets = &config.budgets;
    let report = match (&block.epsilon, &block.time_factor) {
        (Some(e), _) => levy_system_general(&f, e, &setup.measure, &setup.drift, horizon, budgets),
        (None, Some(g)) => predictable_factor_check(g, &f, &setup.measure, &setup.drift, horizon, budgets),
        (None, None) => levy_system_simple(&f, &setup.measure, &setup.drift, horizon, budgets),
    }
    .map_err(numeric("levy-system"))?;
    Ok(Outcome {
        reports: vec![report],
        paths: summaries(block, &setup, horizon, config)?,
        ..Outcome::default()
    })
}

fn martingale(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.levy.as_ref().expect("validated");
    let setup = levy_setup(block)?;
    let f = functional(block)?;
    let t = block.horizon.expect("validated");
    let report =
        martingale_checks(&f, &setup.measure, &setup.drift, t, &config.budgets).map_err(numeric("martingale"))?;
    Ok(Outcome {
        reports: vec![report],
        paths: summaries(block, &setup, t, config)?,
        ..Outcome::default()
    })
}

fn exit_law(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.levy.as_ref().expect("validated");
    let spec = config.exit_law.as_ref().expect("validated");
    let setup = levy_setup(block)?;
    let report = exit_law_check(&setup.measure, &setup.drift, spec, &config.budgets).map_err(numeric("exit-law"))?;
    Ok(Outcome {
        reports: vec![report],
        paths: summaries(block, &setup, spec.horizon(), config)?,
        ..Outcome::default()
    })
}

fn partitions(config: &ScenarioConfig) -> Result<Outcome, RunError> {
    let block = config.partitions.as_ref().expect("validated");
    let n = block.n;
    let list = match &block.epsilon {
        Some(e) => enumerate_epsilon_partitions(n, e),
        None => enumerate_partitions(n),
    }
    .map_err(schema("partitions.n"))?;
    let types = type_multiplicities(&list);
    let mut listing = vec![match &block.epsilon {
        Some(e) => format!("n = {n}, epsilon = {e}: {} admissible of {} partitions", list.len(), bell_number(n)),
        None => format!("n = {n}: {} partitions", list.len()),
    }];
    // grouped by type, largest blocks first, in enumeration order within a type
    let mut order: Vec<&String> = types.keys().collect();
    order.sort_by_key(|t| std::cmp::Reverse(type_key(t)));
    for t in order {
        listing.push(format!("type {t} ({})", types[t]));
        for p in list.iter().filter(|p| &p.type_signature() == t) {
            listing.push(format!("  {p}"));
        }
    }
    let details = json!({
        "n": n,
        "epsilon": block.epsilon,
        "count": list.len(),
        "bell": bell_number(n).to_string(),
        "types": types,
        "partitions": list.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        details,
        listing,
        ..Outcome::default()
    })
}

fn type_key(signature: &str) -> Vec<usize> {
    signature.split('+').filter_map(|s| s.parse().ok()).collect()
}

/// `(name, lhs, rhs, z, passed)` rows: the main identity and its comparisons.
pub fn verdict_rows(report: &VerificationReport) -> Vec<(String, Estimate, Estimate, f64, bool)> {
    let mut rows = vec![(
        report.identity.clone(),
        report.lhs,
        report.rhs,
        report.outcome.z_score,
        report.outcome.passed,
    )];
    rows.extend(report.comparisons.iter().map(|c: &Comparison| {
        (
            format!("{}/{}", report.identity, c.name),
            c.lhs,
            c.rhs,
            c.outcome.z_score,
            c.outcome.passed,
        )
    }));
    rows
}
