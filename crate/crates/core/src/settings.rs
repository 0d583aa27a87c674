//! Budgets shared by every verification routine.

use serde::{Deserialize, Serialize};

use crate::mc_stats::{default_workers, Gate};
use crate::space_measure::QuadratureSpec;

/// How the outer y-integral of a right-hand-side term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsMode {
    /// `y₁..y_k` drawn i.i.d. from the normalized intensity, weighted by `σ(𝒳)^k`.
    #[default]
    McOuter,
    /// Tensor quadrature over `y` with an inner Monte Carlo average over ω.
    /// Terms with `k·d > 3` fall back to `McOuter`.
    QuadratureOuter,
    /// One ω and one y-sample per replicate shared by all terms, each term
    /// averaged over all permutations of its y-arguments. Terms that differ
    /// only by a relabeling of y then agree up to rounding.
    SharedSymmetrized,
}

/// Whether left and right sides share the configuration stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamPolicy {
    #[default]
    Independent,
    Common,
}

/// Monte Carlo and quadrature budgets for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Scenario name mixed into every stream key.
    #[serde(default = "default_scenario")]
    pub scenario: String,
    /// Worker threads; never part of a report, results do not depend on it.
    #[serde(skip, default = "default_workers")]
    pub workers: usize,
    /// Rule for σ-coordinates; `None` picks a default from arity and dimension.
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub rhs_mode: RhsMode,
    #[serde(default)]
    pub streams: StreamPolicy,
    /// `None` uses `z_max = 4` and `abs_floor = 1e-9·max(1, |lhs|)`.
    #[serde(default)]
    pub gate: Option<Gate>,
    #[serde(default)]
    pub levy: LevyRules,
}

/// Deterministic rules used along compound Poisson paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevyRules {
    /// Gauss–Legendre nodes per time piece.
    pub time_nodes: usize,
    /// Gauss–Legendre nodes per jump-size piece (d = 1), or midpoint nodes per axis.
    pub jump_nodes: usize,
    /// Cap on integrand evaluations per path (or per deterministic evaluation).
    pub max_evaluations: u64,
    /// Lattice spacing of the one-dimensional transition-kernel evaluator.
    pub lattice_step: f64,
    /// Run the transition-kernel evaluator when it applies (d = 1, no drift).
    pub semigroup: bool,
    /// Time cells of the occupation grid used for the killed kernel.
    pub exit_time_cells: usize,
    /// Space cells of the occupation grid used for the killed kernel.
    pub exit_space_cells: usize,
}

impl Default for LevyRules {
    fn default() -> Self {
        Self {
            time_nodes: 4,
            jump_nodes: 32,
            max_evaluations: 50_000_000,
            lattice_step: 0.01,
            semigroup: true,
            exit_time_cells: 50,
            exit_space_cells: 200,
        }
    }
}

fn default_replicates() -> usize {
    100_000
}

fn default_scenario() -> String {
    "scenario".into()
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            seed: 0,
            scenario: default_scenario(),
            workers: default_workers(),
            quadrature: None,
            rhs_mode: RhsMode::default(),
            streams: StreamPolicy::default(),
            gate: None,
            levy: LevyRules::default(),
        }
    }
}

impl Budgets {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            ..Self::default()
        }
    }

    pub fn with_scenario(mut self, scenario: impl Into<String>) -> Self {
        self.scenario = scenario.into();
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_quadrature(mut self, quad: QuadratureSpec) -> Self {
        self.quadrature = Some(quad);
        self
    }

    pub fn with_rhs_mode(mut self, mode: RhsMode) -> Self {
        self.rhs_mode = mode;
        self
    }

    pub fn with_streams(mut self, streams: StreamPolicy) -> Self {
        self.streams = streams;
        self
    }

    pub fn with_gate(mut self, gate: Gate) -> Self {
        self.gate = Some(gate);
        self
    }

    pub fn with_levy_rules(mut self, rules: LevyRules) -> Self {
        self.levy = rules;
        self
    }

    pub fn quadrature_for(&self, k: usize, dim: usize) -> QuadratureSpec {
        self.quadrature.unwrap_or_else(|| QuadratureSpec::default_for(k, dim))
    }

    pub fn gate_for(&self, lhs: f64) -> Gate {
        self.gate.unwrap_or_else(|| Gate::default_for(lhs))
    }

    /// Stream name `"{scenario}/{suffix}"`.
    pub fn stream_name(&self, suffix: &str) -> String {
        format!("{}/{}", self.scenario, suffix)
    }
}
