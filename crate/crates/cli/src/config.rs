//! Scenario files: a versioned TOML schema, validated before any computation.
//!
//! Every table rejects unknown keys. Deserialization errors carry the dotted
//! path of the offending field, and the semantic checks in
//! [`ScenarioConfig::validate`] name the field they reject.

use std::fmt;
use std::path::Path;

use mecke_core::levy_systems::LevyMeasureConfig;
use mecke_core::{
    Budgets, DensityCatalog, EpsilonVector, ExitLawSpec, JumpCatalog, ProcessCatalog, QuadratureSpec, TimeFactor,
    Window,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem, reported with the path of the field at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub field: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    VerifyMeckePalm,
    Moments,
    Oracle,
    LevySystem,
    ExitLaw,
    Martingale,
    Partitions,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::VerifyMeckePalm => "verify-mecke-palm",
            Self::Moments => "moments",
            Self::Oracle => "oracle",
            Self::LevySystem => "levy-system",
            Self::ExitLaw => "exit-law",
            Self::Martingale => "martingale",
            Self::Partitions => "partitions",
        }
    }
}

/// The intensity σ: a density over a bounded window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityConfig {
    pub window: Window,
    pub density: DensityCatalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionChoice {
    /// All admissible partitions.
    #[default]
    Admissible,
    /// Only the all-singletons partition; a negative control.
    SingletonsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeckePalmConfig {
    pub process: ProcessCatalog,
    pub epsilon: EpsilonVector,
    #[serde(default)]
    pub expansion: ExpansionChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub process: ProcessCatalog,
    pub power: usize,
    pub epsilon: EpsilonVector,
}

/// Which moment identity to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentCheck {
    /// The general product-moment formula for the listed factors.
    #[default]
    Generic,
    /// The grouped second moment of a double point integral, against the
    /// general formula (one factor of arity 2).
    ExplicitSecond,
    /// The squared mixed `σ ⊗ ω` integral and its two integration orders
    /// (one factor of arity 2).
    MixedSecond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    #[serde(default)]
    pub check: MomentCheck,
    pub factors: Vec<FactorConfig>,
    #[serde(default)]
    pub weight: Option<ProcessCatalog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub g: ProcessCatalog,
    #[serde(default)]
    pub n_max: Option<usize>,
    /// `sup |g|`; enables the truncation bound.
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    /// Also estimate `E g(ω)` by direct simulation with the scenario budget.
    #[serde(default = "yes")]
    pub monte_carlo: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    pub measure: LevyMeasureConfig,
    /// Deterministic drift `b`; zero when omitted.
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    /// Horizon `T` (the martingale time `t`); unused by exit-law scenarios,
    /// which take it from the time window.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub functional: Option<JumpCatalog>,
    /// Jump/σ pattern of the general system; the simple system when omitted.
    #[serde(default)]
    pub epsilon: Option<EpsilonVector>,
    /// Deterministic left-continuous factor `g(u)` for the simple system.
    #[serde(default)]
    pub time_factor: Option<TimeFactor>,
    /// Number of paths exported to the path-summary CSV.
    #[serde(default)]
    pub path_summaries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionsConfig {
    pub n: usize,
    #[serde(default)]
    pub epsilon: Option<EpsilonVector>,
}

/// One scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: ScenarioKind,
    /// Replicates, master seed, quadrature, right-hand-side mode, gate and
    /// Lévy integration rules.
    #[serde(default)]
    pub budgets: Budgets,
    /// Report path; `--report` takes precedence.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub intensity: Option<IntensityConfig>,
    #[serde(default)]
    pub mecke_palm: Option<MeckePalmConfig>,
    #[serde(default)]
    pub moments: Option<MomentsConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub levy: Option<LevyConfig>,
    #[serde(default)]
    pub exit_law: Option<ExitLawSpec>,
    #[serde(default)]
    pub partitions: Option<PartitionsConfig>,
}

impl ScenarioConfig {
    /// A configuration with default budgets and no scenario blocks.
    pub fn empty(scenario: ScenarioKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            budgets: Budgets::default().with_scenario(scenario.name()),
            output: None,
            intensity: None,
            mecke_palm: None,
            moments: None,
            oracle: None,
            levy: None,
            exit_law: None,
            partitions: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let field = if field == "." { String::new() } else { field };
            SchemaError::new(field, e.into_inner().message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Semantic checks that need no computation.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.budgets.replicates < 2 && self.scenario != ScenarioKind::Partitions {
            return Err(SchemaError::new("budgets.replicates", "at least 2 replicates are needed"));
        }
        if let Some(g) = &self.budgets.gate {
            if !(g.z_max > 0.0 && g.abs_floor >= 0.0) {
                return Err(SchemaError::new("budgets.gate", "z_max must be positive and abs_floor nonnegative"));
            }
        }
        match self.scenario {
            ScenarioKind::VerifyMeckePalm => {
                self.require_intensity()?;
                let block = require(&self.mecke_palm, "mecke_palm")?;
                check_epsilon(&block.process, &block.epsilon, "mecke_palm.epsilon")?;
            }
            ScenarioKind::Moments => {
                self.require_intensity()?;
                let block = require(&self.moments, "moments")?;
                if block.factors.is_empty() {
                    return Err(SchemaError::new("moments.factors", "at least one factor is needed"));
                }
                for (i, f) in block.factors.iter().enumerate() {
                    check_epsilon(&f.process, &f.epsilon, &format!("moments.factors[{i}].epsilon"))?;
                    if f.power == 0 {
                        return Err(SchemaError::new(format!("moments.factors[{i}].power"), "must be at least 1"));
                    }
                }
                if let Some(w) = &block.weight {
                    if w.arity() != 0 {
                        return Err(SchemaError::new("moments.weight", "the weight must be a 0-process"));
                    }
                }
                if block.check != MomentCheck::Generic {
                    let f = &block.factors[0];
                    if block.factors.len() != 1 || f.process.arity() != 2 {
                        return Err(SchemaError::new("moments.factors", "this check takes exactly one factor of arity 2"));
                    }
                }
            }
            ScenarioKind::Oracle => {
                self.require_intensity()?;
                let block = require(&self.oracle, "oracle")?;
                if block.g.arity() != 0 {
                    return Err(SchemaError::new("oracle.g", "the oracle takes a 0-process"));
                }
            }
            ScenarioKind::LevySystem | ScenarioKind::Martingale => {
                let block = require(&self.levy, "levy")?;
                let f = block
                    .functional
                    .as_ref()
                    .ok_or_else(|| SchemaError::new("levy.functional", "missing"))?;
                if block.horizon.is_none() {
                    return Err(SchemaError::new("levy.horizon", "missing"));
                }
                self.check_drift(block)?;
                match (&block.epsilon, self.scenario) {
                    (Some(_), ScenarioKind::Martingale) => {
                        return Err(SchemaError::new("levy.epsilon", "not used by martingale scenarios"));
                    }
                    (Some(e), _) if e.len() != f.arity() => {
                        return Err(SchemaError::new(
                            "levy.epsilon",
                            format!("has length {} but the functional has arity {}", e.len(), f.arity()),
                        ));
                    }
                    (None, _) if f.arity() != 1 => {
                        return Err(SchemaError::new(
                            "levy.functional",
                            "the simple system and the martingale take a one-fold functional",
                        ));
                    }
                    _ => {}
                }
                if block.time_factor.is_some() && (block.epsilon.is_some() || self.scenario == ScenarioKind::Martingale) {
                    return Err(SchemaError::new("levy.time_factor", "only used by the simple system"));
                }
            }
            ScenarioKind::ExitLaw => {
                let block = require(&self.levy, "levy")?;
                self.check_drift(block)?;
                let spec = require(&self.exit_law, "exit_law")?;
                spec.validate().map_err(|e| SchemaError::new("exit_law", e.to_string()))?;
            }
            ScenarioKind::Partitions => {
                let block = require(&self.partitions, "partitions")?;
                if block.n == 0 {
                    return Err(SchemaError::new("partitions.n", "must be at least 1"));
                }
                if let Some(e) = &block.epsilon {
                    if e.len() != block.n {
                        return Err(SchemaError::new(
                            "partitions.epsilon",
                            format!("has length {} but n = {}", e.len(), block.n),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn require_intensity(&self) -> Result<&IntensityConfig, SchemaError> {
        require(&self.intensity, "intensity")
    }

    fn check_drift(&self, block: &LevyConfig) -> Result<(), SchemaError> {
        if let Some(b) = &block.drift {
            if b.len() != block.measure.window.dim() {
                return Err(SchemaError::new(
                    "levy.drift",
                    format!("has {} entries but the jumps live in dimension {}", b.len(), block.measure.window.dim()),
                ));
            }
        }
        Ok(())
    }
}

fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, SchemaError> {
    block
        .as_ref()
        .ok_or_else(|| SchemaError::new(name, "missing block for this scenario"))
}

fn check_epsilon(process: &ProcessCatalog, epsilon: &EpsilonVector, field: &str) -> Result<(), SchemaError> {
    if epsilon.len() != process.arity() {
        return Err(SchemaError::new(
            field,
            format!("has length {} but the process has arity {}", epsilon.len(), process.arity()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PALM: &str = r#"
schema_version = 1
scenario = "verify-mecke-palm"

[budgets]
replicates = 100
seed = 3

[intensity]
window = { lo = [0.0], hi = [1.0] }
density = { kind = "constant", value = 1.0 }

[mecke_palm]
process = { kind = "diag-indicator" }
epsilon = "11"
"#;

    #[test]
    fn parses_and_validates() {
        let c = ScenarioConfig::from_toml(PALM).unwrap();
        c.validate().unwrap();
        assert_eq!(c.budgets.replicates, 100);
        assert_eq!(c.scenario, ScenarioKind::VerifyMeckePalm);
    }

    #[test]
    fn unknown_key_names_its_table() {
        let text = PALM.replace("seed = 3", "seed = 3\nreplicas = 4");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.field, "budgets.replicas");
        assert!(err.message.contains("replicas"), "{err}");
    }

    #[test]
    fn wrong_type_names_the_field() {
        let text = PALM.replace("replicates = 100", "replicates = \"many\"");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.field, "budgets.replicates");
    }

    #[test]
    fn epsilon_length_is_checked() {
        let text = PALM.replace("epsilon = \"11\"", "epsilon = \"101\"");
        let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field, "mecke_palm.epsilon");
    }

    #[test]
    fn bad_epsilon_characters_name_the_field() {
        let text = PALM.replace("epsilon = \"11\"", "epsilon = \"1x\"");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.field, "mecke_palm.epsilon");
    }

    #[test]
    fn version_and_missing_blocks() {
        let text = PALM.replace("schema_version = 1", "schema_version = 2");
        let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.field, "schema_version");
        let mut c = ScenarioConfig::from_toml(PALM).unwrap();
        c.intensity = None;
        assert_eq!(c.validate().unwrap_err().field, "intensity");
    }
}
