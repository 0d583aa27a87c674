//! Verification reports: two estimates, their gated comparison, and the
//! breakdowns that explain them.

use serde::Serialize;

use crate::mc_stats::{gate, Estimate, Gate, GateOutcome};
use crate::partitions::Partition;

/// Contribution of one right-hand-side term (multiplicity included).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermEstimate {
    pub label: String,
    pub k: usize,
    pub multiplicity: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    pub estimate: Estimate,
}

/// A named quantity reported alongside a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedEstimate {
    pub name: String,
    pub estimate: Estimate,
}

impl NamedEstimate {
    pub fn new(name: impl Into<String>, estimate: Estimate) -> Self {
        Self {
            name: name.into(),
            estimate,
        }
    }
}

/// A further gated comparison that must pass for the report to pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub name: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub gate: Gate,
    pub outcome: GateOutcome,
}

impl Comparison {
    pub fn new(name: impl Into<String>, lhs: Estimate, rhs: Estimate, g: Gate) -> Self {
        Self {
            name: name.into(),
            outcome: gate(&lhs, &rhs, g.z_max, g.abs_floor),
            lhs,
            rhs,
            gate: g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub identity: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub gate: Gate,
    pub outcome: GateOutcome,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub auxiliary: Vec<NamedEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(identity: impl Into<String>, lhs: Estimate, rhs: Estimate, g: Gate) -> Self {
        let outcome = gate(&lhs, &rhs, g.z_max, g.abs_floor);
        Self {
            identity: identity.into(),
            lhs,
            rhs,
            gate: g,
            outcome,
            passed: outcome.passed,
            terms: Vec::new(),
            comparisons: Vec::new(),
            auxiliary: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn z_score(&self) -> f64 {
        self.outcome.z_score
    }

    pub fn with_terms(mut self, terms: Vec<TermEstimate>) -> Self {
        self.terms = terms;
        self
    }

    pub fn push_comparison(&mut self, c: Comparison) {
        self.passed &= c.outcome.passed;
        self.comparisons.push(c);
    }

    pub fn push_auxiliary(&mut self, name: impl Into<String>, estimate: Estimate) {
        self.auxiliary.push(NamedEstimate::new(name, estimate));
    }

    pub fn push_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// The comparison named `name`, if present.
    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }

    pub fn auxiliary_value(&self, name: &str) -> Option<&Estimate> {
        self.auxiliary.iter().find(|a| a.name == name).map(|a| &a.estimate)
    }
}
