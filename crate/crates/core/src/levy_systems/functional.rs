//! Integrands of jump sums: functions of `(u, x, ·)` per coordinate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::space_measure::Point;

/// One coordinate of a jump functional's argument.
///
/// `x` is the position just before time `u`. In [`JumpForm::PreJump`] the
/// third slot `w` is the jump size `z`; in [`JumpForm::PrePost`] it is the
/// position after the jump, `x + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpArg {
    pub u: f64,
    pub x: Point,
    pub w: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpForm {
    /// `F(u, x, x + z)`.
    PrePost,
    /// `F(u, x, z)`.
    #[default]
    PreJump,
}

pub type JumpFn = Arc<dyn Fn(&[JumpArg]) -> f64 + Send + Sync>;

fn one() -> usize {
    1
}

/// Built-in functionals, all in pre-jump form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpCatalog {
    /// `F = 1`: counts jumps.
    Count,
    /// `F = value` for every coordinate tuple.
    Constant {
        value: f64,
        #[serde(default = "one")]
        arity: usize,
    },
    /// `F = 1` on time-ordered tuples: counts ordered tuples of jumps.
    OrderedCount { arity: usize },
    /// `F = 𝟙{|z| > a}`.
    TailIndicator { a: f64 },
    /// `F = Π_j 𝟙{x_j ∈ [lo, hi]ᵈ}`.
    PositionIndicator {
        lo: f64,
        hi: f64,
        #[serde(default = "one")]
        arity: usize,
    },
    /// `F = Π_j |z_j|^power`.
    AbsJumpProduct { arity: usize, power: f64 },
}

impl JumpCatalog {
    pub fn arity(&self) -> usize {
        match self {
            Self::Count | Self::TailIndicator { .. } => 1,
            Self::Constant { arity, .. }
            | Self::OrderedCount { arity }
            | Self::PositionIndicator { arity, .. }
            | Self::AbsJumpProduct { arity, .. } => *arity,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Count => "count",
            Self::Constant { .. } => "constant",
            Self::OrderedCount { .. } => "ordered-count",
            Self::TailIndicator { .. } => "tail-indicator",
            Self::PositionIndicator { .. } => "position-indicator",
            Self::AbsJumpProduct { .. } => "abs-jump-product",
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// An `n`-fold jump functional `F(u₁, x₁, ·; …; u_n, x_n, ·) ≥ 0`.
///
/// The evaluator must be total. The flags `uses_position` / `uses_jump` let
/// the integrators skip work: a functional that ignores positions needs no
/// splitting of time integrals at jump times, and one that ignores both
/// positions and jump sizes integrates `ν(dz)` as the scalar `|ν|`.
#[derive(Clone)]
pub struct JumpFunctional {
    label: String,
    arity: usize,
    form: JumpForm,
    f: JumpFn,
    uses_position: bool,
    uses_jump: bool,
    time_breaks: Vec<f64>,
    jump_breaks: Vec<f64>,
    catalog: Option<JumpCatalog>,
}

impl fmt::Debug for JumpFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpFunctional")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .field("form", &self.form)
            .field("catalog", &self.catalog)
            .finish_non_exhaustive()
    }
}

impl JumpFunctional {
    /// A user-supplied functional; assumed to depend on positions and jumps.
    pub fn custom(label: impl Into<String>, arity: usize, form: JumpForm, f: JumpFn) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidParameter("jump functionals need arity >= 1".into()));
        }
        Ok(Self {
            label: label.into(),
            arity,
            form,
            f,
            uses_position: true,
            uses_jump: true,
            time_breaks: Vec::new(),
            jump_breaks: Vec::new(),
            catalog: None,
        })
    }

    pub fn from_catalog(catalog: JumpCatalog) -> Result<Self> {
        let arity = catalog.arity();
        if arity == 0 {
            return Err(Error::InvalidParameter("jump functionals need arity >= 1".into()));
        }
        let (f, uses_position, uses_jump, jump_breaks): (JumpFn, bool, bool, Vec<f64>) = match &catalog {
            JumpCatalog::Count | JumpCatalog::OrderedCount { .. } => (Arc::new(|_: &[JumpArg]| 1.0), false, false, vec![]),
            JumpCatalog::Constant { value, .. } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::InvalidParameter(format!("constant must be finite and >= 0, got {value}")));
                }
                let c = *value;
                (Arc::new(move |_: &[JumpArg]| c), false, false, vec![])
            }
            JumpCatalog::TailIndicator { a } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::InvalidParameter(format!("tail threshold must be finite and >= 0, got {a}")));
                }
                let a = *a;
                (
                    Arc::new(move |args: &[JumpArg]| if norm(&args[0].w) > a { 1.0 } else { 0.0 }),
                    false,
                    true,
                    vec![-a, a],
                )
            }
            JumpCatalog::PositionIndicator { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidParameter(format!("need finite lo < hi, got [{lo}, {hi}]")));
                }
                let (lo, hi) = (*lo, *hi);
                (
                    Arc::new(move |args: &[JumpArg]| {
                        let inside = args.iter().all(|a| a.x.iter().all(|v| lo <= *v && *v <= hi));
                        if inside {
                            1.0
                        } else {
                            0.0
                        }
                    }),
                    true,
                    false,
                    vec![],
                )
            }
            JumpCatalog::AbsJumpProduct { power, .. } => {
                if !(power.is_finite() && *power >= 0.0) {
                    return Err(Error::InvalidParameter(format!("power must be finite and >= 0, got {power}")));
                }
                let p = *power;
                (
                    Arc::new(move |args: &[JumpArg]| args.iter().map(|a| norm(&a.w).powf(p)).product()),
                    false,
                    true,
                    vec![0.0],
                )
            }
        };
        Ok(Self {
            label: catalog.name().to_string(),
            arity,
            form: JumpForm::PreJump,
            f,
            uses_position,
            uses_jump,
            time_breaks: Vec::new(),
            jump_breaks,
            catalog: Some(catalog),
        })
    }

    /// Declares that the evaluator ignores positions `x`.
    pub fn independent_of_position(mut self) -> Self {
        self.uses_position = false;
        self
    }

    /// Declares that the evaluator ignores the third slot (jump or post-jump position).
    /// Only meaningful for pre-jump functionals.
    pub fn independent_of_jump(mut self) -> Self {
        if self.form == JumpForm::PreJump {
            self.uses_jump = false;
        }
        self
    }

    /// Times where the evaluator may be discontinuous in `u`.
    pub fn with_time_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.time_breaks = breaks;
        self
    }

    /// One-dimensional jump sizes where the evaluator may be discontinuous in `z`.
    pub fn with_jump_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.jump_breaks = breaks;
        self
    }

    /// Multiplies a one-fold functional by a deterministic time factor `g(u)`.
    pub fn with_time_factor(&self, g: &TimeFactor) -> Result<Self> {
        if self.arity != 1 {
            return Err(Error::ArityMismatch {
                expected: 1,
                got: self.arity,
            });
        }
        g.validate()?;
        let inner = self.f.clone();
        let factor = g.clone();
        let mut time_breaks = self.time_breaks.clone();
        time_breaks.extend(g.breaks());
        Ok(Self {
            label: format!("{}*{}", g.name(), self.label),
            f: Arc::new(move |args: &[JumpArg]| {
                let gu = factor.evaluate(args[0].u);
                if gu == 0.0 {
                    0.0
                } else {
                    gu * inner(args)
                }
            }),
            time_breaks,
            catalog: None,
            ..self.clone()
        })
    }

    /// `F²` (or any power), keeping the dependence flags.
    pub fn powered(&self, power: i32) -> Self {
        let inner = self.f.clone();
        Self {
            label: format!("({})^{power}", self.label),
            f: Arc::new(move |args: &[JumpArg]| inner(args).powi(power)),
            catalog: None,
            ..self.clone()
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn form(&self) -> JumpForm {
        self.form
    }

    pub fn catalog(&self) -> Option<&JumpCatalog> {
        self.catalog.as_ref()
    }

    pub fn uses_position(&self) -> bool {
        self.uses_position
    }

    pub fn uses_jump(&self) -> bool {
        self.uses_jump || self.form == JumpForm::PrePost
    }

    pub fn time_breaks(&self) -> &[f64] {
        &self.time_breaks
    }

    pub fn jump_breaks(&self) -> &[f64] {
        &self.jump_breaks
    }

    /// Evaluates at pre-jump coordinates `(u_j, x_j, z_j)`, converting to the
    /// functional's own form.
    pub fn evaluate(&self, u: &[f64], x: &[Point], z: &[Point]) -> f64 {
        let args: SmallVec<[JumpArg; 3]> = (0..self.arity)
            .map(|j| JumpArg {
                u: u[j],
                x: x[j].clone(),
                w: match self.form {
                    JumpForm::PreJump => z[j].clone(),
                    JumpForm::PrePost => x[j].iter().zip(&z[j]).map(|(a, b)| a + b).collect(),
                },
            })
            .collect();
        (self.f)(&args)
    }
}

/// Deterministic, left-continuous, bounded time factor `g(u) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeFactor {
    Constant { value: f64 },
    /// `intercept + slope·u`, required to be nonnegative on the horizon.
    Linear { intercept: f64, slope: f64 },
    /// `𝟙_{(lo, hi]}(u)`.
    Indicator { lo: f64, hi: f64 },
}

impl TimeFactor {
    pub fn evaluate(&self, u: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Linear { intercept, slope } => intercept + slope * u,
            Self::Indicator { lo, hi } => {
                if lo < u && u <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Linear { .. } => "linear",
            Self::Indicator { .. } => "indicator",
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match *self {
            Self::Indicator { lo, hi } => vec![lo, hi],
            _ => vec![],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { value } => value.is_finite() && value >= 0.0,
            Self::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            Self::Indicator { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid time factor {self:?}")))
        }
    }

    /// Checks boundedness and nonnegativity on `[0, T]`.
    pub fn check_on(&self, horizon: f64) -> Result<()> {
        self.validate()?;
        if let Self::Linear { intercept, slope } = *self {
            if intercept.min(intercept + slope * horizon) < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "linear time factor is negative on [0, {horizon}]"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Point {
        Point::from_slice(&[v])
    }

    #[test]
    fn pre_post_form_sees_post_jump_position() {
        let f = JumpFunctional::custom(
            "post",
            1,
            JumpForm::PrePost,
            Arc::new(|a: &[JumpArg]| a[0].w[0] - a[0].x[0] + 10.0 * a[0].x[0]),
        )
        .unwrap();
        assert_eq!(f.evaluate(&[0.5], &[p(2.0)], &[p(0.25)]), 0.25 + 20.0);
        assert!(f.uses_jump());
    }

    #[test]
    fn catalog_values() {
        let tail = JumpFunctional::from_catalog(JumpCatalog::TailIndicator { a: 0.5 }).unwrap();
        assert_eq!(tail.evaluate(&[1.0], &[p(0.0)], &[p(-0.7)]), 1.0);
        assert_eq!(tail.evaluate(&[1.0], &[p(0.0)], &[p(0.3)]), 0.0);
        let prod = JumpFunctional::from_catalog(JumpCatalog::AbsJumpProduct { arity: 2, power: 2.0 }).unwrap();
        assert_eq!(prod.evaluate(&[0.1, 0.2], &[p(0.0), p(0.0)], &[p(2.0), p(-3.0)]), 36.0);
        assert!(!prod.uses_position());
        let pos = JumpFunctional::from_catalog(JumpCatalog::PositionIndicator { lo: 0.0, hi: 1.0, arity: 1 }).unwrap();
        assert_eq!(pos.evaluate(&[0.1], &[p(0.5)], &[p(9.0)]), 1.0);
        assert_eq!(pos.evaluate(&[0.1], &[p(1.5)], &[p(9.0)]), 0.0);
        assert!(JumpFunctional::from_catalog(JumpCatalog::OrderedCount { arity: 0 }).is_err());
        assert!(JumpFunctional::from_catalog(JumpCatalog::Constant { value: -1.0, arity: 1 }).is_err());
    }

    #[test]
    fn time_factor_is_left_continuous() {
        let g = TimeFactor::Indicator { lo: 0.0, hi: 1.5 };
        assert_eq!(g.evaluate(1.5), 1.0);
        assert_eq!(g.evaluate(1.5000001), 0.0);
        assert_eq!(g.evaluate(0.0), 0.0);
        let f = JumpFunctional::from_catalog(JumpCatalog::Count).unwrap().with_time_factor(&g).unwrap();
        assert_eq!(f.time_breaks(), &[0.0, 1.5]);
        assert!(TimeFactor::Linear { intercept: 1.0, slope: -1.0 }.check_on(2.0).is_err());
    }

    #[test]
    fn catalog_serde_round_trip() {
        let c: JumpCatalog = serde_json::from_str(r#"{"kind":"ordered-count","arity":2}"#).unwrap();
        assert_eq!(c, JumpCatalog::OrderedCount { arity: 2 });
        assert!(serde_json::from_str::<JumpCatalog>(r#"{"kind":"tail-indicator","a":1.0,"extra":1}"#).is_err());
    }
}
