//! Compound Poisson processes and the identities relating sums over their
//! jumps to integrals against `du ν(dz)`.
//!
//! Paths are finite-activity: `|ν| < ∞`, jumps arrive at Poisson times, and an
//! optional deterministic drift `b` is added. Every functional is supported in
//! `u ≤ T`; identities over `(0, ∞)` are verified in this truncated form.
//!
//! * [`levy_system_simple`]: `E Σ_u F(u, X_{u−}, X_u) = E ∫∫ F(u, X_u, X_u + z) ν(dz) du`.
//! * [`levy_system_general`]: the mixed n-fold version over the time simplex,
//!   where jump coordinates (`ε_i = 1`) shift later positions on the
//!   right-hand side.
//! * [`predictable_factor_check`]: the simple system with a deterministic
//!   left-continuous factor `g(u)`.
//! * [`exit_law_check`]: the joint law of exit time and pre/post-exit
//!   positions against the killed kernel.
//! * [`martingale_checks`]: mean, variance and brackets of the compensated sum.

mod exit_law;
pub mod functional;
mod martingale;
pub mod measure;
pub mod path;
mod semigroup;
mod simplex;

pub use exit_law::{exit_law_check, ExitLawSpec};
pub use functional::{JumpArg, JumpCatalog, JumpFn, JumpForm, JumpFunctional, TimeFactor};
pub use martingale::martingale_checks;
pub use measure::{JumpRule, LevyMeasureConfig, LevyMeasureSpec};
pub use path::{simulate_path, simulate_path_from, PathRecord, PathSummary};

use crate::configurations::EpsilonVector;
use crate::error::{Error, Result};
use crate::mc_stats::{aggregate, run_replicates, Estimate, StreamFamily};
use crate::report::{Comparison, VerificationReport};
use crate::settings::{Budgets, StreamPolicy};
use simplex::SimplexIntegrator;

/// Largest arity accepted by [`levy_system_general`].
pub const MAX_SYSTEM_ARITY: usize = 3;

/// Stream names for left- and right-hand-side paths.
pub(crate) fn path_streams(budgets: &Budgets) -> (StreamFamily, StreamFamily) {
    match budgets.streams {
        StreamPolicy::Independent => (
            StreamFamily::new(budgets.seed, &budgets.stream_name("levy/lhs")),
            StreamFamily::new(budgets.seed, &budgets.stream_name("levy/rhs")),
        ),
        StreamPolicy::Common => {
            let shared = StreamFamily::new(budgets.seed, &budgets.stream_name("levy/paths"));
            (shared.clone(), shared)
        }
    }
}

pub(crate) fn check_common(levy: &LevyMeasureSpec, drift: &[f64], horizon: f64) -> Result<()> {
    if drift.len() != levy.dim() {
        return Err(Error::ArityMismatch {
            expected: levy.dim(),
            got: drift.len(),
        });
    }
    if drift.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("drift must be finite".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be finite and positive, got {horizon}")));
    }
    Ok(())
}

/// Column `c` of per-path rows.
pub(crate) fn column<const W: usize>(rows: &[[f64; W]], c: usize) -> Result<Estimate> {
    let values: Vec<f64> = rows.iter().map(|r| r[c]).collect();
    aggregate(&values)
}

fn system_report(
    identity: &str,
    f: &JumpFunctional,
    epsilon: &[bool],
    levy: &LevyMeasureSpec,
    drift: &[f64],
    horizon: f64,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    check_common(levy, drift, horizon)?;
    let n = f.arity();
    if epsilon.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: epsilon.len(),
        });
    }
    if n > MAX_SYSTEM_ARITY {
        return Err(Error::InvalidParameter(format!(
            "arity {n} exceeds the supported maximum {MAX_SYSTEM_ARITY}"
        )));
    }
    let integrator = SimplexIntegrator::new(f, levy, &budgets.levy)?;
    let no_shift = vec![false; n];
    let sigma = vec![false; n];
    let (lhs_paths, rhs_paths) = path_streams(budgets);
    let common = budgets.streams == StreamPolicy::Common;
    let fixed_rhs = integrator.path_free_integral(levy.dim(), drift, epsilon, horizon)?;
    let rows = run_replicates(budgets.replicates, budgets.workers, |i| {
        let path = simulate_path(levy, drift, horizon, &mut lhs_paths.stream(i as u64))?;
        let lhs = integrator.integrate(&path, epsilon, &no_shift, horizon, i)?;
        let rhs = if let Some(v) = fixed_rhs {
            v
        } else if common {
            integrator.integrate(&path, &sigma, epsilon, horizon, i)?
        } else {
            let other = simulate_path(levy, drift, horizon, &mut rhs_paths.stream(i as u64))?;
            integrator.integrate(&other, &sigma, epsilon, horizon, i)?
        };
        Ok([lhs, rhs, path.jump_count() as f64])
    })?;
    let lhs = column(&rows, 0)?;
    let rhs = column(&rows, 1)?;
    let gate = budgets.gate_for(lhs.mean);
    let mut report = VerificationReport::new(identity, lhs, rhs, gate);
    report.push_auxiliary("jump-count", column(&rows, 2)?);
    report.push_note(format!(
        "functional {}, epsilon {}, |nu| = {}, horizon {}, {} paths",
        f.label(),
        epsilon.iter().map(|e| if *e { '1' } else { '0' }).collect::<String>(),
        levy.mass(),
        horizon,
        budgets.replicates
    ));
    let applies = levy.dim() == 1 && drift.iter().all(|b| *b == 0.0);
    if budgets.levy.semigroup && applies {
        match semigroup::semigroup_value(f, epsilon, levy, horizon, &budgets.levy) {
            Ok(v) => {
                let exact = Estimate::exact(v);
                report.push_auxiliary("semigroup", exact);
                report.push_comparison(Comparison::new("lhs-vs-semigroup", lhs, exact, gate));
                report.push_comparison(Comparison::new("rhs-vs-semigroup", rhs, exact, gate));
            }
            Err(Error::QuadratureCap { evaluations, cap }) => report.push_note(format!(
                "transition-kernel evaluator skipped: more than {cap} evaluations needed (reached {evaluations})"
            )),
            Err(e) => return Err(e),
        }
    } else if budgets.levy.semigroup {
        report.push_note("transition-kernel evaluator skipped: it needs d = 1 and zero drift");
    }
    Ok(report)
}

/// `E Σ_{u ≤ T} F(u, X_{u−}, X_u)` against `E ∫₀ᵀ∫ F(u, X_u, X_u + z) ν(dz) du`.
pub fn levy_system_simple(
    f: &JumpFunctional,
    levy: &LevyMeasureSpec,
    drift: &[f64],
    horizon: f64,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    if f.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            got: f.arity(),
        });
    }
    system_report("levy-system-simple", f, &[true], levy, drift, horizon, budgets)
}

/// The mixed n-fold system over `0 < u₁ < … < u_n ≤ T`.
///
/// Left side: coordinates with `ε_i = 1` run over the path's jumps, the others
/// integrate `du ν(dz)`. Right side: every coordinate integrates `du ν(dz)` and
/// the position at `u_j` is `X_{u_j−} + Σ_{i<j} ε_i z_i`. In one dimension
/// without drift a third, deterministic evaluator uses the transition kernel.
pub fn levy_system_general(
    f: &JumpFunctional,
    epsilon: &EpsilonVector,
    levy: &LevyMeasureSpec,
    drift: &[f64],
    horizon: f64,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    system_report("levy-system-general", f, epsilon.entries(), levy, drift, horizon, budgets)
}

/// The simple system for `g(u)·F`, `g` deterministic and left-continuous.
pub fn predictable_factor_check(
    g: &TimeFactor,
    f: &JumpFunctional,
    levy: &LevyMeasureSpec,
    drift: &[f64],
    horizon: f64,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    g.check_on(horizon)?;
    let weighted = f.with_time_factor(g)?;
    system_report("predictable-factor", &weighted, &[true], levy, drift, horizon, budgets)
}

/// Summaries of the first `count` left-hand-side paths of a scenario.
pub fn path_summaries(
    levy: &LevyMeasureSpec,
    drift: &[f64],
    horizon: f64,
    budgets: &Budgets,
    count: usize,
) -> Result<Vec<PathSummary>> {
    check_common(levy, drift, horizon)?;
    let (paths, _) = path_streams(budgets);
    run_replicates(count, budgets.workers, |i| {
        let path = simulate_path(levy, drift, horizon, &mut paths.stream(i as u64))?;
        Ok(PathSummary::of(i, &path))
    })
}
