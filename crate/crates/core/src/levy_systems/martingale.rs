//! The compensated jump sum `M_t = Σ_{u ≤ t} F − ∫₀ᵗ∫ F ν(dz) du`.

use super::functional::JumpFunctional;
use super::measure::LevyMeasureSpec;
use super::path::simulate_path;
use super::simplex::SimplexIntegrator;
use super::{check_common, column};
use crate::error::{Error, Result};
use crate::mc_stats::{run_replicates, Estimate, StreamFamily};
use crate::report::{Comparison, VerificationReport};
use crate::settings::Budgets;

/// Bounded functionals of the path on `[0, s]` used to probe
/// `E[M_t − M_s | path up to s] = 0` through covariances.
const PREFIX_PROBES: [&str; 3] = ["increment-vs-positive-part", "increment-vs-jump-count", "increment-vs-cosine"];

/// Checks, for a one-fold functional and `s = t/2`:
///
/// * `E M_t = 0`;
/// * `E M_t² = E ∫₀ᵗ∫ F² ν(dz) du`;
/// * `E [M]_t = E ⟨M⟩_t` with `[M]_t = Σ F²` and `⟨M⟩_t = ∫₀ᵗ∫ F² ν(dz) du`;
/// * `E[(M_t − M_s) h] = 0` for `h ∈ {𝟙{X_s > 0}, min(N_s, 4)/4, cos X_s}`
///   (first coordinate of `X_s`).
pub fn martingale_checks(
    f: &JumpFunctional,
    levy: &LevyMeasureSpec,
    drift: &[f64],
    t: f64,
    budgets: &Budgets,
) -> Result<VerificationReport> {
    check_common(levy, drift, t)?;
    if f.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            got: f.arity(),
        });
    }
    let squared = f.powered(2);
    let first = SimplexIntegrator::new(f, levy, &budgets.levy)?;
    let second = SimplexIntegrator::new(&squared, levy, &budgets.levy)?;
    let paths = StreamFamily::new(budgets.seed, &budgets.stream_name("levy/martingale"));
    let s = 0.5 * t;
    let (jump, sigma) = ([true], [false]);
    let d = levy.dim();
    let fixed = [
        first.path_free_integral(d, drift, &sigma, t)?,
        first.path_free_integral(d, drift, &sigma, s)?,
        second.path_free_integral(d, drift, &sigma, t)?,
    ];
    let rows = run_replicates(budgets.replicates, budgets.workers, |i| {
        let path = simulate_path(levy, drift, t, &mut paths.stream(i as u64))?;
        let sigma_part = |which: &SimplexIntegrator<'_>, cached: Option<f64>, until: f64| match cached {
            Some(v) => Ok(v),
            None => which.integrate(&path, &sigma, &sigma, until, i),
        };
        let m_t = first.integrate(&path, &jump, &sigma, t, i)? - sigma_part(&first, fixed[0], t)?;
        let m_s = first.integrate(&path, &jump, &sigma, s, i)? - sigma_part(&first, fixed[1], s)?;
        let bracket = second.integrate(&path, &jump, &sigma, t, i)?;
        let compensator = sigma_part(&second, fixed[2], t)?;
        let x_s = path.position_at(s)[0];
        let probes = [
            if x_s > 0.0 { 1.0 } else { 0.0 },
            path.count_up_to(s).min(4) as f64 / 4.0,
            x_s.cos(),
        ];
        let inc = m_t - m_s;
        Ok([
            m_t,
            m_t * m_t,
            bracket,
            compensator,
            inc * probes[0],
            inc * probes[1],
            inc * probes[2],
        ])
    })?;
    let mean = column(&rows, 0)?;
    if !column(&rows, 3)?.mean.is_finite() {
        return Err(Error::InvalidParameter("E ∫∫F² is not finite".into()));
    }
    let zero = Estimate::exact(0.0);
    let gate = budgets.gate_for(mean.mean);
    let mut report = VerificationReport::new("martingale", mean, zero, gate);
    let second_moment = column(&rows, 1)?;
    let bracket = column(&rows, 2)?;
    let compensator = column(&rows, 3)?;
    let g = budgets.gate_for(second_moment.mean);
    report.push_comparison(Comparison::new("second-moment", second_moment, compensator, g));
    let g = budgets.gate_for(bracket.mean);
    report.push_comparison(Comparison::new("bracket", bracket, compensator, g));
    for (c, name) in PREFIX_PROBES.iter().enumerate() {
        let probe = column(&rows, 4 + c)?;
        let g = budgets.gate_for(probe.mean);
        report.push_comparison(Comparison::new(*name, probe, zero, g));
    }
    report.push_auxiliary("predictable-variation", compensator);
    report.push_note(format!(
        "functional {}, |nu| = {}, t = {t}, s = {s}, {} paths",
        f.label(),
        levy.mass(),
        budgets.replicates
    ));
    Ok(report)
}
