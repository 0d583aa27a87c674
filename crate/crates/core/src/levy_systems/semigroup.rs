//! Deterministic evaluation of the transition-kernel form of the mixed
//! system in one dimension.
//!
//! Without drift the law of `X_t` is `p_t = e^{−|ν|t} Σ_m (|ν|t)^m q^{*m}/m!`
//! with `q = ν/|ν|`. `q` is discretized on the lattice `hℤ` (cell masses of
//! `[(k−½)h, (k+½)h)`), its convolution powers are computed once, and the
//! series is truncated where the Poisson tail falls below `1e−16`. The value
//!
//! `∫_{u₁<…<u_n≤T} F(u_j, Σ_{i≤j} y_i + Σ_{i<j} ε_i z_i, z_j) Π_j p_{u_j−u_{j−1}}(dy_j) du_j ν(dz_j)`
//!
//! is then a finite sum.

use super::functional::JumpFunctional;
use super::measure::{legendre_pairs, JumpRule, LevyMeasureSpec};
use crate::error::{Error, Result};
use crate::settings::LevyRules;
use crate::space_measure::Point;

struct Lattice {
    step: f64,
    rate: f64,
    /// `powers[m]` is `q^{*m}` starting at lattice index `m·kmin`.
    powers: Vec<Vec<f64>>,
    kmin: i64,
}

impl Lattice {
    fn new(levy: &LevyMeasureSpec, horizon: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice step must be positive, got {step}")));
        }
        let w = levy.window();
        let (lo, hi) = (w.lo()[0], w.hi()[0]);
        let kmin = (lo / step).round() as i64;
        let kmax = (hi / step).round() as i64;
        let mass = levy.mass();
        let q: Vec<f64> = (kmin..=kmax)
            .map(|k| {
                let c = k as f64 * step;
                levy.interval_mass(c - 0.5 * step, c + 0.5 * step).map(|m| m / mass)
            })
            .collect::<Result<_>>()?;
        let lt = mass * horizon;
        let m_max = (lt + 12.0 * lt.sqrt() + 12.0).ceil() as usize;
        let mut powers = vec![vec![1.0]];
        for m in 1..=m_max {
            let prev = &powers[m - 1];
            let mut next = vec![0.0; prev.len() + q.len() - 1];
            for (i, a) in prev.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (k, b) in q.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            powers.push(next);
        }
        Ok(Self {
            step,
            rate: mass,
            powers,
            kmin,
        })
    }

    /// Lattice points and probabilities of `p_t`, dropping entries below `1e−16`.
    fn kernel(&self, t: f64) -> Vec<(f64, f64)> {
        let m_max = self.powers.len() - 1;
        let base = (m_max as i64 * self.kmin).min(0);
        let top = self
            .powers
            .iter()
            .enumerate()
            .map(|(m, p)| m as i64 * self.kmin + p.len() as i64 - 1)
            .max()
            .unwrap_or(0);
        let mut dense = vec![0.0; (top - base + 1) as usize];
        let lt = self.rate * t;
        let mut weight = (-lt).exp();
        for (m, p) in self.powers.iter().enumerate() {
            if m > 0 {
                weight *= lt / m as f64;
            }
            let offset = (m as i64 * self.kmin - base) as usize;
            for (i, v) in p.iter().enumerate() {
                dense[offset + i] += weight * v;
            }
        }
        dense
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 1e-16)
            .map(|(i, p)| ((base + i as i64) as f64 * self.step, *p))
            .collect()
    }
}

pub(crate) fn semigroup_value(
    f: &JumpFunctional,
    epsilon: &[bool],
    levy: &LevyMeasureSpec,
    horizon: f64,
    rules: &LevyRules,
) -> Result<f64> {
    if levy.dim() != 1 {
        return Err(Error::InvalidParameter("the semigroup evaluator is one-dimensional".into()));
    }
    let lattice = if f.uses_position() {
        Some(Lattice::new(levy, horizon, rules.lattice_step)?)
    } else {
        None
    };
    let full = levy.jump_rule(rules.jump_nodes, f.jump_breaks())?;
    let scalar = JumpRule {
        points: vec![full.points[0].clone()],
        weights: vec![levy.mass()],
    };
    let n = f.arity();
    let eval = Evaluator {
        f,
        epsilon,
        horizon,
        lattice: lattice.as_ref(),
        full: &full,
        scalar: &scalar,
        time_pairs: legendre_pairs(rules.time_nodes)?,
        cap: rules.max_evaluations,
    };
    let mut state = State {
        u: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        evaluations: 0,
    };
    eval.visit(&mut state, 0.0, 0.0, 1.0)
}

struct Evaluator<'a> {
    f: &'a JumpFunctional,
    epsilon: &'a [bool],
    horizon: f64,
    lattice: Option<&'a Lattice>,
    full: &'a JumpRule,
    scalar: &'a JumpRule,
    time_pairs: Vec<(f64, f64)>,
    cap: u64,
}

struct State {
    u: Vec<f64>,
    x: Vec<Point>,
    z: Vec<Point>,
    evaluations: u64,
}

impl Evaluator<'_> {
    fn visit(&self, s: &mut State, lo: f64, base: f64, weight: f64) -> Result<f64> {
        let j = s.u.len();
        let n = self.f.arity();
        if j == n {
            s.evaluations += 1;
            if s.evaluations > self.cap {
                return Err(Error::QuadratureCap {
                    evaluations: s.evaluations as u128,
                    cap: self.cap,
                });
            }
            return Ok(weight * self.f.evaluate(&s.u, &s.x, &s.z));
        }
        let mut breaks = vec![lo, self.horizon];
        breaks.extend(self.f.time_breaks().iter().copied().filter(|t| *t > lo && *t < self.horizon));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let reads_shift = self.epsilon[j] && self.f.uses_position() && j + 1 < n;
        let rule = if self.f.uses_jump() || reads_shift { self.full } else { self.scalar };
        let mut total = 0.0;
        for piece in breaks.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            if b <= a {
                continue;
            }
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for &(t, wt) in &self.time_pairs {
                let u = mid + half * t;
                let kernel = match self.lattice {
                    Some(l) => l.kernel(u - lo),
                    None => vec![(0.0, 1.0)],
                };
                for &(y, py) in &kernel {
                    let x = base + y;
                    for (z, wz) in rule.points.iter().zip(&rule.weights) {
                        let next = if self.epsilon[j] { x + z[0] } else { x };
                        s.u.push(u);
                        s.x.push(Point::from_slice(&[x]));
                        s.z.push(z.clone());
                        let v = self.visit(s, u, next, weight * half * wt * py * wz);
                        s.u.pop();
                        s.x.pop();
                        s.z.pop();
                        total += v?;
                    }
                }
            }
        }
        Ok(total)
    }
}
