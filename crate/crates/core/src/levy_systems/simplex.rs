//! Pathwise integrals over the time simplex `0 < u₁ < … < u_n ≤ t`.
//!
//! Each coordinate is either an atom coordinate (a sum over the path's jumps)
//! or a σ-coordinate (an integral against `du ν(dz)`). Time integrals use
//! Gauss–Legendre on pieces split at the functional's time breaks and, when
//! the functional reads positions, at the path's jump times; the jump integral
//! uses the measure's node rule or, when nothing depends on `z`, the scalar
//! `|ν|`.

use smallvec::SmallVec;

use super::functional::JumpFunctional;
use super::measure::{legendre_pairs, JumpRule, LevyMeasureSpec};
use super::path::PathRecord;
use crate::error::{Error, Result};
use crate::settings::LevyRules;
use crate::space_measure::Point;

pub(crate) struct SimplexIntegrator<'a> {
    f: &'a JumpFunctional,
    full_rule: JumpRule,
    scalar_rule: JumpRule,
    time_pairs: Vec<(f64, f64)>,
    cap: u64,
}

struct Walk<'p> {
    path: &'p PathRecord,
    atoms: &'p [bool],
    shifts: &'p [bool],
    until: f64,
    u: SmallVec<[f64; 3]>,
    x: SmallVec<[Point; 3]>,
    z: SmallVec<[Point; 3]>,
    evaluations: u64,
    path_index: usize,
}

impl<'a> SimplexIntegrator<'a> {
    pub(crate) fn new(f: &'a JumpFunctional, levy: &LevyMeasureSpec, rules: &LevyRules) -> Result<Self> {
        let full_rule = levy.jump_rule(rules.jump_nodes, f.jump_breaks())?;
        let origin: Point = std::iter::repeat_n(0.0, levy.dim()).collect();
        let scalar_rule = JumpRule {
            points: vec![full_rule.points.first().cloned().unwrap_or(origin)],
            weights: vec![levy.mass()],
        };
        Ok(Self {
            f,
            full_rule,
            scalar_rule,
            time_pairs: legendre_pairs(rules.time_nodes)?,
            cap: rules.max_evaluations,
        })
    }

    /// For functionals that ignore positions, a σ-only integral is the same on
    /// every path; this evaluates it once on the jump-free path.
    pub(crate) fn path_free_integral(&self, dim: usize, drift: &[f64], shifts: &[bool], until: f64) -> Result<Option<f64>> {
        if self.f.uses_position() {
            return Ok(None);
        }
        let zero: Point = std::iter::repeat_n(0.0, dim).collect();
        let quiet = PathRecord::new(until, zero, Point::from_slice(drift), Vec::new(), Vec::new())?;
        let sigma = vec![false; self.f.arity()];
        self.integrate(&quiet, &sigma, shifts, until, 0).map(Some)
    }

    /// `∫_{u₁<…<u_n≤until} F(u_j, X_{u_j−} + Σ_{i<j} shift_i z_i, z_j) Π_j m_j(du_j dz_j)`
    /// where `m_j` is the jump measure of the path when `atoms[j]` and
    /// `du ν(dz)` otherwise.
    pub(crate) fn integrate(
        &self,
        path: &PathRecord,
        atoms: &[bool],
        shifts: &[bool],
        until: f64,
        path_index: usize,
    ) -> Result<f64> {
        let n = self.f.arity();
        if atoms.len() != n || shifts.len() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: atoms.len().min(shifts.len()),
            });
        }
        let mut walk = Walk {
            path,
            atoms,
            shifts,
            until: until.min(path.horizon()),
            u: SmallVec::new(),
            x: SmallVec::new(),
            z: SmallVec::new(),
            evaluations: 0,
            path_index,
        };
        let zero: Point = std::iter::repeat_n(0.0, path.dim()).collect();
        self.visit(&mut walk, 0.0, &zero, 1.0)
    }

    fn rule_for(&self, walk: &Walk<'_>, j: usize) -> &JumpRule {
        let later_reads_shift = walk.shifts[j] && self.f.uses_position() && j + 1 < walk.atoms.len();
        if self.f.uses_jump() || later_reads_shift {
            &self.full_rule
        } else {
            &self.scalar_rule
        }
    }

    fn visit(&self, walk: &mut Walk<'_>, lo: f64, shift: &Point, weight: f64) -> Result<f64> {
        let j = walk.u.len();
        if j == self.f.arity() {
            walk.evaluations += 1;
            if walk.evaluations > self.cap {
                return Err(Error::SimplexCap {
                    cap: self.cap,
                    path: walk.path_index,
                });
            }
            return Ok(weight * self.f.evaluate(&walk.u, &walk.x, &walk.z));
        }
        let mut total = 0.0;
        if walk.atoms[j] {
            let path = walk.path;
            let first = path.count_up_to(lo);
            let last = path.count_up_to(walk.until);
            for i in first..last {
                let u = path.times()[i];
                let x = add(&path.position_with(u, i), shift);
                let z = path.sizes()[i].clone();
                total += self.descend(walk, j, u, x, z, shift, weight)?;
            }
        } else {
            let breaks = self.time_breaks(walk, lo);
            let rule = self.rule_for(walk, j);
            for piece in breaks.windows(2) {
                let (a, b) = (piece[0], piece[1]);
                if b <= a {
                    continue;
                }
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(t, wt) in &self.time_pairs {
                    let u = mid + half * t;
                    let x = add(&walk.path.position_before(u), shift);
                    for (z, wz) in rule.points.iter().zip(&rule.weights) {
                        total += self.descend(walk, j, u, x.clone(), z.clone(), shift, weight * half * wt * wz)?;
                    }
                }
            }
        }
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        walk: &mut Walk<'_>,
        j: usize,
        u: f64,
        x: Point,
        z: Point,
        shift: &Point,
        weight: f64,
    ) -> Result<f64> {
        let next_shift = if walk.shifts[j] { add(shift, &z) } else { shift.clone() };
        walk.u.push(u);
        walk.x.push(x);
        walk.z.push(z);
        let value = self.visit(walk, u, &next_shift, weight);
        walk.u.pop();
        walk.x.pop();
        walk.z.pop();
        value
    }

    fn time_breaks(&self, walk: &Walk<'_>, lo: f64) -> Vec<f64> {
        let hi = walk.until;
        let mut breaks = vec![lo, hi];
        breaks.extend(self.f.time_breaks().iter().copied().filter(|t| *t > lo && *t < hi));
        if self.f.uses_position() {
            breaks.extend(walk.path.times().iter().copied().filter(|t| *t > lo && *t < hi));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }
}

fn add(a: &Point, b: &Point) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
