//! Revised primal simplex on `min c.x, A x = b, x >= 0` with an explicit dense
//! basis inverse.
//!
//! Every row starts with its own artificial variable, so the initial basis is
//! the identity. Phase one drives the artificials to zero; in phase two they
//! may not re-enter, and any still basic are pinned at zero (they leave on
//! the first pivot touching their row). Entering variables are priced by the
//! most negative reduced cost over a rotating window of columns; after a run of
//! degenerate pivots the rule falls back to Bland's smallest-index rule, which
//! cannot cycle.

use super::dense::invert_in_place;
use super::SparseColumn;
use crate::error::{Error, Result};

/// Smallest pivot magnitude accepted when refactorizing the basis.
pub const PIVOT_TOL: f64 = 1e-12;
/// Smallest direction entry accepted as a pivot in the ratio test.
pub const RATIO_TOL: f64 = 1e-9;
/// Primal feasibility tolerance (absolute, scaled by `1 + |b|_inf`).
pub const FEAS_TOL: f64 = 1e-9;
/// Dual feasibility tolerance on reduced costs (scaled by the cost magnitude).
pub const OPT_TOL: f64 = 1e-9;

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_BEFORE_BLAND: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Art(usize),
    Col(usize),
}

#[derive(Debug)]
pub(crate) enum PhaseOutcome {
    Optimal,
    /// Column `entering` improves without bound along `direction` (structural space).
    Unbounded { direction: Vec<f64> },
}

pub(crate) struct Simplex {
    m: usize,
    row_sign: Vec<f64>,
    rhs: Vec<f64>,
    cols: Vec<SparseColumn>,
    costs: Vec<f64>,
    basis: Vec<Var>,
    position: Vec<Option<usize>>,
    binv: Vec<f64>,
    x: Vec<f64>,
    pivots_since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
    price_start: usize,
    cost_scale: f64,
    pub iterations: usize,
    pub max_iterations: usize,
}

impl Simplex {
    pub fn new(rhs: &[f64]) -> Self {
        let m = rhs.len();
        let row_sign: Vec<f64> = rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let rhs: Vec<f64> = rhs.iter().map(|b| b.abs()).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Simplex {
            m,
            row_sign,
            x: rhs.clone(),
            rhs,
            cols: Vec::new(),
            costs: Vec::new(),
            basis: (0..m).map(Var::Art).collect(),
            position: Vec::new(),
            binv,
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
            price_start: 0,
            cost_scale: 1.0,
            iterations: 0,
            max_iterations: 1_000_000,
        }
    }

    pub fn add_column(&mut self, col: &SparseColumn, cost: f64) -> usize {
        let signed = SparseColumn {
            rows: col.rows.clone(),
            vals: col
                .rows
                .iter()
                .zip(&col.vals)
                .map(|(&r, &v)| v * self.row_sign[r])
                .collect(),
        };
        self.cols.push(signed);
        self.costs.push(cost);
        self.position.push(None);
        if cost.is_finite() {
            self.cost_scale = self.cost_scale.max(cost.abs());
        }
        self.cols.len() - 1
    }

    fn cost_of(&self, v: Var, phase: Phase) -> f64 {
        match (v, phase) {
            (Var::Art(_), Phase::One) => 1.0,
            (Var::Art(_), Phase::Two) => 0.0,
            (Var::Col(_), Phase::One) => 0.0,
            (Var::Col(j), Phase::Two) => self.costs[j],
        }
    }

    pub fn opt_tol(&self, phase: Phase) -> f64 {
        match phase {
            Phase::One => OPT_TOL,
            Phase::Two => OPT_TOL * self.cost_scale,
        }
    }

    pub fn feas_tol(&self) -> f64 {
        FEAS_TOL * (1.0 + self.rhs.iter().fold(0.0f64, |a, &b| a.max(b)))
    }

    /// Simplex multipliers `c_B B^-1` in the sign-normalized row space.
    fn signed_duals(&self, phase: Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (p, &v) in self.basis.iter().enumerate() {
            let c = self.cost_of(v, phase);
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[p * m..(p + 1) * m];
            for (yj, &b) in y.iter_mut().zip(row) {
                *yj += c * b;
            }
        }
        y
    }

    /// Simplex multipliers for the rows as originally given.
    pub fn duals(&self, phase: Phase) -> Vec<f64> {
        self.signed_duals(phase)
            .into_iter()
            .zip(&self.row_sign)
            .map(|(y, s)| y * s)
            .collect()
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase: Phase) -> f64 {
        let col = &self.cols[j];
        let dot: f64 = col.rows.iter().zip(&col.vals).map(|(&r, &v)| y[r] * v).sum();
        let c = match phase {
            Phase::One => 0.0,
            Phase::Two => self.costs[j],
        };
        c - dot
    }

    fn eligible(&self, j: usize, phase: Phase) -> bool {
        self.position[j].is_none() && (phase == Phase::One || self.costs[j].is_finite())
    }

    fn choose_entering(&mut self, y: &[f64], phase: Phase) -> Option<usize> {
        let n = self.cols.len();
        if n == 0 {
            return None;
        }
        let tol = self.opt_tol(phase);
        if self.bland {
            return (0..n).find(|&j| self.eligible(j, phase) && self.reduced_cost(j, y, phase) < -tol);
        }
        let window = n.min(256.max(n / 4));
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        while scanned < n {
            let j = (self.price_start + scanned) % n;
            scanned += 1;
            if self.eligible(j, phase) {
                let d = self.reduced_cost(j, y, phase);
                if d < -tol && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if scanned % window == 0 && best.is_some() {
                break;
            }
        }
        self.price_start = (self.price_start + scanned) % n;
        best.map(|(j, _)| j)
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col = &self.cols[j];
        let mut w = vec![0.0; m];
        for (p, wp) in w.iter_mut().enumerate() {
            let row = &self.binv[p * m..(p + 1) * m];
            *wp = col.rows.iter().zip(&col.vals).map(|(&r, &v)| row[r] * v).sum();
        }
        w
    }

    fn var_key(&self, v: Var) -> usize {
        match v {
            Var::Art(i) => i,
            Var::Col(j) => self.m + j,
        }
    }

    fn ratio_test(&self, w: &[f64], phase: Phase) -> Option<(usize, f64)> {
        let mut cands: Vec<(usize, f64)> = Vec::new();
        for (p, &wp) in w.iter().enumerate() {
            let pinned = phase == Phase::Two && matches!(self.basis[p], Var::Art(_));
            if pinned {
                if wp.abs() > RATIO_TOL {
                    cands.push((p, 0.0));
                }
            } else if wp > RATIO_TOL {
                cands.push((p, self.x[p].max(0.0) / wp));
            }
        }
        let min_ratio = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        if !min_ratio.is_finite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + min_ratio);
        let ties = cands.into_iter().filter(|c| c.1 <= min_ratio + slack);
        let chosen = if self.bland {
            ties.min_by_key(|&(p, _)| self.var_key(self.basis[p]))
        } else {
            // prefer dropping artificials, then the most stable pivot
            ties.max_by(|a, b| {
                let art_a = matches!(self.basis[a.0], Var::Art(_));
                let art_b = matches!(self.basis[b.0], Var::Art(_));
                art_a
                    .cmp(&art_b)
                    .then(w[a.0].abs().total_cmp(&w[b.0].abs()))
                    .then(b.0.cmp(&a.0))
            })
        };
        chosen.map(|(p, _)| (p, min_ratio))
    }

    fn pivot(&mut self, q: usize, p: usize, w: &[f64], theta: f64) -> Result<()> {
        let m = self.m;
        for (i, xi) in self.x.iter_mut().enumerate() {
            if i != p {
                *xi -= theta * w[i];
                if *xi < 0.0 && *xi > -PIVOT_TOL {
                    *xi = 0.0;
                }
            }
        }
        self.x[p] = theta;
        let wp = w[p];
        let pivot_row: Vec<f64> = self.binv[p * m..(p + 1) * m].iter().map(|v| v / wp).collect();
        for i in 0..m {
            let f = w[i];
            if i == p || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (b, &pr) in row.iter_mut().zip(&pivot_row) {
                *b -= f * pr;
            }
        }
        self.binv[p * m..(p + 1) * m].copy_from_slice(&pivot_row);
        if let Var::Col(old) = self.basis[p] {
            self.position[old] = None;
        }
        self.basis[p] = Var::Col(q);
        self.position[q] = Some(p);
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the basis inverse and the basic values from scratch.
    pub fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (p, &v) in self.basis.iter().enumerate() {
            match v {
                Var::Art(i) => b[i * m + p] = 1.0,
                Var::Col(j) => {
                    let col = &self.cols[j];
                    for (&r, &val) in col.rows.iter().zip(&col.vals) {
                        b[r * m + p] = val;
                    }
                }
            }
        }
        if invert_in_place(&mut b, m, PIVOT_TOL).is_none() {
            return Err(Error::NumericalBreakdown(
                "basis matrix became singular during refactorization".into(),
            ));
        }
        self.binv = b;
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let mut v: f64 = row.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
            if v < 0.0 && v > -self.feas_tol() {
                v = 0.0;
            }
            self.x[p] = v;
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    pub fn solve_phase(&mut self, phase: Phase) -> Result<PhaseOutcome> {
        let mut verified = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::NumericalBreakdown(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let y = self.signed_duals(phase);
            let Some(q) = self.choose_entering(&y, phase) else {
                if verified || self.pivots_since_refactor == 0 {
                    return Ok(PhaseOutcome::Optimal);
                }
                // confirm optimality on a fresh factorization
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;
            let w = self.ftran(q);
            let Some((p, theta)) = self.ratio_test(&w, phase) else {
                if phase == Phase::One {
                    return Err(Error::NumericalBreakdown(
                        "phase one reported an unbounded direction".into(),
                    ));
                }
                let mut direction = vec![0.0; self.cols.len()];
                direction[q] = 1.0;
                for (p, &v) in self.basis.iter().enumerate() {
                    if let Var::Col(j) = v {
                        direction[j] = -w[p];
                    }
                }
                return Ok(PhaseOutcome::Unbounded { direction });
            };
            if w[p].abs() < PIVOT_TOL {
                return Err(Error::NumericalBreakdown(format!(
                    "pivot magnitude {:e} below tolerance",
                    w[p].abs()
                )));
            }
            if theta <= PIVOT_TOL {
                self.degenerate_streak += 1;
                if self.degenerate_streak >= DEGENERATE_BEFORE_BLAND {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
                self.bland = false;
            }
            self.pivot(q, p, &w, theta)?;
            self.iterations += 1;
        }
    }

    /// Sum of basic artificial values (the phase-one objective).
    pub fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.x)
            .filter(|(v, _)| matches!(v, Var::Art(_)))
            .map(|(_, &x)| x)
            .sum()
    }

    /// Values of the structural columns.
    pub fn primal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols.len()];
        for (p, &v) in self.basis.iter().enumerate() {
            if let Var::Col(j) = v {
                out[j] = self.x[p].max(0.0);
            }
        }
        out
    }

    pub fn basic_columns(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.basis.iter().zip(&self.x).filter_map(|(&v, &x)| match v {
            Var::Col(j) => Some((j, x.max(0.0))),
            Var::Art(_) => None,
        })
    }
}
