//! Column generation for `N`-marginal transport on `m` support points.
//!
//! The full problem has `m^N` columns, one per tuple of support indices, and
//! `N m` marginal rows. One row per marginal beyond the first is linearly
//! dependent on the others (every marginal carries unit mass); we drop the
//! row of the last support point of marginals `2..N`, which pins the matching
//! potentials to zero and fixes the additive gauge of the dual.

use std::collections::HashMap;

use rayon::prelude::*;

use super::simplex::{Phase, PhaseOutcome, Simplex};
use super::SparseColumn;
use crate::error::{Error, Result};
use crate::io::compensated_sum;

pub const DEFAULT_COLUMNS_PER_ROUND: usize = 50;

/// Largest tuple space the exhaustive pricing scan will enumerate.
pub const MAX_TUPLES: u64 = 1 << 32;

const SCAN_CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone)]
pub struct ColumnGenOptions {
    /// Most violated columns added to the master problem per round.
    pub columns_per_round: usize,
    /// Relative reduced-cost tolerance (scaled by the largest finite cost).
    pub price_tol: f64,
    pub max_rounds: usize,
}

impl Default for ColumnGenOptions {
    fn default() -> Self {
        ColumnGenOptions {
            columns_per_round: DEFAULT_COLUMNS_PER_ROUND,
            price_tol: 1e-9,
            max_rounds: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricedColumn {
    pub tuple: Vec<usize>,
    pub reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Positive-weight tuples in lexicographic order.
    pub plan: Vec<(Vec<usize>, f64)>,
    /// `potentials[i][k]` is the dual variable of marginal `i` at support point `k`.
    pub potentials: Vec<Vec<f64>>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub rounds: usize,
    pub iterations: usize,
    pub columns: usize,
    /// Largest finite tuple cost, the scale of the reduced-cost tolerance.
    pub cost_scale: f64,
}

fn tuple_count(m: usize, n: usize) -> Result<u64> {
    (m as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_TUPLES)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{m}^{n} tuples exceed the exhaustive pricing limit {MAX_TUPLES}"
            ))
        })
}

fn decode(mut flat: u64, m: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (flat % m as u64) as usize;
        flat /= m as u64;
    }
}

fn advance(tuple: &mut [usize], m: usize) {
    for slot in tuple.iter_mut().rev() {
        *slot += 1;
        if *slot < m {
            return;
        }
        *slot = 0;
    }
}

/// Visits every tuple in lexicographic order (in parallel chunks) and keeps
/// those for which `score` returns a value, preserving tuple order.
fn scan_tuples<F>(m: usize, n: usize, score: F) -> Result<Vec<PricedColumn>>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    let total = tuple_count(m, n)?;
    let chunks = total.div_ceil(SCAN_CHUNK);
    let found: Vec<Vec<PricedColumn>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * SCAN_CHUNK;
            let end = (start + SCAN_CHUNK).min(total);
            let mut tuple = vec![0usize; n];
            decode(start, m, &mut tuple);
            let mut hits = Vec::new();
            for _ in start..end {
                if let Some(rc) = score(&tuple) {
                    hits.push(PricedColumn {
                        tuple: tuple.clone(),
                        reduced_cost: rc,
                    });
                }
                advance(&mut tuple, m);
            }
            hits
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// Every tuple whose reduced cost `cost(t) - sum_i u_i(t_i)` is below `-tol`,
/// in lexicographic tuple order. An empty result certifies that the
/// potentials are dual feasible. Tuples of infinite cost are skipped.
pub fn price_columns(
    potentials: &[Vec<f64>],
    cost: &(dyn Fn(&[usize]) -> f64 + Sync),
    m: usize,
    tol: f64,
) -> Result<Vec<PricedColumn>> {
    if potentials.iter().any(|u| u.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "potentials must have {m} entries per marginal"
        )));
    }
    scan_tuples(m, potentials.len(), |t| {
        let c = cost(t);
        if !c.is_finite() {
            return None;
        }
        let rc = c - t.iter().zip(potentials).map(|(&k, u)| u[k]).sum::<f64>();
        (rc < -tol).then_some(rc)
    })
}

/// Phase-one pricing: finite-cost tuples whose potential sum exceeds `tol`.
fn price_feasibility(
    potentials: &[Vec<f64>],
    cost: &(dyn Fn(&[usize]) -> f64 + Sync),
    m: usize,
    tol: f64,
) -> Result<Vec<PricedColumn>> {
    scan_tuples(m, potentials.len(), |t| {
        if !cost(t).is_finite() {
            return None;
        }
        let rc = -t.iter().zip(potentials).map(|(&k, u)| u[k]).sum::<f64>();
        (rc < -tol).then_some(rc)
    })
}

/// Greedy coupling that walks all marginals simultaneously, each along the
/// support order rotated by `i m / N`. The rotation keeps the tuples off the
/// diagonal when the weights are balanced. Returns at most `N m - N + 1` tuples.
pub fn northwest_corner(weights: &[f64], n: usize) -> Vec<(Vec<usize>, f64)> {
    let m = weights.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let order = |i: usize, k: usize| (k + i * m / n) % m;
    let mut remaining: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..m).map(|k| weights[order(i, k)]).collect())
        .collect();
    let mut ptr = vec![0usize; n];
    let eps = 1e-14 * weights.iter().fold(0.0f64, |a, &w| a.max(w));
    let mut plan = Vec::new();
    while ptr.iter().all(|&p| p < m) {
        let (argmin, w) = (0..n)
            .map(|i| (i, remaining[i][ptr[i]]))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let tuple: Vec<usize> = (0..n).map(|i| order(i, ptr[i])).collect();
        if w > 0.0 {
            plan.push((tuple, w));
        }
        for i in 0..n {
            remaining[i][ptr[i]] -= w;
            if i == argmin || remaining[i][ptr[i]] <= eps {
                ptr[i] += 1;
            }
        }
    }
    plan
}

struct Master {
    simplex: Simplex,
    pool: HashMap<Vec<usize>, usize>,
    tuples: Vec<Vec<usize>>,
    m: usize,
    n: usize,
}

impl Master {
    fn row_of(&self, marginal: usize, k: usize) -> Option<usize> {
        let m = self.m;
        if marginal == 0 {
            Some(k)
        } else if k + 1 < m {
            Some(m + (marginal - 1) * (m - 1) + k)
        } else {
            None
        }
    }

    fn add(&mut self, tuple: &[usize], cost: f64) -> bool {
        if self.pool.contains_key(tuple) {
            return false;
        }
        let rows: Vec<usize> = tuple
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| self.row_of(i, k))
            .collect();
        let vals = vec![1.0; rows.len()];
        let j = self.simplex.add_column(&SparseColumn::new(rows, vals), cost);
        self.pool.insert(tuple.to_vec(), j);
        self.tuples.push(tuple.to_vec());
        true
    }

    fn potentials(&self, phase: Phase) -> Vec<Vec<f64>> {
        let y = self.simplex.duals(phase);
        (0..self.n)
            .map(|i| {
                (0..self.m)
                    .map(|k| self.row_of(i, k).map_or(0.0, |r| y[r]))
                    .collect()
            })
            .collect()
    }
}

/// Selects up to `limit` of the most violated candidates not already pooled.
fn most_violated(mut cands: Vec<PricedColumn>, limit: usize) -> Vec<PricedColumn> {
    // stable: equal reduced costs keep lexicographic order
    cands.sort_by(|a, b| a.reduced_cost.total_cmp(&b.reduced_cost));
    cands.truncate(limit);
    cands
}

/// Solves the `N`-marginal transport problem with all marginals equal to
/// `weights` by column generation over the `m^N` tuples.
///
/// `seed` tuples join the initial column pool together with a rotated
/// northwest-corner coupling, so the restricted master is feasible from the
/// first round whenever the cost is finite everywhere.
pub fn solve_transport(
    weights: &[f64],
    n: usize,
    cost: &(dyn Fn(&[usize]) -> f64 + Sync),
    seed: &[Vec<usize>],
    options: &ColumnGenOptions,
) -> Result<TransportSolution> {
    let m = weights.len();
    if m == 0 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "transport needs support points and at least two marginals (m = {m}, N = {n})"
        )));
    }
    if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    tuple_count(m, n)?;

    let cost_scale = scan_tuples(m, n, |t| {
        let c = cost(t);
        c.is_finite().then_some(c.abs())
    })?
    .into_iter()
    .map(|p| p.reduced_cost)
    .fold(1.0f64, f64::max);
    let tol = options.price_tol * cost_scale;

    let mut rhs: Vec<f64> = weights.to_vec();
    for _ in 1..n {
        rhs.extend_from_slice(&weights[..m - 1]);
    }
    let mut master = Master {
        simplex: Simplex::new(&rhs),
        pool: HashMap::new(),
        tuples: Vec::new(),
        m,
        n,
    };
    master.simplex.max_iterations = 10_000_000;

    for t in seed.iter().chain(northwest_corner(weights, n).iter().map(|(t, _)| t)) {
        if t.len() != n || t.iter().any(|&k| k >= m) {
            return Err(Error::DimensionMismatch(format!(
                "seed tuple {t:?} does not index {n} marginals over {m} points"
            )));
        }
        let c = cost(t);
        if c.is_finite() {
            master.add(t, c);
        }
    }

    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > options.max_rounds {
            return Err(Error::NumericalBreakdown("column generation round limit".into()));
        }
        master.simplex.solve_phase(Phase::One)?;
        if master.simplex.infeasibility() <= master.simplex.feas_tol() {
            break;
        }
        let u = master.potentials(Phase::One);
        let cands = price_feasibility(&u, cost, m, 1e-9)?;
        let mut added = false;
        for c in most_violated(cands, options.columns_per_round) {
            added |= master.add(&c.tuple, cost(&c.tuple));
        }
        if !added {
            return Err(Error::NoFiniteCostPlan);
        }
    }

    let potentials = loop {
        rounds += 1;
        if rounds > options.max_rounds {
            return Err(Error::NumericalBreakdown("column generation round limit".into()));
        }
        match master.simplex.solve_phase(Phase::Two)? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded { .. } => {
                return Err(Error::NumericalBreakdown(
                    "transport master problem reported unbounded".into(),
                ))
            }
        }
        let u = master.potentials(Phase::Two);
        let cands = price_columns(&u, cost, m, tol)?;
        let mut added = false;
        for c in most_violated(cands, options.columns_per_round) {
            added |= master.add(&c.tuple, cost(&c.tuple));
        }
        if !added {
            break u;
        }
    };

    let mut plan: Vec<(Vec<usize>, f64)> = master
        .simplex
        .basic_columns()
        .filter(|&(_, x)| x > 0.0)
        .map(|(j, x)| (master.tuples[j].clone(), x))
        .collect();
    plan.sort_by(|a, b| a.0.cmp(&b.0));
    let primal_value = compensated_sum(plan.iter().map(|(t, x)| x * cost(t)));
    let dual_value = compensated_sum(
        potentials
            .iter()
            .flat_map(|u| u.iter().zip(weights).map(|(a, w)| a * w)),
    );
    Ok(TransportSolution {
        plan,
        potentials,
        primal_value,
        dual_value,
        rounds,
        iterations: master.simplex.iterations,
        columns: master.tuples.len(),
        cost_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potentials_price_nothing() {
        let cost = |t: &[usize]| (t[0] + 2 * t[1]) as f64;
        let u = vec![vec![0.0; 3]; 2];
        assert!(price_columns(&u, &cost, 3, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn single_violation() {
        // u_1 = (1, 0), u_2 = 0; only (0, 0) has cost 0.5 < 1
        let cost = |t: &[usize]| if t == [0, 0] { 0.5 } else { 2.0 };
        let u = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let found = price_columns(&u, &cost, 2, 1e-9).unwrap();
        assert_eq!(
            found,
            vec![PricedColumn {
                tuple: vec![0, 0],
                reduced_cost: -0.5
            }]
        );
    }

    #[test]
    fn scan_order_is_lexicographic() {
        let all = scan_tuples(3, 3, |_| Some(0.0)).unwrap();
        assert_eq!(all.len(), 27);
        assert!(all.windows(2).all(|w| w[0].tuple < w[1].tuple));
        let big = scan_tuples(5, 7, |t| (t[0] == 4 && t[6] == 0).then_some(1.0)).unwrap();
        assert_eq!(big.len(), 5usize.pow(5));
        assert!(big.windows(2).all(|w| w[0].tuple < w[1].tuple));
    }

    #[test]
    fn northwest_corner_is_a_coupling() {
        let w = [0.1, 0.2, 0.3, 0.4];
        for n in 2..=4 {
            let plan = northwest_corner(&w, n);
            assert!(plan.len() <= n * w.len() - n + 1);
            for i in 0..n {
                let mut marg = [0.0; 4];
                for (t, x) in &plan {
                    marg[t[i]] += x;
                }
                for (a, b) in marg.iter().zip(&w) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
        let uniform = northwest_corner(&[0.25; 4], 2);
        assert!(uniform.iter().all(|(t, _)| t[0] != t[1]));
    }

    #[test]
    fn two_point_transport() {
        let cost = |t: &[usize]| if t[0] == t[1] { 4.0 } else { 0.5 };
        let sol = solve_transport(&[0.5, 0.5], 2, &cost, &[], &ColumnGenOptions::default()).unwrap();
        assert!((sol.primal_value - 0.5).abs() < 1e-14);
        assert!((sol.dual_value - 0.5).abs() < 1e-14);
        assert_eq!(sol.plan.len(), 2);
        assert_eq!(sol.potentials[1][1], 0.0);
    }

    #[test]
    fn infinite_diagonal_without_finite_plan() {
        // unbalanced weights force mass onto the (infinite) diagonal
        let cost = |t: &[usize]| if t[0] == t[1] { f64::INFINITY } else { 1.0 };
        let err = solve_transport(&[0.9, 0.1], 2, &cost, &[], &ColumnGenOptions::default());
        assert!(matches!(err, Err(Error::NoFiniteCostPlan)));
    }

    #[test]
    fn rejects_bad_input() {
        let cost = |_: &[usize]| 1.0;
        let opts = ColumnGenOptions::default();
        assert!(solve_transport(&[], 2, &cost, &[], &opts).is_err());
        assert!(solve_transport(&[1.0], 1, &cost, &[], &opts).is_err());
        assert!(solve_transport(&[0.5, 0.5], 2, &cost, &[vec![0, 7]], &opts).is_err());
        assert!(solve_transport(&[1.0, 0.0], 2, &cost, &[], &opts).is_err());
    }
}
