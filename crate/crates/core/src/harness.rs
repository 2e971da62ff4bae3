//! Refinement studies across dyadic levels and greedy swap search.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use serde::Serialize;

use crate::cost::{CellTuple, CostMode, CostModel, PairCostTable};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::compensated_sum;
use crate::lp::ColumnGenOptions;
use crate::measure::{discretize, Density, DiscreteMeasure};
use crate::mmot::{
    diagonal_clearance, solve_mmot, swap_improve, verify_duality, SolveOptions, TransportPlan,
    VerifyOptions, DEFAULT_M_FRACTION,
};

pub const CSV_HEADER: &str = "level,primal,dual,gap,alpha,pot_sup,bound,ms";

#[derive(Debug, Clone)]
pub struct ConvergeOptions {
    pub cost_mode: CostMode,
    pub samples_per_cell: usize,
    pub m_fraction: f64,
    /// Half-width of the cube used for clearance and bound parameters (`None`: whole window).
    pub window: Option<f64>,
    /// Seed each level with the children of the previous level's plan support.
    pub warm_start: bool,
    pub colgen: ColumnGenOptions,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        ConvergeOptions {
            cost_mode: CostMode::CellLower,
            samples_per_cell: 8,
            m_fraction: DEFAULT_M_FRACTION,
            window: None,
            warm_start: true,
            colgen: ColumnGenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub slackness: f64,
    pub dual_feasible: bool,
    pub alpha: f64,
    pub pot_sup: f64,
    pub bound: Option<f64>,
    pub r: Option<f64>,
    pub k: Option<f64>,
    pub support: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub result: std::result::Result<LevelResult, String>,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Product-plan cost at the finest level, an upper bracket for every row.
    pub reference_upper: Option<f64>,
}

fn real(x: f64) -> String {
    if x == f64::MAX {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

impl ConvergenceTable {
    pub fn successes(&self) -> impl Iterator<Item = (u32, &LevelResult)> {
        self.rows
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|x| (r.level, x)))
    }

    /// CSV with the fixed header; the `ms` column stays empty unless
    /// `timing` is set, so output is reproducible byte for byte.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for row in &self.rows {
            let ms = if timing { format!("{:.3}", row.ms) } else { String::new() };
            match &row.result {
                Ok(x) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        row.level,
                        real(x.primal),
                        real(x.dual),
                        real(x.gap),
                        real(x.alpha),
                        real(x.pot_sup),
                        x.bound.map_or_else(String::new, real),
                        ms
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "{},,,,,,,{}", row.level, ms);
                }
            }
        }
        out
    }

    /// One `key=value` block per row, separated by blank lines.
    pub fn to_key_value(&self, timing: bool) -> String {
        let mut out = String::new();
        if let Some(u) = self.reference_upper {
            let _ = writeln!(out, "reference_upper={}\n", real(u));
        }
        for row in &self.rows {
            let _ = writeln!(out, "level={}", row.level);
            match &row.result {
                Ok(x) => {
                    let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), real);
                    let _ = writeln!(out, "status=ok");
                    let _ = writeln!(out, "primal={}", real(x.primal));
                    let _ = writeln!(out, "dual={}", real(x.dual));
                    let _ = writeln!(out, "gap={}", real(x.gap));
                    let _ = writeln!(out, "slackness={}", real(x.slackness));
                    let _ = writeln!(out, "dual_feasible={}", x.dual_feasible);
                    let _ = writeln!(out, "alpha={}", real(x.alpha));
                    let _ = writeln!(out, "pot_sup={}", real(x.pot_sup));
                    let _ = writeln!(out, "bound={}", opt(x.bound));
                    let _ = writeln!(out, "r={}", opt(x.r));
                    let _ = writeln!(out, "k={}", opt(x.k));
                    let _ = writeln!(out, "support={}", x.support);
                }
                Err(e) => {
                    let _ = writeln!(out, "status=failed");
                    let _ = writeln!(out, "error={e}");
                }
            }
            if timing {
                let _ = writeln!(out, "ms={:.3}", row.ms);
            }
            out.push('\n');
        }
        out
    }

    /// Violated invariants: failed rows, gaps above `gap_tol`, primal values
    /// decreasing by more than `mono_tol` (relative), values above the
    /// product-plan bracket, inadmissible potentials, potentials above the bound.
    pub fn violations(&self, gap_tol: f64, mono_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let mut prev: Option<(u32, f64)> = None;
        for row in &self.rows {
            let x = match &row.result {
                Ok(x) => x,
                Err(e) => {
                    out.push(format!("level {} failed: {e}", row.level));
                    continue;
                }
            };
            if !(x.gap <= gap_tol) {
                out.push(format!("level {}: relative gap {:e} exceeds {gap_tol:e}", row.level, x.gap));
            }
            if !x.dual_feasible {
                out.push(format!("level {}: potentials are not admissible", row.level));
            }
            if let Some(b) = x.bound {
                if x.pot_sup > b {
                    out.push(format!("level {}: sup |u| = {} exceeds bound {b}", row.level, x.pot_sup));
                }
            }
            if let Some((l, p)) = prev {
                if x.primal < p - mono_tol * (1.0 + p.abs()) {
                    out.push(format!(
                        "level {}: primal {} below level {l} value {p}",
                        row.level, x.primal
                    ));
                }
            }
            if let Some(u) = self.reference_upper {
                if x.primal > u + mono_tol * (1.0 + u.abs()) {
                    out.push(format!(
                        "level {}: primal {} above the product-plan cost {u}",
                        row.level, x.primal
                    ));
                }
            }
            prev = Some((row.level, x.primal));
        }
        out
    }

    /// `(max r - min r) / max r` over the successful rows with a bound.
    pub fn radius_spread(&self) -> Option<f64> {
        let rs: Vec<f64> = self.successes().filter_map(|(_, x)| x.r).collect();
        let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        (!rs.is_empty()).then(|| (hi - lo) / hi)
    }
}

/// Expected cost of the independent coupling, `C(N,2) sum_ab rho_a rho_b c(a,b)`.
pub fn product_cost(measure: &DiscreteMeasure, model: &CostModel, mode: CostMode) -> f64 {
    let table = PairCostTable::new(model, measure, mode);
    let w = measure.weights();
    let m = w.len();
    let n = model.n_marginals as f64;
    let pairs = compensated_sum((0..m * m).map(|ab| w[ab / m] * w[ab % m] * table.pair(ab / m, ab % m)));
    n * (n - 1.0) / 2.0 * pairs
}

fn solve_level(
    measure: &DiscreteMeasure,
    model: &CostModel,
    options: &ConvergeOptions,
    warm: Vec<CellTuple>,
) -> Result<(LevelResult, TransportPlan)> {
    let solve_opts = SolveOptions {
        cost_mode: options.cost_mode,
        colgen: options.colgen.clone(),
        warm_start: warm,
        raw_duals: false,
    };
    let sol = solve_mmot(measure, model, &solve_opts)?;
    let verify_opts = VerifyOptions {
        cost_mode: options.cost_mode,
        feas_tol: options.colgen.price_tol,
        window: options.window,
        m_fraction: options.m_fraction,
    };
    let rep = verify_duality(&sol.plan, &sol.potentials, model, measure, &verify_opts)?;
    Ok((
        LevelResult {
            primal: rep.primal_value,
            dual: rep.dual_value,
            gap: rep.relative_gap,
            slackness: rep.max_slackness_violation,
            dual_feasible: rep.dual_feasible,
            alpha: rep.diagonal_clearance_alpha,
            pot_sup: rep.potential_sup,
            bound: rep.potential_bound,
            r: rep.bound_r,
            k: rep.bound_k,
            support: sol.plan.len(),
            columns: sol.columns,
        },
        sol.plan,
    ))
}

fn refine_support(plan: &TransportPlan) -> Vec<CellTuple> {
    let mut out = Vec::new();
    for t in plan.atoms().keys() {
        let kids: Vec<Vec<_>> = t.cells().iter().map(GridSpec::children).collect();
        // pair the i-th child of every slot: a cheap subset of all combinations
        let count = kids[0].len();
        for c in 0..count {
            out.push(CellTuple(kids.iter().map(|k| k[c].clone()).collect()));
        }
    }
    out
}

/// Solves the same density at every level of `levels`.
///
/// The density is discretized once at the finest level and aggregated to the
/// coarser ones, so every level sees exactly the same mass per region. A
/// failing level is recorded in its row and does not stop the study.
pub fn converge(
    density: &Density,
    model: &CostModel,
    levels: RangeInclusive<u32>,
    halfwidth: f64,
    options: &ConvergeOptions,
) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Ok(ConvergenceTable {
            rows: Vec::new(),
            reference_upper: None,
        });
    }
    let finest_grid = GridSpec::new(*levels.end(), halfwidth, density.dim())?;
    let finest = discretize(density, &finest_grid, options.samples_per_cell)?;
    converge_measure(&finest, model, levels, options)
}

/// Like [`converge`], starting from a measure given at the finest level.
/// Levels finer than the measure's grid are rejected.
pub fn converge_measure(
    finest: &DiscreteMeasure,
    model: &CostModel,
    levels: RangeInclusive<u32>,
    options: &ConvergeOptions,
) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Ok(ConvergenceTable {
            rows: Vec::new(),
            reference_upper: None,
        });
    }
    let top = *levels.end();
    if top > finest.grid().level {
        return Err(Error::InvalidArgument(format!(
            "level {top} is finer than the measure's level {}",
            finest.grid().level
        )));
    }
    let finest = finest.coarsen_to(top)?;
    let reference_upper = product_cost(&finest, model, options.cost_mode);

    let mut rows = Vec::new();
    let mut previous: Option<TransportPlan> = None;
    for level in levels {
        let start = Instant::now();
        let result = finest.coarsen_to(level).and_then(|measure| {
            let warm = match (&previous, options.warm_start) {
                (Some(p), true) if p.grid().level + 1 == level => refine_support(p),
                _ => Vec::new(),
            };
            solve_level(&measure, model, options, warm)
        });
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let result = match result {
            Ok((row, plan)) => {
                previous = Some(plan);
                Ok(row)
            }
            Err(e) => {
                previous = None;
                Err(e.to_string())
            }
        };
        rows.push(ConvergenceRow { level, result, ms });
    }
    Ok(ConvergenceTable {
        rows,
        reference_upper: Some(reference_upper),
    })
}

/// One accepted swap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapMove {
    pub round: usize,
    pub centers: Vec<CellTuple>,
    pub radius: f64,
    pub cost_before: f64,
    pub cost_after: f64,
}

/// Primary atoms examined per round, taken nearest the diagonal first.
const PRIMARY_CANDIDATES: usize = 8;

fn clearance_of(grid: &GridSpec, t: &CellTuple) -> f64 {
    let c = t.cells();
    let mut best = f64::MAX;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            best = best.min(grid.inf_dist(&c[i], &c[j]));
        }
    }
    best
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Greedy local improvement by [`swap_improve`] moves under the cell-lower cost.
///
/// Each round takes atoms nearest the diagonal as primaries, completes each
/// with companions whose cells differ slot by slot from those already chosen
/// (farthest from the diagonal first), and sweeps every ordering of the
/// companions over radii `side/2, side, 2 side, ...`. The best move of the
/// first primary that yields any strict decrease is applied.
pub fn swap_search(plan: &TransportPlan, model: &CostModel, max_rounds: usize) -> (TransportPlan, Vec<SwapMove>) {
    let grid = *plan.grid();
    let n = plan.n_marginals();
    let side = grid.side();
    let mut current = plan.clone();
    let mut log = Vec::new();
    for round in 1..=max_rounds {
        let cost0 = current.cost_lower(model);
        let threshold = 1e-9 * (1.0 + cost0.abs());
        let mut by_clearance: Vec<(f64, &CellTuple)> = current
            .atoms()
            .keys()
            .map(|t| (clearance_of(&grid, t), t))
            .collect();
        by_clearance.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let mut companions = by_clearance.clone();
        companions.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));

        let mut accepted: Option<(TransportPlan, SwapMove)> = None;
        for &(_, primary) in by_clearance.iter().take(PRIMARY_CANDIDATES) {
            let mut chosen: Vec<&CellTuple> = vec![primary];
            let mut used: Vec<BTreeSet<_>> = primary.cells().iter().map(|c| BTreeSet::from([c])).collect();
            for &(_, t) in &companions {
                if chosen.len() == n {
                    break;
                }
                if t.cells().iter().zip(&used).all(|(c, u)| !u.contains(c)) {
                    for (c, u) in t.cells().iter().zip(used.iter_mut()) {
                        u.insert(c);
                    }
                    chosen.push(t);
                }
            }
            if chosen.len() < n {
                continue;
            }
            let rest: Vec<usize> = (1..n).collect();
            for order in permutations(&rest) {
                let centers: Vec<CellTuple> = std::iter::once(chosen[0])
                    .chain(order.iter().map(|&k| chosen[k]))
                    .cloned()
                    .collect();
                let mut radius = side / 2.0;
                while radius <= 2.0 * grid.halfwidth {
                    match swap_improve(&current, model, &centers, &vec![radius; n]) {
                        Ok((q, cost)) => {
                            let best = accepted.as_ref().map_or(cost0 - threshold, |(_, m)| m.cost_after);
                            if cost < best {
                                let mv = SwapMove {
                                    round,
                                    centers: centers.clone(),
                                    radius,
                                    cost_before: cost0,
                                    cost_after: cost,
                                };
                                accepted = Some((q, mv));
                            }
                        }
                        // larger radii only grow the neighborhoods
                        Err(_) => break,
                    }
                    radius *= 2.0;
                }
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((q, mv)) => {
                current = q;
                log.push(mv);
            }
            None => break,
        }
    }
    (current, log)
}

/// Clearance of `plan` over the whole window.
pub fn clearance(plan: &TransportPlan) -> f64 {
    diagonal_clearance(plan, plan.grid().halfwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use std::collections::BTreeMap;

    fn ball_1d() -> Density {
        Density::UniformBall {
            center: vec![0.0],
            radius: 0.8,
        }
    }

    #[test]
    fn empty_range() {
        let model = CostModel::coulomb(2).unwrap();
        #[allow(clippy::reversed_empty_ranges)]
        let t = converge(&ball_1d(), &model, 3..=2, 1.0, &ConvergeOptions::default()).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv(false), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn two_point_rows_agree() {
        let density = Density::Atomic {
            points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
            weights: vec![0.5, 0.5],
        };
        let model = CostModel::coulomb(2).unwrap();
        let opts = ConvergeOptions {
            cost_mode: CostMode::Pointwise,
            ..Default::default()
        };
        let t = converge(&density, &model, 1..=4, 4.0, &opts).unwrap();
        assert_eq!(t.rows.len(), 4);
        for (_, x) in t.successes() {
            assert!((x.primal - 0.5).abs() < 1e-12);
        }
        assert_eq!(t.successes().count(), 4);
        assert!(t.violations(1e-8, 1e-12).is_empty());
    }

    #[test]
    fn ball_values_increase() {
        let model = CostModel::coulomb(2).unwrap();
        let t = converge(&ball_1d(), &model, 1..=5, 1.0, &ConvergeOptions::default()).unwrap();
        let vals: Vec<f64> = t.successes().map(|(_, x)| x.primal).collect();
        assert_eq!(vals.len(), 5);
        assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
        for (level, x) in t.successes() {
            assert!(x.gap <= 1e-8);
            if level >= 2 {
                assert!(x.alpha > 0.0);
            }
        }
        assert!(t.violations(1e-8, 1e-12).is_empty(), "{:?}", t.violations(1e-8, 1e-12));
        let csv = t.to_csv(false);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
        let again = converge(&ball_1d(), &model, 1..=5, 1.0, &ConvergeOptions::default()).unwrap();
        assert_eq!(again.to_csv(false), csv);
    }

    #[test]
    fn failed_level_does_not_abort() {
        let density = Density::Atomic {
            points: vec![vec![0.1], vec![0.3]],
            weights: vec![0.5, 0.5],
        };
        let model = CostModel::coulomb(2).unwrap();
        // both atoms share a cell at level 1
        let t = converge(&density, &model, 1..=3, 1.0, &ConvergeOptions::default()).unwrap();
        assert!(t.rows[0].result.is_err());
        assert!(t.rows[2].result.is_ok());
        assert!(!t.violations(1e-8, 1e-12).is_empty());
        assert!(t.to_csv(false).contains("\n1,,,,,,,\n"));
    }

    fn diag_two_point() -> TransportPlan {
        let grid = GridSpec::new(2, 2.0, 1).unwrap();
        let atoms: BTreeMap<_, _> = [-3, 4]
            .iter()
            .map(|&c| (CellTuple(vec![CellIndex::new(vec![c]); 2]), 0.5))
            .collect();
        TransportPlan::new(grid, 2, atoms).unwrap()
    }

    #[test]
    fn swap_search_fixes_diagonal_plan() {
        let model = CostModel::coulomb(2).unwrap();
        let p = diag_two_point();
        let (q, log) = swap_search(&p, &model, 10);
        assert_eq!(log.len(), 1);
        assert_eq!(q.len(), 2);
        assert!(q.atoms().keys().all(|t| t.0[0] != t.0[1]));
        assert!(q.marginal_deviation(&p) <= 1e-15);
        let (same, log) = swap_search(&p, &model, 0);
        assert!(log.is_empty());
        assert_eq!(same, p);
    }

    #[test]
    fn swap_search_leaves_optimum_alone() {
        let grid = GridSpec::new(2, 2.0, 2).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let density = Density::Atomic {
            points: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]],
            weights: vec![1.0; 3],
        };
        let rho = discretize(&density, &grid, 1).unwrap();
        let model = CostModel::coulomb(3).unwrap();
        let sol = solve_mmot(&rho, &model, &SolveOptions::default()).unwrap();
        let (q, log) = swap_search(&sol.plan, &model, 5);
        assert!(log.is_empty());
        assert_eq!(q, sol.plan);
    }
}
