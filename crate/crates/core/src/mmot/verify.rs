use serde::Serialize;

use crate::cost::{euclidean, CellTuple, CostMode, CostModel, PairCostTable};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::compensated_sum;
use crate::lp::price_columns;
use crate::measure::DiscreteMeasure;

use super::plan::TransportPlan;
use super::potentials::PotentialVector;

pub const DEFAULT_M_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub cost_mode: CostMode,
    /// Dual feasibility tolerance relative to the largest finite tuple cost.
    pub feas_tol: f64,
    /// Half-width of the cube `Q(R)` used for clearance and bound parameters;
    /// `None` means the whole window.
    pub window: Option<f64>,
    pub m_fraction: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            cost_mode: CostMode::CellLower,
            feas_tol: 1e-9,
            window: None,
            m_fraction: DEFAULT_M_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal - dual| / (1 + |primal|)`
    pub relative_gap: f64,
    /// Largest `cost - sum_i u_i` over plan atoms, clamped below at zero.
    pub max_slackness_violation: f64,
    /// Largest `sum_i u_i - cost` over all support tuples, clamped below at zero.
    pub max_dual_violation: f64,
    pub dual_feasible: bool,
    pub diagonal_clearance_alpha: f64,
    pub potential_sup: f64,
    pub bound_r: Option<f64>,
    pub bound_k: Option<f64>,
    pub potential_bound: Option<f64>,
    pub potential_bound_satisfied: bool,
}

impl DualityReport {
    /// Flat `key=value` lines; absent values print as `none`.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"));
        [
            format!("primal_value={:?}", self.primal_value),
            format!("dual_value={:?}", self.dual_value),
            format!("relative_gap={:?}", self.relative_gap),
            format!("max_slackness_violation={:?}", self.max_slackness_violation),
            format!("max_dual_violation={:?}", self.max_dual_violation),
            format!("dual_feasible={}", self.dual_feasible),
            format!("diagonal_clearance_alpha={:?}", self.diagonal_clearance_alpha),
            format!("potential_sup={:?}", self.potential_sup),
            format!("bound_r={}", opt(self.bound_r)),
            format!("bound_k={}", opt(self.bound_k)),
            format!("potential_bound={}", opt(self.potential_bound)),
            format!("potential_bound_satisfied={}", self.potential_bound_satisfied),
        ]
        .join("\n")
            + "\n"
    }
}

/// Values selected for the potential bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundParameters {
    pub r: f64,
    pub k: f64,
    /// Pairwise clearance of the selected atom.
    pub alpha: f64,
    pub atom: CellTuple,
    /// Plan mass inside the cube.
    pub mass: f64,
}

/// Pair costs between the potential's cells under the given cost mode.
fn cost_table(model: &CostModel, u: &PotentialVector, measure: &DiscreteMeasure, mode: CostMode) -> Result<PairCostTable> {
    let cells = u.cells();
    let grid = u.grid();
    let points: Vec<Vec<f64>> = cells.iter().map(|c| measure.representative(c)).collect();
    let m = cells.len();
    let mut table = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            table[a * m + b] = match mode {
                CostMode::CellLower => model.pair_term(grid.sup_dist(&cells[a], &cells[b])),
                CostMode::Pointwise => model.pair_term(euclidean(&points[a], &points[b])),
            };
        }
    }
    PairCostTable::from_pairs(m, model.n_marginals, table)
}

/// Checks primal/dual agreement, complementary slackness and admissibility of
/// `u` against `plan`, then evaluates the diagonal clearance and the
/// potential bound.
pub fn verify_duality(
    plan: &TransportPlan,
    u: &PotentialVector,
    model: &CostModel,
    measure: &DiscreteMeasure,
    options: &VerifyOptions,
) -> Result<DualityReport> {
    let n = model.n_marginals;
    if plan.n_marginals() != n || u.n_marginals() != n {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} marginals, potentials {}, cost {n}",
            plan.n_marginals(),
            u.n_marginals()
        )));
    }
    if plan.grid() != u.grid() || plan.grid() != measure.grid() {
        return Err(Error::DimensionMismatch("plan, potentials and measure live on different grids".into()));
    }
    let table = cost_table(model, u, measure, options.cost_mode)?;
    let m = table.size();

    let mut primal_terms = Vec::with_capacity(plan.len());
    let mut slack = 0.0f64;
    let mut idx = vec![0usize; n];
    for (t, &w) in plan.atoms() {
        for (slot, c) in idx.iter_mut().zip(t.cells()) {
            *slot = u.index_of(c).ok_or_else(|| {
                Error::DimensionMismatch(format!("plan cell {c} has no potential value"))
            })?;
        }
        let c = table.tuple_cost(&idx);
        let s: f64 = idx.iter().enumerate().map(|(i, &k)| u.values()[i][k]).sum();
        primal_terms.push(w * c);
        slack = slack.max(c - s);
    }
    let primal_value = compensated_sum(primal_terms);
    let dual_value = u.dual_objective(measure);

    let max_pair = (0..m * m)
        .map(|ab| table.pair(ab / m, ab % m))
        .filter(|c| c.is_finite())
        .fold(0.0f64, f64::max);
    let scale = (max_pair * (n * (n - 1) / 2) as f64).max(1.0);
    let cost = |t: &[usize]| table.tuple_cost(t);
    let violations = price_columns(u.values(), &cost, m, options.feas_tol * scale)?;
    let max_dual_violation = violations.iter().fold(0.0f64, |a, p| a.max(-p.reduced_cost));

    let window = options.window.unwrap_or(plan.grid().halfwidth);
    let alpha = diagonal_clearance(plan, window);
    let params = bound_parameters(plan, measure, model, window, options.m_fraction).ok();
    let potential_sup = u.sup_norm();
    let bound = params.as_ref().map(|p| potential_bound(n, p.r, p.k));
    Ok(DualityReport {
        primal_value,
        dual_value,
        relative_gap: (primal_value - dual_value).abs() / (1.0 + primal_value.abs()),
        max_slackness_violation: slack.max(0.0),
        max_dual_violation,
        dual_feasible: violations.is_empty(),
        diagonal_clearance_alpha: alpha,
        potential_sup,
        bound_r: params.as_ref().map(|p| p.r),
        bound_k: params.as_ref().map(|p| p.k),
        potential_bound: bound,
        potential_bound_satisfied: bound.is_some_and(|b| potential_sup <= b),
    })
}

fn cell_inside(grid: &GridSpec, cell: &crate::grid::CellIndex, r: f64) -> bool {
    grid.cell_bounds(cell).iter().all(|&(lo, hi)| lo >= -r && hi <= r)
}

fn atom_inside(grid: &GridSpec, t: &CellTuple, r: f64) -> bool {
    t.cells().iter().all(|c| cell_inside(grid, c, r))
}

/// Smallest distance between two cells of the same tuple.
fn atom_clearance(grid: &GridSpec, t: &CellTuple) -> f64 {
    let c = t.cells();
    let mut best = f64::MAX;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            best = best.min(grid.inf_dist(&c[i], &c[j]));
        }
    }
    best
}

/// Certified lower bound on the distance of the plan's support from the
/// diagonal, over atoms whose cells all lie in `[-r, r]^d`. Returns
/// `f64::MAX` when no atom qualifies.
pub fn diagonal_clearance(plan: &TransportPlan, r: f64) -> f64 {
    let grid = plan.grid();
    plan.atoms()
        .keys()
        .filter(|t| atom_inside(grid, t, r))
        .map(|t| atom_clearance(grid, t))
        .fold(f64::MAX, f64::min)
}

/// `N(N-1)/(2r) - N l`
pub fn lemma_upper_bound(n: usize, r: f64, l: f64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / (2.0 * r) - n * l
}

/// `2N(N-1)^2/r - (N-1)^2 k`
pub fn potential_bound(n: usize, r: f64, k: f64) -> f64 {
    let n = n as f64;
    let q = (n - 1.0) * (n - 1.0);
    2.0 * n * q / r - q * k
}

/// Mass of the cube of half-width `r` around `x`, reading `measure` as a
/// density that is constant on each cell.
fn cube_mass(measure: &DiscreteMeasure, x: &[f64], r: f64) -> f64 {
    let grid = measure.grid();
    let side = grid.side();
    compensated_sum(measure.atoms().iter().map(|(c, &w)| {
        let frac: f64 = grid
            .cell_bounds(c)
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &xi)| ((hi.min(xi + r) - lo.max(xi - r)).max(0.0)) / side)
            .product();
        w * frac
    }))
}

/// Picks the atom and radii entering the potential bound.
///
/// The atom is the one inside `[-R, R]^d` whose cells are farthest apart
/// (pairwise minimum), `k` is the pointwise cost at its representative points
/// divided by `N`, and `r` is the largest radius up to a quarter of the atom's
/// clearance for which the cubes of half-width `r` around its points carry
/// less than `m_fraction / 4` of the plan mass inside the window. The cube
/// mass is continuous and nondecreasing in `r`, so the radius is found by
/// halving and then bisection.
pub fn bound_parameters(
    plan: &TransportPlan,
    measure: &DiscreteMeasure,
    model: &CostModel,
    window: f64,
    m_fraction: f64,
) -> Result<BoundParameters> {
    if !(m_fraction > 0.0 && m_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("mass fraction {m_fraction} is not in (0, 1)")));
    }
    let grid = plan.grid();
    let mut best: Option<(&CellTuple, f64)> = None;
    let mut mass_terms = Vec::new();
    for (t, &w) in plan.atoms() {
        if !atom_inside(grid, t, window) {
            continue;
        }
        mass_terms.push(w);
        let a = atom_clearance(grid, t);
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((t, a));
        }
    }
    let (atom, alpha) = match best {
        Some((t, a)) if a > 0.0 => (t.clone(), a),
        _ => return Err(Error::NoOffDiagonalSupport),
    };
    let mass = compensated_sum(mass_terms);
    let points: Vec<Vec<f64>> = atom.cells().iter().map(|c| measure.representative(c)).collect();
    let k = model.pointwise_cost(&points) / model.n_marginals as f64;

    let threshold = m_fraction * mass / 4.0;
    let load = |r: f64| -> f64 { points.iter().map(|x| cube_mass(measure, x, r)).sum() };
    let mut hi = alpha / 4.0;
    let r = if load(hi) < threshold {
        hi
    } else {
        let mut lo = hi / 2.0;
        while load(lo) >= threshold {
            hi = lo;
            lo /= 2.0;
            if lo < f64::MIN_POSITIVE {
                return Err(Error::NumericalBreakdown("bound radius search underflowed".into()));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if load(mid) < threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(BoundParameters {
        r,
        k,
        alpha,
        atom,
        mass,
    })
}
