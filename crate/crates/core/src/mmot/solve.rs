use std::collections::BTreeMap;

use crate::cost::{CellTuple, CostMode, CostModel, PairCostTable};
use crate::error::{Error, Result};
use crate::lp::{price_columns, solve_transport, ColumnGenOptions};
use crate::measure::DiscreteMeasure;

use super::plan::TransportPlan;
use super::potentials::{symmetrize_potentials, PotentialVector};

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub cost_mode: CostMode,
    pub colgen: ColumnGenOptions,
    /// Extra tuples for the initial column pool; tuples leaving the support are ignored.
    pub warm_start: Vec<CellTuple>,
    /// Keep the raw simplex duals instead of the balanced optimal potentials.
    pub raw_duals: bool,
}

#[derive(Debug, Clone)]
pub struct MmotSolution {
    pub plan: TransportPlan,
    /// Optimal potentials with the symmetrized potential attached.
    pub potentials: PotentialVector,
    pub value: f64,
    pub dual_value: f64,
    /// Largest finite tuple cost; tolerances scale with it.
    pub cost_scale: f64,
    pub rounds: usize,
    pub iterations: usize,
    pub columns: usize,
}

/// Minimizes the total cost over couplings of `N` copies of `measure`.
///
/// The cost of a tuple is the cell-constant lower cost or the pointwise cost
/// at the cells' representative points, depending on `options.cost_mode`.
pub fn solve_mmot(measure: &DiscreteMeasure, model: &CostModel, options: &SolveOptions) -> Result<MmotSolution> {
    let n = model.n_marginals;
    let m = measure.support_cardinality();
    if m < n {
        return Err(Error::InsufficientSupport {
            support: m,
            marginals: n,
        });
    }
    let cells = measure.cells();
    let weights = measure.weights();
    let table = PairCostTable::new(model, measure, options.cost_mode);
    let cost = |t: &[usize]| table.tuple_cost(t);

    let seed: Vec<Vec<usize>> = options
        .warm_start
        .iter()
        .filter(|t| t.len() == n)
        .filter_map(|t| {
            t.cells()
                .iter()
                .map(|c| cells.binary_search(c).ok())
                .collect::<Option<Vec<_>>>()
        })
        .collect();
    let sol = solve_transport(&weights, n, &cost, &seed, &options.colgen)?;

    let atoms: BTreeMap<CellTuple, f64> = sol
        .plan
        .iter()
        .map(|(t, x)| (CellTuple(t.iter().map(|&k| cells[k].clone()).collect()), *x))
        .collect();
    let plan = TransportPlan::new(*measure.grid(), n, atoms).map_err(|e| {
        Error::NumericalBreakdown(format!("optimal basis does not form a valid plan: {e}"))
    })?;
    let dev = plan.deviation_from(measure);
    if dev > super::plan::PLAN_TOL {
        return Err(Error::NumericalBreakdown(format!(
            "plan marginals deviate from the measure by {dev:e}"
        )));
    }

    let tol = options.colgen.price_tol * sol.cost_scale;
    let values = if options.raw_duals {
        sol.potentials
    } else {
        balance_potentials(&sol.potentials, &sol.plan, &cost, m, tol)?
    };
    let potentials = symmetrize_potentials(&PotentialVector::new(*measure.grid(), cells, values)?);
    let dual_value = potentials.dual_objective(measure);
    Ok(MmotSolution {
        value: sol.primal_value,
        dual_value,
        plan,
        potentials,
        cost_scale: sol.cost_scale,
        rounds: sol.rounds,
        iterations: sol.iterations,
        columns: sol.columns,
    })
}

/// Picks a canonical point of the optimal dual face.
///
/// Optimal potentials are those that are admissible and tight on the support
/// of an optimal plan. Among the affine set of potentials tight on that
/// support, the one of least Euclidean norm is the orthogonal projection of
/// any member onto the row space of the tightness equations. We move from the
/// simplex duals towards it as far as admissibility allows (halving the step),
/// then restore the gauge `u_i(last) = 0` for `i >= 2`. The dual objective and
/// the tight equations are unchanged along the way: the measure itself lies in
/// the row space, since summing the plan's rows gives its marginals.
fn balance_potentials(
    u: &[Vec<f64>],
    plan: &[(Vec<usize>, f64)],
    cost: &(dyn Fn(&[usize]) -> f64 + Sync),
    m: usize,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = u.len();
    let dim = n * m;
    let flat: Vec<f64> = u.iter().flatten().copied().collect();

    // orthonormal basis of the tight rows, Gram-Schmidt applied twice
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (t, _) in plan {
        let mut v = vec![0.0; dim];
        for (i, &k) in t.iter().enumerate() {
            v[i * m + k] += 1.0;
        }
        let norm0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &basis {
                let p = dot(q, &v);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= p * y;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut target = vec![0.0; dim];
    for q in &basis {
        let p = dot(q, &flat);
        for (x, y) in target.iter_mut().zip(q) {
            *x += p * y;
        }
    }

    let reshape = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(m).map(|c| c.to_vec()).collect() };
    let mut step = 1.0;
    let mut chosen = reshape(&flat);
    for _ in 0..12 {
        let cand: Vec<f64> = flat
            .iter()
            .zip(&target)
            .map(|(a, b)| a + step * (b - a))
            .collect();
        let cand = reshape(&cand);
        if price_columns(&cand, cost, m, tol)?.is_empty() {
            chosen = cand;
            break;
        }
        step *= 0.5;
    }

    let shifts: Vec<f64> = chosen.iter().map(|ui| ui[m - 1]).collect();
    for i in 1..n {
        for v in chosen[i].iter_mut() {
            *v -= shifts[i];
        }
        for v in chosen[0].iter_mut() {
            *v += shifts[i];
        }
    }
    Ok(chosen)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::measure::{discretize, Density};

    fn atoms(points: &[&[f64]], level: u32, r: f64) -> DiscreteMeasure {
        let density = Density::Atomic {
            points: points.iter().map(|p| p.to_vec()).collect(),
            weights: vec![1.0; points.len()],
        };
        let grid = GridSpec::new(level, r, points[0].len()).unwrap();
        discretize(&density, &grid, 1).unwrap()
    }

    fn pointwise() -> SolveOptions {
        SolveOptions {
            cost_mode: CostMode::Pointwise,
            ..Default::default()
        }
    }

    #[test]
    fn two_point_closed_form() {
        let rho = atoms(&[&[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]], 3, 4.0);
        let sol = solve_mmot(&rho, &CostModel::coulomb(2).unwrap(), &pointwise()).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!((sol.dual_value - 0.5).abs() < 1e-12);
        assert_eq!(sol.plan.len(), 2);
        for (t, &w) in sol.plan.atoms() {
            assert_ne!(t.0[0], t.0[1]);
            assert!((w - 0.5).abs() < 1e-15);
        }
        for v in sol.potentials.symmetrized().unwrap() {
            assert!((v - 0.25).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let rho = atoms(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]], 2, 2.0);
        let sol = solve_mmot(&rho, &CostModel::coulomb(3).unwrap(), &pointwise()).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-9, "{}", sol.value);
        assert!((sol.dual_value - 3.0).abs() < 1e-9);
        for t in sol.plan.atoms().keys() {
            let c = t.cells();
            assert!(c[0] != c[1] && c[1] != c[2] && c[0] != c[2]);
        }
    }

    #[test]
    fn pigeonhole() {
        let rho = atoms(&[&[0.0], &[1.0]], 2, 2.0);
        let err = solve_mmot(&rho, &CostModel::coulomb(3).unwrap(), &SolveOptions::default());
        assert!(matches!(
            err,
            Err(Error::InsufficientSupport {
                support: 2,
                marginals: 3
            })
        ));
    }

    #[test]
    fn uniform_ball_cell_cost() {
        let grid = GridSpec::new(3, 1.0, 1).unwrap();
        let ball = Density::UniformBall {
            center: vec![0.0],
            radius: 0.8,
        };
        let rho = discretize(&ball, &grid, 4).unwrap();
        let model = CostModel::coulomb(3).unwrap();
        let sol = solve_mmot(&rho, &model, &SolveOptions::default()).unwrap();
        assert!((sol.value - sol.dual_value).abs() <= 1e-8 * (1.0 + sol.value));
        assert!(sol.plan.deviation_from(&rho) <= 1e-10);
        let product = super::super::plan::product_plan(&rho, 3).unwrap().cost_lower(&model);
        assert!(sol.value <= product);
        assert!((sol.plan.cost_lower(&model) - sol.value).abs() < 1e-12 * sol.value);
        // every support tuple respects the dual constraint
        let cells = rho.cells();
        let u = sol.potentials.values();
        let table = PairCostTable::new(&model, &rho, CostMode::CellLower);
        let viol = price_columns(u, &|t: &[usize]| table.tuple_cost(t), cells.len(), 1e-9 * sol.cost_scale).unwrap();
        assert!(viol.is_empty());
        assert!(u.iter().skip(1).all(|ui| *ui.last().unwrap() == 0.0));
    }
}
