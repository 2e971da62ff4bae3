use std::collections::{BTreeMap, BTreeSet};

use crate::cost::{CellTuple, CostModel};
use crate::error::{Error, Result};
use crate::grid::CellIndex;
use crate::io::compensated_sum;

use super::plan::TransportPlan;

/// Upper limit on the atoms produced by one product rebuild.
const MAX_PRODUCT_ATOMS: usize = 1 << 20;

/// Rebuilds the plan around `N` separated neighborhoods by cyclic products.
///
/// Neighborhood `i` holds the atoms whose cell centers lie, slot by slot,
/// within sup-distance `radii[i]` of the cell centers of `centers[i]`. Each
/// restriction `P_i` is scaled by `lambda_i = min_k |P_k| / |P_i|` so that all
/// carry the common mass `mu`, its slot marginals `nu_j^i` are taken, and the
/// scaled pieces are replaced by
///
/// `P~_i = nu_1^i x nu_2^(i+1) x ... x nu_N^(i+N-1) / mu^(N-1)` (upper indices mod N).
///
/// Slot `j` of the replacements receives every `nu_j^i` exactly once, so all
/// marginals are kept. The new plan and its cell-lower cost are returned;
/// whether the move pays off is for the caller to decide.
pub fn swap_improve(
    plan: &TransportPlan,
    model: &CostModel,
    centers: &[CellTuple],
    radii: &[f64],
) -> Result<(TransportPlan, f64)> {
    let n = plan.n_marginals();
    let grid = plan.grid();
    if centers.len() != n || radii.len() != n || centers.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "swap needs {n} centers of {n} cells and {n} radii"
        )));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidArgument(format!("swap radius {r} is not positive")));
    }
    let slack = 1e-9 * grid.side();
    let center_points: Vec<Vec<Vec<f64>>> = centers
        .iter()
        .map(|t| t.cells().iter().map(|c| grid.cell_center(c)).collect())
        .collect();
    let inside = |t: &CellTuple, i: usize| {
        t.cells().iter().zip(&center_points[i]).all(|(c, x)| {
            grid.cell_center(c)
                .iter()
                .zip(x)
                .all(|(a, b)| (a - b).abs() <= radii[i] + slack)
        })
    };

    let pieces: Vec<Vec<(&CellTuple, f64)>> = (0..n)
        .map(|i| {
            plan.atoms()
                .iter()
                .filter(|(t, _)| inside(t, i))
                .map(|(t, &w)| (t, w))
                .collect()
        })
        .collect();
    if let Some(i) = pieces.iter().position(Vec::is_empty) {
        return Err(Error::EmptyRestriction(i));
    }
    for slot in 0..n {
        let used: Vec<BTreeSet<&CellIndex>> = pieces
            .iter()
            .map(|p| p.iter().map(|(t, _)| &t.0[slot]).collect())
            .collect();
        for i in 0..n {
            for k in i + 1..n {
                if !used[i].is_disjoint(&used[k]) {
                    return Err(Error::OverlappingNeighborhoods {
                        first: i,
                        second: k,
                        slot,
                    });
                }
            }
        }
    }

    let masses: Vec<f64> = pieces
        .iter()
        .map(|p| compensated_sum(p.iter().map(|(_, w)| *w)))
        .collect();
    let mu = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambdas: Vec<f64> = masses.iter().map(|&m| mu / m).collect();

    // nu[i][j]: slot-j marginal of lambda_i P_i
    let nu: Vec<Vec<Vec<(CellIndex, f64)>>> = pieces
        .iter()
        .zip(&lambdas)
        .map(|(p, &lam)| {
            (0..n)
                .map(|j| {
                    let mut marg: BTreeMap<CellIndex, f64> = BTreeMap::new();
                    for (t, w) in p {
                        *marg.entry(t.0[j].clone()).or_default() += lam * w;
                    }
                    marg.into_iter().collect()
                })
                .collect()
        })
        .collect();

    let mut atoms: BTreeMap<CellTuple, f64> = plan.atoms().clone();
    for (p, &lam) in pieces.iter().zip(&lambdas) {
        for (t, w) in p {
            let rest = if lam >= 1.0 { 0.0 } else { w * (1.0 - lam) };
            if rest > 0.0 {
                atoms.insert((*t).clone(), rest);
            } else {
                atoms.remove(*t);
            }
        }
    }
    let norm = mu.powi(n as i32 - 1);
    for i in 0..n {
        let factors: Vec<&Vec<(CellIndex, f64)>> = (0..n).map(|j| &nu[(i + j) % n][j]).collect();
        let count = factors.iter().map(|f| f.len()).product::<usize>();
        if count > MAX_PRODUCT_ATOMS {
            return Err(Error::InvalidArgument(format!(
                "swap rebuild would create {count} atoms"
            )));
        }
        let mut idx = vec![0usize; n];
        for _ in 0..count {
            let tuple = CellTuple(idx.iter().zip(&factors).map(|(&a, f)| f[a].0.clone()).collect());
            let w = idx.iter().zip(&factors).map(|(&a, f)| f[a].1).product::<f64>() / norm;
            *atoms.entry(tuple).or_default() += w;
            for (slot, f) in idx.iter_mut().zip(&factors).rev() {
                *slot += 1;
                if *slot < f.len() {
                    break;
                }
                *slot = 0;
            }
        }
    }
    let out = TransportPlan::new(*grid, n, atoms)?;
    let cost = out.cost_lower(model);
    Ok((out, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn cell(c: i64) -> CellIndex {
        CellIndex::new(vec![c])
    }

    fn tuple(c: &[i64]) -> CellTuple {
        CellTuple(c.iter().map(|&x| cell(x)).collect())
    }

    fn plan(grid: &GridSpec, n: usize, atoms: &[(&[i64], f64)]) -> TransportPlan {
        TransportPlan::new(*grid, n, atoms.iter().map(|(t, w)| (tuple(t), *w)).collect()).unwrap()
    }

    #[test]
    fn diagonal_pair_becomes_antidiagonal() {
        let grid = GridSpec::new(2, 2.0, 1).unwrap();
        let model = CostModel::coulomb(2).unwrap();
        let p = plan(&grid, 2, &[(&[-3, -3], 0.5), (&[4, 4], 0.5)]);
        let r = grid.side() / 2.0;
        let (q, cost) = swap_improve(&p, &model, &[tuple(&[-3, -3]), tuple(&[4, 4])], &[r, r]).unwrap();
        let expect = plan(&grid, 2, &[(&[-3, 4], 0.5), (&[4, -3], 0.5)]);
        assert_eq!(q, expect);
        assert_eq!(cost, expect.cost_lower(&model));
        assert!(cost < p.cost_lower(&model));
        assert_eq!(q.marginal_deviation(&p), 0.0);
    }

    #[test]
    fn swapping_back_restores_the_plan() {
        let grid = GridSpec::new(2, 2.0, 1).unwrap();
        let model = CostModel::coulomb(2).unwrap();
        let p = plan(
            &grid,
            2,
            &[(&[-7, 7], 0.25), (&[-7, 8], 0.25), (&[7, -7], 0.25), (&[8, -7], 0.25)],
        );
        let r = grid.side();
        let (q, _) = swap_improve(&p, &model, &[tuple(&[-7, 7]), tuple(&[7, -7])], &[r, r]).unwrap();
        assert_eq!(q.atoms().get(&tuple(&[-7, -7])), Some(&0.5));
        assert!(q.marginal_deviation(&p) < 1e-15);
        let (back, cost) = swap_improve(&q, &model, &[tuple(&[-7, -7]), tuple(&[7, 7])], &[r, r]).unwrap();
        assert_eq!(back, p);
        assert_eq!(cost, p.cost_lower(&model));
    }

    #[test]
    fn three_marginals_near_diagonal() {
        let grid = GridSpec::new(1, 2.0, 1).unwrap();
        let model = CostModel::coulomb(3).unwrap();
        let (a, b, c) = (-3, 0, 4);
        let rho = crate::measure::DiscreteMeasure::new(
            grid,
            [(cell(a), 1.0), (cell(b), 1.0), (cell(c), 1.0)].into_iter().collect(),
        )
        .unwrap();
        let p = super::super::plan::product_plan(&rho, 3).unwrap();
        let base = p.cost_lower(&model);
        let r = grid.side() / 2.0;
        let centers = [tuple(&[a, a, a]), tuple(&[b, b, b]), tuple(&[c, c, c])];
        let (q, cost) = swap_improve(&p, &model, &centers, &[r; 3]).unwrap();
        assert!(q.marginal_deviation(&p) <= 1e-12);
        assert!(cost < base, "{cost} vs {base}");
        assert!(q.atoms().get(&tuple(&[a, a, a])).is_none());
        // each rebuilt tuple meets every point once
        let expected = 2.0 / 27.0;
        assert!((q.atoms()[&tuple(&[a, b, c])] - expected).abs() < 1e-15);
        let direct = base - 3.0 / 27.0 * diag_cost(&model, &grid, &[a, b, c])
            + 3.0 / 27.0 * model.cell_cost_lower(&tuple(&[a, b, c]), &grid);
        assert!((cost - direct).abs() < 1e-12);
    }

    fn diag_cost(model: &CostModel, grid: &GridSpec, cells: &[i64]) -> f64 {
        cells
            .iter()
            .map(|&x| model.cell_cost_lower(&tuple(&[x, x, x]), grid))
            .sum::<f64>()
            / 3.0
    }

    #[test]
    fn error_cases() {
        let grid = GridSpec::new(1, 2.0, 1).unwrap();
        let model = CostModel::coulomb(2).unwrap();
        let p = plan(&grid, 2, &[(&[-1, 2], 0.5), (&[2, -1], 0.5)]);
        let r = grid.side() / 2.0;
        assert!(matches!(
            swap_improve(&p, &model, &[tuple(&[-1, 2]), tuple(&[0, 0])], &[r, r]),
            Err(Error::EmptyRestriction(1))
        ));
        assert!(matches!(
            swap_improve(&p, &model, &[tuple(&[-1, 2]), tuple(&[-1, 2])], &[r, r]),
            Err(Error::OverlappingNeighborhoods { first: 0, second: 1, slot: 0 })
        ));
        assert!(matches!(
            swap_improve(&p, &model, &[tuple(&[-1, 2])], &[r]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(swap_improve(&p, &model, &[tuple(&[-1, 2]), tuple(&[2, -1])], &[0.0, r]).is_err());
    }
}
