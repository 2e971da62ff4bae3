//! Repulsive pair costs and their piecewise-constant lower approximations.
//!
//! The cell-level cost of a tuple of cells is `sum_{i<j} sup_dist(c_i, c_j)^-s`.
//! Every term bounds `|x_i - x_j|^-s` from below for points inside the cells,
//! grows under dyadic refinement (sub-cells have smaller extremal distance),
//! and converges to the pointwise value off the diagonal.
//!
//! Pair terms are always summed in ascending order. The sorted sum depends only
//! on the multiset of terms, so reordering a tuple gives a bit-identical cost,
//! and raising any term can never lower the rounded total.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CostKind {
    Coulomb,
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub kind: CostKind,
    pub n_marginals: usize,
}

/// Which cost the transport problem is posed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostMode {
    /// The cell-constant lower approximation.
    #[default]
    CellLower,
    /// The exact pair cost evaluated at each cell's representative point;
    /// tuples with coinciding points are infinite and never enter the LP.
    Pointwise,
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostMode::CellLower => "lower",
            CostMode::Pointwise => "pointwise",
        })
    }
}

/// An ordered tuple of cells, one per marginal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellTuple(pub Vec<CellIndex>);

impl CellTuple {
    pub fn cells(&self) -> &[CellIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl CostModel {
    pub fn new(kind: CostKind, n_marginals: usize) -> Result<Self> {
        if n_marginals < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least two marginals are needed, got {n_marginals}"
            )));
        }
        if let CostKind::Power(s) = kind {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "cost exponent must be positive, got {s}"
                )));
            }
        }
        Ok(CostModel { kind, n_marginals })
    }

    pub fn coulomb(n_marginals: usize) -> Result<Self> {
        Self::new(CostKind::Coulomb, n_marginals)
    }

    pub fn power(s: f64, n_marginals: usize) -> Result<Self> {
        Self::new(CostKind::Power(s), n_marginals)
    }

    pub fn exponent(&self) -> f64 {
        match self.kind {
            CostKind::Coulomb => 1.0,
            CostKind::Power(s) => s,
        }
    }

    /// `dist^-s`, infinite at zero distance.
    pub fn pair_term(&self, dist: f64) -> f64 {
        match self.kind {
            CostKind::Power(s) if s != 1.0 => dist.powf(-s),
            _ => 1.0 / dist,
        }
    }

    /// `sum_{i<j} |x_i - x_j|^-s`; `+inf` when two points coincide.
    pub fn pointwise_cost<P: AsRef<[f64]>>(&self, points: &[P]) -> f64 {
        sum_pairs(points.len(), |i, j| {
            self.pair_term(euclidean(points[i].as_ref(), points[j].as_ref()))
        })
    }

    /// Cell-constant lower bound of the pair cost on the product of cells.
    pub fn cell_cost_lower(&self, tuple: &CellTuple, grid: &GridSpec) -> f64 {
        let cells = tuple.cells();
        sum_pairs(cells.len(), |i, j| {
            self.pair_term(grid.sup_dist(&cells[i], &cells[j]))
        })
    }

    /// Whether `cell_cost_lower` takes the same value on every reordering of the tuple.
    pub fn is_permutation_invariant(&self, tuple: &CellTuple, grid: &GridSpec) -> bool {
        let base = self.cell_cost_lower(tuple, grid);
        let mut order: Vec<usize> = (0..tuple.len()).collect();
        let mut same = true;
        for_each_permutation(&mut order, 0, &mut |perm| {
            let permuted = CellTuple(perm.iter().map(|&i| tuple.0[i].clone()).collect());
            same &= self.cell_cost_lower(&permuted, grid) == base;
        });
        same
    }
}

pub fn pointwise_cost<P: AsRef<[f64]>>(model: &CostModel, points: &[P]) -> f64 {
    model.pointwise_cost(points)
}

pub fn cell_cost_lower(model: &CostModel, tuple: &CellTuple, grid: &GridSpec) -> f64 {
    model.cell_cost_lower(tuple, grid)
}

pub fn is_permutation_invariant_check(model: &CostModel, tuple: &CellTuple, grid: &GridSpec) -> bool {
    model.is_permutation_invariant(tuple, grid)
}

/// Sum of `term(i, j)` over `i < j < n`, added in ascending order of value.
#[inline]
pub(crate) fn sum_pairs(n: usize, term: impl Fn(usize, usize) -> f64) -> f64 {
    const STACK: usize = 28;
    let count = n * n.saturating_sub(1) / 2;
    let mut stack = [0.0f64; STACK];
    let mut heap = Vec::new();
    let terms: &mut [f64] = if count <= STACK {
        &mut stack[..count]
    } else {
        heap.resize(count, 0.0);
        &mut heap
    };
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            terms[k] = term(i, j);
            k += 1;
        }
    }
    // insertion sort; `count` is tiny
    for a in 1..terms.len() {
        let mut b = a;
        while b > 0 && terms[b - 1] > terms[b] {
            terms.swap(b - 1, b);
            b -= 1;
        }
    }
    terms.iter().sum()
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pair costs between the support cells of a measure, so that the cost of a
/// tuple of support indices is a sum of table lookups.
///
/// Lookups are summed exactly like [`CostModel::cell_cost_lower`], so table
/// and direct evaluation agree bit for bit.
#[derive(Debug, Clone)]
pub struct PairCostTable {
    size: usize,
    n_marginals: usize,
    table: Vec<f64>,
}

impl PairCostTable {
    pub fn new(model: &CostModel, measure: &DiscreteMeasure, mode: CostMode) -> Self {
        let cells = measure.cells();
        let grid = measure.grid();
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
        PairCostTable {
            size: m,
            n_marginals: model.n_marginals,
            table,
        }
    }

    /// Builds a table directly from a symmetric pair matrix (row-major, `size x size`).
    pub fn from_pairs(size: usize, n_marginals: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "pair table has {} entries, expected {}",
                table.len(),
                size * size
            )));
        }
        Ok(PairCostTable {
            size,
            n_marginals,
            table,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_marginals(&self) -> usize {
        self.n_marginals
    }

    pub fn pair(&self, a: usize, b: usize) -> f64 {
        self.table[a * self.size + b]
    }

    pub fn tuple_cost(&self, tuple: &[usize]) -> f64 {
        sum_pairs(tuple.len(), |i, j| self.pair(tuple[i], tuple[j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discretize, Density};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(c: &[i64]) -> CellIndex {
        CellIndex::new(c.to_vec())
    }

    #[test]
    fn pointwise_examples() {
        let m2 = CostModel::coulomb(2).unwrap();
        assert_eq!(m2.pointwise_cost(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), 0.5);
        assert_eq!(m2.pointwise_cost(&[[1.0, 2.0], [1.0, 2.0]]), f64::INFINITY);
        let m3 = CostModel::coulomb(3).unwrap();
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        assert!((m3.pointwise_cost(&tri) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn power_one_is_coulomb() {
        let c = CostModel::coulomb(3).unwrap();
        let p = CostModel::power(1.0, 3).unwrap();
        let pts = [[0.1, 0.7], [-0.3, 0.2], [0.9, -0.4]];
        assert_eq!(c.pointwise_cost(&pts), p.pointwise_cost(&pts));
        let p2 = CostModel::power(2.0, 2).unwrap();
        assert_eq!(p2.pointwise_cost(&[[0.0], [2.0]]), 0.25);
    }

    #[test]
    fn invalid_models() {
        assert!(CostModel::coulomb(1).is_err());
        assert!(CostModel::power(0.0, 2).is_err());
        assert!(CostModel::power(-1.0, 2).is_err());
        assert!(CostModel::power(f64::NAN, 2).is_err());
    }

    #[test]
    fn cell_cost_examples() {
        let g = GridSpec::new(1, 1.0, 3).unwrap();
        let m2 = CostModel::coulomb(2).unwrap();
        let a = cell(&[1, 1, 1]);
        let b = cell(&[2, 1, 1]);
        let v = m2.cell_cost_lower(&CellTuple(vec![a.clone(), b]), &g);
        assert!((v - 1.0 / 1.5f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.8164966).abs() < 1e-7);
        let same = m2.cell_cost_lower(&CellTuple(vec![a.clone(), a.clone()]), &g);
        assert!((same - 1.0 / (0.5 * 3f64.sqrt())).abs() < 1e-15);
        let m3 = CostModel::coulomb(3).unwrap();
        let triple = m3.cell_cost_lower(&CellTuple(vec![a.clone(), a.clone(), a]), &g);
        assert!((triple - 3.0 / (0.5 * 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn permutation_invariance() {
        let g = GridSpec::new(2, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cells: Vec<_> = g.cells().collect();
        for n in 2..=4 {
            let model = CostModel::power(1.7, n).unwrap();
            for _ in 0..100 {
                let t = CellTuple(
                    (0..n)
                        .map(|_| cells[rng.random_range(0..cells.len())].clone())
                        .collect(),
                );
                assert!(is_permutation_invariant_check(&model, &t, &g));
            }
        }
    }

    #[test]
    fn lower_bound_and_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = CostModel::coulomb(3).unwrap();
        for _ in 0..200 {
            let pts: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let exact = model.pointwise_cost(&pts);
            let mut prev = 0.0;
            let mut gaps = Vec::new();
            for level in 0..=6 {
                let g = GridSpec::new(level, 1.0, 2).unwrap();
                let t = CellTuple(pts.iter().map(|p| g.cell_of(p).unwrap()).collect());
                let v = model.cell_cost_lower(&t, &g);
                assert!(v <= exact);
                assert!(v >= prev);
                prev = v;
                gaps.push(exact - v);
            }
            assert!(gaps[6] < gaps[2]);
        }
    }

    #[test]
    fn pair_table_matches_direct_evaluation() {
        let g = GridSpec::new(2, 1.0, 2).unwrap();
        let ball = Density::UniformBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let measure = discretize(&ball, &g, 2).unwrap();
        let cells = measure.cells();
        let model = CostModel::power(1.5, 3).unwrap();
        let table = PairCostTable::new(&model, &measure, CostMode::CellLower);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let idx: Vec<usize> = (0..3).map(|_| rng.random_range(0..cells.len())).collect();
            let t = CellTuple(idx.iter().map(|&i| cells[i].clone()).collect());
            assert_eq!(table.tuple_cost(&idx), model.cell_cost_lower(&t, &g));
        }
    }

    #[test]
    fn pointwise_table_is_infinite_on_diagonal() {
        let g = GridSpec::new(3, 4.0, 3).unwrap();
        let d = Density::Atomic {
            points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
            weights: vec![0.5, 0.5],
        };
        let measure = discretize(&d, &g, 1).unwrap();
        let model = CostModel::coulomb(2).unwrap();
        let table = PairCostTable::new(&model, &measure, CostMode::Pointwise);
        assert_eq!(table.tuple_cost(&[0, 1]), 0.5);
        assert_eq!(table.tuple_cost(&[1, 1]), f64::INFINITY);
    }
}
