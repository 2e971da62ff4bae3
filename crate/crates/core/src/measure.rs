//! Probability measures on the dyadic grid.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::io::{compensated_sum, parse_cell, parse_real, strip_comment, write_cell, Header};

/// Loaded weights may deviate from unit mass by at most this much before renormalization.
pub const LOAD_MASS_TOL: f64 = 1e-9;

const MEASURE_MAGIC: &str = "mmot-measure";

/// Upper bound on per-axis subsamples used when refining a cell that the
/// ball touches but no regular subsample hit.
const MAX_ADAPTIVE_SAMPLES: usize = 64;

/// Analytic density presets that can be discretized onto a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Density {
    UniformBall { center: Vec<f64>, radius: f64 },
    TruncatedGaussian { center: Vec<f64>, sigma: f64 },
    Atomic { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::UniformBall { center, .. } | Density::TruncatedGaussian { center, .. } => {
                center.len()
            }
            Density::Atomic { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Density::Atomic { .. })
    }
}

/// Nonnegative weights on grid cells summing to one.
///
/// Cells with zero weight are never stored. Atomic presets additionally keep
/// the exact location of each atom (its anchor) so that costs can be
/// evaluated at the true points rather than at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: GridSpec,
    atoms: BTreeMap<CellIndex, f64>,
    anchors: BTreeMap<CellIndex, Vec<f64>>,
}

impl DiscreteMeasure {
    /// Builds a measure from explicit cell weights, renormalizing exactly.
    ///
    /// Zero weights are dropped; negative or non-finite weights, cells outside
    /// the window and an empty support are rejected.
    pub fn new(grid: GridSpec, atoms: BTreeMap<CellIndex, f64>) -> Result<Self> {
        for (cell, &w) in &atoms {
            if !grid.contains_cell(cell) {
                return Err(Error::SupportOutsideWindow(format!("cell {cell}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight {w} at cell {cell} is not a nonnegative number"
                )));
            }
        }
        let mut atoms: BTreeMap<_, _> = atoms.into_iter().filter(|(_, w)| *w > 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::ZeroMass);
        }
        normalize(&mut atoms);
        Ok(DiscreteMeasure {
            grid,
            atoms,
            anchors: BTreeMap::new(),
        })
    }

    pub fn with_anchors(mut self, anchors: BTreeMap<CellIndex, Vec<f64>>) -> Self {
        self.anchors = anchors
            .into_iter()
            .filter(|(c, p)| self.atoms.contains_key(c) && p.len() == self.grid.dim)
            .collect();
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn atoms(&self) -> &BTreeMap<CellIndex, f64> {
        &self.atoms
    }

    pub fn anchors(&self) -> &BTreeMap<CellIndex, Vec<f64>> {
        &self.anchors
    }

    pub fn cells(&self) -> Vec<CellIndex> {
        self.atoms.keys().cloned().collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.values().copied().collect()
    }

    pub fn weight(&self, cell: &CellIndex) -> f64 {
        self.atoms.get(cell).copied().unwrap_or(0.0)
    }

    pub fn support_cardinality(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.values().copied())
    }

    /// Point standing in for the cell: the atom's exact location when known,
    /// otherwise the cell center.
    pub fn representative(&self, cell: &CellIndex) -> Vec<f64> {
        self.anchors
            .get(cell)
            .cloned()
            .unwrap_or_else(|| self.grid.cell_center(cell))
    }

    /// Aggregates the weights onto the parent cells one level up.
    pub fn coarsen(&self) -> Result<DiscreteMeasure> {
        let coarse = self.grid.coarser().ok_or_else(|| {
            Error::InvalidGrid(format!(
                "level {} with halfwidth {} has no coarser tiling",
                self.grid.level, self.grid.halfwidth
            ))
        })?;
        let mut atoms: BTreeMap<CellIndex, f64> = BTreeMap::new();
        let mut moments: BTreeMap<CellIndex, (f64, Vec<f64>)> = BTreeMap::new();
        for (cell, &w) in &self.atoms {
            let parent = GridSpec::parent(cell);
            *atoms.entry(parent.clone()).or_insert(0.0) += w;
            if let Some(p) = self.anchors.get(cell) {
                let entry = moments
                    .entry(parent)
                    .or_insert_with(|| (0.0, vec![0.0; p.len()]));
                entry.0 += w;
                for (acc, x) in entry.1.iter_mut().zip(p) {
                    *acc += w * x;
                }
            }
        }
        let anchors = moments
            .into_iter()
            .map(|(c, (w, acc))| (c, acc.into_iter().map(|x| x / w).collect()))
            .collect();
        Ok(DiscreteMeasure::new(coarse, atoms)?.with_anchors(anchors))
    }

    /// Coarsens repeatedly until `level` is reached.
    pub fn coarsen_to(&self, level: u32) -> Result<DiscreteMeasure> {
        if level > self.grid.level {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen level {} to finer level {level}",
                self.grid.level
            )));
        }
        let mut m = self.clone();
        while m.grid.level > level {
            m = m.coarsen()?;
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "{MEASURE_MAGIC} v1 level={} halfwidth={} dim={}\n",
            g.level, g.halfwidth, g.dim
        );
        for (cell, w) in &self.atoms {
            write_cell(&mut out, cell);
            out.push_str(&format!("{w:?}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<DiscreteMeasure> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| strip_comment(l).map(|b| (i + 1, b)));
        let (hline, htext) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty measure file".into(),
        })?;
        let grid = Header::parse(htext, hline, MEASURE_MAGIC)?.grid()?;
        let mut atoms = BTreeMap::new();
        for (line, body) in lines {
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.len() != grid.dim + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", grid.dim + 1, tokens.len()),
                });
            }
            let cell = parse_cell(&tokens[..grid.dim], line)?;
            let weight = parse_real(tokens[grid.dim], line)?;
            if weight < 0.0 {
                return Err(Error::NegativeWeight { line, weight });
            }
            if !grid.contains_cell(&cell) {
                return Err(Error::Parse {
                    line,
                    msg: format!("cell {cell} lies outside the window"),
                });
            }
            if atoms.insert(cell.clone(), weight).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate cell {cell}"),
                });
            }
        }
        let sum = compensated_sum(atoms.values().copied());
        if (sum - 1.0).abs() > LOAD_MASS_TOL {
            return Err(Error::Normalization {
                sum,
                tol: LOAD_MASS_TOL,
            });
        }
        DiscreteMeasure::new(grid, atoms)
    }
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::parse(&std::fs::read_to_string(path)?)
}

pub fn save_measure(measure: &DiscreteMeasure, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, measure.to_text())?;
    Ok(())
}

pub fn support_cardinality(measure: &DiscreteMeasure) -> usize {
    measure.support_cardinality()
}

/// Rescales the weights so their compensated sum is exactly one.
///
/// A second call is a no-op: if the rescaled weights do not already sum to
/// one, the residual is folded into the largest weight.
pub fn normalize(atoms: &mut BTreeMap<CellIndex, f64>) {
    for _ in 0..4 {
        let sum = compensated_sum(atoms.values().copied());
        if sum == 1.0 {
            return;
        }
        if (sum - 1.0).abs() > 1e-12 {
            atoms.values_mut().for_each(|w| *w /= sum);
            continue;
        }
        let residual = 1.0 - sum;
        if let Some(w) = atoms
            .values_mut()
            .max_by(|a, b| a.partial_cmp(b).expect("finite weights"))
        {
            *w += residual;
        }
    }
}

/// Discretizes an analytic density onto `grid`.
///
/// Smooth presets use a midpoint rule with `samples_per_cell` points per axis
/// in each cell; atomic presets are placed exactly.
pub fn discretize(
    density: &Density,
    grid: &GridSpec,
    samples_per_cell: usize,
) -> Result<DiscreteMeasure> {
    if density.dim() != grid.dim {
        return Err(Error::DimensionMismatch(format!(
            "density has dimension {}, grid has {}",
            density.dim(),
            grid.dim
        )));
    }
    if samples_per_cell == 0 {
        return Err(Error::InvalidArgument(
            "samples_per_cell must be positive".into(),
        ));
    }
    match density {
        Density::Atomic { points, weights } => discretize_atomic(points, weights, grid),
        Density::UniformBall { center, radius } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidArgument(format!("ball radius {radius}")));
            }
            if center
                .iter()
                .any(|&c| c - radius < -grid.halfwidth || c + radius > grid.halfwidth)
            {
                return Err(Error::SupportOutsideWindow(format!(
                    "ball of radius {radius} around {center:?}"
                )));
            }
            let r2 = radius * radius;
            let inside = |p: &[f64]| squared_dist(p, center) < r2;
            let touches = |cell: &CellIndex| box_dist2(grid, cell, center) < r2;
            quadrature(grid, |cell| {
                if !touches(cell) {
                    return 0.0;
                }
                let mut k = samples_per_cell;
                loop {
                    let w = cell_average(grid, cell, k, |p| if inside(p) { 1.0 } else { 0.0 });
                    if w > 0.0 || k >= MAX_ADAPTIVE_SAMPLES {
                        return w;
                    }
                    k *= 2;
                }
            })
        }
        Density::TruncatedGaussian { center, sigma } => {
            if !(*sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!("gaussian sigma {sigma}")));
            }
            if !grid.contains_point(center) {
                return Err(Error::SupportOutsideWindow(format!(
                    "gaussian center {center:?}"
                )));
            }
            let scale = -0.5 / (sigma * sigma);
            quadrature(grid, |cell| {
                cell_average(grid, cell, samples_per_cell, |p| {
                    (scale * squared_dist(p, center)).exp()
                })
            })
        }
    }
}

fn discretize_atomic(
    points: &[Vec<f64>],
    weights: &[f64],
    grid: &GridSpec,
) -> Result<DiscreteMeasure> {
    if points.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} atoms but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let mut atoms: BTreeMap<CellIndex, f64> = BTreeMap::new();
    let mut moments: BTreeMap<CellIndex, (f64, Vec<f64>)> = BTreeMap::new();
    for (p, &w) in points.iter().zip(weights) {
        if p.len() != grid.dim {
            return Err(Error::DimensionMismatch(format!(
                "atom {p:?} does not have dimension {}",
                grid.dim
            )));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidArgument(format!("atom weight {w}")));
        }
        let cell = grid
            .cell_of(p)
            .map_err(|_| Error::SupportOutsideWindow(format!("atom {p:?}")))?;
        if w == 0.0 {
            continue;
        }
        *atoms.entry(cell.clone()).or_insert(0.0) += w;
        let m = moments.entry(cell).or_insert_with(|| (0.0, vec![0.0; p.len()]));
        m.0 += w;
        for (acc, x) in m.1.iter_mut().zip(p) {
            *acc += w * x;
        }
    }
    let anchors = moments
        .into_iter()
        .map(|(c, (w, acc))| {
            (c, acc.into_iter().map(|x| x / w).collect())
        })
        .collect();
    Ok(DiscreteMeasure::new(*grid, atoms)?.with_anchors(anchors))
}

fn quadrature(
    grid: &GridSpec,
    cell_mass: impl Fn(&CellIndex) -> f64 + Sync,
) -> Result<DiscreteMeasure> {
    let cells: Vec<CellIndex> = grid.cells().collect();
    let masses: Vec<f64> = cells.par_iter().map(&cell_mass).collect();
    let atoms: BTreeMap<_, _> = cells
        .into_iter()
        .zip(masses)
        .filter(|(_, w)| *w > 0.0)
        .collect();
    DiscreteMeasure::new(*grid, atoms)
}

/// Mean of `f` over a `k^d` midpoint lattice inside the cell (the cell
/// volume is common to all cells and drops out under normalization).
fn cell_average(grid: &GridSpec, cell: &CellIndex, k: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let bounds = grid.cell_bounds(cell);
    let d = bounds.len();
    let total = k.pow(d as u32);
    let mut point = vec![0.0; d];
    let mut acc = 0.0;
    for mut flat in 0..total {
        for (axis, &(lo, hi)) in bounds.iter().enumerate().rev() {
            let j = flat % k;
            flat /= k;
            point[axis] = lo + (hi - lo) * (j as f64 + 0.5) / k as f64;
        }
        acc += f(&point);
    }
    acc / total as f64
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance from `p` to the closed cell.
fn box_dist2(grid: &GridSpec, cell: &CellIndex, p: &[f64]) -> f64 {
    grid.cell_bounds(cell)
        .iter()
        .zip(p)
        .map(|(&(lo, hi), &x)| {
            let gap = (lo - x).max(x - hi).max(0.0);
            gap * gap
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(level: u32, r: f64, d: usize) -> GridSpec {
        GridSpec::new(level, r, d).unwrap()
    }

    fn two_points() -> Density {
        Density::Atomic {
            points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]],
            weights: vec![0.5, 0.5],
        }
    }

    #[test]
    fn atomic_placement_is_exact() {
        let g = grid(3, 4.0, 3);
        let m = discretize(&two_points(), &g, 1).unwrap();
        assert_eq!(m.support_cardinality(), 2);
        assert!(m.weights().iter().all(|&w| w == 0.5));
        let a = g.cell_of(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.representative(&a), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn single_atom() {
        let g = grid(1, 1.0, 1);
        let d = Density::Atomic {
            points: vec![vec![0.3]],
            weights: vec![2.0],
        };
        let m = discretize(&d, &g, 1).unwrap();
        assert_eq!(m.support_cardinality(), 1);
        assert_eq!(m.weights(), vec![1.0]);
    }

    #[test]
    fn atoms_outside_window_are_rejected() {
        let g = grid(1, 1.0, 3);
        assert!(matches!(
            discretize(&two_points(), &g, 1),
            Err(Error::SupportOutsideWindow(_))
        ));
        let ball = Density::UniformBall {
            center: vec![0.5, 0.0, 0.0],
            radius: 1.0,
        };
        assert!(matches!(
            discretize(&ball, &g, 2),
            Err(Error::SupportOutsideWindow(_))
        ));
    }

    #[test]
    fn zero_mass_is_rejected() {
        let g = grid(1, 1.0, 1);
        let d = Density::Atomic {
            points: vec![vec![0.3]],
            weights: vec![0.0],
        };
        assert!(matches!(discretize(&d, &g, 1), Err(Error::ZeroMass)));
    }

    #[test]
    fn uniform_ball_interior_cells_are_equal() {
        for level in 1..=3 {
            let g = grid(level, 1.0, 3);
            let ball = Density::UniformBall {
                center: vec![0.0; 3],
                radius: 1.0,
            };
            let m = discretize(&ball, &g, 3).unwrap();
            assert_eq!(m.total_mass(), 1.0);
            let interior: Vec<f64> = m
                .atoms()
                .iter()
                .filter(|(c, _)| {
                    // farthest corner inside the ball
                    g.cell_bounds(c)
                        .iter()
                        .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
                        .sum::<f64>()
                        < 1.0
                })
                .map(|(_, &w)| w)
                .collect();
            assert!(!interior.is_empty());
            let first = interior[0];
            assert!(interior.iter().all(|&w| (w - first).abs() <= 1e-15 * first.max(1.0)));
        }
    }

    #[test]
    fn uniform_ball_support_counts_touching_cells() {
        let g = grid(2, 1.0, 3);
        let ball = Density::UniformBall {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        let m = discretize(&ball, &g, 2).unwrap();
        // direct geometric count: closest point of each closed cell strictly inside the ball
        let mut expected = 0;
        for i in -3..=4i64 {
            for j in -3..=4i64 {
                for k in -3..=4i64 {
                    let near = |a: i64| {
                        let (lo, hi) = ((a - 1) as f64 * 0.25, a as f64 * 0.25);
                        if lo > 0.0 {
                            lo
                        } else if hi < 0.0 {
                            -hi
                        } else {
                            0.0
                        }
                    };
                    if near(i).powi(2) + near(j).powi(2) + near(k).powi(2) < 1.0 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(support_cardinality(&m), expected);
    }

    #[test]
    fn truncated_gaussian_matches_monte_carlo() {
        let g = grid(3, 1.0, 3);
        let dens = Density::TruncatedGaussian {
            center: vec![0.0; 3],
            sigma: 0.5,
        };
        let m = discretize(&dens, &g, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 0.5).unwrap();
        let mut counts: BTreeMap<CellIndex, usize> = BTreeMap::new();
        let mut accepted = 0usize;
        while accepted < 1_000_000 {
            let p: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
            if let Ok(c) = g.cell_of(&p) {
                *counts.entry(c).or_insert(0) += 1;
                accepted += 1;
            }
        }
        for cell in g.cells() {
            let mc = counts.get(&cell).copied().unwrap_or(0) as f64 / accepted as f64;
            assert!((m.weight(&cell) - mc).abs() < 2e-3, "cell {cell}");
        }
        assert_eq!(m.support_cardinality(), g.cells().count());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = grid(3, 4.0, 3);
        let d = Density::Atomic {
            points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![-1.0, 0.5, 0.25]],
            weights: vec![0.1, 0.3, 0.7],
        };
        let m = discretize(&d, &g, 1).unwrap();
        let back = DiscreteMeasure::parse(&m.to_text()).unwrap();
        assert_eq!(back.atoms(), m.atoms());
        for (a, b) in back.weights().iter().zip(m.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn load_examples() {
        let text = "# two atoms\nmmot-measure v1 level=1 halfwidth=1 dim=2\n1 1 0.5\n-1 2 0.5 # second\n";
        let m = DiscreteMeasure::parse(text).unwrap();
        assert_eq!(m.support_cardinality(), 2);

        let text = "mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5\n2 0.5000000001\n";
        let m = DiscreteMeasure::parse(text).unwrap();
        assert_eq!(m.total_mass(), 1.0);

        let text = "mmot-measure v1 level=1 halfwidth=1 dim=1\n1 -0.1\n2 1.1\n";
        assert!(matches!(
            DiscreteMeasure::parse(text),
            Err(Error::NegativeWeight { line: 2, .. })
        ));

        let text = "mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5\n2 0.6\n";
        assert!(matches!(
            DiscreteMeasure::parse(text),
            Err(Error::Normalization { .. })
        ));

        let text = "mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5 7\n";
        assert!(matches!(DiscreteMeasure::parse(text), Err(Error::Parse { line: 2, .. })));
        let text = "mmot-measure v1 level=1 halfwidth=1 dim=1\n1 0.5\n1 0.5\n";
        assert!(matches!(DiscreteMeasure::parse(text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn load_from_file() {
        let dir = std::env::temp_dir().join(format!("mmot-measure-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.txt");
        let g = grid(2, 1.0, 1);
        let m = discretize(
            &Density::UniformBall {
                center: vec![0.0],
                radius: 1.0,
            },
            &g,
            2,
        )
        .unwrap();
        save_measure(&m, &path).unwrap();
        assert_eq!(load_measure(&path).unwrap(), DiscreteMeasure::parse(&m.to_text()).unwrap());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn refinement_preserves_mass_and_atom_count() {
        let d = Density::Atomic {
            points: vec![vec![0.1, 0.2], vec![-0.7, 0.4], vec![0.6, -0.6]],
            weights: vec![1.0, 2.0, 3.0],
        };
        for level in 1..6 {
            let m = discretize(&d, &grid(level, 1.0, 2), 1).unwrap();
            assert_eq!(m.total_mass(), 1.0);
            assert_eq!(m.support_cardinality(), 3);
        }
    }

    #[test]
    fn coarsen_aggregates_children() {
        let g = grid(3, 1.0, 2);
        let ball = Density::UniformBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let fine = discretize(&ball, &g, 2).unwrap();
        let coarse = fine.coarsen().unwrap();
        assert_eq!(coarse.grid().level, 2);
        for (cell, &w) in coarse.atoms() {
            let sum: f64 = GridSpec::children(cell).iter().map(|c| fine.weight(c)).sum();
            assert!((sum - w).abs() < 1e-15);
        }
        assert_eq!(fine.coarsen_to(0).unwrap().support_cardinality(), 4);
        assert!(fine.coarsen_to(4).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(ws in proptest::collection::vec(1e-6f64..10.0, 1..40)) {
            let mut atoms: BTreeMap<CellIndex, f64> = ws
                .iter()
                .enumerate()
                .map(|(i, &w)| (CellIndex::new(vec![i as i64]), w))
                .collect();
            normalize(&mut atoms);
            let once = atoms.clone();
            normalize(&mut atoms);
            prop_assert_eq!(&once, &atoms);
            prop_assert_eq!(compensated_sum(atoms.values().copied()), 1.0);
        }
    }

    #[test]
    fn random_grids_hold_unit_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..20);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let m = discretize(&Density::Atomic { points, weights }, &grid(2, 1.0, 2), 1).unwrap();
            assert_eq!(m.total_mass(), 1.0);
        }
    }
}
