//! Dyadic cube geometry.
//!
//! A cell at level `n` with lattice index `a` covers the half-open interval
//! `[(a - 1) / 2^n, a / 2^n)` on every axis. The window `[-R, R]^d` must tile
//! exactly into cells, so valid indices run from `1 - R 2^n` to `R 2^n`
//! inclusive. The upper window boundary belongs to the topmost cell.
//!
//! Distances between cells are computed in integer units of the cell side and
//! converted with a single square root, so they are exact up to one rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported refinement level; keeps `R * 2^n` comfortably inside `i64`.
pub const MAX_LEVEL: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub level: u32,
    pub halfwidth: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<i64>);

impl CellIndex {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        CellIndex(coords.into())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl GridSpec {
    pub fn new(level: u32, halfwidth: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidGrid(format!(
                "level {level} exceeds the maximum {MAX_LEVEL}"
            )));
        }
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "window halfwidth must be positive, got {halfwidth}"
            )));
        }
        let scaled = halfwidth * 2f64.powi(level as i32);
        if scaled.fract() != 0.0 || scaled < 1.0 || scaled > (1u64 << 50) as f64 {
            return Err(Error::InvalidGrid(format!(
                "window halfwidth {halfwidth} does not tile into cells of side 2^-{level}"
            )));
        }
        Ok(GridSpec {
            level,
            halfwidth,
            dim,
        })
    }

    /// Cell side length `2^-level`.
    pub fn side(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    /// Number of cells per axis on each side of the origin, `R 2^n`.
    pub fn half_cells(&self) -> i64 {
        (self.halfwidth * 2f64.powi(self.level as i32)) as i64
    }

    pub fn min_index(&self) -> i64 {
        1 - self.half_cells()
    }

    pub fn max_index(&self) -> i64 {
        self.half_cells()
    }

    pub fn cells_per_axis(&self) -> usize {
        (2 * self.half_cells()) as usize
    }

    pub fn contains_cell(&self, cell: &CellIndex) -> bool {
        cell.dim() == self.dim
            && cell
                .coords()
                .iter()
                .all(|&a| a >= self.min_index() && a <= self.max_index())
    }

    pub fn contains_point(&self, point: &[f64]) -> bool {
        point.len() == self.dim
            && point
                .iter()
                .all(|&x| x >= -self.halfwidth && x <= self.halfwidth)
    }

    /// Cell containing `point` under the half-open convention.
    pub fn cell_of(&self, point: &[f64]) -> Result<CellIndex> {
        if !self.contains_point(point) {
            return Err(Error::PointOutsideWindow {
                point: point.to_vec(),
                halfwidth: self.halfwidth,
                dim: self.dim,
            });
        }
        let scale = 2f64.powi(self.level as i32);
        let top = self.max_index();
        let coords = point
            .iter()
            .map(|&x| (((x * scale).floor() as i64) + 1).min(top))
            .collect();
        Ok(CellIndex(coords))
    }

    /// Closed bounds `(lo, hi)` of the cell along every axis.
    pub fn cell_bounds(&self, cell: &CellIndex) -> Vec<(f64, f64)> {
        let h = self.side();
        cell.coords()
            .iter()
            .map(|&a| ((a - 1) as f64 * h, a as f64 * h))
            .collect()
    }

    pub fn cell_center(&self, cell: &CellIndex) -> Vec<f64> {
        let h = self.side();
        cell.coords()
            .iter()
            .map(|&a| (a as f64 - 0.5) * h)
            .collect()
    }

    /// Largest distance between a point of `closure(a)` and a point of `closure(b)`.
    pub fn sup_dist(&self, a: &CellIndex, b: &CellIndex) -> f64 {
        let squares: u128 = a
            .coords()
            .iter()
            .zip(b.coords())
            .map(|(&x, &y)| {
                let gap = x.abs_diff(y) as u128 + 1;
                gap * gap
            })
            .sum();
        (squares as f64).sqrt() * self.side()
    }

    /// Smallest distance between the closed cells; zero when they touch.
    pub fn inf_dist(&self, a: &CellIndex, b: &CellIndex) -> f64 {
        let squares: u128 = a
            .coords()
            .iter()
            .zip(b.coords())
            .map(|(&x, &y)| {
                let gap = x.abs_diff(y).saturating_sub(1) as u128;
                gap * gap
            })
            .sum();
        (squares as f64).sqrt() * self.side()
    }

    /// The same window one level coarser, or `None` when the window would
    /// no longer tile (or the level is already zero).
    pub fn coarser(&self) -> Option<GridSpec> {
        if self.level == 0 {
            return None;
        }
        GridSpec::new(self.level - 1, self.halfwidth, self.dim).ok()
    }

    pub fn finer(&self) -> Result<GridSpec> {
        GridSpec::new(self.level + 1, self.halfwidth, self.dim)
    }

    /// Index of the cell one level up that contains `cell`.
    pub fn parent(cell: &CellIndex) -> CellIndex {
        CellIndex(cell.coords().iter().map(|&a| (a + 1).div_euclid(2)).collect())
    }

    /// The `2^d` cells one level down contained in `cell`, in lexicographic order.
    pub fn children(cell: &CellIndex) -> Vec<CellIndex> {
        let d = cell.dim();
        (0..1usize << d)
            .map(|mask| {
                CellIndex(
                    cell.coords()
                        .iter()
                        .enumerate()
                        .map(|(axis, &a)| {
                            // high bit first so the output is lexicographic
                            let bit = (mask >> (d - 1 - axis)) & 1;
                            2 * a - 1 + bit as i64
                        })
                        .collect(),
                )
            })
            .collect()
    }

    /// All cells of the window in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let per_axis = self.cells_per_axis();
        let total = per_axis.pow(self.dim as u32);
        let lo = self.min_index();
        (0..total).map(move |mut flat| {
            let mut coords = vec![0i64; self.dim];
            for axis in (0..self.dim).rev() {
                coords[axis] = lo + (flat % per_axis) as i64;
                flat /= per_axis;
            }
            CellIndex(coords)
        })
    }
}
