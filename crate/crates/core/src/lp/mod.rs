//! Finite linear programming with primal and dual certificates, and a
//! column-generation driver for multimarginal transport problems.

mod colgen;
mod dense;
mod simplex;

pub use colgen::{
    northwest_corner, price_columns, solve_transport, ColumnGenOptions, PricedColumn,
    TransportSolution, DEFAULT_COLUMNS_PER_ROUND,
};
pub use simplex::{FEAS_TOL, OPT_TOL, PIVOT_TOL, RATIO_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use simplex::{Phase, PhaseOutcome, Simplex};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseColumn {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseColumn {
    pub fn new(rows: Vec<usize>, vals: Vec<f64>) -> Self {
        debug_assert_eq!(rows.len(), vals.len());
        SparseColumn { rows, vals }
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        self.rows.iter().zip(&self.vals).map(|(&r, &v)| y[r] * v).sum()
    }
}

/// Column-compressed constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    columns: Vec<SparseColumn>,
}

impl SparseMatrix {
    pub fn new(n_rows: usize, columns: Vec<SparseColumn>) -> Result<Self> {
        for (j, c) in columns.iter().enumerate() {
            if c.rows.len() != c.vals.len() || c.rows.iter().any(|&r| r >= n_rows) {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} references rows outside 0..{n_rows}"
                )));
            }
        }
        Ok(SparseMatrix { n_rows, columns })
    }

    /// Builds from row-major dense storage, dropping exact zeros.
    pub fn from_dense(n_rows: usize, n_cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n_rows}x{n_cols} matrix",
                data.len()
            )));
        }
        let columns = (0..n_cols)
            .map(|j| {
                let (rows, vals) = (0..n_rows)
                    .filter(|&i| data[i * n_cols + j] != 0.0)
                    .map(|i| (i, data[i * n_cols + j]))
                    .unzip();
                SparseColumn { rows, vals }
            })
            .collect();
        Ok(SparseMatrix { n_rows, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[SparseColumn] {
        &self.columns
    }

    /// `A x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (c, &xj) in self.columns.iter().zip(x) {
            for (&r, &v) in c.rows.iter().zip(&c.vals) {
                out[r] += v * xj;
            }
        }
        out
    }

    /// `A^T y`
    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| c.dot(y)).collect()
    }
}

/// `min objective . x  s.t.  A x = rhs, x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub objective: Vec<f64>,
    pub constraints: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl StandardLp {
    pub fn new(objective: Vec<f64>, constraints: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if objective.len() != constraints.n_cols() || rhs.len() != constraints.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} entries and rhs {}, matrix is {}x{}",
                objective.len(),
                rhs.len(),
                constraints.n_rows(),
                constraints.n_cols()
            )));
        }
        if rhs.iter().chain(&objective).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "objective and rhs entries must be finite".into(),
            ));
        }
        Ok(StandardLp {
            objective,
            constraints,
            rhs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point when `Optimal`; last basic point otherwise.
    pub primal: Vec<f64>,
    /// One multiplier per constraint row.
    pub dual: Vec<f64>,
    pub objective_value: f64,
    /// For `Infeasible`: `y` with `A^T y <= 0` and `b . y > 0`.
    /// For `Unbounded`: `d >= 0` with `A d = 0` and `c . d < 0`.
    pub certificate: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn dual_objective(&self, lp: &StandardLp) -> f64 {
        self.dual.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum()
    }
}

/// Solves a standard-form LP by the two-phase revised simplex method.
///
/// Linearly dependent rows are tolerated: their artificial variables stay
/// basic at zero.
pub fn solve_lp(problem: &StandardLp) -> Result<LpSolution> {
    let m = problem.constraints.n_rows();
    if m == 0 {
        return Err(Error::InvalidArgument("LP has no constraints".into()));
    }
    let mut simplex = Simplex::new(&problem.rhs);
    simplex.max_iterations = 50_000 + 50 * (m + problem.constraints.n_cols());
    for (col, &c) in problem.constraints.columns().iter().zip(&problem.objective) {
        simplex.add_column(col, c);
    }
    simplex.solve_phase(Phase::One)?;
    if simplex.infeasibility() > simplex.feas_tol() {
        let y = simplex.duals(Phase::One);
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            primal: simplex.primal(),
            dual: y.clone(),
            objective_value: f64::NAN,
            certificate: Some(y),
            iterations: simplex.iterations,
        });
    }
    match simplex.solve_phase(Phase::Two)? {
        PhaseOutcome::Optimal => {
            let primal = simplex.primal();
            let objective_value = primal.iter().zip(&problem.objective).map(|(x, c)| x * c).sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                primal,
                dual: simplex.duals(Phase::Two),
                objective_value,
                certificate: None,
                iterations: simplex.iterations,
            })
        }
        PhaseOutcome::Unbounded { direction } => Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: simplex.primal(),
            dual: simplex.duals(Phase::Two),
            objective_value: f64::NEG_INFINITY,
            certificate: Some(direction),
            iterations: simplex.iterations,
        }),
    }
}
