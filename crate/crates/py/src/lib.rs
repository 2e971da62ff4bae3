//! Python bindings: grids, costs, measures, the solver, verification,
//! the refinement harness and swap improvement.

use std::collections::BTreeMap;

use mmot_core::harness::{self, ConvergeOptions};
use mmot_core::mmot::VerifyOptions;
use mmot_core::{CellIndex, CellTuple, CostMode, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mmot, SolverError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NumericalBreakdown(_)
        | Error::InsufficientSupport { .. }
        | Error::NoFiniteCostPlan
        | Error::NoOffDiagonalSupport
        | Error::OverlappingNeighborhoods { .. }
        | Error::EmptyRestriction(_) => SolverError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn cost_mode(name: &str) -> PyResult<CostMode> {
    match name {
        "lower" => Ok(CostMode::CellLower),
        "pointwise" => Ok(CostMode::Pointwise),
        other => Err(PyValueError::new_err(format!("unknown cost mode `{other}`"))),
    }
}

fn cell(c: Vec<i64>) -> CellIndex {
    CellIndex(c)
}

fn tuple_out(t: &CellTuple) -> Vec<Vec<i64>> {
    t.cells().iter().map(|c| c.coords().to_vec()).collect()
}

#[pyclass(name = "GridSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(mmot_core::GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(level: u32, halfwidth: f64, dim: usize) -> PyResult<Self> {
        mmot_core::GridSpec::new(level, halfwidth, dim).map(PyGrid).map_err(to_py)
    }

    #[getter]
    fn level(&self) -> u32 {
        self.0.level
    }

    #[getter]
    fn halfwidth(&self) -> f64 {
        self.0.halfwidth
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn side(&self) -> f64 {
        self.0.side()
    }

    fn cell_of(&self, point: Vec<f64>) -> PyResult<Vec<i64>> {
        self.0.cell_of(&point).map(|c| c.0).map_err(to_py)
    }

    fn cell_center(&self, cell: Vec<i64>) -> Vec<f64> {
        self.0.cell_center(&CellIndex(cell))
    }

    fn sup_dist(&self, a: Vec<i64>, b: Vec<i64>) -> f64 {
        self.0.sup_dist(&cell(a), &cell(b))
    }

    fn inf_dist(&self, a: Vec<i64>, b: Vec<i64>) -> f64 {
        self.0.inf_dist(&cell(a), &cell(b))
    }

    fn __repr__(&self) -> String {
        format!("GridSpec(level={}, halfwidth={}, dim={})", self.0.level, self.0.halfwidth, self.0.dim)
    }
}

#[pyclass(name = "CostModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCost(mmot_core::CostModel);

#[pymethods]
impl PyCost {
    #[staticmethod]
    fn coulomb(n_marginals: usize) -> PyResult<Self> {
        mmot_core::CostModel::coulomb(n_marginals).map(PyCost).map_err(to_py)
    }

    #[staticmethod]
    fn power(s: f64, n_marginals: usize) -> PyResult<Self> {
        mmot_core::CostModel::power(s, n_marginals).map(PyCost).map_err(to_py)
    }

    #[getter]
    fn n_marginals(&self) -> usize {
        self.0.n_marginals
    }

    #[getter]
    fn exponent(&self) -> f64 {
        self.0.exponent()
    }

    fn pointwise_cost(&self, points: Vec<Vec<f64>>) -> f64 {
        self.0.pointwise_cost(&points)
    }

    fn cell_cost_lower(&self, cells: Vec<Vec<i64>>, grid: &PyGrid) -> f64 {
        let t = CellTuple(cells.into_iter().map(cell).collect());
        self.0.cell_cost_lower(&t, &grid.0)
    }
}

#[pyclass(name = "Density", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensity(mmot_core::Density);

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> Self {
        PyDensity(mmot_core::Density::UniformBall { center, radius })
    }

    #[staticmethod]
    fn gaussian(center: Vec<f64>, sigma: f64) -> Self {
        PyDensity(mmot_core::Density::TruncatedGaussian { center, sigma })
    }

    #[staticmethod]
    fn atoms(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        PyDensity(mmot_core::Density::Atomic { points, weights })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn is_atomic(&self) -> bool {
        self.0.is_atomic()
    }
}

#[pyclass(name = "DiscreteMeasure", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure(mmot_core::DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        mmot_core::DiscreteMeasure::parse(text).map(PyMeasure).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn atoms(&self) -> Vec<(Vec<i64>, f64)> {
        self.0.atoms().iter().map(|(c, w)| (c.0.clone(), *w)).collect()
    }

    fn support_cardinality(&self) -> usize {
        self.0.support_cardinality()
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    fn coarsen_to(&self, level: u32) -> PyResult<Self> {
        self.0.coarsen_to(level).map(PyMeasure).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }
}

#[pyclass(name = "TransportPlan", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPlan(mmot_core::TransportPlan);

#[pymethods]
impl PyPlan {
    #[new]
    fn new(grid: &PyGrid, n_marginals: usize, atoms: Vec<(Vec<Vec<i64>>, f64)>) -> PyResult<Self> {
        let mut map = BTreeMap::new();
        for (cells, w) in atoms {
            *map.entry(CellTuple(cells.into_iter().map(cell).collect())).or_insert(0.0) += w;
        }
        mmot_core::TransportPlan::new(grid.0, n_marginals, map).map(PyPlan).map_err(to_py)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        mmot_core::TransportPlan::parse(text).map(PyPlan).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn n_marginals(&self) -> usize {
        self.0.n_marginals()
    }

    fn atoms(&self) -> Vec<(Vec<Vec<i64>>, f64)> {
        self.0.atoms().iter().map(|(t, w)| (tuple_out(t), *w)).collect()
    }

    fn marginal(&self, i: usize) -> PyResult<Vec<(Vec<i64>, f64)>> {
        if i >= self.0.n_marginals() {
            return Err(PyValueError::new_err(format!("marginal {i} out of range")));
        }
        Ok(self.0.marginal(i).into_iter().map(|(c, w)| (c.0, w)).collect())
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    fn cost_lower(&self, model: &PyCost) -> f64 {
        self.0.cost_lower(&model.0)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "PotentialVector", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotentials(mmot_core::PotentialVector);

#[pymethods]
impl PyPotentials {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        mmot_core::PotentialVector::parse(text).map(PyPotentials).map_err(to_py)
    }

    fn cells(&self) -> Vec<Vec<i64>> {
        self.0.cells().iter().map(|c| c.0.clone()).collect()
    }

    /// `values()[i][a]` is `u_{i+1}` at `cells()[a]`.
    fn values(&self) -> Vec<Vec<f64>> {
        self.0.values().to_vec()
    }

    fn symmetrized(&self) -> Vec<f64> {
        match self.0.symmetrized() {
            Some(u) => u.to_vec(),
            None => mmot_core::symmetrize_potentials(&self.0).symmetrized().unwrap_or_default().to_vec(),
        }
    }

    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }
}

#[pyclass(name = "MmotSolution", frozen)]
struct PySolution(mmot_core::MmotSolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn plan(&self) -> PyPlan {
        PyPlan(self.0.plan.clone())
    }

    #[getter]
    fn potentials(&self) -> PyPotentials {
        PyPotentials(self.0.potentials.clone())
    }

    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }

    #[getter]
    fn dual_value(&self) -> f64 {
        self.0.dual_value
    }

    #[getter]
    fn columns(&self) -> usize {
        self.0.columns
    }
}

#[pyfunction]
#[pyo3(signature = (density, grid, samples_per_cell = 8))]
fn discretize(density: &PyDensity, grid: &PyGrid, samples_per_cell: usize) -> PyResult<PyMeasure> {
    mmot_core::discretize(&density.0, &grid.0, samples_per_cell).map(PyMeasure).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (measure, model, cost_mode = "lower"))]
fn solve_mmot(py: Python<'_>, measure: &PyMeasure, model: &PyCost, cost_mode: &str) -> PyResult<PySolution> {
    let options = mmot_core::SolveOptions {
        cost_mode: self::cost_mode(cost_mode)?,
        ..Default::default()
    };
    py.detach(|| mmot_core::solve_mmot(&measure.0, &model.0, &options))
        .map(PySolution)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (plan, potentials, model, measure, cost_mode = "lower", feas_tol = 1e-9, m_fraction = 0.1))]
fn verify_duality<'py>(
    py: Python<'py>,
    plan: &PyPlan,
    potentials: &PyPotentials,
    model: &PyCost,
    measure: &PyMeasure,
    cost_mode: &str,
    feas_tol: f64,
    m_fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let options = VerifyOptions {
        cost_mode: self::cost_mode(cost_mode)?,
        feas_tol,
        window: None,
        m_fraction,
    };
    let r = mmot_core::verify_duality(&plan.0, &potentials.0, &model.0, &measure.0, &options).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("primal_value", r.primal_value)?;
    d.set_item("dual_value", r.dual_value)?;
    d.set_item("relative_gap", r.relative_gap)?;
    d.set_item("max_slackness_violation", r.max_slackness_violation)?;
    d.set_item("max_dual_violation", r.max_dual_violation)?;
    d.set_item("dual_feasible", r.dual_feasible)?;
    d.set_item("diagonal_clearance_alpha", r.diagonal_clearance_alpha)?;
    d.set_item("potential_sup", r.potential_sup)?;
    d.set_item("bound_r", r.bound_r)?;
    d.set_item("bound_k", r.bound_k)?;
    d.set_item("potential_bound", r.potential_bound)?;
    d.set_item("potential_bound_satisfied", r.potential_bound_satisfied)?;
    Ok(d)
}

/// Convergence study over `levels = (first, last)`; returns the CSV table.
#[pyfunction]
#[pyo3(signature = (density, model, levels, halfwidth, cost_mode = "lower", samples_per_cell = 8))]
fn converge(
    py: Python<'_>,
    density: &PyDensity,
    model: &PyCost,
    levels: (u32, u32),
    halfwidth: f64,
    cost_mode: &str,
    samples_per_cell: usize,
) -> PyResult<String> {
    let options = ConvergeOptions {
        cost_mode: self::cost_mode(cost_mode)?,
        samples_per_cell,
        ..Default::default()
    };
    let table = py
        .detach(|| harness::converge(&density.0, &model.0, levels.0..=levels.1, halfwidth, &options))
        .map_err(to_py)?;
    Ok(table.to_csv(false))
}

/// Greedy swap search; returns the improved plan and `(cost_before, cost_after)` per move.
#[pyfunction]
#[pyo3(signature = (plan, model, max_rounds = 100))]
fn swap_search(plan: &PyPlan, model: &PyCost, max_rounds: usize) -> (PyPlan, Vec<(f64, f64)>) {
    let (improved, moves) = harness::swap_search(&plan.0, &model.0, max_rounds);
    (
        PyPlan(improved),
        moves.iter().map(|m| (m.cost_before, m.cost_after)).collect(),
    )
}

#[pymodule]
fn mmot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyCost>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyPotentials>()?;
    m.add_class::<PySolution>()?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_function(wrap_pyfunction!(discretize, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mmot, m)?)?;
    m.add_function(wrap_pyfunction!(verify_duality, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add_function(wrap_pyfunction!(swap_search, m)?)?;
    Ok(())
}
