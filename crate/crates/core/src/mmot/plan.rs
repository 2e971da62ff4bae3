use std::collections::BTreeMap;
use std::path::Path;

use crate::cost::{CellTuple, CostModel};
use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::io::{compensated_sum, parse_cell, parse_real, strip_comment, write_cell, Header};
use crate::measure::DiscreteMeasure;

/// Mass and marginal tolerance of a valid plan.
pub const PLAN_TOL: f64 = 1e-10;

const PLAN_MAGIC: &str = "mmot-plan";

/// A coupling of `N` copies of a discrete measure, stored as weighted cell tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    grid: GridSpec,
    n_marginals: usize,
    atoms: BTreeMap<CellTuple, f64>,
}

impl TransportPlan {
    /// Validates shape, positivity, unit mass and equality of all marginals.
    /// Zero weights are dropped.
    pub fn new(grid: GridSpec, n_marginals: usize, atoms: BTreeMap<CellTuple, f64>) -> Result<Self> {
        let plan = Self::from_atoms(grid, n_marginals, atoms)?;
        let mass = plan.total_mass();
        if (mass - 1.0).abs() > PLAN_TOL {
            return Err(Error::Normalization {
                sum: mass,
                tol: PLAN_TOL,
            });
        }
        let dev = plan.marginal_spread();
        if dev > PLAN_TOL {
            return Err(Error::InvalidArgument(format!(
                "plan marginals differ by {dev:e} in some cell"
            )));
        }
        Ok(plan)
    }

    /// Checks shape and positivity only; used for partial plans.
    fn from_atoms(grid: GridSpec, n_marginals: usize, atoms: BTreeMap<CellTuple, f64>) -> Result<Self> {
        if n_marginals < 2 {
            return Err(Error::InvalidArgument("a plan needs at least two marginals".into()));
        }
        for (t, &w) in &atoms {
            if t.len() != n_marginals {
                return Err(Error::DimensionMismatch(format!(
                    "tuple of length {} in a plan with {n_marginals} marginals",
                    t.len()
                )));
            }
            if let Some(c) = t.cells().iter().find(|c| !grid.contains_cell(c)) {
                return Err(Error::SupportOutsideWindow(format!("cell {c}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("plan weight {w} is not a nonnegative number")));
            }
        }
        let atoms: BTreeMap<_, _> = atoms.into_iter().filter(|(_, w)| *w > 0.0).collect();
        if atoms.is_empty() {
            return Err(Error::ZeroMass);
        }
        Ok(TransportPlan {
            grid,
            n_marginals,
            atoms,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_marginals(&self) -> usize {
        self.n_marginals
    }

    pub fn atoms(&self) -> &BTreeMap<CellTuple, f64> {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.values().copied())
    }

    /// Marginal of slot `i` as cell weights.
    pub fn marginal(&self, i: usize) -> BTreeMap<CellIndex, f64> {
        let mut parts: BTreeMap<CellIndex, Vec<f64>> = BTreeMap::new();
        for (t, &w) in &self.atoms {
            parts.entry(t.0[i].clone()).or_default().push(w);
        }
        parts
            .into_iter()
            .map(|(c, ws)| (c, compensated_sum(ws)))
            .collect()
    }

    /// Largest per-cell difference between any marginal and the first one.
    pub fn marginal_spread(&self) -> f64 {
        let first = self.marginal(0);
        (1..self.n_marginals)
            .map(|i| marginal_distance(&first, &self.marginal(i)))
            .fold(0.0, f64::max)
    }

    /// Largest per-cell difference between corresponding marginals of two plans.
    pub fn marginal_deviation(&self, other: &TransportPlan) -> f64 {
        (0..self.n_marginals.min(other.n_marginals))
            .map(|i| marginal_distance(&self.marginal(i), &other.marginal(i)))
            .fold(0.0, f64::max)
    }

    /// The first marginal as a measure (renormalized).
    pub fn marginal_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.grid, self.marginal(0))
    }

    /// Largest per-cell deviation of any marginal from `measure`.
    pub fn deviation_from(&self, measure: &DiscreteMeasure) -> f64 {
        (0..self.n_marginals)
            .map(|i| marginal_distance(&self.marginal(i), measure.atoms()))
            .fold(0.0, f64::max)
    }

    /// `sum_t w_t cost(t)`.
    pub fn cost_with(&self, cost: impl Fn(&CellTuple) -> f64) -> f64 {
        compensated_sum(self.atoms.iter().map(|(t, &w)| w * cost(t)))
    }

    /// Plan cost under the cell-constant lower cost.
    pub fn cost_lower(&self, model: &CostModel) -> f64 {
        self.cost_with(|t| model.cell_cost_lower(t, &self.grid))
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "{PLAN_MAGIC} v1 level={} halfwidth={} dim={} N={}\n",
            g.level, g.halfwidth, g.dim, self.n_marginals
        );
        for (t, w) in &self.atoms {
            for c in t.cells() {
                write_cell(&mut out, c);
            }
            out.push_str(&format!("{w:?}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<TransportPlan> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| strip_comment(l).map(|b| (i + 1, b)));
        let (hline, htext) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty plan file".into(),
        })?;
        let header = Header::parse(htext, hline, PLAN_MAGIC)?;
        let grid = header.grid()?;
        let n: usize = header.get("N")?;
        let d = grid.dim;
        let mut atoms = BTreeMap::new();
        for (line, body) in lines {
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.len() != n * d + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", n * d + 1, tokens.len()),
                });
            }
            let cells = tokens[..n * d]
                .chunks(d)
                .map(|c| parse_cell(c, line))
                .collect::<Result<Vec<_>>>()?;
            let weight = parse_real(tokens[n * d], line)?;
            if weight < 0.0 {
                return Err(Error::NegativeWeight { line, weight });
            }
            if atoms.insert(CellTuple(cells), weight).is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "duplicate tuple".into(),
                });
            }
        }
        TransportPlan::new(grid, n, atoms)
    }
}

fn marginal_distance(a: &BTreeMap<CellIndex, f64>, b: &BTreeMap<CellIndex, f64>) -> f64 {
    let mut worst = 0.0f64;
    for (c, &w) in a {
        worst = worst.max((w - b.get(c).copied().unwrap_or(0.0)).abs());
    }
    for (c, &w) in b {
        if !a.contains_key(c) {
            worst = worst.max(w.abs());
        }
    }
    worst
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<TransportPlan> {
    TransportPlan::parse(&std::fs::read_to_string(path)?)
}

pub fn save_plan(plan: &TransportPlan, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, plan.to_text())?;
    Ok(())
}

/// The independent coupling `rho x ... x rho`.
pub fn product_plan(measure: &DiscreteMeasure, n_marginals: usize) -> Result<TransportPlan> {
    let cells = measure.cells();
    let weights = measure.weights();
    let m = cells.len();
    let total = (m as u64).checked_pow(n_marginals as u32).unwrap_or(u64::MAX);
    if total > 1 << 24 {
        return Err(Error::InvalidArgument(format!(
            "product plan would have {m}^{n_marginals} atoms"
        )));
    }
    let mut atoms = BTreeMap::new();
    let mut idx = vec![0usize; n_marginals];
    for _ in 0..total {
        let w = idx.iter().map(|&k| weights[k]).product::<f64>();
        atoms.insert(CellTuple(idx.iter().map(|&k| cells[k].clone()).collect()), w);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    TransportPlan::from_atoms(*measure.grid(), n_marginals, atoms)
}
