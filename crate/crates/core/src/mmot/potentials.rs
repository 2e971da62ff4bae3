use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};
use crate::io::{compensated_sum, parse_cell, parse_real, strip_comment, write_cell, Header};
use crate::measure::DiscreteMeasure;

const POTENTIALS_MAGIC: &str = "mmot-potentials";

/// Dual potentials `u_1, ..., u_N` on the support cells of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector {
    grid: GridSpec,
    cells: Vec<CellIndex>,
    /// `values[i][k]` is `u_i` at `cells[k]`.
    values: Vec<Vec<f64>>,
    symmetrized: Option<Vec<f64>>,
}

impl PotentialVector {
    /// `cells` must be strictly increasing; `values` holds one row per marginal.
    pub fn new(grid: GridSpec, cells: Vec<CellIndex>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("potentials need at least two marginals".into()));
        }
        if values.iter().any(|u| u.len() != cells.len()) {
            return Err(Error::DimensionMismatch(format!(
                "every potential must have {} values",
                cells.len()
            )));
        }
        if !cells.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("potential cells must be sorted and distinct".into()));
        }
        if let Some(c) = cells.iter().find(|c| !grid.contains_cell(c)) {
            return Err(Error::SupportOutsideWindow(format!("cell {c}")));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("potential values must be finite".into()));
        }
        Ok(PotentialVector {
            grid,
            cells,
            values,
            symmetrized: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_marginals(&self) -> usize {
        self.values.len()
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, cell: &CellIndex) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    pub fn value(&self, marginal: usize, cell: &CellIndex) -> Option<f64> {
        self.index_of(cell).map(|k| self.values[marginal][k])
    }

    pub fn symmetrized(&self) -> Option<&[f64]> {
        self.symmetrized.as_deref()
    }

    /// Symmetrized values, computed on the fly when not stored.
    pub fn mean_potential(&self) -> Vec<f64> {
        match &self.symmetrized {
            Some(s) => s.clone(),
            None => mean_rows(&self.values),
        }
    }

    /// `sup_x |u(x)|` of the symmetrized potential.
    pub fn sup_norm(&self) -> f64 {
        self.mean_potential().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `sum_i sum_x u_i(x) rho(x)`; cells missing from `measure` weigh zero.
    pub fn dual_objective(&self, measure: &DiscreteMeasure) -> f64 {
        compensated_sum(self.values.iter().flat_map(|u| {
            u.iter()
                .zip(&self.cells)
                .map(|(v, c)| v * measure.weight(c))
        }))
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!(
            "{POTENTIALS_MAGIC} v1 level={} halfwidth={} dim={} N={}\n",
            g.level,
            g.halfwidth,
            g.dim,
            self.n_marginals()
        );
        for (k, c) in self.cells.iter().enumerate() {
            write_cell(&mut out, c);
            let row: Vec<String> = self.values.iter().map(|u| format!("{:?}", u[k])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<PotentialVector> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| strip_comment(l).map(|b| (i + 1, b)));
        let (hline, htext) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty potentials file".into(),
        })?;
        let header = Header::parse(htext, hline, POTENTIALS_MAGIC)?;
        let grid = header.grid()?;
        let n: usize = header.get("N")?;
        let d = grid.dim;
        let mut rows: Vec<(CellIndex, Vec<f64>)> = Vec::new();
        for (line, body) in lines {
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.len() != d + n {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", d + n, tokens.len()),
                });
            }
            let cell = parse_cell(&tokens[..d], line)?;
            let vals = tokens[d..]
                .iter()
                .map(|t| parse_real(t, line))
                .collect::<Result<Vec<_>>>()?;
            rows.push((cell, vals));
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let cells: Vec<CellIndex> = rows.iter().map(|r| r.0.clone()).collect();
        let values = (0..n).map(|i| rows.iter().map(|r| r.1[i]).collect()).collect();
        PotentialVector::new(grid, cells, values)
    }
}

fn mean_rows(values: &[Vec<f64>]) -> Vec<f64> {
    let n = values.len() as f64;
    (0..values[0].len())
        .map(|k| values.iter().map(|u| u[k]).sum::<f64>() / n)
        .collect()
}

pub fn load_potentials(path: impl AsRef<Path>) -> Result<PotentialVector> {
    PotentialVector::parse(&std::fs::read_to_string(path)?)
}

pub fn save_potentials(u: &PotentialVector, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, u.to_text())?;
    Ok(())
}

/// Attaches `u(x) = (1/N) sum_i u_i(x)`. For a symmetric cost the averaged
/// potential is again admissible, and `N sum_x u(x) rho(x)` equals the dual
/// objective of the original potentials.
pub fn symmetrize_potentials(u: &PotentialVector) -> PotentialVector {
    let mut out = u.clone();
    out.symmetrized = Some(mean_rows(&u.values));
    out
}
