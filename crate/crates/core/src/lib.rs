pub mod cost;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod lp;
pub mod measure;
pub mod mmot;

pub use cost::{CellTuple, CostKind, CostMode, CostModel, PairCostTable};
pub use error::{Error, Result};
pub use grid::{CellIndex, GridSpec};
pub use lp::{solve_lp, solve_transport, LpSolution, LpStatus, StandardLp};
pub use measure::{discretize, load_measure, Density, DiscreteMeasure};
pub use mmot::{
    solve_mmot, symmetrize_potentials, verify_duality, DualityReport, MmotSolution, PotentialVector,
    SolveOptions, TransportPlan,
};
