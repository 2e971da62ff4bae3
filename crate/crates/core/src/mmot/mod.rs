//! Plans, potentials and the problem-level operations built on them.

mod plan;
mod potentials;
mod solve;
mod swap;
mod verify;

pub use plan::{load_plan, product_plan, save_plan, TransportPlan, PLAN_TOL};
pub use potentials::{load_potentials, save_potentials, symmetrize_potentials, PotentialVector};
pub use solve::{solve_mmot, MmotSolution, SolveOptions};
pub use swap::swap_improve;
pub use verify::{
    bound_parameters, diagonal_clearance, lemma_upper_bound, potential_bound, verify_duality,
    BoundParameters, DualityReport, VerifyOptions, DEFAULT_M_FRACTION,
};
