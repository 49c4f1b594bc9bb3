//! Invariant graphs of recentered semilinear systems.
//!
//! The pipeline: derive contraction constants from a splitting certificate
//! and a Lipschitz budget, truncate the nonlinearity, recenter on a solution
//! when needed, then iterate the graph transform to the fixed point. The
//! resulting fields come with nonlinear projections, rate verification
//! against the ledger, and the pullback construction of shadow solutions.

mod constants;
mod cutoff;
mod phase;
mod projection;
mod rates;
mod saddle;
mod shift;
mod solver;

pub use constants::{
    constants_ledger, gap_condition, gap_threshold, ConstantsLedger, GapReport,
    ParabolicConstants, ParabolicInput,
};
pub use cutoff::{cutoff, CutoffNonlinearity};
pub use phase::{asymptotic_phase, AsymptoticPhase, PhaseOptions};
pub use projection::{project_sigma, project_theta};
pub(crate) use projection::reproject_clamped;
pub use rates::{verify_rates, RateCheckOptions};
pub use saddle::{saddle_point, SaddleManifolds};
pub use shift::shift_to_solution;
pub use solver::{solve_sigma, solve_theta, GraphGridSpec, SolveOptions};
