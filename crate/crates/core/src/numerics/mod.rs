//! Shared numerical substrate: grids, validated states, generators,
//! fixed-step integration, and interpolated graph fields.
//!
//! Everything downstream (splitting estimation, graph transforms, the
//! reaction-diffusion application) is built on the pieces in this module, so
//! the contracts here are deliberately strict: states reject non-finite
//! entries on construction, integrators have explicit blow-up guards, and
//! graph fields validate their zero section and Lipschitz budget when built.

mod fit;
mod generator;
mod graph_field;
mod grid;
mod integrate;
mod state;

pub use fit::{linear_fit, log_slope};
pub use generator::{Generator, Nonlinearity};
pub use graph_field::{eval_graph, eval_graph_clamped, AxisGrid, GraphField, GraphOrientation};
pub use grid::TimeGrid;
pub use integrate::{
    integrate_dense, operator_norm, propagate_linear, propagate_linear_on_subspace,
    propagate_matrix, propagate_semilinear, propagate_semilinear_guarded, HermiteTrack,
    DEFAULT_BLOW_UP_CEILING,
};
pub use state::StateVector;

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
