//! Scalar reaction-diffusion on an interval with a thin low-diffusivity
//! interface.
//!
//! A diffusion coefficient that is large everywhere except on a shrinking
//! band around one interior point leaves exactly two slow modes: the total
//! mass and a smoothed step through the band. Projecting the cubic reaction
//! onto those modes yields a planar system whose thin-band limit couples the
//! two sides of the interface like compartments; on its two invariant lines
//! the dynamics is scalar, and pullback integration locates four hyperbolic
//! global solutions that certify the reduced dynamics.

mod hyperbolic;
mod profile;
mod reduce;
mod spectrum;

pub use hyperbolic::{
    find_hyperbolic_solutions, verify_hyperbolicity, HyperbolicCandidate, HyperbolicityReport,
    InvariantLine,
};
pub use profile::{build_diffusion, build_diffusion_with_mesh, DiffusionProfile, ProfileShape};
pub use reduce::{
    galerkin_project, inertial_reduction, limiting_systems, BetaProfile, LimitingPair,
    ReducedSystem,
};
pub use spectrum::{eigensolve, Spectrum};
