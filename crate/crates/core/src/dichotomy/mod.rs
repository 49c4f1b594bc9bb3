//! Exponential splittings of linear evolution processes.
//!
//! A splitting is a family of projections `Q(t)` commuting with the solution
//! operator `L(t, tau)` together with constants `M >= 1` and rates
//! `gamma > rho` such that
//!
//! * `|| L(t, tau) Q(tau) || <= M exp(-rho (t - tau))` for `t <= tau`
//!   (backward, inside the invertible bundle `Im Q`), and
//! * `|| L(t, tau) (I - Q(tau)) || <= M exp(-gamma (t - tau))` for `t >= tau`
//!   (forward, on the complementary bundle).
//!
//! A dichotomy is the special case `rho = -gamma < 0`. This module estimates
//! splittings from windowed singular-value data, verifies claimed certificates
//! against sampled propagator norms, and checks that two splittings of the
//! same process nest.

mod certificate;
mod estimate;
mod frame;
mod projection;
mod verify;

pub use certificate::SplittingCertificate;
pub use estimate::{estimate_splitting, estimate_splitting_with, EstimateOptions};
pub use frame::SplitFrame;
pub use projection::ProjectionFamily;
pub use verify::{
    nestedness_check, verify_splitting, verify_splitting_with, NestednessReport, VerifyOptions,
    VerifyReport,
};
