//! Recentering a semilinear system on one of its global solutions.
//!
//! Given a verified solution `u*`, the substitution `v = u - u*` produces a
//! new system whose linear part absorbs the Jacobian of `f` along `u*` and
//! whose nonlinear remainder vanishes to first order at the origin. That is
//! the normal form every graph solver in this crate expects.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{Generator, HermiteTrack, Nonlinearity};

/// Central-difference Jacobian of the nonlinear part at `(t, u)`.
fn nonlinear_jacobian(gen: &Generator, t: f64, u: &DVector<f64>) -> DMatrix<f64> {
    let d = gen.dim();
    let h = 1e-5 * (1.0 + u.norm());
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += h;
        dn[j] -= h;
        let col = (gen.nonlinear_at(t, &up) - gen.nonlinear_at(t, &dn)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Interior sample times of a track, keeping a margin so finite differences
/// of the clamped interpolant never touch the endpoints.
fn sample_times(track: &HermiteTrack, n: usize, margin: f64) -> Vec<f64> {
    let (lo, hi) = track.span();
    let (a, b) = (lo + margin, hi - margin);
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Sup over sample times of the relative defect `|u' - A u - f(t,u)|`.
fn solution_residual(gen: &Generator, track: &HermiteTrack, samples: usize) -> f64 {
    let (lo, hi) = track.span();
    let h = 1e-6 * (hi - lo).max(1.0);
    let mut worst = 0.0_f64;
    for t in sample_times(track, samples, 2.0 * h) {
        let u = track.eval(t);
        let du = (track.eval(t + h) - track.eval(t - h)) / (2.0 * h);
        let defect = (du - gen.field_at(t, &u)).norm() / (1.0 + u.norm());
        worst = worst.max(defect);
    }
    worst
}

/// Translates the system so the given solution becomes the zero solution.
///
/// The result has linear part `A(t) + f_u(t, u*(t))` (Jacobian by central
/// differences) and nonlinear part `g(t, v) = f(t, u*+v) - f(t, u*) -
/// f_u(t, u*) v`. Both normalizations, `g(t, 0) = 0` and a vanishing Jacobian
/// of `g` at the origin, are checked numerically before returning.
///
/// Fails when the track does not actually solve the system to within
/// `residual_tol` (relative sup defect over interior samples).
pub fn shift_to_solution(
    gen: &Generator,
    u_star: &HermiteTrack,
    residual_tol: f64,
) -> Result<Generator> {
    if u_star.first().len() != gen.dim() {
        return Err(Error::invalid(format!(
            "track dimension {} does not match generator dimension {}",
            u_star.first().len(),
            gen.dim()
        )));
    }
    let residual = solution_residual(gen, u_star, 33);
    if !(residual <= residual_tol) {
        return Err(Error::precondition(format!(
            "track is not a solution: residual {residual:.3e} exceeds {residual_tol:.3e}"
        )));
    }

    let dim = gen.dim();
    let matrix_gen = gen.clone();
    let matrix_track = u_star.clone();
    let shifted_matrix = move |t: f64| -> DMatrix<f64> {
        let u = matrix_track.eval(t);
        matrix_gen.matrix_at(t) + nonlinear_jacobian(&matrix_gen, t, &u)
    };

    let field_gen = gen.clone();
    let field_track = u_star.clone();
    let remainder = move |t: f64, v: &DVector<f64>| -> DVector<f64> {
        let u = field_track.eval(t);
        let b = nonlinear_jacobian(&field_gen, t, &u);
        field_gen.nonlinear_at(t, &(&u + v)) - field_gen.nonlinear_at(t, &u) - b * v
    };

    // Constant tracks of autonomous systems stay autonomous after the shift;
    // the solvers exploit that to collapse their time grids.
    let track_constant = {
        let u0 = u_star.first();
        u_star
            .nodes()
            .all(|(_, y)| (y - u0).norm() <= 1e-13 * (1.0 + u0.norm()))
    };
    let inherited_ell = gen.nonlinearity().map_or(0.0, Nonlinearity::lipschitz);
    let shifted = if gen.nonlinearity().is_none() {
        // Linear system: the Jacobian term is zero and g vanishes identically.
        Generator::time_varying(dim, shifted_matrix)
    } else if gen.is_autonomous() && track_constant {
        let g = Nonlinearity::autonomous(move |v| remainder(0.0, v), inherited_ell, true);
        Generator::constant(shifted_matrix(0.0)).with_nonlinearity(g)
    } else {
        let g = Nonlinearity::new(remainder, inherited_ell, true);
        Generator::time_varying(dim, shifted_matrix).with_nonlinearity(g)
    };

    let zero = DVector::zeros(dim);
    for t in sample_times(u_star, 9, 0.0) {
        let at_zero = shifted.nonlinear_at(t, &zero).norm();
        if at_zero > 1e-10 {
            return Err(Error::Structural(format!(
                "shifted nonlinearity does not vanish at zero: |g({t}, 0)| = {at_zero:.3e}"
            )));
        }
        let dg = nonlinear_jacobian(&shifted, t, &zero);
        let dg_norm = dg.norm();
        if dg_norm > 1e-6 {
            return Err(Error::Structural(format!(
                "shifted nonlinearity has first-order term at zero: \
                 |Dg({t}, 0)| = {dg_norm:.3e}"
            )));
        }
    }
    Ok(shifted)
}
