//! Radial truncation of a locally Lipschitz field.
//!
//! The wrapped field is `chi(|u|) * f(t, pi_R(u))` where `pi_R` is the radial
//! projection onto the closed ball of radius `R` and `chi` is a C^2 ramp that
//! is 1 on `[0, R]` and 0 beyond `R + w`. Composing with `pi_R` (rather than
//! just scaling `f`) keeps the global Lipschitz constant at the ball's local
//! one: the ramp term only ever multiplies values `f` takes inside the ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{operator_norm, Nonlinearity};

/// Fraction added on top of the sampled Lipschitz estimate.
const ELL_SLACK: f64 = 0.10;

/// A field truncated outside a ball, with its measured Lipschitz budget.
#[derive(Clone)]
pub struct CutoffNonlinearity {
    radius: f64,
    ramp: f64,
    effective_ell: f64,
    wrapped: Nonlinearity,
}

impl CutoffNonlinearity {
    /// The truncated field, carrying `effective_ell` as its constant.
    pub fn wrapped(&self) -> &Nonlinearity {
        &self.wrapped
    }

    /// Radius of the untouched ball.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Width of the ramp band.
    pub fn ramp(&self) -> f64 {
        self.ramp
    }

    /// Sampled sup of the Jacobian norm, inflated by the slack factor.
    pub fn effective_ell(&self) -> f64 {
        self.effective_ell
    }

    /// Wraps a field that is already globally Lipschitz with a known
    /// constant, without truncating it. Linear fields stay linear this way,
    /// which the perturbation machinery relies on.
    pub fn unbounded(base: &Nonlinearity, ell: f64) -> Result<Self> {
        if !(ell.is_finite() && ell >= 0.0) {
            return Err(Error::invalid(format!(
                "global Lipschitz constant must be finite and nonnegative, got {ell}"
            )));
        }
        Ok(Self {
            radius: f64::INFINITY,
            ramp: 0.0,
            effective_ell: ell,
            wrapped: base.clone().with_lipschitz(ell),
        })
    }
}

fn ramp_value(r: f64, radius: f64, ramp: f64) -> f64 {
    let s = ((r - radius) / ramp).clamp(0.0, 1.0);
    1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

fn project_to_ball(u: &DVector<f64>, radius: f64) -> DVector<f64> {
    let r = u.norm();
    if r <= radius {
        u.clone()
    } else {
        u * (radius / r)
    }
}

/// Deterministic unit directions: coordinate axes, the main diagonal, and a
/// fixed batch of pseudo-random vectors.
fn sample_directions(dim: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    let diag = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    dirs.push(diag);
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    for _ in 0..8 {
        let mut v = DVector::zeros(dim);
        for k in 0..dim {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            v[k] = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        }
        let n = v.norm();
        if n > 1e-6 {
            dirs.push(v / n);
        }
    }
    dirs
}

fn jacobian_norm(f: &Nonlinearity, t: f64, u: &DVector<f64>, dim: usize) -> f64 {
    let h = 1e-5 * (1.0 + u.norm());
    let mut jac = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += h;
        dn[j] -= h;
        let col = (f.eval(t, &up) - f.eval(t, &dn)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    operator_norm(&jac)
}

/// Truncates `f` outside the ball of radius `radius` with a C^2 ramp of
/// width `ramp`, and measures the truncated field's Lipschitz constant on a
/// deterministic sample grid (sup of finite-difference Jacobian norms,
/// inflated by 10%).
pub fn cutoff(f: &Nonlinearity, dim: usize, radius: f64, ramp: f64) -> Result<CutoffNonlinearity> {
    if !(radius > 0.0 && radius.is_finite()) || !(ramp > 0.0 && ramp.is_finite()) {
        return Err(Error::invalid(format!(
            "cutoff needs positive radius and ramp width, got radius={radius}, ramp={ramp}"
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("cutoff needs a positive dimension"));
    }
    let (r0, w0) = (radius, ramp);
    let inner = {
        let base = f.clone();
        move |t: f64, u: &DVector<f64>| -> DVector<f64> {
            let chi = ramp_value(u.norm(), r0, w0);
            if chi == 0.0 {
                return DVector::zeros(u.len());
            }
            base.eval(t, &project_to_ball(u, r0)) * chi
        }
    };
    let wrapped = if f.time_invariant() {
        Nonlinearity::autonomous(move |u| inner(0.0, u), 0.0, f.vanishes_at_zero())
    } else {
        Nonlinearity::new(inner, 0.0, f.vanishes_at_zero())
    };
    // Radii hug the ball boundary from inside: the interior gradient is
    // largest there and one-sided, so a node exactly on the boundary would
    // average it away under central differences.
    let mut radii: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 0.9, 0.975, 0.995]
        .iter()
        .map(|c| c * radius)
        .collect();
    for c in [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0] {
        radii.push(radius + c * ramp);
    }
    radii.push((radius + ramp) * 1.25);
    let times: Vec<f64> = if f.time_invariant() {
        vec![0.0]
    } else {
        vec![-1.1, 0.0, 0.7, 1.9, 3.3]
    };
    let mut sup = 0.0_f64;
    for dir in sample_directions(dim) {
        for &r in &radii {
            let u = &dir * r;
            for &t in &times {
                sup = sup.max(jacobian_norm(&wrapped, t, &u, dim));
            }
        }
    }
    if !sup.is_finite() {
        return Err(Error::non_finite("sampled Lipschitz estimate"));
    }
    let effective_ell = sup * (1.0 + ELL_SLACK);
    Ok(CutoffNonlinearity {
        radius,
        ramp,
        effective_ell,
        wrapped: wrapped.with_lipschitz(effective_ell),
    })
}
