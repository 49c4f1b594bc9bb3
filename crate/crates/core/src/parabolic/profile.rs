//! Diffusion coefficients with a thin low-diffusivity valley.
//!
//! The coefficient is large away from one interior point, drops to a small
//! plateau on a band around it, and ramps between the two levels with C1
//! transitions. Every level and band width scales with a single thickness
//! parameter; shrinking it localizes the valley and pushes all but the two
//! slowest diffusion modes far up the spectrum.

use crate::error::{Error, Result};

/// Slack granted when the banded level inequalities are re-checked on the
/// assembled mesh samples.
const BAND_TOL: f64 = 1e-12;

/// Shape selector for [`build_diffusion`].
#[derive(Debug, Clone, Copy)]
pub enum ProfileShape {
    /// High plateau outside, smooth ramps, low valley around the interface.
    Banded,
    /// Spatially constant coefficient, the control case.
    Constant(f64),
}

/// Diffusion coefficient sampled on a uniform mesh of `[0, 1]`.
///
/// Samples live at cell midpoints because the conservative stencil of
/// [`eigensolve`](super::eigensolve) reads the coefficient at flux
/// interfaces only.
#[derive(Debug, Clone)]
pub struct DiffusionProfile {
    nu: f64,
    x_star: f64,
    alpha0: f64,
    beta0: f64,
    alpha_nu: f64,
    beta_nu: f64,
    n_cells: usize,
    h: f64,
    a_mid: Vec<f64>,
    constant: Option<f64>,
}

fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

impl DiffusionProfile {
    /// Thickness parameter.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Interface position.
    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    /// Valley level scale: the valley floor sits at `nu * alpha0`.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Inner band width scale: the valley floor spans `x_star ± nu * beta0`.
    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// Valley ceiling scale; the coefficient stays below `nu * alpha_nu`
    /// on the inner band.
    pub fn alpha_nu(&self) -> f64 {
        self.alpha_nu
    }

    /// Outer band width scale; the plateau starts at `x_star ± nu * beta_nu`.
    pub fn beta_nu(&self) -> f64 {
        self.beta_nu
    }

    /// Mesh cell count.
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Mesh spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coefficient samples at cell midpoints, one per cell.
    pub fn a_mid(&self) -> &[f64] {
        &self.a_mid
    }

    /// Level of a constant profile, `None` for the banded shape.
    pub fn constant_level(&self) -> Option<f64> {
        self.constant
    }

    /// Pointwise coefficient value.
    pub fn eval(&self, x: f64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        let d = (x - self.x_star).abs();
        let inner = self.nu * self.beta0;
        let outer = self.nu * self.beta_nu;
        let low = self.nu * self.alpha0;
        let high = 1.0 / self.nu;
        if d >= outer {
            high
        } else if d <= inner {
            low
        } else {
            low + (high - low) * smootherstep((d - inner) / (outer - inner))
        }
    }

    /// Mesh nodes strictly inside the valley floor `(x* - nu b0, x* + nu b0)`.
    pub fn valley_node_count(&self) -> usize {
        if self.constant.is_some() {
            return 0;
        }
        let inner = self.nu * self.beta0;
        (0..=self.n_cells)
            .filter(|&i| (i as f64 * self.h - self.x_star).abs() < inner)
            .count()
    }
}

/// Default cell count: 2048, raised so the valley floor always holds at
/// least 64 nodes.
fn default_cells(nu: f64, beta0: f64) -> usize {
    let for_valley = (64.0 / (2.0 * nu * beta0)).ceil() as usize;
    for_valley.max(2048)
}

/// Builds a diffusion profile on the default mesh for its shape.
pub fn build_diffusion(
    nu: f64,
    x_star: f64,
    alpha0: f64,
    beta0: f64,
    shape: ProfileShape,
) -> Result<DiffusionProfile> {
    let n_cells = match shape {
        ProfileShape::Banded => default_cells(nu, beta0),
        ProfileShape::Constant(_) => 512,
    };
    build_diffusion_with_mesh(nu, x_star, alpha0, beta0, shape, n_cells)
}

/// Builds a diffusion profile on an explicit mesh.
///
/// The banded shape requires the outer band to stay inside `(0, 1)`; the
/// level inequalities (plateau at `1/nu`, floor between `nu alpha0` and
/// `nu alpha_nu`) are re-checked on every node and midpoint sample.
pub fn build_diffusion_with_mesh(
    nu: f64,
    x_star: f64,
    alpha0: f64,
    beta0: f64,
    shape: ProfileShape,
    n_cells: usize,
) -> Result<DiffusionProfile> {
    for (name, v) in [("nu", nu), ("x_star", x_star), ("alpha0", alpha0), ("beta0", beta0)] {
        if !v.is_finite() {
            return Err(Error::non_finite(name));
        }
    }
    if nu <= 0.0 || alpha0 <= 0.0 || beta0 <= 0.0 {
        return Err(Error::invalid("nu, alpha0 and beta0 must be positive"));
    }
    if !(0.0 < x_star && x_star < 1.0) {
        return Err(Error::invalid(format!(
            "interface x_star = {x_star} must lie strictly inside (0, 1)"
        )));
    }
    if n_cells < 16 {
        return Err(Error::invalid("mesh needs at least 16 cells"));
    }
    let scale = 1.0 + nu.sqrt();
    let alpha_nu = alpha0 * scale;
    let beta_nu = beta0 * scale;
    if let ProfileShape::Banded = shape {
        let outer = nu * beta_nu;
        if outer >= x_star.min(1.0 - x_star) {
            return Err(Error::invalid(format!(
                "outer band half-width {outer:.6} reaches the boundary; \
                 reduce nu or move x_star inward"
            )));
        }
    }
    if let ProfileShape::Constant(c) = shape {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::invalid("constant level must be positive and finite"));
        }
    }

    let h = 1.0 / n_cells as f64;
    let mut profile = DiffusionProfile {
        nu,
        x_star,
        alpha0,
        beta0,
        alpha_nu,
        beta_nu,
        n_cells,
        h,
        a_mid: Vec::with_capacity(n_cells),
        constant: match shape {
            ProfileShape::Constant(c) => Some(c),
            ProfileShape::Banded => None,
        },
    };
    profile.a_mid = (0..n_cells)
        .map(|i| profile.eval((i as f64 + 0.5) * h))
        .collect();

    if profile.constant.is_none() {
        let samples = (0..=2 * n_cells).map(|i| i as f64 * 0.5 * h);
        let inner = nu * beta0;
        let outer = nu * beta_nu;
        let low = nu * alpha0;
        let high = 1.0 / nu;
        for x in samples {
            let a = profile.eval(x);
            let d = (x - x_star).abs();
            let ok = a >= low * (1.0 - BAND_TOL)
                && (d < outer || a >= high * (1.0 - BAND_TOL))
                && (d > inner || a <= nu * alpha_nu * (1.0 + BAND_TOL));
            if !ok {
                return Err(Error::Structural(format!(
                    "banded level inequalities violated at x = {x:.6}: a = {a:.6e}"
                )));
            }
        }
    }
    Ok(profile)
}
