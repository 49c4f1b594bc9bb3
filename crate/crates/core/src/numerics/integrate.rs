//! Fixed-step Runge-Kutta propagation with dense output.
//!
//! All propagators subdivide the requested span into steps no coarser than the
//! supplied grid's step, so cocycle defects and interpolation errors are both
//! fourth order in that step.

use crate::error::{Error, Result};
use crate::numerics::{Generator, StateVector, TimeGrid};
use nalgebra::{DMatrix, DVector};

/// Default guard on trajectory norms before a run is declared blown up.
pub const DEFAULT_BLOW_UP_CEILING: f64 = 1e8;

fn substeps(span: f64, max_step: f64) -> usize {
    let n = (span.abs() / max_step - 1e-12).ceil();
    (n as usize).max(1)
}

fn rk4_step<F>(field: &F, t: f64, h: f64, y: &DVector<f64>) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = field(t, y);
    let k2 = field(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = field(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = field(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Dense trajectory storage with cubic Hermite evaluation between nodes.
///
/// Nodes carry both states and field values, so interpolation matches the
/// fourth-order accuracy of the integrator that produced them.
#[derive(Debug, Clone)]
pub struct HermiteTrack {
    ts: Vec<f64>,
    ys: Vec<DVector<f64>>,
    dys: Vec<DVector<f64>>,
}

impl HermiteTrack {
    pub(crate) fn new(ts: Vec<f64>, ys: Vec<DVector<f64>>, dys: Vec<DVector<f64>>) -> Self {
        debug_assert!(ts.len() >= 2 && ts.len() == ys.len() && ts.len() == dys.len());
        debug_assert!(ts.windows(2).all(|w| w[1] > w[0]));
        HermiteTrack { ts, ys, dys }
    }

    /// Time span covered by the track.
    pub fn span(&self) -> (f64, f64) {
        (self.ts[0], *self.ts.last().unwrap())
    }

    /// State at the first node.
    pub fn first(&self) -> &DVector<f64> {
        &self.ys[0]
    }

    /// State at the last node.
    pub fn last(&self) -> &DVector<f64> {
        self.ys.last().unwrap()
    }

    /// Stored nodes as `(t, y)` pairs in increasing time order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> {
        self.ts.iter().copied().zip(self.ys.iter())
    }

    /// Interpolated state at `t`, clamped to the covered span.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let (lo, hi) = self.span();
        let t = t.clamp(lo, hi);
        let i = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.ys[i].clone(),
            Err(i) => i.clamp(1, self.ts.len() - 1) - 1,
        };
        let h = self.ts[i + 1] - self.ts[i];
        let s = (t - self.ts[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.ys[i] * h00
            + &self.dys[i] * (h10 * h)
            + &self.ys[i + 1] * h01
            + &self.dys[i + 1] * (h11 * h)
    }
}

/// Integrates `y' = field(t, y)` from `t0` to `t1` in `n_steps` equal steps,
/// storing every node. `t1 < t0` integrates backward.
///
/// `post_step` is applied to each accepted state (identity for plain flows,
/// a projection for subspace-restricted flows). The guard aborts when a state
/// norm leaves `ceiling`.
pub fn integrate_dense<F, P>(
    field: F,
    t0: f64,
    t1: f64,
    y0: DVector<f64>,
    n_steps: usize,
    post_step: P,
    ceiling: f64,
) -> Result<HermiteTrack>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    P: Fn(f64, DVector<f64>) -> DVector<f64>,
{
    assert!(n_steps >= 1, "integrate_dense needs at least one step");
    assert!(t0 != t1, "integrate_dense needs a nonempty span");
    let h = (t1 - t0) / n_steps as f64;
    let mut ts = Vec::with_capacity(n_steps + 1);
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut dys = Vec::with_capacity(n_steps + 1);

    let mut y = post_step(t0, y0);
    let mut t = t0;
    ts.push(t);
    dys.push(field(t, &y));
    ys.push(y.clone());

    for i in 1..=n_steps {
        let next = rk4_step(&field, t, h, &y);
        t = t0 + (t1 - t0) * (i as f64 / n_steps as f64);
        y = post_step(t, next);
        let norm = y.norm();
        if !norm.is_finite() || norm > ceiling {
            return Err(Error::BlowUp { t, norm, ceiling });
        }
        ts.push(t);
        dys.push(field(t, &y));
        ys.push(y.clone());
    }

    if t1 < t0 {
        ts.reverse();
        ys.reverse();
        dys.reverse();
    }
    Ok(HermiteTrack::new(ts, ys, dys))
}

/// Propagates the linear part forward: `u(t) = L(t, tau) u0` for `t >= tau`.
///
/// Backward spans are rejected; restriction to an invertible subspace is the
/// explicit opt-in of [`propagate_linear_on_subspace`].
pub fn propagate_linear(
    gen: &Generator,
    tau: f64,
    t: f64,
    u0: &StateVector,
    grid: &TimeGrid,
) -> Result<StateVector> {
    if t < tau {
        return Err(Error::BackwardNotInvertible { t, tau });
    }
    if t == tau {
        return Ok(u0.clone());
    }
    let n = substeps(t - tau, grid.step());
    let track = integrate_dense(
        |s, u| gen.matrix_at(s) * u,
        tau,
        t,
        u0.as_vector().clone(),
        n,
        |_, u| u,
        f64::INFINITY,
    )?;
    StateVector::from_column(track.last().clone())
}

/// Propagates the linear part in either direction inside an invariant
/// subspace described by the projector family `project(t, u)`.
///
/// Each accepted step is re-projected, which keeps backward integration from
/// drifting into the complementary (forward-stable) directions.
pub fn propagate_linear_on_subspace(
    gen: &Generator,
    tau: f64,
    t: f64,
    u0: &StateVector,
    project: impl Fn(f64, DVector<f64>) -> DVector<f64>,
    grid: &TimeGrid,
) -> Result<StateVector> {
    if t == tau {
        return Ok(StateVector::from_column(project(
            tau,
            u0.as_vector().clone(),
        ))?);
    }
    let n = substeps(t - tau, grid.step());
    let track = integrate_dense(
        |s, u| gen.matrix_at(s) * u,
        tau,
        t,
        u0.as_vector().clone(),
        n,
        project,
        f64::INFINITY,
    )?;
    let end = if t < tau { track.first() } else { track.last() };
    StateVector::from_column(end.clone())
}

/// Propagates the full semilinear flow forward with the default blow-up guard.
pub fn propagate_semilinear(
    gen: &Generator,
    tau: f64,
    t: f64,
    u0: &StateVector,
    grid: &TimeGrid,
) -> Result<StateVector> {
    propagate_semilinear_guarded(gen, tau, t, u0, grid, DEFAULT_BLOW_UP_CEILING)
}

/// Propagates the full semilinear flow forward, aborting when the trajectory
/// norm exceeds `ceiling`.
pub fn propagate_semilinear_guarded(
    gen: &Generator,
    tau: f64,
    t: f64,
    u0: &StateVector,
    grid: &TimeGrid,
    ceiling: f64,
) -> Result<StateVector> {
    if t < tau {
        return Err(Error::BackwardNotInvertible { t, tau });
    }
    if t == tau {
        return Ok(u0.clone());
    }
    let n = substeps(t - tau, grid.step());
    let track = integrate_dense(
        |s, u| gen.field_at(s, u),
        tau,
        t,
        u0.as_vector().clone(),
        n,
        |_, u| u,
        ceiling,
    )?;
    StateVector::from_column(track.last().clone())
}

/// Matrix of the linear solution operator `L(t, tau)` for `t >= tau`.
pub fn propagate_matrix(gen: &Generator, tau: f64, t: f64, grid: &TimeGrid) -> DMatrix<f64> {
    let d = gen.dim();
    if t == tau {
        return DMatrix::identity(d, d);
    }
    assert!(t > tau, "propagate_matrix runs forward only");
    let n = substeps(t - tau, grid.step());
    let h = (t - tau) / n as f64;
    let field = |s: f64, y: &DMatrix<f64>| gen.matrix_at(s) * y;
    let mut y = DMatrix::identity(d, d);
    let mut s = tau;
    for i in 1..=n {
        let k1 = field(s, &y);
        let k2 = field(s + 0.5 * h, &(&y + &k1 * (0.5 * h)));
        let k3 = field(s + 0.5 * h, &(&y + &k2 * (0.5 * h)));
        let k4 = field(s + h, &(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        s = tau + (t - tau) * (i as f64 / n as f64);
    }
    y
}

/// Spectral (operator 2-) norm.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}
