//! Mode reductions of the reaction-diffusion problem.
//!
//! Three planar views of the same dynamics, plus the full Galerkin
//! truncation they are checked against:
//!
//! * `galerkin(n)` keeps the lowest `n` diffusion modes and projects the
//!   cubic reaction onto them through a precomputed quartic tensor;
//! * `inertial` solves for the invariant graph of the tail modes over the
//!   two slow ones and restricts the flow to that graph;
//! * `limiting_uv` and `limiting_z` are the thin-band limits in slow-mode
//!   and compartment coordinates, linked by an exact linear change of
//!   variables.
//!
//! Stiff tail modes make explicit stepping useless for the Galerkin system,
//! so its integrator treats the diagonal linear part exactly and steps only
//! the reaction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dichotomy::{ProjectionFamily, SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::graph_transform::{
    constants_ledger, cutoff, solve_sigma, GraphGridSpec, SolveOptions,
};
use crate::numerics::{
    eval_graph_clamped, integrate_dense, Generator, GraphField, HermiteTrack, Nonlinearity,
    DEFAULT_BLOW_UP_CEILING,
};

use super::spectrum::Spectrum;

/// Quadrature drift allowed on the flat mode's squared mass.
const MASS_TOL: f64 = 1e-8;

/// Time profile of the reaction strength.
#[derive(Clone)]
pub struct BetaProfile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
    label: String,
}

impl fmt::Debug for BetaProfile {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "BetaProfile({}, range [{}, {}])", self.label, self.lo, self.hi)
    }
}

impl BetaProfile {
    /// Constant strength.
    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::invalid("constant beta must be positive and finite"));
        }
        Ok(BetaProfile {
            f: Arc::new(move |_| value),
            lo: value,
            hi: value,
            label: format!("constant {value}"),
        })
    }

    /// `mean + amplitude * sin t`.
    pub fn sinusoidal(mean: f64, amplitude: f64) -> Result<Self> {
        if !mean.is_finite() || !amplitude.is_finite() {
            return Err(Error::non_finite("beta profile parameters"));
        }
        if mean - amplitude.abs() <= 0.0 {
            return Err(Error::invalid("sinusoidal beta must stay positive"));
        }
        Ok(BetaProfile {
            f: Arc::new(move |t| mean + amplitude * t.sin()),
            lo: mean - amplitude.abs(),
            hi: mean + amplitude.abs(),
            label: format!("{mean} + {amplitude} sin t"),
        })
    }

    /// Arbitrary profile with caller-declared range.
    pub fn custom(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 || hi < lo {
            return Err(Error::invalid("beta range must satisfy 0 < lo <= hi"));
        }
        Ok(BetaProfile {
            f: Arc::new(f),
            lo,
            hi,
            label: label.into(),
        })
    }

    /// Strength at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Declared lower bound.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Declared upper bound.
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Whether the declared range is a single point.
    pub fn is_constant(&self) -> bool {
        self.lo == self.hi
    }

    /// Human-readable description.
    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Mode-space data of a Galerkin truncation: eigenvalues and the projected
/// quartic tensor `C[i][j][l][k] = sum w phi_i phi_j phi_l phi_k`.
#[derive(Clone)]
struct GalerkinData {
    n: usize,
    lambdas: Vec<f64>,
    cubic: Vec<f64>,
}

impl GalerkinData {
    fn build(spectrum: &Spectrum, n: usize) -> Self {
        let m = spectrum.nodes().len();
        let mut cubic = vec![0.0; n * n * n * n];
        for node in 0..m {
            let w = spectrum.weights()[node];
            let p: Vec<f64> = (0..n).map(|k| spectrum.phi(k)[node]).collect();
            for i in 0..n {
                let pi = w * p[i];
                for j in 0..n {
                    let pij = pi * p[j];
                    for l in 0..n {
                        let pijl = pij * p[l];
                        let row = ((i * n + j) * n + l) * n;
                        for k in 0..n {
                            cubic[row + k] += pijl * p[k];
                        }
                    }
                }
            }
        }
        GalerkinData {
            n,
            lambdas: spectrum.lambdas()[..n].to_vec(),
            cubic,
        }
    }

    /// `k`-th component of the projected cube, `(u^3, phi_k)` for the field
    /// synthesized from the mode coefficients.
    fn cube(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for j in 0..n {
                let uij = ui * u[j];
                if uij == 0.0 {
                    continue;
                }
                for l in 0..n {
                    let uijl = uij * u[l];
                    if uijl == 0.0 {
                        continue;
                    }
                    let row = ((i * n + j) * n + l) * n;
                    for k in 0..n {
                        out[k] += uijl * self.cubic[row + k];
                    }
                }
            }
        }
        out
    }

    /// Projected reaction `h(t, u) = u - beta(t) (u^3, phi_.)`.
    fn forcing(&self, beta_t: f64, u: &DVector<f64>) -> DVector<f64> {
        let mut out = self.cube(u);
        out *= -beta_t;
        out += u;
        out
    }
}

enum Kind {
    Galerkin(GalerkinData),
    Inertial {
        data: GalerkinData,
        frame: SplitFrame,
        sigma: GraphField,
    },
    LimitingUv {
        x_star: f64,
        k1: f64,
        lambda2: f64,
    },
    LimitingZ {
        a1: f64,
        a2: f64,
    },
}

/// One reduced view of the reaction-diffusion dynamics.
pub struct ReducedSystem {
    kind: Kind,
    beta: BetaProfile,
}

impl fmt::Debug for ReducedSystem {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "ReducedSystem({}, beta = {:?})", self.kind_name(), self.beta)
    }
}

impl ReducedSystem {
    /// State dimension.
    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Galerkin(data) => data.n,
            _ => 2,
        }
    }

    /// Variant name for reports.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Galerkin(_) => "galerkin",
            Kind::Inertial { .. } => "inertial",
            Kind::LimitingUv { .. } => "limiting_uv",
            Kind::LimitingZ { .. } => "limiting_z",
        }
    }

    /// Reaction strength profile.
    pub fn beta(&self) -> &BetaProfile {
        &self.beta
    }

    /// Compartment coupling rates, `Some` only for the z-variant.
    pub fn coupling(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::LimitingZ { a1, a2 } => Some((*a1, *a2)),
            _ => None,
        }
    }

    /// Slow-mode step height ratio, `Some` only for the uv-variant.
    pub fn k1(&self) -> Option<f64> {
        match &self.kind {
            Kind::LimitingUv { k1, .. } => Some(*k1),
            _ => None,
        }
    }

    /// Kept eigenvalues, `Some` for mode-space variants.
    pub fn lambdas(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Galerkin(data) => Some(&data.lambdas),
            Kind::Inertial { data, .. } => Some(&data.lambdas[..2]),
            _ => None,
        }
    }

    /// Projected reaction components, `Some` only for the Galerkin variant.
    pub fn forcing(&self, t: f64, u: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.kind {
            Kind::Galerkin(data) => Some(data.forcing(self.beta.eval(t), u)),
            _ => None,
        }
    }

    /// Tail-mode coordinates of the inertial graph over slow coordinates
    /// `(u1, u2)`, `Some` only for the inertial variant.
    pub fn graph_value(&self, t: f64, u1: f64, u2: f64) -> Option<DVector<f64>> {
        match &self.kind {
            Kind::Inertial { data, frame, sigma } => {
                let mut slow = DVector::zeros(data.n);
                slow[0] = u1;
                slow[1] = u2;
                let q = frame.q_coords(t, &slow);
                Some(eval_graph_clamped(sigma, t, q.as_slice()))
            }
            _ => None,
        }
    }

    /// Vector field of the reduced dynamics.
    pub fn rhs(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let beta_t = self.beta.eval(t);
        match &self.kind {
            Kind::Galerkin(data) => {
                let mut out = data.forcing(beta_t, u);
                for k in 0..data.n {
                    out[k] -= data.lambdas[k] * u[k];
                }
                out
            }
            Kind::Inertial { data, frame, sigma } => {
                let mut slow = DVector::zeros(data.n);
                slow[0] = u[0];
                slow[1] = u[1];
                let q = frame.q_coords(t, &slow);
                let tail = eval_graph_clamped(sigma, t, q.as_slice());
                let full = frame.lift(t, &q, &tail);
                let mut rhs = data.forcing(beta_t, &full);
                for k in 0..data.n {
                    rhs[k] -= data.lambdas[k] * full[k];
                }
                DVector::from_vec(vec![rhs[0], rhs[1]])
            }
            Kind::LimitingUv { x_star, k1, lambda2 } => {
                let f = |s: f64| s - beta_t * s.powi(3);
                let left = f(u[0] - k1 * u[1]);
                let right = f(u[0] + u[1] / k1);
                let f1 = x_star * left + (1.0 - x_star) * right;
                let f2 = -x_star * left + (1.0 - x_star) / k1 * right;
                DVector::from_vec(vec![f1, -lambda2 * u[1] + f2])
            }
            Kind::LimitingZ { a1, a2 } => {
                let f = |s: f64| s - beta_t * s.powi(3);
                let jump = u[1] - u[0];
                DVector::from_vec(vec![a1 * jump + f(u[0]), -a2 * jump + f(u[1])])
            }
        }
    }

    /// Integrates the reduced dynamics forward and returns a dense track.
    ///
    /// The Galerkin variant steps with the diagonal linear flow factored out
    /// exactly, so `step` only has to resolve the reaction; the planar
    /// variants use the plain fourth-order scheme.
    pub fn integrate(
        &self,
        t0: f64,
        t1: f64,
        u0: &DVector<f64>,
        step: f64,
    ) -> Result<HermiteTrack> {
        if !(t1 > t0) {
            return Err(Error::invalid("integration span must run forward"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid("integration step must be positive"));
        }
        if u0.len() != self.dim() {
            return Err(Error::invalid(format!(
                "state dimension {} does not match the {} system",
                u0.len(),
                self.kind_name()
            )));
        }
        match &self.kind {
            Kind::Galerkin(data) => {
                let beta = self.beta.clone();
                lawson_track(
                    &data.lambdas,
                    |t, u| data.forcing(beta.eval(t), u),
                    t0,
                    t1,
                    u0.clone(),
                    step,
                )
            }
            _ => {
                let n_steps = ((t1 - t0) / step).ceil().max(1.0) as usize;
                integrate_dense(
                    |t, u| self.rhs(t, u),
                    t0,
                    t1,
                    u0.clone(),
                    n_steps,
                    |_, y| y,
                    DEFAULT_BLOW_UP_CEILING,
                )
            }
        }
    }
}

/// Fourth-order integrator with the diagonal linear part `-lambda` applied
/// through exact exponential factors; the nonlinear forcing is the only term
/// seen by the Runge-Kutta stages, so stiffness of the tail modes does not
/// constrain the step.
fn lawson_track(
    lambdas: &[f64],
    forcing: impl Fn(f64, &DVector<f64>) -> DVector<f64>,
    t0: f64,
    t1: f64,
    u0: DVector<f64>,
    step: f64,
) -> Result<HermiteTrack> {
    let n_steps = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n_steps as f64;
    let e_full: Vec<f64> = lambdas.iter().map(|l| (-l * h).exp()).collect();
    let e_half: Vec<f64> = lambdas.iter().map(|l| (-l * 0.5 * h).exp()).collect();
    let scale = |v: &DVector<f64>, e: &[f64]| {
        DVector::from_iterator(v.len(), v.iter().zip(e).map(|(x, f)| x * f))
    };
    let deriv = |t: f64, u: &DVector<f64>| {
        let mut d = forcing(t, u);
        for (k, l) in lambdas.iter().enumerate() {
            d[k] -= l * u[k];
        }
        d
    };

    let mut ts = Vec::with_capacity(n_steps + 1);
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut dys = Vec::with_capacity(n_steps + 1);
    let mut u = u0;
    ts.push(t0);
    dys.push(deriv(t0, &u));
    ys.push(u.clone());
    for i in 0..n_steps {
        let t = t0 + i as f64 * h;
        let k1 = forcing(t, &u);
        let eu = scale(&u, &e_half);
        let k2 = forcing(t + 0.5 * h, &(&eu + scale(&k1, &e_half) * (0.5 * h)));
        let k3 = forcing(t + 0.5 * h, &(&eu + &k2 * (0.5 * h)));
        let k4 = forcing(t + h, &(scale(&u, &e_full) + scale(&k3, &e_half) * h));
        u = scale(&u, &e_full)
            + (scale(&k1, &e_full) + scale(&(k2 + k3), &e_half) * 2.0 + k4) * (h / 6.0);
        let t_next = t0 + (i + 1) as f64 * h;
        let norm = u.norm();
        if !norm.is_finite() || norm > DEFAULT_BLOW_UP_CEILING {
            return Err(Error::BlowUp {
                t: t_next,
                norm,
                ceiling: DEFAULT_BLOW_UP_CEILING,
            });
        }
        ts.push(t_next);
        dys.push(deriv(t_next, &u));
        ys.push(u.clone());
    }
    Ok(HermiteTrack::new(ts, ys, dys))
}

/// Projects the cubic reaction `u - beta(t) u^3` onto the lowest `n` modes.
///
/// The flat mode must carry unit squared mass in the spectrum's quadrature;
/// a mismatch means the weights and the normalization disagree and every
/// projected coefficient would be silently off.
pub fn galerkin_project(spectrum: &Spectrum, n: usize, beta: BetaProfile) -> Result<ReducedSystem> {
    if n < 2 {
        return Err(Error::invalid("the reduction keeps at least two modes"));
    }
    if n > spectrum.n_modes() {
        return Err(Error::invalid(format!(
            "requested {n} modes, spectrum holds {}",
            spectrum.n_modes()
        )));
    }
    let mass: f64 = spectrum.inner(spectrum.phi(0), spectrum.phi(0));
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::Structural(format!(
            "flat mode squared mass {mass:.12} drifted from 1"
        )));
    }
    Ok(ReducedSystem {
        kind: Kind::Galerkin(GalerkinData::build(spectrum, n)),
        beta,
    })
}

/// The two thin-band limits and their exact coordinate change.
#[derive(Debug)]
pub struct LimitingPair {
    /// Slow-mode coordinates `(u1, u2)`.
    pub uv: ReducedSystem,
    /// Compartment coordinates `(z1, z2)`, one value per side.
    pub z: ReducedSystem,
    x_star: f64,
    k1: f64,
}

impl LimitingPair {
    /// Step height ratio between the two sides.
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// Slow-mode to compartment coordinates.
    pub fn u_to_z(&self, u: (f64, f64)) -> (f64, f64) {
        (u.0 - self.k1 * u.1, u.0 + u.1 / self.k1)
    }

    /// Compartment to slow-mode coordinates.
    pub fn z_to_u(&self, z: (f64, f64)) -> (f64, f64) {
        let u1 = self.x_star * z.0 + (1.0 - self.x_star) * z.1;
        let u2 = (self.x_star * (1.0 - self.x_star)).sqrt() * (z.1 - z.0);
        (u1, u2)
    }
}

/// Builds the thin-band limit systems for an interface at `x_star`.
pub fn limiting_systems(
    x_star: f64,
    alpha0: f64,
    beta0: f64,
    beta: BetaProfile,
) -> Result<LimitingPair> {
    if !(0.0 < x_star && x_star < 1.0) {
        return Err(Error::invalid("x_star must lie strictly inside (0, 1)"));
    }
    if !(alpha0 > 0.0) || !(beta0 > 0.0) || !alpha0.is_finite() || !beta0.is_finite() {
        return Err(Error::invalid("alpha0 and beta0 must be positive and finite"));
    }
    let k1 = ((1.0 - x_star) / x_star).sqrt();
    let lambda2 = alpha0 / (2.0 * beta0 * (1.0 - x_star));
    let a1 = alpha0 / (2.0 * beta0 * x_star);
    let a2 = alpha0 / (2.0 * beta0 * (1.0 - x_star));
    Ok(LimitingPair {
        uv: ReducedSystem {
            kind: Kind::LimitingUv { x_star, k1, lambda2 },
            beta: beta.clone(),
        },
        z: ReducedSystem {
            kind: Kind::LimitingZ { a1, a2 },
            beta,
        },
        x_star,
        k1,
    })
}

/// Restricts an `n`-mode Galerkin system to the invariant graph of its tail
/// modes over the two slow ones.
///
/// The linear part is diagonal, so the slow/tail splitting is exact with
/// constant `1` and rates `(lambda3, lambda2)`; the reaction is truncated
/// outside `radius` to make its Lipschitz constant finite. Requires the
/// spectral gap to clear the graph-transform threshold, which holds once the
/// valley is thin enough.
pub fn inertial_reduction(
    spectrum: &Spectrum,
    n: usize,
    beta: BetaProfile,
    radius: f64,
    grid: &GraphGridSpec,
) -> Result<ReducedSystem> {
    if n < 3 {
        return Err(Error::invalid("the inertial variant needs at least one tail mode"));
    }
    let galerkin = galerkin_project(spectrum, n, beta.clone())?;
    let data = match &galerkin.kind {
        Kind::Galerkin(data) => data.clone(),
        _ => unreachable!(),
    };
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid("truncation radius must be positive"));
    }

    let lambdas = data.lambdas.clone();
    let gen = Generator::constant(DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        lambdas.iter().map(|l| -l),
    )));
    let mut q = DMatrix::zeros(n, n);
    q[(0, 0)] = 1.0;
    q[(1, 1)] = 1.0;
    let (t_lo, t_hi) = (
        grid.times.first().copied().unwrap_or(0.0) - 1.0,
        grid.times.last().copied().unwrap_or(0.0) + 1.0,
    );
    let family = ProjectionFamily::constant(q, t_lo, t_hi)?;
    let cert = SplittingCertificate::new(family, 1.0, lambdas[2], lambdas[1])?;

    let reaction = {
        let data = data.clone();
        let beta = beta.clone();
        Nonlinearity::new(move |t, u| data.forcing(beta.eval(t), u), 0.0, true)
    };
    let truncated = cutoff(&reaction, n, radius, 0.5 * radius)?;
    let ledger = constants_ledger(
        cert.m(),
        cert.gamma(),
        cert.rho(),
        truncated.effective_ell(),
        None,
    )?;
    // Explicit stages inside the solver must resolve the stiffest kept mode.
    let stiff_step = 2.0 / lambdas[n - 1].max(1.0);
    let opts = SolveOptions {
        integrator_step: stiff_step.min(1e-3),
        ..SolveOptions::default()
    };
    let sigma = solve_sigma(&gen, &cert, &truncated, &ledger, grid, &opts)?;
    let frame = SplitFrame::from_certificate(&cert)?;
    Ok(ReducedSystem {
        kind: Kind::Inertial { data, frame, sigma },
        beta: galerkin.beta,
    })
}
