//! Shadow solutions on the graph by anchored pullback.
//!
//! Any trajectory attracted to the graph is eventually indistinguishable
//! from one particular solution running inside it. That solution is found
//! backward: flow the start far past the attraction horizon, project onto
//! the graph there, and run the projected flow back to the start time. As
//! the anchor moves further out the recovered coordinates settle; the limit
//! is the shadow's position at the start time, and the distance between the
//! two forward trajectories must decay at the certified attraction rate.

use nalgebra::DVector;

use crate::dichotomy::{SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::numerics::{
    eval_graph, integrate_dense, log_slope, Generator, GraphField, GraphOrientation,
    HermiteTrack, StateVector,
};
use crate::report::{Check, CheckSet};

use super::constants::ConstantsLedger;
use super::cutoff::CutoffNonlinearity;
use super::projection::reproject_clamped;

/// Anchoring and fitting plan for the pullback construction.
#[derive(Debug, Clone)]
pub struct PhaseOptions {
    /// Gap between successive pullback anchors.
    pub anchor_spacing: f64,
    /// Anchors tried before giving up on the Cauchy criterion.
    pub max_anchors: usize,
    /// Relative tolerance on successive recovered coordinates.
    pub cauchy_tol: f64,
    /// Fraction of the certified attraction rate conceded to the fit.
    pub rate_tol: f64,
    /// Window the distance decay is fitted on.
    pub fit_span: f64,
    /// Integrator step along all trajectories.
    pub integrator_step: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            anchor_spacing: 1.0,
            max_anchors: 12,
            cauchy_tol: 1e-8,
            rate_tol: 0.1,
            fit_span: 2.5,
            integrator_step: 2.5e-3,
        }
    }
}

/// A shadow solution and the evidence backing it.
#[derive(Debug, Clone)]
pub struct AsymptoticPhase {
    /// Graph coordinates of the shadow at the start time.
    pub phase: DVector<f64>,
    /// Ambient shadow trajectory over the fit window.
    pub shadow: HermiteTrack,
    /// Anchors consumed before the Cauchy criterion was met.
    pub anchors_used: usize,
    /// Time of the anchor that settled the phase.
    pub anchor_time: f64,
    /// Final increment between successive recovered coordinates.
    pub phase_residual: f64,
    /// Distance between the trajectory and its shadow at the start time.
    pub initial_distance: f64,
    /// Fitted decay of that distance against the certified rate.
    pub rate_check: Check,
}

impl AsymptoticPhase {
    /// The rate check as a one-entry report.
    pub fn report(&self) -> CheckSet {
        let mut set = CheckSet::new();
        set.push(self.rate_check.clone());
        set
    }
}

/// Distances this small are resolution noise: the start was already on the
/// graph and a decay exponent would be fitted to rounding error.
const ON_GRAPH_TOL: f64 = 1e-6;

/// Recovers the shadow solution of `u0` inside the graph.
///
/// The start is flowed to `tau + horizon`, then anchor by anchor further
/// out. Each anchor is projected onto the graph and flowed back to `tau`
/// with a per-step reprojection (the backward flow is transversally
/// unstable, the reprojection removes exactly that instability). Successive
/// recovered coordinates must settle below `cauchy_tol`; the settled
/// coordinates seed the shadow, and the fitted decay of
/// `|u(t) - shadow(t)|` is checked against `delta * (1 - rate_tol)`.
///
/// The graph must cover the truncation support: beyond the tabulated box
/// the reprojection reads clamped values, which is only harmless where the
/// truncated nonlinearity vanishes.
pub fn asymptotic_phase(
    field: &GraphField,
    proc: &Generator,
    f: &CutoffNonlinearity,
    cert: &SplittingCertificate,
    ledger: &ConstantsLedger,
    u0: &StateVector,
    tau: f64,
    horizon: f64,
    opts: &PhaseOptions,
) -> Result<AsymptoticPhase> {
    if field.orientation() != GraphOrientation::Unstable {
        return Err(Error::invalid(
            "asymptotic phase needs a graph over the backward-invertible bundle",
        ));
    }
    if (ledger.ell - f.effective_ell()).abs() > 1e-12 * (1.0 + ledger.ell) {
        return Err(Error::invalid(format!(
            "ledger was derived for ell = {} but the truncated field carries {}",
            ledger.ell,
            f.effective_ell()
        )));
    }
    if !(ledger.delta > 0.0) {
        return Err(Error::precondition(
            "attraction rate delta must be positive for a pullback phase",
        ));
    }
    if horizon < 5.0 / ledger.delta - 1e-12 {
        return Err(Error::precondition(format!(
            "horizon {horizon} is below the attraction transient 5/delta = {}",
            5.0 / ledger.delta
        )));
    }
    let min_extent = field
        .axes()
        .iter()
        .map(|ax| ax.max())
        .fold(f64::INFINITY, f64::min);
    if f.radius().is_finite() {
        if min_extent < f.radius() + f.ramp() - 1e-12 {
            return Err(Error::precondition(format!(
                "graph extent {min_extent} does not cover the truncation support {}",
                f.radius() + f.ramp()
            )));
        }
    } else if f.effective_ell() != 0.0 {
        return Err(Error::precondition(
            "pullback through an untruncated nonlinearity leaves the tabulated graph",
        ));
    }
    if !(opts.anchor_spacing > 0.0
        && opts.fit_span > 0.0
        && opts.integrator_step > 0.0
        && opts.cauchy_tol >= 0.0)
    {
        return Err(Error::invalid("phase options must be positive"));
    }
    if opts.max_anchors < 2 {
        return Err(Error::invalid(
            "the Cauchy criterion needs at least two anchors",
        ));
    }
    if opts.fit_span > horizon {
        return Err(Error::invalid("fit_span must not exceed the horizon"));
    }

    let frame = SplitFrame::from_certificate(cert)?;
    if u0.dim() != frame.dim() {
        return Err(Error::invalid(format!(
            "start has dimension {}, splitting lives in dimension {}",
            u0.dim(),
            frame.dim()
        )));
    }
    if field.axes().len() != frame.rank() {
        return Err(Error::invalid(format!(
            "graph has {} coordinates, splitting rank is {}",
            field.axes().len(),
            frame.rank()
        )));
    }

    let lin = proc.linear_part();
    let nl = f.wrapped().clone();
    let flow = |t: f64, u: &DVector<f64>| lin.matrix_at(t) * u + nl.eval(t, u);
    let steps = |span: f64| ((span / opts.integrator_step).ceil() as usize).max(8);
    let ceiling = |norm: f64| 1e6 * (norm + 1.0);

    let fit_track = integrate_dense(
        &flow,
        tau,
        tau + opts.fit_span,
        u0.as_vector().clone(),
        steps(opts.fit_span),
        |_, u| u,
        ceiling(u0.norm()),
    )?;

    let mut cursor_t = tau + opts.fit_span;
    let mut cursor = fit_track.last().clone();
    if horizon > opts.fit_span {
        let track = integrate_dense(
            &flow,
            cursor_t,
            tau + horizon,
            cursor,
            steps(horizon - opts.fit_span),
            |_, u| u,
            ceiling(fit_track.last().norm()),
        )?;
        cursor = track.last().clone();
        cursor_t = tau + horizon;
    }

    let mut previous: Option<DVector<f64>> = None;
    let mut residual = f64::INFINITY;
    let mut settled: Option<(DVector<f64>, usize, f64)> = None;
    for k in 0..opts.max_anchors {
        if k > 0 {
            let track = integrate_dense(
                &flow,
                cursor_t,
                cursor_t + opts.anchor_spacing,
                cursor.clone(),
                steps(opts.anchor_spacing),
                |_, u| u,
                ceiling(cursor.norm()),
            )?;
            cursor = track.last().clone();
            cursor_t += opts.anchor_spacing;
        }
        let anchored = reproject_clamped(field, &frame, cursor_t, cursor.clone());
        let back = integrate_dense(
            &flow,
            cursor_t,
            tau,
            anchored,
            steps(cursor_t - tau),
            |t, u| reproject_clamped(field, &frame, t, u),
            ceiling(cursor.norm()),
        )?;
        let recovered = frame.q_coords(tau, back.first());
        if let Some(prev) = &previous {
            residual = (&recovered - prev).norm();
            if residual <= opts.cauchy_tol * (1.0 + recovered.norm()) {
                settled = Some((recovered, k + 1, cursor_t));
                break;
            }
        }
        previous = Some(recovered);
    }
    let (phase, anchors_used, anchor_time) = settled.ok_or(Error::PullbackNotConverged {
        residual,
        depth: cursor_t - tau,
    })?;

    let value = eval_graph(field, tau, phase.as_slice())?;
    let v0 = frame.lift(tau, &phase, &value);
    let shadow = integrate_dense(
        &flow,
        tau,
        tau + opts.fit_span,
        v0,
        steps(opts.fit_span),
        |_, u| u,
        ceiling(u0.norm()),
    )?;

    let scale = 1.0 + u0.norm();
    let mut ts = Vec::new();
    let mut ds = Vec::new();
    for ((t, u), (_, v)) in fit_track.nodes().zip(shadow.nodes()) {
        ts.push(t);
        ds.push((u - v).norm());
    }
    let initial_distance = ds[0];
    let max_distance = ds.iter().copied().fold(0.0, f64::max);
    let bound = ledger.delta * (1.0 - opts.rate_tol);
    let measured = if max_distance <= ON_GRAPH_TOL * scale {
        f64::INFINITY
    } else {
        -log_slope(&ts, &ds, 1e-13 * scale)
            .ok_or_else(|| Error::invalid("distance fit ran out of usable samples"))?
    };

    Ok(AsymptoticPhase {
        phase,
        shadow,
        anchors_used,
        anchor_time,
        phase_residual: residual,
        initial_distance,
        rate_check: Check::lower("shadow_convergence_rate", bound, measured),
    })
}

#[cfg(test)]
mod tests {
    use super::super::constants::constants_ledger;
    use super::super::cutoff::{cutoff, CutoffNonlinearity};
    use super::super::solver::{solve_sigma, GraphGridSpec, SolveOptions};
    use super::*;
    use crate::dichotomy::ProjectionFamily;
    use crate::numerics::Nonlinearity;
    use nalgebra::DMatrix;

    fn saddle_cert() -> SplittingCertificate {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let family = ProjectionFamily::constant(q, -60.0, 60.0).unwrap();
        SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap()
    }

    fn quadratic_setup() -> (
        Generator,
        CutoffNonlinearity,
        ConstantsLedger,
        GraphField,
        SplittingCertificate,
    ) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let proc = Generator::constant(a);
        let base = Nonlinearity::autonomous(
            |u| DVector::from_column_slice(&[0.0, u[0] * u[0]]),
            0.3,
            true,
        );
        let f = cutoff(&base, 2, 0.15, 0.15).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, f.effective_ell(), None).unwrap();
        let cert = saddle_cert();
        let grid = GraphGridSpec::single_time(0.0, 0.3, 25);
        let sigma =
            solve_sigma(&proc, &cert, &f, &ledger, &grid, &SolveOptions::default()).unwrap();
        (proc, f, ledger, sigma, cert)
    }

    #[test]
    fn diagonal_saddle_phase_is_the_unstable_component() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let proc = Generator::constant(a);
        let zero = Nonlinearity::autonomous(|u| DVector::zeros(u.len()), 0.0, true);
        let f = CutoffNonlinearity::unbounded(&zero, 0.0).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, 0.0, None).unwrap();
        let cert = saddle_cert();
        let grid = GraphGridSpec::single_time(0.0, 2.0, 5);
        let sigma =
            solve_sigma(&proc, &cert, &f, &ledger, &grid, &SolveOptions::default()).unwrap();

        let u0 = StateVector::new(vec![1.0, 1.0]).unwrap();
        let result = asymptotic_phase(
            &sigma,
            &proc,
            &f,
            &cert,
            &ledger,
            &u0,
            0.0,
            5.0,
            &PhaseOptions::default(),
        )
        .unwrap();
        assert_eq!(result.phase.len(), 1);
        assert!((result.phase[0] - 1.0).abs() < 1e-8, "{}", result.phase[0]);
        assert!((result.initial_distance - 1.0).abs() < 1e-9);
        assert!(result.rate_check.passed());
        assert!((result.rate_check.measured - 1.0).abs() < 1e-6);
        assert_eq!(result.anchors_used, 2);
    }

    #[test]
    fn on_graph_start_recovers_its_own_coordinates() {
        let (proc, f, ledger, sigma, cert) = quadratic_setup();
        let q = 0.05;
        let value = eval_graph(&sigma, 0.0, &[q]).unwrap();
        let u0 = StateVector::new(vec![q, value[0]]).unwrap();
        let horizon = 5.0 / ledger.delta;
        let result = asymptotic_phase(
            &sigma,
            &proc,
            &f,
            &cert,
            &ledger,
            &u0,
            0.0,
            horizon,
            &PhaseOptions::default(),
        )
        .unwrap();
        assert!((result.phase[0] - q).abs() < 1e-8, "{}", result.phase[0]);
        assert!(result.initial_distance < 1e-8);
        assert!(result.rate_check.passed());
    }

    #[test]
    fn quadratic_offset_start_converges_at_the_certified_rate() {
        let (proc, f, ledger, sigma, cert) = quadratic_setup();
        let u0 = StateVector::new(vec![0.05, 0.02]).unwrap();
        let horizon = 5.0 / ledger.delta;
        let result = asymptotic_phase(
            &sigma,
            &proc,
            &f,
            &cert,
            &ledger,
            &u0,
            0.0,
            horizon,
            &PhaseOptions::default(),
        )
        .unwrap();
        assert!((result.phase[0] - 0.05).abs() < 1e-6, "{}", result.phase[0]);
        assert!(result.rate_check.passed(), "{}", result.rate_check.summary_line());
        assert!(result.rate_check.measured > 0.8);
        assert!(result.anchors_used <= 12);
        assert!(result.initial_distance > 1e-3);
    }

    #[test]
    fn pullback_that_cannot_settle_is_reported() {
        let (proc, f, ledger, sigma, cert) = quadratic_setup();
        let u0 = StateVector::new(vec![0.05, 0.02]).unwrap();
        let horizon = 5.0 / ledger.delta;
        let opts = PhaseOptions {
            cauchy_tol: 0.0,
            max_anchors: 3,
            ..PhaseOptions::default()
        };
        let err = asymptotic_phase(
            &sigma, &proc, &f, &cert, &ledger, &u0, 0.0, horizon, &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PullbackNotConverged { .. }));
    }

    #[test]
    fn transients_and_coverage_are_gated() {
        let (proc, f, ledger, sigma, cert) = quadratic_setup();
        let u0 = StateVector::new(vec![0.05, 0.02]).unwrap();
        let err = asymptotic_phase(
            &sigma,
            &proc,
            &f,
            &cert,
            &ledger,
            &u0,
            0.0,
            1.0,
            &PhaseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));

        let narrow_grid = GraphGridSpec::single_time(0.0, 0.1, 9);
        let narrow = solve_sigma(
            &proc,
            &cert,
            &f,
            &ledger,
            &narrow_grid,
            &SolveOptions::default(),
        )
        .unwrap();
        let err = asymptotic_phase(
            &narrow,
            &proc,
            &f,
            &cert,
            &ledger,
            &u0,
            0.0,
            5.0 / ledger.delta,
            &PhaseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
