//! Exponential-rate certification for computed graphs.
//!
//! Each inequality is measured, not assumed: sample starts are flowed with
//! the full nonlinear field, the relevant distance is logged along the
//! track, and the fitted exponent is compared against the ledger rate with
//! the caller's slack. All checks are one-sided on purpose: dynamics faster
//! than certified passes, slower fails.

use nalgebra::DVector;

use crate::dichotomy::{SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::numerics::{
    eval_graph, integrate_dense, log_slope, Generator, GraphField, GraphOrientation,
    DEFAULT_BLOW_UP_CEILING,
};
use crate::report::{Check, CheckSet};

use super::constants::ConstantsLedger;
use super::cutoff::CutoffNonlinearity;
use super::projection::reproject_clamped;

/// Sampling plan for the rate checks.
#[derive(Debug, Clone)]
pub struct RateCheckOptions {
    /// Starts sampled per inequality.
    pub samples: usize,
    /// Length of the window each exponent is fitted on.
    pub fit_span: f64,
    /// Slack applied to each certified rate before comparing.
    pub rate_tol: f64,
    /// Integrator step along sample trajectories.
    pub integrator_step: f64,
    /// Transverse offset, as a fraction of the smallest axis extent.
    pub offset_fraction: f64,
}

impl Default for RateCheckOptions {
    fn default() -> Self {
        RateCheckOptions {
            samples: 3,
            fit_span: 1.5,
            rate_tol: 0.05,
            integrator_step: 2.5e-3,
            offset_fraction: 0.2,
        }
    }
}

/// Signed fractions used for on-graph starts; backward/stable flows shrink
/// coordinates, so these stay inside the tabulated box.
fn start_fractions(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| {
            let fr = 0.25 + 0.5 * k as f64 / (samples.max(2) - 1) as f64;
            if k % 2 == 0 {
                fr
            } else {
                -fr
            }
        })
        .collect()
}

fn diagonal_coords(field: &GraphField, fraction: f64) -> DVector<f64> {
    DVector::from_iterator(
        field.axes().len(),
        field.axes().iter().map(|ax| fraction * ax.max()),
    )
}

fn min_extent(field: &GraphField) -> f64 {
    field
        .axes()
        .iter()
        .map(|ax| ax.max())
        .fold(f64::INFINITY, f64::min)
}

/// Norm floor below which samples carry rounding noise, not rate information.
fn fit_floor(scale: f64) -> f64 {
    1e-13 * (1.0 + scale)
}

struct RateContext<'a> {
    field: &'a GraphField,
    frame: &'a SplitFrame,
    lin: Generator,
    nl: crate::numerics::Nonlinearity,
    tau: f64,
    n_steps: usize,
    opts: &'a RateCheckOptions,
}

impl RateContext<'_> {
    fn flow(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        self.lin.matrix_at(t) * u + self.nl.eval(t, u)
    }

    /// Fitted exponent of `log ||u(t)||` along the reprojected on-graph flow.
    /// `backward` selects the integration direction; the returned slope is
    /// always with respect to forward time.
    fn on_graph_slope(&self, start: DVector<f64>, backward: bool) -> Result<f64> {
        let scale = start.norm();
        let t1 = if backward {
            self.tau - self.opts.fit_span
        } else {
            self.tau + self.opts.fit_span
        };
        let track = integrate_dense(
            |t, u| self.flow(t, u),
            self.tau,
            t1,
            start,
            self.n_steps,
            |t, u| reproject_clamped(self.field, self.frame, t, u),
            DEFAULT_BLOW_UP_CEILING,
        )?;
        let mut ts = Vec::with_capacity(self.n_steps + 1);
        let mut vs = Vec::with_capacity(self.n_steps + 1);
        for (t, u) in track.nodes() {
            ts.push(t);
            vs.push(u.norm());
        }
        log_slope(&ts, &vs, fit_floor(scale))
            .ok_or_else(|| Error::invalid("on-graph rate fit ran out of usable samples"))
    }

    /// Fitted exponent of `log dist(u(t), graph)` along the free forward
    /// flow. The distance stops being collected once the graph coordinates
    /// leave the tabulated box or drop below the resolvable floor.
    fn distance_slope(&self, start: DVector<f64>) -> Result<f64> {
        let track = integrate_dense(
            |t, u| self.flow(t, u),
            self.tau,
            self.tau + self.opts.fit_span,
            start,
            self.n_steps,
            |_, u| u,
            DEFAULT_BLOW_UP_CEILING,
        )?;
        let mut ts = Vec::new();
        let mut ds = Vec::new();
        let mut d0 = None;
        for (t, u) in track.nodes() {
            let coords = match self.field.orientation() {
                GraphOrientation::Unstable => self.frame.q_coords(t, u),
                GraphOrientation::Stable => self.frame.p_coords(t, u),
            };
            let value = match eval_graph(self.field, t, coords.as_slice()) {
                Ok(v) => v,
                Err(_) => break,
            };
            let on_graph = match self.field.orientation() {
                GraphOrientation::Unstable => self.frame.lift(t, &coords, &value),
                GraphOrientation::Stable => self.frame.lift(t, &value, &coords),
            };
            let d = (u - on_graph).norm();
            let first = *d0.get_or_insert(d);
            if d < first * 1e-4 {
                break;
            }
            ts.push(t);
            ds.push(d);
        }
        if ts.len() < 8 {
            return Err(Error::invalid(
                "transverse rate fit window too short; widen the extents or shorten fit_span",
            ));
        }
        log_slope(&ts, &ds, 0.0)
            .ok_or_else(|| Error::invalid("transverse rate fit ran out of usable samples"))
    }
}

/// Measures the exponential rates certified by the ledger on sample
/// trajectories of the truncated system and reports one check per
/// inequality.
///
/// For a graph over the backward-invertible bundle the checks are the
/// on-graph backward decay against `-(rho + ell*M*(1+kappa))` and the
/// attraction of nearby starts against `delta`. For a graph over the
/// forward-stable bundle they are the on-graph forward decay against
/// `gamma - ell*M*(1+kappa)` and the persistence of transverse separation
/// against `delta_hat`. Measured exponents are least-squares fits of the
/// logged quantity over `fit_span`, compared with `rate_tol` slack.
pub fn verify_rates(
    field: &GraphField,
    proc: &Generator,
    f: &CutoffNonlinearity,
    cert: &SplittingCertificate,
    ledger: &ConstantsLedger,
    opts: &RateCheckOptions,
) -> Result<CheckSet> {
    if (ledger.ell - f.effective_ell()).abs() > 1e-12 * (1.0 + ledger.ell) {
        return Err(Error::invalid(format!(
            "ledger was derived for ell = {} but the truncated field carries {}",
            ledger.ell,
            f.effective_ell()
        )));
    }
    if opts.samples == 0 {
        return Err(Error::invalid("rate checks need at least one sample"));
    }
    if !(opts.fit_span > 0.0 && opts.integrator_step > 0.0) {
        return Err(Error::invalid("fit span and integrator step must be positive"));
    }
    if !(opts.rate_tol >= 0.0 && opts.offset_fraction > 0.0) {
        return Err(Error::invalid(
            "rate_tol must be nonnegative and offset_fraction positive",
        ));
    }
    let frame = SplitFrame::from_certificate(cert)?;
    let coord_dim = field.axes().len();
    let expected = match field.orientation() {
        GraphOrientation::Unstable => frame.rank(),
        GraphOrientation::Stable => frame.dim() - frame.rank(),
    };
    if coord_dim != expected || field.value_dim() != frame.dim() - expected {
        return Err(Error::invalid(format!(
            "graph dimensions ({} coords, {} values) do not match the splitting ({}, {})",
            coord_dim,
            field.value_dim(),
            expected,
            frame.dim() - expected
        )));
    }

    let times = field.times();
    let ctx = RateContext {
        field,
        frame: &frame,
        lin: proc.linear_part(),
        nl: f.wrapped().clone(),
        tau: times[times.len() / 2],
        n_steps: ((opts.fit_span / opts.integrator_step).ceil() as usize).max(8),
        opts,
    };

    let drift = ledger.ell * ledger.m * (1.0 + ledger.kappa_chosen);
    let offset_len = opts.offset_fraction * min_extent(field);
    let mut report = CheckSet::new();

    match field.orientation() {
        GraphOrientation::Unstable => {
            let mut on_graph = f64::INFINITY;
            for fr in start_fractions(opts.samples) {
                let q = diagonal_coords(field, fr);
                let value = eval_graph(field, ctx.tau, q.as_slice())?;
                let start = frame.lift(ctx.tau, &q, &value);
                on_graph = on_graph.min(ctx.on_graph_slope(start, true)?);
            }
            report.push(Check::lower(
                "on_graph_backward_rate",
                -(ledger.rho + drift) - opts.rate_tol,
                on_graph,
            ));

            let mut attraction = f64::INFINITY;
            for k in 0..opts.samples {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let q = diagonal_coords(field, 0.1 * sign);
                let mut value = eval_graph(field, ctx.tau, q.as_slice())?;
                value[k % field.value_dim()] += sign * offset_len;
                let start = frame.lift(ctx.tau, &q, &value);
                attraction = attraction.min(-ctx.distance_slope(start)?);
            }
            report.push(Check::lower(
                "attraction_rate",
                ledger.delta - opts.rate_tol,
                attraction,
            ));
        }
        GraphOrientation::Stable => {
            let mut on_graph = f64::INFINITY;
            for fr in start_fractions(opts.samples) {
                let p = diagonal_coords(field, fr);
                let value = eval_graph(field, ctx.tau, p.as_slice())?;
                let start = frame.lift(ctx.tau, &value, &p);
                on_graph = on_graph.min(-ctx.on_graph_slope(start, false)?);
            }
            report.push(Check::lower(
                "on_graph_forward_rate",
                ledger.gamma - drift - opts.rate_tol,
                on_graph,
            ));

            let mut separation = f64::NEG_INFINITY;
            for k in 0..opts.samples {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let p = diagonal_coords(field, 0.5 * sign);
                let mut value = eval_graph(field, ctx.tau, p.as_slice())?;
                value[k % field.value_dim()] += sign * offset_len;
                let start = frame.lift(ctx.tau, &value, &p);
                separation = separation.max(-ctx.distance_slope(start)?);
            }
            report.push(Check::upper(
                "separation_rate",
                ledger.delta_hat + opts.rate_tol,
                separation,
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::constants::constants_ledger;
    use super::super::cutoff::{cutoff, CutoffNonlinearity};
    use super::super::solver::{solve_sigma, solve_theta, GraphGridSpec, SolveOptions};
    use super::*;
    use crate::dichotomy::ProjectionFamily;
    use crate::numerics::Nonlinearity;
    use nalgebra::DMatrix;

    fn saddle_cert() -> SplittingCertificate {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let family = ProjectionFamily::constant(q, -40.0, 40.0).unwrap();
        SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap()
    }

    fn zero_field_setup() -> (Generator, CutoffNonlinearity, ConstantsLedger) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let proc = Generator::constant(a);
        let zero = Nonlinearity::autonomous(|u| DVector::zeros(u.len()), 0.0, true);
        let f = CutoffNonlinearity::unbounded(&zero, 0.0).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, 0.0, None).unwrap();
        (proc, f, ledger)
    }

    fn quadratic_setup() -> (Generator, CutoffNonlinearity, ConstantsLedger) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let proc = Generator::constant(a);
        let base = Nonlinearity::autonomous(
            |u| DVector::from_column_slice(&[0.0, u[0] * u[0]]),
            0.3,
            true,
        );
        let f = cutoff(&base, 2, 0.15, 0.15).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, f.effective_ell(), None).unwrap();
        (proc, f, ledger)
    }

    #[test]
    fn linear_saddle_rates_are_the_eigenvalues() {
        let (proc, f, ledger) = zero_field_setup();
        let cert = saddle_cert();
        let grid = GraphGridSpec::single_time(0.0, 0.5, 5);
        let opts = SolveOptions::default();
        let rate_opts = RateCheckOptions::default();

        let sigma = solve_sigma(&proc, &cert, &f, &ledger, &grid, &opts).unwrap();
        let report = verify_rates(&sigma, &proc, &f, &cert, &ledger, &rate_opts).unwrap();
        assert!(report.all_passed(), "{}", report.summary_text());
        let backward = report.get("on_graph_backward_rate").unwrap();
        assert!((backward.measured - 1.0).abs() < 1e-6);
        let attraction = report.get("attraction_rate").unwrap();
        assert!((attraction.measured - 1.0).abs() < 1e-6);

        let theta = solve_theta(&proc, &cert, &f, &ledger, &grid, &opts).unwrap();
        let report = verify_rates(&theta, &proc, &f, &cert, &ledger, &rate_opts).unwrap();
        assert!(report.all_passed(), "{}", report.summary_text());
        let forward = report.get("on_graph_forward_rate").unwrap();
        assert!((forward.measured - 1.0).abs() < 1e-6);
        let separation = report.get("separation_rate").unwrap();
        assert!((separation.measured + 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_rates_clear_the_ledger_bounds() {
        let (proc, f, ledger) = quadratic_setup();
        let cert = saddle_cert();
        let grid = GraphGridSpec::single_time(0.0, 0.1, 9);
        let opts = SolveOptions::default();
        let rate_opts = RateCheckOptions::default();

        let ell = ledger.ell;
        let kappa = ledger.kappa_chosen;
        let denom = 2.0 - ell * (1.0 + kappa);
        let delta = 1.0 - ell - ell * ell * (1.0 + kappa) * 2.0 / denom;
        assert!((ledger.delta - delta).abs() < 1e-12);

        let sigma = solve_sigma(&proc, &cert, &f, &ledger, &grid, &opts).unwrap();
        let report = verify_rates(&sigma, &proc, &f, &cert, &ledger, &rate_opts).unwrap();
        assert!(report.all_passed(), "{}", report.summary_text());
        let attraction = report.get("attraction_rate").unwrap();
        assert!(attraction.measured >= ledger.delta - 0.05);
        assert!((attraction.measured - 1.0).abs() < 0.05);

        let theta = solve_theta(&proc, &cert, &f, &ledger, &grid, &opts).unwrap();
        let report = verify_rates(&theta, &proc, &f, &cert, &ledger, &rate_opts).unwrap();
        assert!(report.all_passed(), "{}", report.summary_text());
    }

    #[test]
    fn mismatched_budget_is_rejected() {
        let (proc, f, _) = quadratic_setup();
        let cert = saddle_cert();
        let ledger = constants_ledger(1.0, 1.0, -1.0, 0.05, None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.1, 5);
        let sigma_ledger = constants_ledger(1.0, 1.0, -1.0, f.effective_ell(), None).unwrap();
        let sigma = solve_sigma(
            &proc,
            &cert,
            &f,
            &sigma_ledger,
            &grid,
            &SolveOptions::default(),
        )
        .unwrap();
        let err = verify_rates(
            &sigma,
            &proc,
            &f,
            &cert,
            &ledger,
            &RateCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
