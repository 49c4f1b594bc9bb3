//! Nested invariant manifolds inside an unstable manifold.
//!
//! A second splitting whose backward-invertible bundle sits strictly inside
//! the first refines the hierarchy: the coarse manifold contains a fast
//! submanifold tangent to the fine bundle and a slow one tangent to the
//! complementary directions. Trajectories on the coarse manifold that start
//! off the fast submanifold align with the slow one in backward time, and
//! [`tangency_ratio`] measures that alignment as a ratio of distances with a
//! certified exponential bound.

use nalgebra::{DMatrix, DVector};

use crate::dichotomy::{nestedness_check, ProjectionFamily, SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::graph_transform::{
    constants_ledger, reproject_clamped, solve_sigma, solve_theta, ConstantsLedger,
    CutoffNonlinearity, GraphGridSpec, SolveOptions,
};
use crate::numerics::{
    eval_graph, eval_graph_clamped, fmt_float, integrate_dense, linear_fit, operator_norm,
    Generator, GraphField, Nonlinearity, StateVector,
};
use crate::report::{Check, CheckSet};

/// Bundles must agree to this tolerance for the hierarchy to be accepted.
const NESTEDNESS_TOL: f64 = 1e-8;
/// Projection drift across certificate nodes beyond this blocks the reduced
/// construction, which reuses one frame for the whole window.
const FRAME_DRIFT_TOL: f64 = 1e-9;
/// Ledger entries must match their certificate to this relative tolerance.
const LEDGER_TOL: f64 = 1e-12;
/// Sampled fast-manifold points must sit on the coarse manifold this tightly.
const CONTAINMENT_TOL: f64 = 1e-6;

/// Grid specifications for the three graphs of the hierarchy.
///
/// The coarse box must be large enough to hold the coordinates of every
/// sampled fast-manifold point; containment is checked, not clamped.
#[derive(Debug, Clone)]
pub struct NestedGrids {
    /// Grid of the coarse manifold, over the coarse bundle coordinates.
    pub coarse: GraphGridSpec,
    /// Grid of the fast submanifold, over the fine bundle coordinates.
    pub fast: GraphGridSpec,
    /// Grid of the slow submanifold, over the complement of the fine bundle
    /// inside the coarse one.
    pub slow: GraphGridSpec,
}

/// The three graphs of a nested hierarchy with their frames and the
/// backward separation rate.
#[derive(Debug)]
pub struct NestedManifolds {
    w_coarse: GraphField,
    w_fast: GraphField,
    w_slow: GraphField,
    delta_bar: f64,
    m_fine: f64,
    checks: CheckSet,
    frame_coarse: SplitFrame,
    frame_fine: SplitFrame,
    frame_reduced: SplitFrame,
}

impl NestedManifolds {
    /// Graph of the coarse manifold over the coarse bundle.
    pub fn coarse(&self) -> &GraphField {
        &self.w_coarse
    }

    /// Graph of the fast submanifold over the fine bundle.
    pub fn fast(&self) -> &GraphField {
        &self.w_fast
    }

    /// Graph of the slow submanifold, in reduced coordinates on the coarse
    /// bundle.
    pub fn slow(&self) -> &GraphField {
        &self.w_slow
    }

    /// Exponential rate of the backward separation bound.
    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    /// Structural checks recorded during the build.
    pub fn checks(&self) -> &CheckSet {
        &self.checks
    }

    /// Ambient point of the coarse manifold over coarse coordinates `q`.
    pub fn coarse_point(&self, t: f64, q: &[f64]) -> Result<StateVector> {
        let value = eval_graph(&self.w_coarse, t, q)?;
        let qv = DVector::from_column_slice(q);
        StateVector::from_column(self.frame_coarse.lift(t, &qv, &value))
    }

    /// Ambient point of the fast submanifold over fine coordinates `q`.
    pub fn fast_point(&self, t: f64, q: &[f64]) -> Result<StateVector> {
        let value = eval_graph(&self.w_fast, t, q)?;
        let qv = DVector::from_column_slice(q);
        StateVector::from_column(self.frame_fine.lift(t, &qv, &value))
    }

    /// Ambient point of the slow submanifold over the reduced complement
    /// coordinates `p`. The point is assembled inside the coarse bundle and
    /// then lifted through the coarse graph, so it lies on the coarse
    /// manifold by construction.
    pub fn slow_point(&self, t: f64, p: &[f64]) -> Result<StateVector> {
        let value = eval_graph(&self.w_slow, t, p)?;
        let pv = DVector::from_column_slice(p);
        let q_coarse = self.frame_reduced.lift(t, &value, &pv);
        let sigma = eval_graph(&self.w_coarse, t, q_coarse.as_slice())?;
        StateVector::from_column(self.frame_coarse.lift(t, &q_coarse, &sigma))
    }

    fn fast_distance(&self, t: f64, u: &DVector<f64>) -> Result<f64> {
        let q = self.frame_fine.q_coords(t, u);
        let value = eval_graph(&self.w_fast, t, q.as_slice())?;
        Ok((u - self.frame_fine.lift(t, &q, &value)).norm())
    }

    fn slow_distance(&self, t: f64, u: &DVector<f64>) -> Result<f64> {
        let q = self.frame_coarse.q_coords(t, u);
        let p_red = self.frame_reduced.p_coords(t, &q);
        let point = self.slow_point(t, p_red.as_slice())?;
        Ok((u - point.as_vector()).norm())
    }
}

fn require_linear(proc: &Generator, name: &str) -> Result<()> {
    if proc.nonlinearity().is_some() {
        return Err(Error::invalid(format!(
            "{name} must be the linear part only; pass the nonlinearity separately"
        )));
    }
    Ok(())
}

fn check_ledger(
    ledger: &ConstantsLedger,
    cert: &SplittingCertificate,
    ell: f64,
    name: &str,
) -> Result<()> {
    let pairs = [
        ("m", ledger.m, cert.m()),
        ("gamma", ledger.gamma, cert.gamma()),
        ("rho", ledger.rho, cert.rho()),
        ("ell", ledger.ell, ell),
    ];
    for (field, got, want) in pairs {
        if (got - want).abs() > LEDGER_TOL * (1.0 + want.abs()) {
            return Err(Error::invalid(format!(
                "{name} ledger disagrees with its inputs on {field}: ledger {got}, expected {want}"
            )));
        }
    }
    Ok(())
}

/// Largest deviation of the family from its first node, in operator norm.
fn frame_drift(family: &ProjectionFamily) -> f64 {
    let base = &family.matrices()[0];
    family
        .matrices()
        .iter()
        .map(|q| operator_norm(&(q - base)))
        .fold(0.0, f64::max)
}

/// Sup of the coefficient norm over certificate nodes and midpoints.
fn sampled_coefficient_norm(proc: &Generator, cert: &SplittingCertificate) -> f64 {
    let times = cert.projections().times();
    let mut worst: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        worst = worst.max(operator_norm(&proc.matrix_at(t)));
        if i + 1 < times.len() {
            let mid = 0.5 * (t + times[i + 1]);
            worst = worst.max(operator_norm(&proc.matrix_at(mid)));
        }
    }
    worst
}

/// Builds the manifold hierarchy of two nested splittings.
///
/// `coarse` and `fine` certify the same process; the fine bundle must be a
/// proper subbundle of the coarse one (checked), the rate windows must be
/// ordered so the coarse manifold attracts before the fine rates act
/// (`coarse.rho() >= fine.gamma()`), and both ledgers must match their
/// certificates and the truncated nonlinearity `f`.
///
/// The slow graph solves a reduced fixed-point problem in the coarse bundle
/// coordinates, with the full field restricted to the coarse manifold. That
/// step reuses one orthonormal frame across the window, so projections are
/// required to be constant over the certificate nodes.
pub fn build_nested(
    proc: &Generator,
    coarse: &SplittingCertificate,
    fine: &SplittingCertificate,
    f: &CutoffNonlinearity,
    coarse_ledger: &ConstantsLedger,
    fine_ledger: &ConstantsLedger,
    grids: &NestedGrids,
    opts: &SolveOptions,
) -> Result<NestedManifolds> {
    require_linear(proc, "the process generator")?;
    let dim = proc.dim();
    if coarse.dim() != dim || fine.dim() != dim {
        return Err(Error::invalid(format!(
            "dimension mismatch: process {dim}, coarse {}, fine {}",
            coarse.dim(),
            fine.dim()
        )));
    }
    if fine.rank() == 0 || fine.rank() >= coarse.rank() {
        return Err(Error::precondition(format!(
            "the fine bundle must be a proper nonzero subbundle of the coarse one, \
             got ranks {} inside {}",
            fine.rank(),
            coarse.rank()
        )));
    }
    if !(coarse.rho() >= fine.gamma()) {
        return Err(Error::precondition(format!(
            "rate windows must be ordered with coarse rho >= fine gamma, \
             got {} < {}",
            coarse.rho(),
            fine.gamma()
        )));
    }
    let nested = nestedness_check(coarse, fine, NESTEDNESS_TOL)?;
    if !nested.passed {
        return Err(Error::Structural(format!(
            "bundles are not nested: range residual {}, kernel residual {}",
            nested.im_residual, nested.ker_residual
        )));
    }
    let ell = f.effective_ell();
    check_ledger(coarse_ledger, coarse, ell, "coarse")?;
    check_ledger(fine_ledger, fine, ell, "fine")?;
    for (family, name) in [(coarse.projections(), "coarse"), (fine.projections(), "fine")] {
        let drift = frame_drift(family);
        if drift > FRAME_DRIFT_TOL {
            return Err(Error::precondition(format!(
                "the reduced construction needs projections constant over the window; \
                 {name} family drifts by {drift:.3e}"
            )));
        }
    }
    let delta_bar = fine_ledger.delta - fine_ledger.delta_hat;
    if !(delta_bar > 0.0) {
        return Err(Error::precondition(format!(
            "backward separation rate must be positive, got {delta_bar}"
        )));
    }

    let w_coarse = solve_sigma(proc, coarse, f, coarse_ledger, &grids.coarse, opts)?;
    let w_fast = solve_sigma(proc, fine, f, fine_ledger, &grids.fast, opts)?;

    let frame_coarse = SplitFrame::new(coarse.projections())?;
    let frame_fine = SplitFrame::new(fine.projections())?;

    // Reduced system on the coarse bundle coordinates. The frame is constant
    // (gated above), so one basis pair serves the whole window.
    let t_ref = coarse.projections().times()[0];
    let (range_c, kernel_c) = frame_coarse.bases_at(t_ref);
    let rank_c = coarse.rank();

    let reduced_matrix = {
        let range = range_c.clone();
        let lin = proc.clone();
        move |t: f64| range.transpose() * lin.matrix_at(t) * &range
    };
    let proc_red = Generator::time_varying(rank_c, reduced_matrix);

    // Lipschitz budget of the reduced field: the coarse graph contributes
    // kappa through the coefficient, the truncated field its own constant
    // through the lift, which stretches lengths by at most 1 + kappa.
    let kappa_c = coarse_ledger.kappa_chosen;
    let coeff_norm = sampled_coefficient_norm(proc, coarse);
    let ell_red = coeff_norm * kappa_c + ell * (1.0 + kappa_c);

    let reduced_field = {
        let range = range_c.clone();
        let kernel = kernel_c.clone();
        let graph = w_coarse.clone();
        let lin = proc.clone();
        let nl = f.wrapped().clone();
        move |t: f64, q: &DVector<f64>| {
            let sigma = eval_graph_clamped(&graph, t, q.as_slice());
            let u = &range * q + &kernel * sigma;
            let a = lin.matrix_at(t);
            range.transpose() * (&a * &u + nl.eval(t, &u)) - range.transpose() * (&a * (&range * q))
        }
    };
    let nl_red = Nonlinearity::new(reduced_field, ell_red, true);
    let f_red = CutoffNonlinearity::unbounded(&nl_red, ell_red)?;

    let fine_family = fine.projections();
    let reduced_mats: Vec<DMatrix<f64>> = fine_family
        .matrices()
        .iter()
        .map(|q| range_c.transpose() * q * &range_c)
        .collect();
    let family_red = ProjectionFamily::new(fine_family.times().to_vec(), reduced_mats)?;
    let cert_red = SplittingCertificate::new(family_red, fine.m(), fine.gamma(), fine.rho())?;
    let ledger_red = constants_ledger(fine_ledger.m, fine.gamma(), fine.rho(), ell_red, None)?;
    let frame_reduced = SplitFrame::new(cert_red.projections())?;

    let w_slow = solve_theta(&proc_red, &cert_red, &f_red, &ledger_red, &grids.slow, opts)?;

    // Containment: fast-manifold samples must satisfy the coarse graph
    // relation. Axis nodes and one cross corner per time slice.
    let mut containment: f64 = 0.0;
    for &t in w_fast.times() {
        let mut probes: Vec<Vec<f64>> = Vec::new();
        for (k, axis) in w_fast.axes().iter().enumerate() {
            for q1 in [axis.min(), 0.5 * axis.max(), axis.max()] {
                let mut q = vec![0.0; w_fast.axes().len()];
                q[k] = q1;
                probes.push(q);
            }
        }
        probes.push(w_fast.axes().iter().map(|a| 0.7 * a.max()).collect());
        for q in probes {
            let value = eval_graph(&w_fast, t, &q)?;
            let qv = DVector::from_column_slice(&q);
            let u = frame_fine.lift(t, &qv, &value);
            let qc = frame_coarse.q_coords(t, &u);
            let sigma = eval_graph(&w_coarse, t, qc.as_slice())?;
            let pc = frame_coarse.p_coords(t, &u);
            containment = containment.max((pc - sigma).norm());
        }
    }

    let mut checks = CheckSet::new();
    checks.push(Check::upper(
        "nested_range_residual",
        NESTEDNESS_TOL,
        nested.im_residual,
    ));
    checks.push(Check::upper(
        "nested_kernel_residual",
        NESTEDNESS_TOL,
        nested.ker_residual,
    ));
    checks.push(Check::upper("fast_containment", CONTAINMENT_TOL, containment));
    checks.push(Check::lower("backward_separation_rate", 0.0, delta_bar));

    Ok(NestedManifolds {
        w_coarse,
        w_fast,
        w_slow,
        delta_bar,
        m_fine: fine.m(),
        checks,
        frame_coarse,
        frame_fine,
        frame_reduced,
    })
}

/// Options of the backward tangency measurement.
#[derive(Debug, Clone, Copy)]
pub struct TangencyOptions {
    /// Upper bound on the integrator step of the backward flow.
    pub integrator_step: f64,
    /// Relative slack of the exponential ratio bound.
    pub ratio_tol: f64,
    /// The start point may sit off the coarse manifold by this much,
    /// relative to its norm.
    pub on_manifold_tol: f64,
    /// The start point must sit at least this far off the fast submanifold,
    /// relative to its norm.
    pub off_fast_floor: f64,
    /// Fast distances at or below this (relative) floor stop the sweep; the
    /// ratio carries rounding noise beyond it.
    pub denom_floor: f64,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        TangencyOptions {
            integrator_step: 2.5e-3,
            ratio_tol: 0.05,
            on_manifold_tol: 1e-6,
            off_fast_floor: 1e-6,
            denom_floor: 1e-13,
        }
    }
}

/// Backward distance-ratio measurement along a coarse-manifold trajectory.
#[derive(Debug, Clone)]
pub struct TangencyRatio {
    samples: Vec<(f64, f64)>,
    angles: Vec<(f64, f64)>,
    truncated: bool,
    monotone_tail: bool,
    fitted_rate: Option<f64>,
    bound_check: Check,
}

impl TangencyRatio {
    /// Pairs `(tau, ratio)` of pullback time and distance ratio, in the
    /// order requested (decreasing `tau`).
    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Pairs `(tau, angle)` between the pulled-back state and the fine
    /// bundle, in radians. Reported, not certified.
    pub fn angles(&self) -> &[(f64, f64)] {
        &self.angles
    }

    /// True when the sweep stopped early because the fast distance fell to
    /// rounding level.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// True when the ratio is nonincreasing over the later half of the
    /// samples.
    pub fn monotone_tail(&self) -> bool {
        self.monotone_tail
    }

    /// Least-squares decay rate of the ratio against pullback depth, when at
    /// least two positive samples exist.
    pub fn fitted_rate(&self) -> Option<f64> {
        self.fitted_rate
    }

    /// Worst quotient of measured ratio to the certified exponential bound.
    pub fn bound_check(&self) -> &Check {
        &self.bound_check
    }

    /// Two-column text table of the samples.
    pub fn table(&self) -> String {
        let mut out = String::from("tau ratio\n");
        for (tau, r) in &self.samples {
            out.push_str(&fmt_float(*tau));
            out.push(' ');
            out.push_str(&fmt_float(*r));
            out.push('\n');
        }
        out
    }
}

/// Measures how a coarse-manifold trajectory aligns with the slow
/// submanifold in backward time.
///
/// `u0` must lie on the coarse manifold at time `t` and off the fast
/// submanifold. The state is pulled back through the full field with
/// per-step reprojection onto the coarse graph, and at each requested `tau`
/// the ratio of slow distance to fast distance is recorded. The certified
/// bound is `ratio(tau) <= M^2 exp(-delta_bar (t - tau)) ratio(t)` with `M`
/// the fine splitting constant.
pub fn tangency_ratio(
    nested: &NestedManifolds,
    proc: &Generator,
    f: &CutoffNonlinearity,
    u0: &StateVector,
    t: f64,
    taus: &[f64],
    opts: &TangencyOptions,
) -> Result<TangencyRatio> {
    require_linear(proc, "the process generator")?;
    if u0.dim() != proc.dim() {
        return Err(Error::invalid(format!(
            "state dimension {} does not match the process dimension {}",
            u0.dim(),
            proc.dim()
        )));
    }
    if taus.is_empty() {
        return Err(Error::invalid("at least one pullback time is required"));
    }
    if !taus.iter().all(|v| v.is_finite()) || !t.is_finite() {
        return Err(Error::non_finite("pullback times"));
    }
    if taus[0] > t {
        return Err(Error::invalid(format!(
            "pullback times must not exceed the anchor time {t}, got {}",
            taus[0]
        )));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("pullback times must be strictly decreasing"));
    }
    if !(opts.integrator_step > 0.0) {
        return Err(Error::invalid("integrator step must be positive"));
    }

    let u0_vec = u0.as_vector().clone();
    let scale = 1.0 + u0.norm();

    let qc = nested.frame_coarse.q_coords(t, &u0_vec);
    let sigma = eval_graph(&nested.w_coarse, t, qc.as_slice())?;
    let pc = nested.frame_coarse.p_coords(t, &u0_vec);
    let residual = (pc - sigma).norm();
    if residual > opts.on_manifold_tol * scale {
        return Err(Error::precondition(format!(
            "start point sits off the coarse manifold by {residual:.3e}"
        )));
    }
    let d_fast_t = nested.fast_distance(t, &u0_vec)?;
    if d_fast_t <= opts.off_fast_floor * scale {
        return Err(Error::precondition(format!(
            "start point lies on the fast submanifold (distance {d_fast_t:.3e}); \
             the ratio is undefined there"
        )));
    }
    let r_t = nested.slow_distance(t, &u0_vec)? / d_fast_t;

    let lin = proc.clone();
    let nl = f.wrapped().clone();
    let field = move |s: f64, u: &DVector<f64>| lin.matrix_at(s) * u + nl.eval(s, u);
    let frame = &nested.frame_coarse;
    let graph = &nested.w_coarse;
    let post = |s: f64, u: DVector<f64>| reproject_clamped(graph, frame, s, u);

    let tau_last = *taus.last().expect("taus checked nonempty");
    let span = t - tau_last;
    if !(span > 0.0) {
        return Err(Error::invalid(
            "the last pullback time must lie strictly before the anchor time",
        ));
    }
    let n_steps = ((span / opts.integrator_step).ceil() as usize).max(16);
    let ceiling = 1e6 * scale;
    let track = integrate_dense(&field, t, tau_last, u0_vec, n_steps, post, ceiling)?;

    let mut samples = Vec::with_capacity(taus.len());
    let mut angles = Vec::with_capacity(taus.len());
    let mut truncated = false;
    for &tau in taus {
        let u = track.eval(tau);
        let d_fast = nested.fast_distance(tau, &u)?;
        if d_fast <= opts.denom_floor * (1.0 + u.norm()) {
            truncated = true;
            break;
        }
        let d_slow = nested.slow_distance(tau, &u)?;
        samples.push((tau, d_slow / d_fast));
        let norm = u.norm();
        if norm > opts.denom_floor {
            let (range_f, _) = nested.frame_fine.bases_at(tau);
            let off = &u - &range_f * (range_f.transpose() * &u);
            let sin = (off.norm() / norm).min(1.0);
            angles.push((tau, sin.asin()));
        }
    }
    if samples.is_empty() {
        return Err(Error::precondition(
            "every requested pullback time fell below the fast-distance floor",
        ));
    }

    let m2 = nested.m_fine * nested.m_fine;
    let mut worst: f64 = 0.0;
    for &(tau, r) in &samples {
        let bound = m2 * (-nested.delta_bar * (t - tau)).exp() * r_t;
        worst = worst.max(r / bound);
    }
    let bound_check = Check::upper("ratio_bound", 1.0 + opts.ratio_tol, worst);

    let half = samples.len() / 2;
    let monotone_tail = samples[half..]
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9));

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(tau, r) in &samples {
        if r > 1e-300 {
            xs.push(t - tau);
            ys.push(r.ln());
        }
    }
    let fitted_rate = if xs.len() >= 2 && xs.first() != xs.last() {
        Some(-linear_fit(&xs, &ys).0)
    } else {
        None
    };

    Ok(TangencyRatio {
        samples,
        angles,
        truncated,
        monotone_tail,
        fitted_rate,
        bound_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn diag_process() -> Generator {
        Generator::constant(DMatrix::from_diagonal(&dvector![2.0, 1.0, -1.0]))
    }

    fn coarse_cert() -> SplittingCertificate {
        let q = DMatrix::from_diagonal(&dvector![1.0, 1.0, 0.0]);
        let family = ProjectionFamily::constant(q, -2.0, 2.0).unwrap();
        SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap()
    }

    fn fine_cert(gamma: f64, rho: f64) -> SplittingCertificate {
        let q = DMatrix::from_diagonal(&dvector![1.0, 0.0, 0.0]);
        let family = ProjectionFamily::constant(q, -2.0, 2.0).unwrap();
        SplittingCertificate::new(family, 1.0, gamma, rho).unwrap()
    }

    fn zero_field(dim: usize) -> CutoffNonlinearity {
        let nl = Nonlinearity::autonomous(move |_u| DVector::zeros(dim), 0.0, true);
        CutoffNonlinearity::unbounded(&nl, 0.0).unwrap()
    }

    fn linear_grids() -> NestedGrids {
        NestedGrids {
            coarse: GraphGridSpec::single_time(0.0, 1.6, 5),
            fast: GraphGridSpec::single_time(0.0, 1.3, 5),
            slow: GraphGridSpec::single_time(0.0, 1.3, 5),
        }
    }

    fn linear_ledgers() -> (ConstantsLedger, ConstantsLedger) {
        (
            constants_ledger(1.0, 1.0, -1.0, 0.0, None).unwrap(),
            constants_ledger(1.0, -1.0, -2.0, 0.0, None).unwrap(),
        )
    }

    fn build_linear() -> NestedManifolds {
        let (cl, fl) = linear_ledgers();
        build_nested(
            &diag_process(),
            &coarse_cert(),
            &fine_cert(-1.0, -2.0),
            &zero_field(3),
            &cl,
            &fl,
            &linear_grids(),
            &SolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn trivial_diagonal_splits_into_axes() {
        let nested = build_linear();
        assert!((nested.delta_bar() - 1.0).abs() <= 1e-12);
        assert!(nested.checks().all_passed(), "{}", nested.checks().summary_text());

        let fast = nested.fast_point(0.0, &[0.7]).unwrap();
        assert!(fast.as_vector()[0].abs() - 0.7 <= 1e-9);
        assert!(fast.as_vector()[1].abs() <= 1e-9);
        assert!(fast.as_vector()[2].abs() <= 1e-9);

        let slow = nested.slow_point(0.0, &[0.5]).unwrap();
        assert!((slow.as_vector()[1].abs() - 0.5).abs() <= 1e-9);
        assert!(slow.as_vector()[0].abs() <= 1e-9);
        assert!(slow.as_vector()[2].abs() <= 1e-9);

        let theta = eval_graph(nested.slow(), 0.0, &[0.3]).unwrap();
        assert!(theta.norm() <= 1e-10);

        let coarse = nested.coarse_point(0.0, &[0.4, -0.2]).unwrap();
        assert!(coarse.as_vector()[2].abs() <= 1e-10);
        assert!((coarse.norm() - (0.4f64.powi(2) + 0.2f64.powi(2)).sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (cl, fl) = linear_ledgers();
        let grids = linear_grids();
        let opts = SolveOptions::default();
        let f = zero_field(3);

        // Certificates swapped: the rank ordering gate fires.
        let err = build_nested(
            &diag_process(),
            &fine_cert(-1.0, -2.0),
            &coarse_cert(),
            &f,
            &fl,
            &cl,
            &grids,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");

        // Rate windows out of order: coarse rho < fine gamma.
        let fl_wide = constants_ledger(1.0, -0.5, -2.0, 0.0, None).unwrap();
        let err = build_nested(
            &diag_process(),
            &coarse_cert(),
            &fine_cert(-0.5, -2.0),
            &f,
            &cl,
            &fl_wide,
            &grids,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");

        // Ledger built for a different Lipschitz budget.
        let fl_off = constants_ledger(1.0, -1.0, -2.0, 0.1, None).unwrap();
        let err = build_nested(
            &diag_process(),
            &coarse_cert(),
            &fine_cert(-1.0, -2.0),
            &f,
            &cl,
            &fl_off,
            &grids,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");

        // Process dimension disagrees with the certificates.
        let small = Generator::constant(DMatrix::from_diagonal(&dvector![2.0, -1.0]));
        let err = build_nested(
            &small,
            &coarse_cert(),
            &fine_cert(-1.0, -2.0),
            &f,
            &cl,
            &fl,
            &grids,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }

    #[test]
    fn drifting_projections_block_the_reduced_solve() {
        // Rank-two projector rotated in the (e2, e3) plane: idempotent at
        // every node, but the frame moves, so the gate must fire.
        let times: Vec<f64> = vec![-2.0, 0.0, 2.0];
        let mats: Vec<DMatrix<f64>> = times
            .iter()
            .map(|&t| {
                let a = 0.01 * t;
                let mut rot = DMatrix::identity(3, 3);
                rot[(1, 1)] = a.cos();
                rot[(1, 2)] = -a.sin();
                rot[(2, 1)] = a.sin();
                rot[(2, 2)] = a.cos();
                let d = DMatrix::from_diagonal(&dvector![1.0, 1.0, 0.0]);
                &rot * d * rot.transpose()
            })
            .collect();
        let family = ProjectionFamily::new(times, mats).unwrap();
        let coarse = SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap();
        let fine_family =
            ProjectionFamily::new(vec![-2.0, 0.0, 2.0], vec![
                DMatrix::from_diagonal(&dvector![1.0, 0.0, 0.0]); 3
            ])
            .unwrap();
        let fine = SplittingCertificate::new(fine_family, 1.0, -1.0, -2.0).unwrap();
        let (cl, fl) = linear_ledgers();
        let err = build_nested(
            &diag_process(),
            &coarse,
            &fine,
            &zero_field(3),
            &cl,
            &fl,
            &linear_grids(),
            &SolveOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
        let msg = err.to_string();
        assert!(msg.contains("constant over the window"), "{msg}");
    }

    #[test]
    fn linear_ratio_decays_at_the_spectral_gap() {
        let nested = build_linear();
        let proc = diag_process();
        let f = zero_field(3);
        let u0 = StateVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        let taus: Vec<f64> = (1..=8).map(|k| -0.5 * k as f64).collect();
        let out = tangency_ratio(
            &nested,
            &proc,
            &f,
            &u0,
            0.0,
            &taus,
            &TangencyOptions::default(),
        )
        .unwrap();

        assert!(!out.truncated());
        assert!(out.monotone_tail());
        assert_eq!(out.samples().len(), taus.len());
        for &(tau, r) in out.samples() {
            let exact = tau.exp();
            assert!(
                (r - exact).abs() <= 1e-6 * exact,
                "ratio at {tau}: {r} vs {exact}"
            );
        }
        let rate = out.fitted_rate().unwrap();
        assert!((rate - 1.0).abs() <= 1e-6, "fitted rate {rate}");
        assert!(out.bound_check().passed(), "{}", out.bound_check().summary_line());

        // The pulled-back direction leaves the fine bundle: angles grow
        // toward a right angle.
        let first = out.angles().first().unwrap().1;
        let last = out.angles().last().unwrap().1;
        assert!(last > first);
        assert!(last > 1.5);

        let table = out.table();
        assert_eq!(table.lines().count(), taus.len() + 1);
        assert!(table.starts_with("tau ratio\n"));
    }

    #[test]
    fn rounding_floor_truncates_the_sweep() {
        let nested = build_linear();
        let proc = diag_process();
        let f = zero_field(3);
        let u0 = StateVector::new(vec![1.0, 1e-3, 0.0]).unwrap();
        let taus: Vec<f64> = (1..=26).map(|k| -(k as f64)).collect();
        let out = tangency_ratio(
            &nested,
            &proc,
            &f,
            &u0,
            0.0,
            &taus,
            &TangencyOptions::default(),
        )
        .unwrap();
        assert!(out.truncated());
        assert!(out.samples().len() >= 5);
        assert!(out.samples().len() < taus.len());
    }

    #[test]
    fn start_points_violating_the_preconditions_are_rejected() {
        let nested = build_linear();
        let proc = diag_process();
        let f = zero_field(3);
        let opts = TangencyOptions::default();
        let taus = [-1.0, -2.0];

        let on_fast = StateVector::new(vec![0.8, 0.0, 0.0]).unwrap();
        let err = tangency_ratio(&nested, &proc, &f, &on_fast, 0.0, &taus, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");

        let off_manifold = StateVector::new(vec![0.5, 0.5, 0.4]).unwrap();
        let err =
            tangency_ratio(&nested, &proc, &f, &off_manifold, 0.0, &taus, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");

        let fine_pt = StateVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        let err =
            tangency_ratio(&nested, &proc, &f, &fine_pt, 0.0, &[-1.0, -0.5], &opts).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
        let err = tangency_ratio(&nested, &proc, &f, &fine_pt, 0.0, &[0.5], &opts).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }

    #[test]
    fn cubic_coupling_matches_the_series_coefficient() {
        let eps = 0.01;
        let raw = Nonlinearity::autonomous(
            move |u: &DVector<f64>| dvector![0.0, 0.0, eps * u[0].powi(3)],
            3.0 * eps * 0.25 * 0.25,
            true,
        );
        let f = crate::graph_transform::cutoff(&raw, 3, 0.2, 0.05).unwrap();
        let ell = f.effective_ell();
        let cl = constants_ledger(1.0, 1.0, -1.0, ell, None).unwrap();
        let fl = constants_ledger(1.0, -1.0, -2.0, ell, None).unwrap();
        let grids = NestedGrids {
            coarse: GraphGridSpec::single_time(0.0, 0.12, 9),
            fast: GraphGridSpec::single_time(0.0, 0.1, 33),
            slow: GraphGridSpec::single_time(0.0, 0.08, 5),
        };
        let nested = build_nested(
            &diag_process(),
            &coarse_cert(),
            &fine_cert(-1.0, -2.0),
            &f,
            &cl,
            &fl,
            &grids,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(nested.checks().all_passed(), "{}", nested.checks().summary_text());

        // Backward separation rate against its closed form.
        let kappa = fl.kappa_chosen;
        let gap = 1.0;
        let combined = gap
            - 2.0 * ell
            - 2.0 * ell * ell * (1.0 + kappa) * 2.0 / (gap - ell * (1.0 + kappa));
        assert!((nested.delta_bar() - combined).abs() <= 1e-12 * (1.0 + combined.abs()));

        // Fast graph: on the invariant curve the third component balances
        // the linear decay against the cubic forcing, value (eps / 7) q^3.
        let q: f64 = 0.075;
        let expected = eps / 7.0 * q.powi(3);
        let fast = nested.fast_point(0.0, &[q]).unwrap();
        assert!(fast.as_vector()[1].abs() <= 1e-8);
        let got = fast.as_vector()[2];
        assert!(
            (got - expected).abs() <= 0.02 * expected.abs(),
            "fast value {got} vs {expected}"
        );

        // The middle axis is invariant, so the slow graph vanishes.
        let slow = nested.slow_point(0.0, &[0.06]).unwrap();
        assert!((slow.as_vector()[1].abs() - 0.06).abs() <= 1e-8);
        assert!(slow.as_vector()[0].abs() <= 1e-8);
        assert!(slow.as_vector()[2].abs() <= 1e-8);

        // Tangency sweep from a coarse-manifold point with both components.
        let u0 = nested.coarse_point(0.0, &[0.07, 0.05]).unwrap();
        let taus: Vec<f64> = (1..=8).map(|k| -0.5 * k as f64).collect();
        let out = tangency_ratio(
            &nested,
            &diag_process(),
            &f,
            &u0,
            0.0,
            &taus,
            &TangencyOptions::default(),
        )
        .unwrap();
        assert!(out.bound_check().passed(), "{}", out.bound_check().summary_line());
        assert!(out.monotone_tail());
        let rate = out.fitted_rate().unwrap();
        assert!(
            rate >= 0.9 * nested.delta_bar(),
            "fitted rate {rate} vs floor {}",
            0.9 * nested.delta_bar()
        );
    }
}
