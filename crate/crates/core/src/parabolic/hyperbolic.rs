//! Hyperbolic global solutions of the compartment limit.
//!
//! At the symmetric interface the compartment system preserves two lines,
//! equal values on both sides and opposite ones, and restricts to a scalar
//! non-autonomous equation on each. Pullback integration from deep negative
//! times locates the unique bounded solution branch per line and sign; the
//! linearized flow along each branch is then certified by an exponential
//! splitting with the expected number of unstable directions.

use nalgebra::{DMatrix, DVector};

use crate::dichotomy::{
    estimate_splitting, verify_splitting, SplittingCertificate, VerifyReport,
};
use crate::error::{Error, Result};
use crate::numerics::{fmt_float, integrate_dense, Generator, HermiteTrack, TimeGrid};
use crate::report::{Check, CheckSet};

use super::reduce::ReducedSystem;

/// Integration step of the pullback sweeps and the stored tracks.
const SWEEP_STEP: f64 = 2e-3;
/// Relative Cauchy tolerance on the time-zero sample across depth doublings.
const PULLBACK_TOL: f64 = 1e-8;
/// Solutions closer to zero than this anywhere on the stored span are not
/// bounded away from the trivial branch.
const MARGIN_FLOOR: f64 = 1e-3;
/// Earliest stored time; deeper history only feeds the pullback limit.
const KEEP_DEPTH: f64 = 16.0;
/// Sliding-window length of the splitting estimate, per expected gap.
const WINDOW_NODE: f64 = 4.0;
const WINDOW_SADDLE: f64 = 10.0;
/// Decay-rate margin demanded of a certified solution.
const RATE_MARGIN: f64 = 0.05;

/// Invariant line of the symmetric compartment system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantLine {
    /// Equal compartment values; the scalar reaction undisturbed.
    Diagonal,
    /// Opposite compartment values; the coupling shifts the linear term.
    AntiDiagonal,
}

impl InvariantLine {
    /// Stable lowercase name for reports.
    pub fn label(self) -> &'static str {
        match self {
            InvariantLine::Diagonal => "diagonal",
            InvariantLine::AntiDiagonal => "antidiagonal",
        }
    }
}

/// One bounded global solution located by pullback integration.
#[derive(Debug, Clone)]
pub struct HyperbolicCandidate {
    line: InvariantLine,
    sign: f64,
    track: HermiteTrack,
    depth: f64,
    cauchy_residual: f64,
    margin: f64,
}

impl HyperbolicCandidate {
    /// Which invariant line carries the solution.
    pub fn line(&self) -> InvariantLine {
        self.line
    }

    /// Sign of the branch at time zero.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Stored trajectory; evaluation clamps to the stored span.
    pub fn track(&self) -> &HermiteTrack {
        &self.track
    }

    /// Compartment values at time `t`.
    pub fn z_at(&self, t: f64) -> (f64, f64) {
        let z = self.track.eval(t);
        (z[0], z[1])
    }

    /// Pullback depth at which the Cauchy test converged.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Final Cauchy residual of the depth-doubling test.
    pub fn cauchy_residual(&self) -> f64 {
        self.cauchy_residual
    }

    /// Smallest compartment magnitude over the stored span.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `t z1 z2` table sampled every `step` time units.
    pub fn table(&self, step: f64) -> String {
        let (lo, hi) = self.track.span();
        let mut out = String::from("t z1 z2\n");
        let n = ((hi - lo) / step).ceil() as usize;
        for i in 0..=n {
            let t = (lo + i as f64 * step).min(hi);
            let (z1, z2) = self.z_at(t);
            out.push_str(&format!(
                "{} {} {}\n",
                fmt_float(t),
                fmt_float(z1),
                fmt_float(z2)
            ));
        }
        out
    }
}

/// Plain fourth-order sweep of a scalar field, final value only.
fn scalar_sweep(g: impl Fn(f64, f64) -> f64, t0: f64, t1: f64, x0: f64) -> f64 {
    let n: usize = (((t1 - t0) / SWEEP_STEP).ceil() as usize).max(1);
    let h = (t1 - t0) / n as f64;
    let mut x = x0;
    let mut t = t0;
    for _ in 0..n {
        let k1 = g(t, x);
        let k2 = g(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = g(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = g(t + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// Locates the four bounded global solutions of the symmetric compartment
/// system, two per invariant line, by pullback integration with depth
/// doubling.
///
/// The reaction range must stay inside `[1, 2]`; branches that converge
/// toward zero fail the separation margin and are reported as errors, which
/// is how a coupling outside the bistable regime shows up.
pub fn find_hyperbolic_solutions(
    z_system: &ReducedSystem,
    horizon: f64,
    max_depth: f64,
) -> Result<Vec<HyperbolicCandidate>> {
    let (a1, a2) = z_system
        .coupling()
        .ok_or_else(|| Error::invalid("pullback search needs the compartment variant"))?;
    if (a1 - a2).abs() > 1e-12 * (1.0 + a1.abs()) {
        return Err(Error::precondition(
            "compartment couplings differ: the interface must sit at the midpoint",
        ));
    }
    let beta = z_system.beta().clone();
    if beta.lo() < 1.0 - 1e-9 || beta.hi() > 2.0 + 1e-9 {
        return Err(Error::precondition(format!(
            "reaction range [{}, {}] leaves the certified band [1, 2]",
            beta.lo(),
            beta.hi()
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !(max_depth >= 8.0) || !max_depth.is_finite() {
        return Err(Error::invalid("pullback depth budget must be at least 8"));
    }

    let mut out = Vec::with_capacity(4);
    for line in [InvariantLine::Diagonal, InvariantLine::AntiDiagonal] {
        let shift = match line {
            InvariantLine::Diagonal => 0.0,
            InvariantLine::AntiDiagonal => 2.0 * a1,
        };
        let g = {
            let beta = beta.clone();
            move |t: f64, x: f64| (1.0 - shift) * x - beta.eval(t) * x.powi(3)
        };
        let seed = match line {
            InvariantLine::Diagonal => 1.0,
            InvariantLine::AntiDiagonal => 0.5,
        };
        let mut pair = Vec::with_capacity(2);
        for sign in [1.0, -1.0] {
            let mut depth = 8.0;
            let mut prev: Option<f64> = None;
            let mut residual = f64::INFINITY;
            let converged = loop {
                let x0 = scalar_sweep(&g, -depth, 0.0, sign * seed);
                if let Some(p) = prev {
                    residual = (x0 - p).abs() / (1.0 + x0.abs());
                    if residual <= PULLBACK_TOL {
                        break true;
                    }
                }
                prev = Some(x0);
                depth *= 2.0;
                if depth > max_depth {
                    break false;
                }
            };
            if !converged {
                return Err(Error::PullbackNotConverged {
                    residual,
                    depth: depth / 2.0,
                });
            }

            let t_keep = -KEEP_DEPTH.min(depth);
            let x_keep = scalar_sweep(&g, -depth, t_keep, sign * seed);
            let z0 = match line {
                InvariantLine::Diagonal => DVector::from_vec(vec![x_keep, x_keep]),
                InvariantLine::AntiDiagonal => DVector::from_vec(vec![x_keep, -x_keep]),
            };
            let field = {
                let beta = beta.clone();
                move |t: f64, z: &DVector<f64>| {
                    let b = beta.eval(t);
                    let jump = z[1] - z[0];
                    DVector::from_vec(vec![
                        a1 * jump + z[0] - b * z[0].powi(3),
                        -a2 * jump + z[1] - b * z[1].powi(3),
                    ])
                }
            };
            let n_steps = (((horizon - t_keep) / SWEEP_STEP).ceil() as usize).max(1);
            let track =
                integrate_dense(field, t_keep, horizon, z0, n_steps, |_, y| y, 1e8)?;
            let margin = (0..=n_steps)
                .map(|i| {
                    let t = t_keep + (horizon - t_keep) * i as f64 / n_steps as f64;
                    let z = track.eval(t);
                    z[0].abs().min(z[1].abs())
                })
                .fold(f64::INFINITY, f64::min);
            if margin < MARGIN_FLOOR {
                return Err(Error::Structural(format!(
                    "{} branch collapses toward zero: separation margin {margin:.3e}",
                    line.label()
                )));
            }
            pair.push(HyperbolicCandidate {
                line,
                sign,
                track,
                depth,
                cauchy_residual: residual,
                margin,
            });
        }
        let gap = (pair[0].z_at(0.0).0 - pair[1].z_at(0.0).0).abs();
        if gap <= 1e-6 {
            return Err(Error::Structural(format!(
                "fewer than 4 distinct candidates: {} branches coincide at time zero",
                line.label()
            )));
        }
        out.extend(pair);
    }
    Ok(out)
}

/// Splitting certification of one candidate's linearized flow.
#[derive(Debug)]
pub struct HyperbolicityReport {
    line: InvariantLine,
    rank: usize,
    certificate: Option<SplittingCertificate>,
    verify: Option<VerifyReport>,
    checks: CheckSet,
}

impl HyperbolicityReport {
    /// Line of the candidate the report certifies.
    pub fn line(&self) -> InvariantLine {
        self.line
    }

    /// Number of unstable directions demanded of the splitting.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The certificate, absent when no split spectrum was found.
    pub fn certificate(&self) -> Option<&SplittingCertificate> {
        self.certificate.as_ref()
    }

    /// The independent bound verification, absent without a certificate.
    pub fn verify(&self) -> Option<&VerifyReport> {
        self.verify.as_ref()
    }

    /// All inequality checks behind the verdict.
    pub fn checks(&self) -> &CheckSet {
        &self.checks
    }

    /// Whether the candidate certified as hyperbolic.
    pub fn hyperbolic(&self) -> bool {
        self.certificate.is_some() && self.checks.all_passed()
    }

    /// Summary block: one line of rates, then the check records.
    pub fn to_text(&self) -> String {
        let mut out = format!("line={} rank={}\n", self.line.label(), self.rank);
        if let Some(cert) = &self.certificate {
            out.push_str(&format!(
                "m={} gamma={} rho={}\n",
                fmt_float(cert.m()),
                fmt_float(cert.gamma()),
                fmt_float(cert.rho())
            ));
        } else {
            out.push_str("no certificate\n");
        }
        out.push_str(&self.checks.summary_text());
        out
    }
}

/// Certifies hyperbolicity of a candidate by an exponential splitting of the
/// exact linearization along its trajectory.
///
/// The expected unstable rank comes from the line: the diagonal branches are
/// stable nodes, the antidiagonal ones carry one unstable transverse
/// direction. A degenerate or unsplit spectrum is not an error; it returns a
/// report whose checks fail.
pub fn verify_hyperbolicity(
    candidate: &HyperbolicCandidate,
    z_system: &ReducedSystem,
    window: (f64, f64),
) -> Result<HyperbolicityReport> {
    let (a1, a2) = z_system
        .coupling()
        .ok_or_else(|| Error::invalid("certification needs the compartment variant"))?;
    let (rank, svd_window) = match candidate.line() {
        InvariantLine::Diagonal => (0, WINDOW_NODE),
        InvariantLine::AntiDiagonal => (1, WINDOW_SADDLE),
    };
    let (lo, hi) = candidate.track().span();
    if !(window.0 < window.1) {
        return Err(Error::invalid("verification window must be increasing"));
    }
    if window.0 - svd_window < lo || window.1 + svd_window > hi {
        return Err(Error::invalid(format!(
            "window [{}, {}] plus the {svd_window}-wide estimate leaves the stored span \
             [{lo}, {hi}]",
            window.0, window.1
        )));
    }

    let gen = {
        let track = candidate.track().clone();
        let beta = z_system.beta().clone();
        Generator::time_varying(2, move |t| {
            let z = track.eval(t);
            let b = beta.eval(t);
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    -a1 + 1.0 - 3.0 * b * z[0] * z[0],
                    a1,
                    a2,
                    -a2 + 1.0 - 3.0 * b * z[1] * z[1],
                ],
            )
        })
    };
    let n_steps = (((window.1 - window.0) / 0.5).ceil() as usize).max(8);
    let grid = TimeGrid::new(window.0, window.1, n_steps)?;
    let cert = match estimate_splitting(&gen, rank, svd_window, &grid) {
        Ok(cert) => cert,
        Err(Error::DegenerateGap { .. })
        | Err(Error::Structural(_))
        | Err(Error::GapCondition { .. }) => {
            let mut checks = CheckSet::new();
            checks.push(Check::lower("decay_rate_margin", RATE_MARGIN, -1.0));
            return Ok(HyperbolicityReport {
                line: candidate.line(),
                rank,
                certificate: None,
                verify: None,
                checks,
            });
        }
        Err(e) => return Err(e),
    };
    let verify = verify_splitting(&gen, &cert, 8);

    let mut checks = CheckSet::new();
    checks.push(Check::lower("decay_rate_margin", RATE_MARGIN, cert.gamma()));
    if rank > 0 {
        checks.push(Check::upper("unstable_backward_rate", 0.0, cert.rho()));
    }
    checks.push(Check::upper(
        "backward_bound_ratio",
        1.0 + verify.ratio_tol,
        verify.worst_backward_ratio,
    ));
    checks.push(Check::upper(
        "forward_bound_ratio",
        1.0 + verify.ratio_tol,
        verify.worst_forward_ratio,
    ));
    checks.push(Check::upper(
        "projector_commutation",
        verify.commutation_tol,
        verify.worst_commutation,
    ));
    Ok(HyperbolicityReport {
        line: candidate.line(),
        rank,
        certificate: Some(cert),
        verify: Some(verify),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::reduce::{limiting_systems, BetaProfile, LimitingPair};

    fn autonomous_pair() -> LimitingPair {
        limiting_systems(0.5, 1.0, 2.4, BetaProfile::constant(1.0).unwrap()).unwrap()
    }

    #[test]
    fn constant_reaction_recovers_the_equilibria() {
        let pair = autonomous_pair();
        let found = find_hyperbolic_solutions(&pair.z, 42.0, 256.0).unwrap();
        assert_eq!(found.len(), 4);
        let a = pair.z.coupling().unwrap().0;
        let c = (1.0 - 2.0 * a).sqrt();
        let expected = [(1.0, 1.0), (-1.0, -1.0), (c, -c), (-c, c)];
        for (cand, want) in found.iter().zip(expected) {
            let (z1, z2) = cand.z_at(0.0);
            assert!(
                (z1 - want.0).abs() <= 1e-8 && (z2 - want.1).abs() <= 1e-8,
                "{:?} sign {}: ({z1}, {z2}) vs {want:?}",
                cand.line(),
                cand.sign()
            );
            assert!(cand.margin() >= 0.4);
            assert!(cand.cauchy_residual() <= 1e-8);
        }
        assert_eq!(found[0].line(), InvariantLine::Diagonal);
        assert_eq!(found[2].line(), InvariantLine::AntiDiagonal);
    }

    #[test]
    fn constant_reaction_certificates_match_the_linearization() {
        let pair = autonomous_pair();
        let found = find_hyperbolic_solutions(&pair.z, 42.0, 256.0).unwrap();
        let a = pair.z.coupling().unwrap().0;

        // Stable node: both linearized rates negative, certificate sees the
        // slowest one.
        let node = verify_hyperbolicity(&found[0], &pair.z, (5.0, 30.0)).unwrap();
        assert_eq!(node.rank(), 0);
        assert!(node.hyperbolic(), "{}", node.to_text());
        let gamma = node.certificate().unwrap().gamma();
        assert!((gamma - 2.0).abs() <= 0.05 * 2.0, "gamma = {gamma}");

        // Saddle: one unstable transverse direction with rate 6a - 2, decay
        // along the line at 2 - 4a.
        let saddle = verify_hyperbolicity(&found[2], &pair.z, (5.0, 30.0)).unwrap();
        assert_eq!(saddle.rank(), 1);
        assert!(saddle.hyperbolic(), "{}", saddle.to_text());
        let cert = saddle.certificate().unwrap();
        let unstable = -cert.rho();
        let stable = cert.gamma();
        assert!(
            (unstable - (6.0 * a - 2.0)).abs() <= 0.05 * (6.0 * a - 2.0),
            "unstable rate {unstable}"
        );
        assert!(
            (stable - (2.0 - 4.0 * a)).abs() <= 0.05 * (2.0 - 4.0 * a),
            "stable rate {stable}"
        );
    }

    #[test]
    fn periodic_reaction_certifies_four_global_solutions() {
        let pair =
            limiting_systems(0.5, 1.0, 2.4, BetaProfile::sinusoidal(1.5, 0.5).unwrap()).unwrap();
        let found = find_hyperbolic_solutions(&pair.z, 42.0, 256.0).unwrap();
        assert_eq!(found.len(), 4);
        // Scalar comparison band on the equal-values line for reactions
        // between 1 and 2.
        for cand in found.iter().filter(|c| c.line() == InvariantLine::Diagonal) {
            for i in 0..=300 {
                let t = 0.1 * i as f64;
                let (z1, _) = cand.z_at(t);
                let m = z1.abs();
                assert!(
                    (1.0 / 2.0f64.sqrt() - 1e-6..=1.0 + 1e-6).contains(&m),
                    "|z| = {m} at t = {t}"
                );
            }
        }
        for cand in &found {
            let report = verify_hyperbolicity(cand, &pair.z, (5.0, 30.0)).unwrap();
            assert!(report.hyperbolic(), "{}", report.to_text());
            if cand.line() == InvariantLine::Diagonal {
                let gamma = report.certificate().unwrap().gamma();
                assert!((1.5..=3.0).contains(&gamma), "gamma = {gamma}");
            }
        }
        // Sign symmetry of the cubic conjugates the two branches of a line.
        for k in [0, 2] {
            for i in 0..=40 {
                let t = -10.0 + i as f64;
                let (p1, p2) = found[k].z_at(t);
                let (m1, m2) = found[k + 1].z_at(t);
                assert!((p1 + m1).abs() <= 1e-10 && (p2 + m2).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn out_of_regime_coupling_collapses_the_transverse_branch() {
        let pair =
            limiting_systems(0.5, 1.2, 2.0, BetaProfile::constant(1.0).unwrap()).unwrap();
        let err = find_hyperbolic_solutions(&pair.z, 20.0, 256.0).unwrap_err();
        match err {
            Error::Structural(msg) => assert!(msg.contains("antidiagonal"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn exhausted_depth_budget_is_reported() {
        let pair = autonomous_pair();
        let err = find_hyperbolic_solutions(&pair.z, 20.0, 16.0).unwrap_err();
        assert!(matches!(err, Error::PullbackNotConverged { .. }), "{err}");
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let pair = autonomous_pair();
        let err = find_hyperbolic_solutions(&pair.uv, 20.0, 64.0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
        let wide = limiting_systems(
            0.5,
            1.0,
            2.4,
            BetaProfile::sinusoidal(2.0, 0.5).unwrap(),
        )
        .unwrap();
        let err = find_hyperbolic_solutions(&wide.z, 20.0, 64.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
        let skew = limiting_systems(0.4, 1.0, 2.4, BetaProfile::constant(1.0).unwrap()).unwrap();
        let err = find_hyperbolic_solutions(&skew.z, 20.0, 64.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");

        let found = find_hyperbolic_solutions(&pair.z, 42.0, 256.0).unwrap();
        let err = verify_hyperbolicity(&found[0], &pair.z, (5.0, 41.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }
}
