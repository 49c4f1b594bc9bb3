//! Certificate verification against sampled propagator norms.

use crate::dichotomy::estimate::{backward_restricted_matrix, window_matrix};
use crate::dichotomy::SplittingCertificate;
use crate::error::{Error, Result};
use crate::numerics::{operator_norm, Generator};

/// Sampling plan and tolerances for [`verify_splitting_with`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Number of time offsets sampled on each side.
    pub samples: usize,
    /// Accepted excess over 1 in the worst norm ratio.
    pub ratio_tol: f64,
    /// Accepted commutation residual.
    pub commutation_tol: f64,
    /// Integrator step for the sampled propagators.
    pub integrator_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 8,
            ratio_tol: 0.05,
            commutation_tol: 1e-6,
            integrator_step: 0.01,
        }
    }
}

/// Outcome of a splitting verification. Always produced; `passed` carries the
/// verdict.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    /// Worst `||L(t, tau) Q(tau)|| e^{rho (tau - t)} / M` over backward samples.
    pub worst_backward_ratio: f64,
    /// Worst `||L(t, tau) (I - Q(tau))|| e^{gamma (t - tau)} / M` over forward samples.
    pub worst_forward_ratio: f64,
    /// Worst `||Q(t) L(t, tau) - L(t, tau) Q(tau)||` over forward samples.
    pub worst_commutation: f64,
    /// Ratio tolerance the verdict used.
    pub ratio_tol: f64,
    /// Commutation tolerance the verdict used.
    pub commutation_tol: f64,
    /// Whether every sampled bound held.
    pub passed: bool,
}

/// Verifies a splitting certificate with the default plan.
pub fn verify_splitting(
    gen: &Generator,
    cert: &SplittingCertificate,
    samples: usize,
) -> VerifyReport {
    let opts = VerifyOptions {
        samples,
        ..VerifyOptions::default()
    };
    verify_splitting_with(gen, cert, &opts)
}

/// Verifies the claimed bounds of `cert` against the linear part of `gen`.
///
/// Sample pairs stay inside the certificate's node span: offsets run up to
/// half the span, base times over all nodes that keep `t` inside. The report
/// never errors; a violated bound shows up as `passed = false`.
pub fn verify_splitting_with(
    gen: &Generator,
    cert: &SplittingCertificate,
    opts: &VerifyOptions,
) -> VerifyReport {
    let gen = gen.linear_part();
    assert_eq!(
        gen.dim(),
        cert.dim(),
        "generator and certificate dimensions must match"
    );
    let family = cert.projections();
    let nodes = family.times();
    let span = nodes[nodes.len() - 1] - nodes[0];
    let dt_max = span / 2.0;
    let step = opts.integrator_step;
    let m = cert.m();
    let (gamma, rho) = (cert.gamma(), cert.rho());

    let mut worst_backward: f64 = 0.0;
    let mut worst_forward: f64 = 0.0;
    let mut worst_commutation: f64 = 0.0;

    for k in 1..=opts.samples {
        let dt = dt_max * k as f64 / opts.samples as f64;
        for &tau in nodes {
            if cert.rank() > 0 && tau - dt >= nodes[0] - 1e-12 {
                let lq = backward_restricted_matrix(&gen, tau, tau - dt, family, step);
                // Bound reads ||L(t, tau) Q|| <= M e^{-rho (t - tau)} with t - tau = -dt.
                let ratio = operator_norm(&lq) * (-rho * dt).exp() / m;
                worst_backward = worst_backward.max(ratio);
            }
            if tau + dt <= nodes[nodes.len() - 1] + 1e-12 {
                let l = window_matrix(&gen, tau, tau + dt, step);
                if cert.rank() < cert.dim() {
                    let lp = &l * family.complement_at(tau);
                    let ratio = operator_norm(&lp) * (gamma * dt).exp() / m;
                    worst_forward = worst_forward.max(ratio);
                }
                let comm = family.at(tau + dt) * &l - &l * family.at(tau);
                worst_commutation = worst_commutation.max(operator_norm(&comm));
            }
        }
    }

    let passed = worst_backward <= 1.0 + opts.ratio_tol
        && worst_forward <= 1.0 + opts.ratio_tol
        && worst_commutation <= opts.commutation_tol;
    VerifyReport {
        worst_backward_ratio: worst_backward,
        worst_forward_ratio: worst_forward,
        worst_commutation,
        ratio_tol: opts.ratio_tol,
        commutation_tol: opts.commutation_tol,
        passed,
    }
}

/// Outcome of a nestedness check between two splittings.
#[derive(Debug, Clone)]
pub struct NestednessReport {
    /// Worst `||(I - Q_coarse(t)) Q_fine(t)||` over shared nodes.
    pub im_residual: f64,
    /// Worst `||Q_fine(t) (I - Q_coarse(t))||` over shared nodes.
    pub ker_residual: f64,
    /// Tolerance the verdict used.
    pub tol: f64,
    /// Whether both residuals are within tolerance.
    pub passed: bool,
}

/// Checks that a finer splitting nests inside a coarser one:
/// `Im Q_fine ⊂ Im Q_coarse` and `Ker Q_coarse ⊂ Ker Q_fine`.
///
/// Nesting requires the coarse complementary bundle to decay faster, i.e.
/// `coarse.gamma > fine.gamma`; certificates violating that ordering are a
/// precondition error, and a fine rank above the coarse rank is structural.
pub fn nestedness_check(
    coarse: &SplittingCertificate,
    fine: &SplittingCertificate,
    tol: f64,
) -> Result<NestednessReport> {
    if coarse.dim() != fine.dim() {
        return Err(Error::invalid("certificates have different state dimensions"));
    }
    if fine.rank() > coarse.rank() {
        return Err(Error::Structural(format!(
            "fine rank {} exceeds coarse rank {}; the bundles cannot nest",
            fine.rank(),
            coarse.rank()
        )));
    }
    if !(coarse.gamma() > fine.gamma()) {
        return Err(Error::precondition(format!(
            "nesting needs coarse gamma > fine gamma, got {} vs {}",
            coarse.gamma(),
            fine.gamma()
        )));
    }

    let mut times: Vec<f64> = coarse
        .projections()
        .times()
        .iter()
        .chain(fine.projections().times())
        .cloned()
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let mut im_residual: f64 = 0.0;
    let mut ker_residual: f64 = 0.0;
    for &t in &times {
        let qf = fine.q_at(t);
        let pc = coarse.p_at(t);
        im_residual = im_residual.max(operator_norm(&(&pc * &qf)));
        ker_residual = ker_residual.max(operator_norm(&(&qf * &pc)));
    }
    Ok(NestednessReport {
        im_residual,
        ker_residual,
        tol,
        passed: im_residual <= tol && ker_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::{estimate_splitting, ProjectionFamily};
    use nalgebra::{dmatrix, DMatrix};

    fn grid() -> crate::numerics::TimeGrid {
        crate::numerics::TimeGrid::new(-2.0, 2.0, 8).unwrap()
    }

    fn diag_saddle() -> Generator {
        Generator::constant(dmatrix![1.0, 0.0; 0.0, -1.0])
    }

    #[test]
    fn exact_diagonal_passes_tightly() {
        let gen = diag_saddle();
        let cert = estimate_splitting(&gen, 1, 4.0, &grid()).unwrap();
        let report = verify_splitting(&gen, &cert, 8);
        assert!(report.passed, "{report:?}");
        assert!(report.worst_backward_ratio <= 1.0 + 1e-9);
        assert!(report.worst_forward_ratio <= 1.0 + 1e-9);
        assert!(report.worst_commutation <= 1e-10);
    }

    #[test]
    fn inflated_gamma_fails_with_predicted_ratio() {
        let gen = diag_saddle();
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let family = ProjectionFamily::constant(q, -2.0, 2.0).unwrap();
        let cert = SplittingCertificate::new(family, 1.0, 1.1, -1.0).unwrap();
        let report = verify_splitting(&gen, &cert, 8);
        assert!(!report.passed);
        // Worst ratio e^{0.1 dt} at the largest sampled offset (half the span).
        let expected = (0.1f64 * 2.0).exp();
        assert!(
            (report.worst_forward_ratio - expected).abs() <= 1e-3,
            "worst forward ratio {} vs expected {}",
            report.worst_forward_ratio,
            expected
        );
    }

    #[test]
    fn shift_rescaling_preserves_certificate() {
        // Rescaling the process by the midpoint of the rates turns any
        // splitting into a dichotomy with half the gap and the same
        // projections.
        let a = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0, -1.0]);
        let gen = Generator::constant(a.clone());
        let cert = estimate_splitting(&gen, 1, 7.0, &grid()).unwrap();
        let (gamma, rho) = (cert.gamma(), cert.rho());
        let c = (gamma + rho) / 2.0;
        let shifted = Generator::constant(&a + DMatrix::identity(3, 3) * c);
        let half_gap = (gamma - rho) / 2.0;
        let dichotomy = cert.with_rates(cert.m(), half_gap, -half_gap).unwrap();
        let report = verify_splitting(&shifted, &dichotomy, 8);
        assert!(report.passed, "{report:?}");
        assert!(dichotomy.is_dichotomy());
    }

    #[test]
    fn nested_diagonal_residuals_vanish() {
        let gen = Generator::constant(DMatrix::from_diagonal(&nalgebra::dvector![
            2.0, 1.0, -1.0
        ]));
        let coarse = estimate_splitting(&gen, 2, 4.0, &grid()).unwrap();
        let fine = estimate_splitting(&gen, 1, 7.0, &grid()).unwrap();
        let report = nestedness_check(&coarse, &fine, 1e-8).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.im_residual <= 1e-10);
        assert!(report.ker_residual <= 1e-10);
    }

    #[test]
    fn rotated_system_nests_within_oracle_tolerance() {
        // Conjugating by an orthogonal matrix transports both splittings.
        let c = 0.7f64.cos();
        let s = 0.7f64.sin();
        let r12 = dmatrix![c, -s, 0.0; s, c, 0.0; 0.0, 0.0, 1.0];
        let c2 = 0.4f64.cos();
        let s2 = 0.4f64.sin();
        let r23 = dmatrix![1.0, 0.0, 0.0; 0.0, c2, -s2; 0.0, s2, c2];
        let r = r12 * r23;
        let a = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0, -1.0]);
        let rotated = &r * a * r.transpose();
        let gen = Generator::constant(rotated);
        let coarse = estimate_splitting(&gen, 2, 4.0, &grid()).unwrap();
        let fine = estimate_splitting(&gen, 1, 7.0, &grid()).unwrap();

        // Conjugation oracle: transported spectral projections.
        let qc_oracle = &r
            * DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 0.0])
            * r.transpose();
        let qf_oracle = &r
            * DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0, 0.0])
            * r.transpose();
        assert!(operator_norm(&(coarse.q_at(0.0) - qc_oracle)) <= 1e-8);
        assert!(operator_norm(&(fine.q_at(0.0) - qf_oracle)) <= 1e-8);

        let report = nestedness_check(&coarse, &fine, 1e-8).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn swapped_certificates_are_structural_error() {
        let gen = Generator::constant(DMatrix::from_diagonal(&nalgebra::dvector![
            2.0, 1.0, -1.0
        ]));
        let coarse = estimate_splitting(&gen, 2, 4.0, &grid()).unwrap();
        let fine = estimate_splitting(&gen, 1, 7.0, &grid()).unwrap();
        let err = nestedness_check(&fine, &coarse, 1e-8).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "got {err}");
    }
}
