//! Both local manifolds of a hyperbolic solution in one call.

use crate::dichotomy::SplittingCertificate;
use crate::error::{Error, Result};
use crate::numerics::{Generator, GraphField};
use crate::report::CheckSet;

use super::constants::ConstantsLedger;
use super::cutoff::CutoffNonlinearity;
use super::rates::{verify_rates, RateCheckOptions};
use super::solver::{solve_sigma, solve_theta, GraphGridSpec, SolveOptions};

/// The unstable/stable pair at a hyperbolic solution, with the measured
/// rate evidence for each side.
#[derive(Debug, Clone)]
pub struct SaddleManifolds {
    /// Graph over the backward-invertible bundle.
    pub unstable: GraphField,
    /// Graph over the forward-stable bundle.
    pub stable: GraphField,
    /// Rate checks for both graphs, unstable side first.
    pub rates: CheckSet,
}

/// Computes the unstable and stable graphs of a dichotomic splitting and
/// verifies the certified rates on samples of both.
///
/// Requires an honest saddle: the splitting must be a dichotomy with
/// positive decay on both sides, and the truncation budget small enough
/// that the attraction rate stays positive.
pub fn saddle_point(
    proc: &Generator,
    cert: &SplittingCertificate,
    f: &CutoffNonlinearity,
    ledger: &ConstantsLedger,
    grid: &GraphGridSpec,
    opts: &SolveOptions,
) -> Result<SaddleManifolds> {
    if !cert.is_dichotomy() || !(cert.gamma() > 0.0) {
        return Err(Error::precondition(format!(
            "saddle manifolds need a dichotomy with positive rate, got gamma = {}, rho = {}",
            cert.gamma(),
            cert.rho()
        )));
    }
    if !(ledger.delta > 0.0) {
        return Err(Error::precondition(format!(
            "truncation budget too large: attraction rate delta = {} is not positive",
            ledger.delta
        )));
    }
    let unstable = solve_sigma(proc, cert, f, ledger, grid, opts)?;
    let stable = solve_theta(proc, cert, f, ledger, grid, opts)?;
    let rate_opts = RateCheckOptions::default();
    let mut rates = verify_rates(&unstable, proc, f, cert, ledger, &rate_opts)?;
    rates.extend(verify_rates(&stable, proc, f, cert, ledger, &rate_opts)?);
    Ok(SaddleManifolds {
        unstable,
        stable,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::super::constants::constants_ledger;
    use super::super::cutoff::cutoff;
    use super::*;
    use crate::dichotomy::ProjectionFamily;
    use crate::numerics::{eval_graph, Nonlinearity};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn quadratic_saddle_builds_both_sides() {
        let proc = Generator::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let family = ProjectionFamily::constant(q, -40.0, 40.0).unwrap();
        let cert = SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap();
        let base = Nonlinearity::autonomous(
            |u| DVector::from_column_slice(&[0.0, u[0] * u[0]]),
            0.3,
            true,
        );
        let f = cutoff(&base, 2, 0.15, 0.15).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, f.effective_ell(), None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.1, 9);

        let saddle =
            saddle_point(&proc, &cert, &f, &ledger, &grid, &SolveOptions::default()).unwrap();
        assert!(saddle.rates.all_passed(), "{}", saddle.rates.summary_text());
        assert_eq!(saddle.rates.checks().len(), 4);

        let series = 0.05 * 0.05 / 3.0;
        let u = eval_graph(&saddle.unstable, 0.0, &[0.05]).unwrap();
        assert!((u[0] - series).abs() < 5e-3);
        let s = eval_graph(&saddle.stable, 0.0, &[0.05]).unwrap();
        assert!(s[0].abs() <= 1e-9);
    }

    #[test]
    fn non_dichotomic_splitting_is_rejected() {
        let proc = Generator::constant(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let family = ProjectionFamily::constant(q, -40.0, 40.0).unwrap();
        let cert = SplittingCertificate::new(family, 1.0, -1.0, -2.0).unwrap();
        let zero = Nonlinearity::autonomous(|u| DVector::zeros(u.len()), 0.0, true);
        let f = super::super::cutoff::CutoffNonlinearity::unbounded(&zero, 0.0).unwrap();
        let ledger = constants_ledger(1.0, -1.0, -2.0, 0.0, None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.5, 5);
        let err = saddle_point(&proc, &cert, &f, &ledger, &grid, &SolveOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
