//! Closed-form constants of the graph-transform contraction argument.
//!
//! Everything here is a direct formula evaluation; no iteration, no state.
//! The ledger is the single source the solvers and reports quote constants
//! from, so each run's numbers are reproducible from four inputs (plus the
//! optional smoothing-scale pair for sectorial problems).

use crate::error::{Error, Result};

/// Outcome of the spectral-gap test `(gamma - rho) / ell > threshold`.
#[derive(Debug, Clone, Copy)]
pub struct GapReport {
    /// Whether the gap condition holds.
    pub pass: bool,
    /// `(gamma - rho) / ell`; infinite when `ell == 0`.
    pub ratio: f64,
    /// `max(M^2 + 2M + sqrt(8 M^3), 3 M^2 + 2M)`.
    pub threshold: f64,
    /// `ratio - threshold`.
    pub margin: f64,
}

fn validate_inputs(m: f64, gamma: f64, rho: f64, ell: f64) -> Result<()> {
    if !(m.is_finite() && gamma.is_finite() && rho.is_finite() && ell.is_finite()) {
        return Err(Error::non_finite("gap condition inputs"));
    }
    if m < 1.0 {
        return Err(Error::invalid(format!("constant M must be >= 1, got {m}")));
    }
    if gamma <= rho {
        return Err(Error::invalid(format!(
            "rates must satisfy gamma > rho, got gamma={gamma}, rho={rho}"
        )));
    }
    if ell < 0.0 {
        return Err(Error::invalid(format!(
            "Lipschitz constant must be nonnegative, got {ell}"
        )));
    }
    Ok(())
}

/// Threshold of the gap condition for a given splitting constant.
pub fn gap_threshold(m: f64) -> f64 {
    let a = m * m + 2.0 * m + (8.0 * m * m * m).sqrt();
    let b = 3.0 * m * m + 2.0 * m;
    a.max(b)
}

/// Tests the spectral-gap condition that makes the graph transform contract.
pub fn gap_condition(m: f64, gamma: f64, rho: f64, ell: f64) -> Result<GapReport> {
    validate_inputs(m, gamma, rho, ell)?;
    let threshold = gap_threshold(m);
    let ratio = if ell == 0.0 {
        f64::INFINITY
    } else {
        (gamma - rho) / ell
    };
    Ok(GapReport {
        pass: ratio > threshold,
        ratio,
        threshold,
        margin: ratio - threshold,
    })
}

/// Smoothing-scale inputs for the sectorial variant of the constants.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicInput {
    /// Constant of the order-reducing smoothing estimate (named N).
    pub n_const: f64,
    /// Fractional power of the phase space, in (0, 1).
    pub alpha: f64,
}

/// Constants of the sectorial variant, with the Gamma(1 - alpha) factor.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicConstants {
    /// Smoothing constant N.
    pub n_const: f64,
    /// Fractional power alpha.
    pub alpha: f64,
    /// Lower end of the admissible Lipschitz-budget interval.
    pub kappa_minus: f64,
    /// Upper end of the admissible interval.
    pub kappa_plus: f64,
    /// Budget bound coming from the contraction-factor inequality alone.
    pub kappa_star: f64,
    /// Budget the solvers would use (the lower end).
    pub kappa_chosen: f64,
    /// Attraction exponent of the invariant graph in this variant.
    pub delta: f64,
}

/// All derived constants for one `(M, gamma, rho, ell)` quadruple.
#[derive(Debug, Clone)]
pub struct ConstantsLedger {
    /// Splitting constant.
    pub m: f64,
    /// Complement decay rate.
    pub gamma: f64,
    /// Backward rate on the range bundle.
    pub rho: f64,
    /// Global Lipschitz constant of the nonlinear term.
    pub ell: f64,
    /// Gap-condition threshold for this `m`.
    pub gap_threshold: f64,
    /// `(gamma - rho) / ell`.
    pub gap_ratio: f64,
    /// Smaller root of the Lipschitz-budget quadratic.
    pub kappa_minus: f64,
    /// Larger root.
    pub kappa_plus: f64,
    /// Bound from the contraction-factor inequality.
    pub kappa_star: f64,
    /// Budget used by the solvers; the smaller root.
    pub kappa_chosen: f64,
    /// Attraction rate toward the invariant graph.
    pub delta: f64,
    /// Separation rate from the stable graph.
    pub delta_hat: f64,
    /// Contraction factor bound of the fixed-point iteration.
    pub nu: f64,
    /// Sectorial-variant block, when requested.
    pub parabolic: Option<ParabolicConstants>,
}

impl ConstantsLedger {
    /// Horizon at which the fixed-point integrand tail drops below
    /// `tol_tail`, per the decay rate `gamma - rho - 2 M ell (1 + kappa)`.
    pub fn tail_horizon(&self, tol_tail: f64) -> f64 {
        assert!(tol_tail > 0.0 && tol_tail < 1.0, "tail tolerance in (0,1)");
        let rate = self.gamma - self.rho - 2.0 * self.m * self.ell * (1.0 + self.kappa_chosen);
        assert!(rate > 0.0, "tail decay rate must be positive");
        (1.0 / tol_tail).ln() / rate
    }

    /// Flat `key = value` listing of every constant, for manifests.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("m".to_string(), self.m),
            ("gamma".to_string(), self.gamma),
            ("rho".to_string(), self.rho),
            ("ell".to_string(), self.ell),
            ("gap_threshold".to_string(), self.gap_threshold),
            ("gap_ratio".to_string(), self.gap_ratio),
            ("kappa_minus".to_string(), self.kappa_minus),
            ("kappa_plus".to_string(), self.kappa_plus),
            ("kappa_star".to_string(), self.kappa_star),
            ("kappa_chosen".to_string(), self.kappa_chosen),
            ("delta".to_string(), self.delta),
            ("delta_hat".to_string(), self.delta_hat),
            ("nu".to_string(), self.nu),
        ];
        if let Some(p) = &self.parabolic {
            out.push(("par_n".to_string(), p.n_const));
            out.push(("par_alpha".to_string(), p.alpha));
            out.push(("par_kappa_minus".to_string(), p.kappa_minus));
            out.push(("par_kappa_plus".to_string(), p.kappa_plus));
            out.push(("par_kappa_star".to_string(), p.kappa_star));
            out.push(("par_delta".to_string(), p.delta));
        }
        out
    }
}

fn parabolic_block(
    m: f64,
    gamma: f64,
    rho: f64,
    ell: f64,
    input: ParabolicInput,
) -> Result<ParabolicConstants> {
    let ParabolicInput { n_const, alpha } = input;
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "fractional power must lie in (0,1), got {alpha}"
        )));
    }
    if n_const <= 0.0 || !n_const.is_finite() {
        return Err(Error::invalid("smoothing constant N must be positive"));
    }
    let gap = gamma - rho;
    let gam1a = libm::tgamma(1.0 - alpha);
    let core = 2.0 * m * m * ell * gam1a;
    let core_pow = core.powf(1.0 / (1.0 - alpha));
    let kappa_star = (gap - core_pow) / (2.0 * n_const * ell) - 1.0;
    let kappa_plus = 0.5 * (gap - core_pow) / (2.0 * n_const * ell) - 1.0;
    let kappa_minus =
        2f64.powf(1.0 - alpha) * m * m * ell * gam1a / (gap + core_pow).powf(1.0 - alpha);
    if !(kappa_minus < kappa_plus) || kappa_minus <= 0.0 {
        return Err(Error::GapCondition {
            ratio: gap / ell,
            threshold: f64::NAN,
        });
    }
    let kappa = kappa_minus;
    let denom = gap - 2.0 * ell * n_const * (1.0 + kappa);
    if denom <= 0.0 {
        return Err(Error::invalid(
            "smoothing denominator is nonpositive; gap too small for this N",
        ));
    }
    let inner = 2.0 * gam1a * ell * m * (1.0 + ell * (1.0 + 2.0 * m) * n_const * (1.0 + kappa) / denom);
    let delta = gap - 2.0 * n_const * ell * (1.0 + kappa) - inner.powf(1.0 / (1.0 - alpha));
    Ok(ParabolicConstants {
        n_const,
        alpha,
        kappa_minus,
        kappa_plus,
        kappa_star,
        kappa_chosen: kappa,
        delta,
    })
}

/// Evaluates every derived constant for the quadruple, failing when the gap
/// condition does not hold or the budget interval is empty.
///
/// `ell == 0` is accepted and produces the limiting values (`kappa = 0`,
/// `delta = gamma`, `delta_hat = rho`, `nu = 0`), which is what a purely
/// linear problem needs.
pub fn constants_ledger(
    m: f64,
    gamma: f64,
    rho: f64,
    ell: f64,
    parabolic: Option<ParabolicInput>,
) -> Result<ConstantsLedger> {
    let gap = gap_condition(m, gamma, rho, ell)?;
    if ell == 0.0 {
        return Ok(ConstantsLedger {
            m,
            gamma,
            rho,
            ell,
            gap_threshold: gap.threshold,
            gap_ratio: gap.ratio,
            kappa_minus: 0.0,
            kappa_plus: f64::INFINITY,
            kappa_star: f64::INFINITY,
            kappa_chosen: 0.0,
            delta: gamma,
            delta_hat: rho,
            nu: 0.0,
            parabolic: None,
        });
    }
    if !gap.pass {
        return Err(Error::GapCondition {
            ratio: gap.ratio,
            threshold: gap.threshold,
        });
    }
    let b = gap.ratio - m * m - 2.0 * m;
    let disc = b * b - 8.0 * m * m * m;
    if disc < 0.0 {
        return Err(Error::GapCondition {
            ratio: gap.ratio,
            threshold: gap.threshold,
        });
    }
    let sq = disc.sqrt();
    // Stable form of (b - sq) / (4M): the difference cancels for small ell.
    let kappa_minus = 2.0 * m * m / (b + sq);
    let kappa_plus = (b + sq) / (4.0 * m);
    let kappa_star = gap.ratio / (2.0 * m) - m - 1.0;
    if !(kappa_minus > 0.0 && kappa_minus < kappa_plus.min(kappa_star)) {
        return Err(Error::invalid(format!(
            "empty admissible budget interval: kappa_minus={kappa_minus}, \
             kappa_plus={kappa_plus}, kappa_star={kappa_star}"
        )));
    }
    let kappa = kappa_minus;
    let g = gamma - rho;
    let delta = gamma
        - m * ell
        - m * m * ell * ell * (1.0 + kappa) * (1.0 + m) / (g - ell * m * (1.0 + kappa));
    let delta_hat = rho
        + m * ell
        + m * m * ell * ell * (1.0 + kappa) * (1.0 + m) / (g - m * ell * (1.0 + kappa));
    let nu = 2.0 * ell * m * m / (g - 2.0 * ell * m * (1.0 + kappa));
    let parabolic = match parabolic {
        Some(input) => Some(parabolic_block(m, gamma, rho, ell, input)?),
        None => None,
    };
    Ok(ConstantsLedger {
        m,
        gamma,
        rho,
        ell,
        gap_threshold: gap.threshold,
        gap_ratio: gap.ratio,
        kappa_minus,
        kappa_plus,
        kappa_star,
        kappa_chosen: kappa,
        delta,
        delta_hat,
        nu,
        parabolic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn threshold_closed_forms() {
        // M = 1: the square-root branch wins, 3 + 2 sqrt(2).
        assert_relative_eq!(gap_threshold(1.0), 3.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        // M = 2: both branches meet at 16.
        assert_relative_eq!(gap_threshold(2.0), 16.0, epsilon = 1e-14);
        let near = gap_condition(1.0, 5.8, 0.0, 1.0).unwrap();
        assert!(!near.pass);
        let past = gap_condition(1.0, 5.9, 0.0, 1.0).unwrap();
        assert!(past.pass);
    }

    #[test]
    fn budget_roots_at_ratio_seven() {
        let led = constants_ledger(1.0, 7.0, 0.0, 1.0, None).unwrap();
        assert_relative_eq!(led.kappa_minus, 0.292_893_218_813_452_5, epsilon = 1e-12);
        assert_relative_eq!(led.kappa_plus, 1.707_106_781_186_547_5, epsilon = 1e-12);
        assert_relative_eq!(led.kappa_star, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn rates_for_small_lipschitz_example() {
        let led = constants_ledger(1.0, 1.0, -1.0, 0.05, None).unwrap();
        // Independent re-derivation: b = 40 - 3, kappa = (37 - sqrt(37^2 - 8)) / 4.
        let b: f64 = 2.0 / 0.05 - 3.0;
        let kappa = (b - (b * b - 8.0).sqrt()) / 4.0;
        assert_relative_eq!(led.kappa_chosen, kappa, epsilon = 1e-14);
        assert!((led.kappa_minus - 0.02707).abs() < 5e-6);
        assert!((led.delta - 0.94736).abs() < 5e-6);
        assert!((led.delta_hat + 0.94736).abs() < 5e-6);
        // The symmetric dichotomy makes delta and delta_hat mirror images.
        assert_relative_eq!(led.delta, -led.delta_hat, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_lipschitz_degenerates_cleanly() {
        let led = constants_ledger(1.0, 1.0, -1.0, 0.0, None).unwrap();
        assert_eq!(led.kappa_chosen, 0.0);
        assert_eq!(led.delta, 1.0);
        assert_eq!(led.delta_hat, -1.0);
        assert_eq!(led.nu, 0.0);
        let tighter = constants_ledger(1.0, 1.0, -1.0, 1e-9, None).unwrap();
        assert!(tighter.kappa_minus < 1e-8);
        assert!(tighter.delta > 0.999_999);
    }

    #[test]
    fn failing_gap_is_an_error() {
        let err = constants_ledger(1.0, 1.0, -1.0, 0.5, None).unwrap_err();
        assert!(matches!(err, Error::GapCondition { .. }), "got {err}");
    }

    #[test]
    fn parabolic_block_reduces_sanely() {
        // Gamma(1/2) = sqrt(pi); alpha = 1/2 exercises the fractional powers.
        assert_relative_eq!(libm::tgamma(0.5), std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        let led = constants_ledger(
            1.0,
            400.0,
            -1.0,
            0.05,
            Some(ParabolicInput {
                n_const: 2.0,
                alpha: 0.5,
            }),
        )
        .unwrap();
        let p = led.parabolic.unwrap();
        assert!(p.kappa_minus > 0.0 && p.kappa_minus < p.kappa_plus);
        assert!(p.kappa_plus < p.kappa_star);
        assert!(p.delta > 0.0);
        // Hand evaluation of the lower budget bound.
        let gam = std::f64::consts::PI.sqrt();
        let core = 2.0 * 0.05 * gam;
        let expect = 2f64.sqrt() * 0.05 * gam / (401.0 + core * core).sqrt();
        assert_relative_eq!(p.kappa_minus, expect, epsilon = 1e-12);
    }
}
