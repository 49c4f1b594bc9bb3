//! Least-squares line fits used by the rate-certification routines.

/// Ordinary least-squares fit `y = slope * x + intercept`.
///
/// Panics if fewer than two distinct abscissae are supplied; rate fits always
/// control their sampling plans, so that is a programming error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "line fit needs at least two samples");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    assert!(sxx > 0.0, "line fit needs at least two distinct abscissae");
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted slope of `ln(values)` against `ts`, ignoring samples at or below
/// `floor` (they carry rounding noise, not rate information).
///
/// Returns `None` when fewer than two usable samples remain.
pub fn log_slope(ts: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for (&t, &v) in ts.iter().zip(values) {
        if v > floor && v.is_finite() {
            xs.push(t);
            ys.push(v.ln());
        }
    }
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return None;
    }
    Some(linear_fit(&xs, &ys).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (m, b) = linear_fit(&xs, &ys);
        assert!((m - 2.0).abs() < 1e-14);
        assert!((b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_slope_of_exponential_decay() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        let s = log_slope(&ts, &vs, 1e-300).unwrap();
        assert!((s + 1.7).abs() < 1e-10);
    }

    #[test]
    fn log_slope_skips_floor() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let vs = [1.0, 0.1, 1e-18, 1e-18];
        let s = log_slope(&ts, &vs, 1e-14).unwrap();
        assert!((s - (0.1f64.ln())).abs() < 1e-12);
    }
}
