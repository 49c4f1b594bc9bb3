//! Low diffusion spectrum of the conservative Neumann discretization.
//!
//! The operator `u -> -(a u')'` with zero-flux boundaries is discretized in
//! flux form on the profile's mesh, symmetrized with the lumped trapezoid
//! mass, and its lowest eigenpairs extracted by Sturm bisection plus shifted
//! inverse iteration. For a constant coefficient the discrete eigenpairs are
//! exactly `(4c/h^2) sin^2((k-1) pi h / 2)` with cosine modes, which pins the
//! solver's accuracy in tests.

use crate::error::{Error, Result};
use crate::numerics::fmt_float;

use super::profile::DiffusionProfile;

/// Mode cap; the reduction only ever consumes the slow end of the spectrum.
const MAX_MODES: usize = 16;
/// Inverse-iteration residual budget, scaled by `EPS * |B| * sqrt(n)`.
const RESIDUAL_FACTOR: f64 = 8.0;
/// Mutual mass-orthonormality defect allowed after re-orthogonalization.
const GRAM_TOL: f64 = 1e-8;

/// Lowest eigenpairs of the diffusion operator on the profile's mesh.
///
/// Eigenvalues ascend; eigenfunctions are node samples, orthonormal in the
/// lumped trapezoid inner product and signed positive at the right endpoint.
#[derive(Debug, Clone)]
pub struct Spectrum {
    lambdas: Vec<f64>,
    phis: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    gram_defect: f64,
}

impl Spectrum {
    /// Eigenvalues, ascending.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Node samples of the `j`-th eigenfunction (0-based).
    pub fn phi(&self, j: usize) -> &[f64] {
        &self.phis[j]
    }

    /// Number of computed modes.
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// Mesh nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights of the discrete inner product.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Worst mass-orthonormality defect over all mode pairs.
    pub fn gram_defect(&self) -> f64 {
        self.gram_defect
    }

    /// Discrete inner product `sum w u v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.weights.len());
        assert_eq!(v.len(), self.weights.len());
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Eigenvalue table, one `k lambda` line per mode.
    pub fn to_text(&self) -> String {
        let mut out = String::from("k lambda\n");
        for (k, l) in self.lambdas.iter().enumerate() {
            out.push_str(&format!("{} {}\n", k + 1, fmt_float(*l)));
        }
        out
    }

    /// CSV of the eigenfunction samples, `x,phi1,...` with a header row.
    pub fn eigenfunction_table(&self) -> String {
        let mut out = String::from("x");
        for k in 0..self.phis.len() {
            out.push_str(&format!(",phi{}", k + 1));
        }
        out.push('\n');
        for (i, x) in self.nodes.iter().enumerate() {
            out.push_str(&fmt_float(*x));
            for phi in &self.phis {
                out.push(',');
                out.push_str(&fmt_float(phi[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Symmetric tridiagonal matrix in diagonal/off-diagonal storage.
struct Tridiag {
    d: Vec<f64>,
    e: Vec<f64>,
    norm: f64,
}

impl Tridiag {
    fn n(&self) -> usize {
        self.d.len()
    }

    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.d[i] * v[i];
            if i > 0 {
                acc += self.e[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.e[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// Eigenvalues strictly below `sigma`, by the Sturm sequence count.
    fn count_below(&self, sigma: f64, pivmin: f64) -> usize {
        let mut count = 0usize;
        let mut t = self.d[0] - sigma;
        if t.abs() < pivmin {
            t = -pivmin;
        }
        if t < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            t = self.d[i] - sigma - self.e[i - 1] * self.e[i - 1] / t;
            if t.abs() < pivmin {
                t = -pivmin;
            }
            if t < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Isolating interval of the `k`-th eigenvalue (0-based), bisected down
    /// to the floating-point resolution of the spectral scale.
    fn bisect(&self, k: usize, pivmin: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n() {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < self.n() { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        for _ in 0..128 {
            let width = hi - lo;
            if width <= 2.0 * pivmin + 4.0 * f64::EPSILON * (lo.abs() + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid, pivmin) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }
}

/// LU factors of `B - mu I` with partial pivoting; band grows by one
/// superdiagonal under row swaps.
struct ShiftedFactors {
    dl: Vec<f64>,
    dd: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedFactors {
    fn factor(b: &Tridiag, mu: f64, pivmin: f64) -> Self {
        let n = b.n();
        let mut dd: Vec<f64> = b.d.iter().map(|&x| x - mu).collect();
        let mut du = b.e.clone();
        let mut dl = b.e.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if dl[i].abs() <= dd[i].abs() {
                if dd[i].abs() < pivmin {
                    dd[i] = if dd[i] < 0.0 { -pivmin } else { pivmin };
                }
                let m = dl[i] / dd[i];
                dl[i] = m;
                dd[i + 1] -= m * du[i];
            } else {
                let m = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = m;
                let tmp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = tmp - m * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -m * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(last) = dd.last_mut() {
            if last.abs() < pivmin {
                *last = if *last < 0.0 { -pivmin } else { pivmin };
            }
        }
        ShiftedFactors { dl, dd, du, du2, swapped }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dd.len();
        let mut x = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let tmp = x[i + 1];
                x[i + 1] = x[i] - self.dl[i] * tmp;
                x[i] = tmp;
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        if n >= 1 {
            x[n - 1] /= self.dd[n - 1];
        }
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.dd[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.dd[i];
        }
        x
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (x, c) in v.iter_mut().zip(b) {
                *x -= dot * c;
            }
        }
    }
}

/// Computes the lowest `n_modes` eigenpairs of the profile's operator.
///
/// The banded shape must resolve its valley floor with at least 32 mesh
/// nodes; eigenfunctions are re-orthogonalized, so the Gram defect reflects
/// roundoff, not cluster mixing.
pub fn eigensolve(profile: &DiffusionProfile, n_modes: usize) -> Result<Spectrum> {
    let n_cells = profile.n_cells();
    let size = n_cells + 1;
    if n_modes < 1 || n_modes > MAX_MODES {
        return Err(Error::invalid(format!(
            "n_modes = {n_modes} outside the supported range 1..={MAX_MODES}"
        )));
    }
    if n_modes * 8 > size {
        return Err(Error::invalid("mesh too coarse for the requested mode count"));
    }
    if profile.constant_level().is_none() && profile.valley_node_count() < 32 {
        return Err(Error::precondition(format!(
            "valley floor holds only {} mesh nodes, need 32; refine the mesh",
            profile.valley_node_count()
        )));
    }
    if profile.a_mid().iter().any(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::Structural(
            "interface coefficient samples must be positive for a symmetric stencil".into(),
        ));
    }

    let h = profile.h();
    let weights: Vec<f64> = (0..size)
        .map(|i| if i == 0 || i == n_cells { 0.5 * h } else { h })
        .collect();
    let nodes: Vec<f64> = (0..size).map(|i| i as f64 * h).collect();

    // Flux-form stiffness, symmetrized by the lumped mass: row sums of the
    // stiffness vanish exactly, so the constant profile is the null mode.
    let a = profile.a_mid();
    let mut kd = vec![0.0; size];
    let mut ke = vec![0.0; size - 1];
    for i in 0..n_cells {
        let flux = a[i] / h;
        kd[i] += flux;
        kd[i + 1] += flux;
        ke[i] = -flux;
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b = {
        let d: Vec<f64> = (0..size).map(|i| kd[i] / weights[i]).collect();
        let e: Vec<f64> = (0..size - 1)
            .map(|i| ke[i] / (sqrt_w[i] * sqrt_w[i + 1]))
            .collect();
        let norm = (0..size)
            .map(|i| {
                d[i].abs()
                    + if i > 0 { e[i - 1].abs() } else { 0.0 }
                    + if i + 1 < size { e[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max);
        Tridiag { d, e, norm }
    };
    let pivmin = f64::EPSILON * b.norm.max(1.0);
    let res_tol = RESIDUAL_FACTOR * f64::EPSILON * b.norm * (size as f64).sqrt();

    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_modes);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    let mut lcg = 0x2545f4914f6cdd1du64;
    for k in 0..n_modes {
        let (lo, hi) = b.bisect(k, pivmin);
        let mu = 0.5 * (lo + hi);
        let factors = ShiftedFactors::factor(&b, mu, pivmin);

        let mut v: Vec<f64> = (0..size)
            .map(|i| sqrt_w[i] * (k as f64 * std::f64::consts::PI * nodes[i]).cos())
            .collect();
        let mut accepted = false;
        let mut theta = mu;
        'attempts: for attempt in 0..2 {
            if attempt > 0 {
                for x in v.iter_mut() {
                    lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    *x += 1e-3 * ((lcg >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
                }
            }
            normalize(&mut v);
            for _ in 0..12 {
                let mut w = factors.solve(&v);
                orthogonalize(&mut w, &basis);
                if normalize(&mut w) == 0.0 {
                    continue;
                }
                let bw = b.matvec(&w);
                theta = w.iter().zip(&bw).map(|(a, c)| a * c).sum();
                let res = w
                    .iter()
                    .zip(&bw)
                    .map(|(a, c)| (c - theta * a).powi(2))
                    .sum::<f64>()
                    .sqrt();
                v = w;
                if res <= res_tol {
                    accepted = true;
                    break 'attempts;
                }
            }
        }
        if !accepted {
            return Err(Error::Structural(format!(
                "inverse iteration stalled on mode {}",
                k + 1
            )));
        }
        basis.push(v.clone());
        pairs.push((theta, v));
    }

    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if pairs[0].0.abs() > (1e3 * f64::EPSILON * b.norm).max(1e-8) {
        return Err(Error::Structural(format!(
            "leading eigenvalue {:.3e} should vanish for the flux-conservative stencil",
            pairs[0].0
        )));
    }

    let mut lambdas = Vec::with_capacity(n_modes);
    let mut phis = Vec::with_capacity(n_modes);
    for (lambda, v) in pairs {
        let mut phi: Vec<f64> = v.iter().zip(&sqrt_w).map(|(x, s)| x / s).collect();
        let anchor = *phi.last().unwrap();
        let flip = if anchor.abs() > 1e-12 * phi.iter().fold(0.0f64, |m, x| m.max(x.abs())) {
            anchor < 0.0
        } else {
            let dominant = phi
                .iter()
                .cloned()
                .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
                .unwrap();
            dominant < 0.0
        };
        if flip {
            for x in phi.iter_mut() {
                *x = -*x;
            }
        }
        lambdas.push(lambda);
        phis.push(phi);
    }

    let mut gram_defect = 0.0f64;
    for i in 0..n_modes {
        for j in i..n_modes {
            let g: f64 = weights
                .iter()
                .zip(phis[i].iter().zip(&phis[j]))
                .map(|(w, (a, b))| w * a * b)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((g - target).abs());
        }
    }
    if gram_defect > GRAM_TOL {
        return Err(Error::Structural(format!(
            "eigenfunction Gram defect {gram_defect:.3e} exceeds {GRAM_TOL:.1e}"
        )));
    }

    Ok(Spectrum {
        lambdas,
        phis,
        nodes,
        weights,
        gram_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::profile::{build_diffusion, build_diffusion_with_mesh, ProfileShape};
    use std::f64::consts::PI;

    #[test]
    fn constant_profile_matches_the_cosine_spectrum() {
        let c = 1.3;
        let p = build_diffusion(1e-2, 0.5, 1.0, 1.0, ProfileShape::Constant(c)).unwrap();
        let s = eigensolve(&p, 5).unwrap();
        assert!(s.lambdas()[0].abs() <= 1e-6, "lambda1 = {:.3e}", s.lambdas()[0]);
        for k in 1..5 {
            let exact = c * ((k as f64) * PI).powi(2);
            let rel = (s.lambdas()[k] - exact).abs() / exact;
            assert!(rel <= 5e-3, "mode {}: rel error {rel:.2e}", k + 1);
        }
        // Flat null mode normalized against the discrete mass.
        for &v in s.phi(0) {
            assert!((v - 1.0).abs() <= 1e-8, "phi1 sample {v}");
        }
        // Second mode is the discrete cosine, signed positive on the right.
        let n = s.nodes().len();
        for (i, &x) in s.nodes().iter().enumerate() {
            let expect = -(2.0f64).sqrt() * (PI * x).cos();
            assert!(
                (s.phi(1)[i] - expect).abs() <= 2e-2 * (1.0 + expect.abs()),
                "phi2 deviates at node {i}"
            );
        }
        assert!(s.phi(1)[n - 1] > 0.0);
        assert!(s.gram_defect() <= 1e-10);
        assert!(s.to_text().lines().count() == 6);
    }

    #[test]
    fn banded_profile_localizes_the_slow_mode() {
        let p = build_diffusion(1e-2, 0.5, 1.0, 2.4, ProfileShape::Banded).unwrap();
        let s = eigensolve(&p, 4).unwrap();
        let l = s.lambdas();
        assert!(l[0].abs() <= 1e-4 * l[1], "lambda1 = {:.3e}", l[0]);
        assert!(l[1] > 0.3 && l[1] < 1.5, "lambda2 = {}", l[1]);
        assert!(l[2] / l[1] >= 10.0, "gap ratio {:.2}", l[2] / l[1]);
        // Slow mode is a smoothed step through the valley: opposite plateau
        // signs, right end positive by convention.
        let phi2 = s.phi(1);
        let node = |x: f64| (x * p.n_cells() as f64).round() as usize;
        assert!(phi2[node(0.1)] < -0.5);
        assert!(phi2[node(0.9)] > 0.5);
        assert!((phi2[node(0.1)] - phi2[node(0.35)]).abs() <= 0.05);
        assert!((phi2[node(0.65)] - phi2[node(0.9)]).abs() <= 0.05);
    }

    #[test]
    fn underresolved_valley_is_rejected() {
        let p =
            build_diffusion_with_mesh(1e-3, 0.5, 1.0, 2.4, ProfileShape::Banded, 1024).unwrap();
        let err = eigensolve(&p, 2).unwrap_err();
        assert!(matches!(err, crate::Error::Precondition(_)), "{err}");
    }
}
