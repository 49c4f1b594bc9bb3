//! Orthonormal moving frames adapted to a projection family.
//!
//! A splitting stores oblique projections; graph computations need explicit
//! coordinates on `Im Q(t)` and `Ker Q(t)`. The frame carries one orthonormal
//! basis per bundle and per node, aligned along the time axis so coordinates
//! vary continuously instead of jumping between equivalent bases.

use crate::dichotomy::{ProjectionFamily, SplittingCertificate};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Aligns `cur` to `prev` by the orthogonal Procrustes rotation.
fn align_to(prev: &DMatrix<f64>, cur: DMatrix<f64>) -> DMatrix<f64> {
    if cur.ncols() == 0 {
        return cur;
    }
    let c = cur.transpose() * prev;
    let svd = c.svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    cur * rot
}

/// Orthonormal basis of the column span of `a` (assumed full column rank).
fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return a.clone();
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    q.resize_horizontally_mut(a.ncols(), 0.0);
    q
}

/// Pins the sign of each column by its largest-magnitude entry, so the first
/// node's basis does not inherit the factorization's arbitrary orientation.
fn canonical_signs(mut basis: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..basis.ncols() {
        let mut lead = 0usize;
        for i in 1..basis.nrows() {
            if basis[(i, j)].abs() > basis[(lead, j)].abs() {
                lead = i;
            }
        }
        if basis[(lead, j)] < 0.0 {
            for i in 0..basis.nrows() {
                basis[(i, j)] = -basis[(i, j)];
            }
        }
    }
    basis
}

/// Per-node orthonormal bases for the range and kernel of a projection
/// family.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    family: ProjectionFamily,
    range_bases: Vec<DMatrix<f64>>,
    kernel_bases: Vec<DMatrix<f64>>,
}

impl SplitFrame {
    /// Builds aligned frames for `family`.
    pub fn new(family: &ProjectionFamily) -> Result<Self> {
        let d = family.dim();
        let r = family.rank();
        let n = family.times().len();
        let mut range_bases = Vec::with_capacity(n);
        let mut kernel_bases = Vec::with_capacity(n);
        for q in family.matrices() {
            let (range, kernel) = if r == 0 {
                (DMatrix::zeros(d, 0), DMatrix::identity(d, d))
            } else if r == d {
                (DMatrix::identity(d, d), DMatrix::zeros(d, 0))
            } else {
                let svd = q.clone().svd(true, true);
                let u = svd.u.ok_or_else(|| Error::non_finite("projection SVD"))?;
                let v_t = svd
                    .v_t
                    .ok_or_else(|| Error::non_finite("projection SVD"))?;
                let range = u.columns(0, r).into_owned();
                let kernel = v_t.rows(r, d - r).transpose();
                (range, kernel)
            };
            if let Some(prev) = range_bases.last() {
                range_bases.push(align_to(prev, range));
            } else {
                range_bases.push(canonical_signs(range));
            }
            if let Some(prev) = kernel_bases.last() {
                kernel_bases.push(align_to(prev, kernel));
            } else {
                kernel_bases.push(canonical_signs(kernel));
            }
        }
        Ok(SplitFrame {
            family: family.clone(),
            range_bases,
            kernel_bases,
        })
    }

    /// Builds aligned frames for a certificate's projections.
    pub fn from_certificate(cert: &SplittingCertificate) -> Result<Self> {
        SplitFrame::new(cert.projections())
    }

    /// Rank of the range bundle.
    pub fn rank(&self) -> usize {
        self.family.rank()
    }

    /// Ambient state dimension.
    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Underlying projection family.
    pub fn family(&self) -> &ProjectionFamily {
        &self.family
    }

    fn nearest_node(&self, t: f64) -> usize {
        let times = self.family.times();
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &s) in times.iter().enumerate() {
            let dist = (t - s).abs();
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        best
    }

    /// Orthonormal bases `(range, kernel)` at time `t`.
    ///
    /// At nodes the stored bases return unchanged; between nodes the nearest
    /// node basis is pushed through the interpolated projection,
    /// re-orthonormalized, and re-aligned, so the result stays continuous in
    /// `t`.
    pub fn bases_at(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let i = self.nearest_node(t);
        let times = self.family.times();
        if (t - times[i]).abs() <= 1e-12 * times[i].abs().max(1.0) {
            return (self.range_bases[i].clone(), self.kernel_bases[i].clone());
        }
        let q = self.family.at(t);
        let p = self.family.complement_at(t);
        let range = align_to(
            &self.range_bases[i],
            orthonormal_columns(&(&q * &self.range_bases[i])),
        );
        let kernel = align_to(
            &self.kernel_bases[i],
            orthonormal_columns(&(&p * &self.kernel_bases[i])),
        );
        (range, kernel)
    }

    /// Range-bundle coordinates of `u` at time `t`.
    pub fn q_coords(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let (range, _) = self.bases_at(t);
        range.transpose() * (self.family.at(t) * u)
    }

    /// Kernel-bundle coordinates of `u` at time `t`.
    pub fn p_coords(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let (_, kernel) = self.bases_at(t);
        kernel.transpose() * (self.family.complement_at(t) * u)
    }

    /// Reassembles a state from bundle coordinates: `range * q + kernel * p`.
    pub fn lift(&self, t: f64, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let (range, kernel) = self.bases_at(t);
        let mut u = DVector::zeros(self.dim());
        if q.len() > 0 {
            u += range * q;
        }
        if p.len() > 0 {
            u += kernel * p;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::operator_norm;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn oblique_split_round_trips() {
        let q = dmatrix![1.0, 1.0; 0.0, 0.0];
        let family = ProjectionFamily::constant(q, 0.0, 1.0).unwrap();
        let frame = SplitFrame::new(&family).unwrap();
        let u = dvector![0.3, 0.7];
        let a = frame.q_coords(0.0, &u);
        let b = frame.p_coords(0.0, &u);
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 1);
        let back = frame.lift(0.0, &a, &b);
        assert!((back - &u).norm() <= 1e-12);
    }

    #[test]
    fn rotating_family_keeps_bases_continuous() {
        let n = 40;
        let mut times = Vec::new();
        let mut mats = Vec::new();
        for i in 0..=n {
            let t = i as f64 * 0.1;
            let th = 0.2 * t;
            let (c, s) = (th.cos(), th.sin());
            let r = dmatrix![c, -s; s, c];
            mats.push(&r * dmatrix![1.0, 0.0; 0.0, 0.0] * r.transpose());
            times.push(t);
        }
        let family = ProjectionFamily::new(times, mats).unwrap();
        let frame = SplitFrame::new(&family).unwrap();
        for i in 0..n {
            let (u0, v0) = frame.bases_at(i as f64 * 0.1);
            let (u1, v1) = frame.bases_at(i as f64 * 0.1 + 0.1);
            // Rotation by 0.02 per node; aligned bases must not flip sign.
            assert!(operator_norm(&(&u1 - &u0)) <= 0.05, "node {i}");
            assert!(operator_norm(&(&v1 - &v0)) <= 0.05, "node {i}");
            let (um, _) = frame.bases_at(i as f64 * 0.1 + 0.05);
            assert!(operator_norm(&(&um - &u0)) <= 0.05, "midpoint {i}");
        }
    }

    #[test]
    fn split_is_exact_at_nodes() {
        let q = dmatrix![1.0, 0.5, 0.0; 0.0, 0.0, 0.0; 0.0, 0.5, 1.0];
        let family = ProjectionFamily::constant(q, -1.0, 1.0).unwrap();
        let frame = SplitFrame::new(&family).unwrap();
        let u = dvector![0.2, -1.3, 0.8];
        let back = frame.lift(1.0, &frame.q_coords(1.0, &u), &frame.p_coords(1.0, &u));
        assert!((back - &u).norm() <= 1e-10);
    }

    #[test]
    fn trivial_ranks_degrade_gracefully() {
        let family = ProjectionFamily::constant(DMatrix::zeros(2, 2), 0.0, 1.0).unwrap();
        let frame = SplitFrame::new(&family).unwrap();
        let u = dvector![1.0, -2.0];
        assert_eq!(frame.q_coords(0.5, &u).len(), 0);
        let p = frame.p_coords(0.5, &u);
        let back = frame.lift(0.5, &DVector::zeros(0), &p);
        assert!((back - &u).norm() <= 1e-12);
    }
}
