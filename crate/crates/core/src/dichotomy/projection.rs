//! Time-sampled families of projection matrices.

use crate::error::{Error, Result};
use crate::numerics::operator_norm;
use nalgebra::DMatrix;

/// Projection matrices sampled on an increasing time grid, evaluated anywhere
/// by entrywise linear interpolation (clamped at the ends).
///
/// Interpolants of projections are only approximately idempotent between
/// nodes; the stored nodes themselves are validated against `tol_proj` at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFamily {
    times: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
    rank: usize,
}

/// Largest `|| Q^2 - Q ||` accepted at a stored node.
pub(crate) const TOL_PROJ: f64 = 1e-8;

fn projection_rank(q: &DMatrix<f64>) -> usize {
    // Projection singular values are either >= 1 or 0; cut at 1/2.
    if q.iter().all(|x| *x == 0.0) {
        return 0;
    }
    q.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > 0.5)
        .count()
}

impl ProjectionFamily {
    /// Validating constructor: square matrices, idempotent within
    /// `1e-8`, constant rank, strictly increasing times.
    pub fn new(times: Vec<f64>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != matrices.len() {
            return Err(Error::invalid(
                "projection family needs matching, nonempty times and matrices",
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("projection family times must increase"));
        }
        let dim = matrices[0].nrows();
        let mut rank = None;
        for (t, q) in times.iter().zip(&matrices) {
            if !q.is_square() || q.nrows() != dim {
                return Err(Error::invalid("projection matrices must share a square shape"));
            }
            if !q.iter().all(|x| x.is_finite()) {
                return Err(Error::non_finite(format!("projection at t = {t}")));
            }
            let defect = operator_norm(&(q * q - q));
            if defect > TOL_PROJ {
                return Err(Error::invalid(format!(
                    "projection at t = {t} is not idempotent: ||Q^2 - Q|| = {defect:.3e}"
                )));
            }
            let r = projection_rank(q);
            match rank {
                None => rank = Some(r),
                Some(r0) if r0 != r => {
                    return Err(Error::invalid(format!(
                        "projection rank changes from {r0} to {r} at t = {t}"
                    )))
                }
                _ => {}
            }
        }
        Ok(ProjectionFamily {
            times,
            matrices,
            rank: rank.unwrap(),
        })
    }

    /// Constant-in-time family over a nominal two-node grid.
    pub fn constant(q: DMatrix<f64>, t_min: f64, t_max: f64) -> Result<Self> {
        ProjectionFamily::new(vec![t_min, t_max], vec![q.clone(), q])
    }

    /// Common rank of the family.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Sampled times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Stored node matrices.
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Projection at `t` (clamped linear interpolation between nodes).
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.matrices[i].clone(),
            Err(i) => {
                let i = i.clamp(1, self.times.len() - 1) - 1;
                let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                &self.matrices[i] * (1.0 - w) + &self.matrices[i + 1] * w
            }
        }
    }

    /// Complementary projection `I - Q(t)`.
    pub fn complement_at(&self, t: f64) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - self.at(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn constant_family_interpolates_exactly() {
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let f = ProjectionFamily::constant(q.clone(), -1.0, 1.0).unwrap();
        assert_eq!(f.at(0.3), q);
        assert_eq!(f.at(100.0), q); // clamped
        assert_eq!(f.rank(), 1);
    }

    #[test]
    fn rejects_non_idempotent() {
        let bad = dmatrix![1.0, 0.5; 0.5, 0.0];
        assert!(ProjectionFamily::constant(bad, 0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_rank_change() {
        let q1 = dmatrix![1.0, 0.0; 0.0, 0.0];
        let q2 = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(ProjectionFamily::new(vec![0.0, 1.0], vec![q1, q2]).is_err());
    }

    #[test]
    fn oblique_projection_accepted() {
        // Projection onto span(1, 1) along span(0, 1).
        let q = dmatrix![1.0, 0.0; 1.0, 0.0];
        let f = ProjectionFamily::constant(q, 0.0, 1.0).unwrap();
        assert_eq!(f.rank(), 1);
    }
}
