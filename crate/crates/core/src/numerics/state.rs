//! Validated state vectors.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// A finite-dimensional state with all entries guaranteed finite.
///
/// Construction is the only place the guarantee is enforced, so every
/// consumer can rely on it without re-checking.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    data: DVector<f64>,
}

impl StateVector {
    /// Builds a state from raw entries, rejecting NaN and infinities.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_column(DVector::from_vec(entries))
    }

    /// Builds a state from a column vector, rejecting NaN and infinities.
    pub fn from_column(data: DVector<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("state vector must have dimension >= 1"));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::non_finite("state vector entries"));
        }
        Ok(StateVector { data })
    }

    /// Dimension of the state.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// Borrow as a column vector.
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    /// Consume into the underlying column vector.
    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        StateVector::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(StateVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(StateVector::new(vec![f64::INFINITY]).is_err());
        assert!(StateVector::new(vec![]).is_err());
        assert!(StateVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn norm_and_index() {
        let u = StateVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(u.norm(), 5.0);
        assert_eq!(u[1], 4.0);
    }
}
