//! Right-hand sides of semilinear systems `u' = A(t)u + f(t, u)`.

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

type MatrixFn = dyn Fn(f64) -> DMatrix<f64> + Send + Sync;
type FieldFn = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// A nonlinear term `f(t, u)` with its declared Lipschitz budget.
///
/// The declared constant is a contract, not a measurement: the graph-transform
/// solvers use it in their contraction estimates and the cutoff constructor is
/// the place where it is actually derived from samples.
#[derive(Clone)]
pub struct Nonlinearity {
    field: Arc<FieldFn>,
    lipschitz: f64,
    vanishes_at_zero: bool,
    time_invariant: bool,
}

impl Nonlinearity {
    /// Wraps a time-dependent nonlinear term.
    pub fn new(
        field: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lipschitz: f64,
        vanishes_at_zero: bool,
    ) -> Self {
        Nonlinearity {
            field: Arc::new(field),
            lipschitz,
            vanishes_at_zero,
            time_invariant: false,
        }
    }

    /// Wraps a term that does not depend on time.
    pub fn autonomous(
        field: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lipschitz: f64,
        vanishes_at_zero: bool,
    ) -> Self {
        Nonlinearity {
            field: Arc::new(move |_, u| field(u)),
            lipschitz,
            vanishes_at_zero,
            time_invariant: true,
        }
    }

    /// Evaluates `f(t, u)`.
    pub fn eval(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        (self.field)(t, u)
    }

    /// Declared global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Whether `f(t, 0) = 0` was declared.
    pub fn vanishes_at_zero(&self) -> bool {
        self.vanishes_at_zero
    }

    /// Whether the term was declared time-invariant.
    pub fn time_invariant(&self) -> bool {
        self.time_invariant
    }

    /// Replaces the declared Lipschitz constant.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("lipschitz", &self.lipschitz)
            .field("vanishes_at_zero", &self.vanishes_at_zero)
            .field("time_invariant", &self.time_invariant)
            .finish_non_exhaustive()
    }
}

/// The full right-hand side of a semilinear system.
///
/// Time evaluation can be clamped to a window, which is how scenario runs
/// extend a generator constantly in time outside the interval they resolve.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    matrix: Arc<MatrixFn>,
    nonlinearity: Option<Nonlinearity>,
    matrix_autonomous: bool,
    time_window: Option<(f64, f64)>,
}

impl Generator {
    /// Linear generator with a constant coefficient matrix.
    pub fn constant(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "coefficient matrix must be square");
        let dim = a.nrows();
        Generator {
            dim,
            matrix: Arc::new(move |_| a.clone()),
            nonlinearity: None,
            matrix_autonomous: true,
            time_window: None,
        }
    }

    /// Linear generator with a time-dependent coefficient matrix.
    pub fn time_varying(
        dim: usize,
        matrix: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Generator {
            dim,
            matrix: Arc::new(matrix),
            nonlinearity: None,
            matrix_autonomous: false,
            time_window: None,
        }
    }

    /// Attaches a nonlinear term.
    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Self {
        self.nonlinearity = Some(nonlinearity);
        self
    }

    /// Removes the nonlinear term, keeping only the linear part.
    pub fn linear_part(&self) -> Generator {
        let mut g = self.clone();
        g.nonlinearity = None;
        g
    }

    /// Clamps all time evaluations into `[t_lo, t_hi]`.
    ///
    /// Outside the window the generator is frozen at the nearest endpoint.
    pub fn clamped(mut self, t_lo: f64, t_hi: f64) -> Self {
        assert!(t_lo < t_hi, "clamp window must be nonempty");
        self.time_window = Some((t_lo, t_hi));
        self
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether both the matrix and the nonlinearity are time-invariant.
    pub fn is_autonomous(&self) -> bool {
        self.matrix_autonomous
            && self
                .nonlinearity
                .as_ref()
                .map_or(true, Nonlinearity::time_invariant)
    }

    /// Attached nonlinear term, if any.
    pub fn nonlinearity(&self) -> Option<&Nonlinearity> {
        self.nonlinearity.as_ref()
    }

    fn effective_time(&self, t: f64) -> f64 {
        match self.time_window {
            Some((lo, hi)) => t.clamp(lo, hi),
            None => t,
        }
    }

    /// Coefficient matrix `A(t)`.
    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        (self.matrix)(self.effective_time(t))
    }

    /// Nonlinear term `f(t, u)`, zero when none is attached.
    pub fn nonlinear_at(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        match &self.nonlinearity {
            Some(nl) => nl.eval(self.effective_time(t), u),
            None => DVector::zeros(self.dim),
        }
    }

    /// Full field `A(t)u + f(t, u)`.
    pub fn field_at(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        let te = self.effective_time(t);
        let mut v = (self.matrix)(te) * u;
        if let Some(nl) = &self.nonlinearity {
            v += nl.eval(te, u);
        }
        v
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("dim", &self.dim)
            .field("matrix_autonomous", &self.matrix_autonomous)
            .field("nonlinearity", &self.nonlinearity)
            .field("time_window", &self.time_window)
            .finish_non_exhaustive()
    }
}
