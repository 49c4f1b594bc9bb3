//! Uniform time grids.

use crate::error::{Error, Result};

/// A uniform partition of a closed time interval.
///
/// The grid owns the step size used by the fixed-step integrators; solvers
/// subdivide between grid nodes but never step coarser than `step()`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Builds a grid over `[t_min, t_max]` with `n_steps` equal steps.
    pub fn new(t_min: f64, t_max: f64, n_steps: usize) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::non_finite("time grid endpoints"));
        }
        if t_max <= t_min {
            return Err(Error::invalid(format!(
                "time grid needs t_max > t_min, got [{t_min}, {t_max}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(TimeGrid {
            t_min,
            t_max,
            n_steps,
        })
    }

    /// Lower endpoint.
    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Upper endpoint.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Number of steps (one less than the number of nodes).
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Step size.
    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / self.n_steps as f64
    }

    /// The `i`-th node. Endpoints are reproduced exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_steps);
        let w = i as f64 / self.n_steps as f64;
        self.t_min * (1.0 - w) + self.t_max * w
    }

    /// Iterator over all nodes in increasing order.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.node(i))
    }

    /// Whether `t` lies in the closed interval covered by the grid.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    /// Clamps `t` into the covered interval.
    pub fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.t_min, self.t_max)
    }
}
