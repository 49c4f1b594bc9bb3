//! Nonlinear projections onto invariant graphs.
//!
//! `P(t)u` keeps the graph-coordinate part of `u` and replaces the
//! complementary part by the graph value there. Both maps land on the
//! manifold by construction, so applying them twice only re-reads the graph.

use nalgebra::DVector;

use crate::dichotomy::SplitFrame;
use crate::error::{Error, Result};
use crate::numerics::{
    eval_graph, eval_graph_clamped, GraphField, GraphOrientation, StateVector,
};

/// Total version of the graph projection used inside integrator step hooks:
/// coordinates beyond the tabulated box read the clamped edge value. Away
/// from the truncation support the nonlinearity vanishes, so the clamped
/// value never feeds back into the dynamics there.
pub(crate) fn reproject_clamped(
    field: &GraphField,
    frame: &SplitFrame,
    t: f64,
    u: DVector<f64>,
) -> DVector<f64> {
    match field.orientation() {
        GraphOrientation::Unstable => {
            let q = frame.q_coords(t, &u);
            let value = eval_graph_clamped(field, t, q.as_slice());
            frame.lift(t, &q, &value)
        }
        GraphOrientation::Stable => {
            let p = frame.p_coords(t, &u);
            let value = eval_graph_clamped(field, t, p.as_slice());
            frame.lift(t, &value, &p)
        }
    }
}

fn check_orientation(field: &GraphField, expected: GraphOrientation) -> Result<()> {
    if field.orientation() != expected {
        return Err(Error::invalid(format!(
            "projection expects a {expected:?}-oriented graph, got {:?}",
            field.orientation()
        )));
    }
    Ok(())
}

/// Projects `u` onto the graph over the backward-invertible bundle:
/// the coordinate part is `Q(t)u`, the complementary part the graph value.
///
/// Queries outside the tabulated box are an error; callers decide about
/// clamping explicitly.
pub fn project_sigma(
    field: &GraphField,
    frame: &SplitFrame,
    t: f64,
    u: &StateVector,
) -> Result<StateVector> {
    check_orientation(field, GraphOrientation::Unstable)?;
    let q = frame.q_coords(t, u.as_vector());
    if q.len() != field.axes().len() {
        return Err(Error::invalid(format!(
            "frame rank {} does not match graph coordinate count {}",
            q.len(),
            field.axes().len()
        )));
    }
    let value = eval_graph(field, t, q.as_slice())?;
    StateVector::from_column(frame.lift(t, &q, &value))
}

/// Projects `u` onto the graph over the forward-stable bundle: the
/// coordinate part is `(I - Q(t))u`, the range part the graph value.
pub fn project_theta(
    field: &GraphField,
    frame: &SplitFrame,
    t: f64,
    u: &StateVector,
) -> Result<StateVector> {
    check_orientation(field, GraphOrientation::Stable)?;
    let p = frame.p_coords(t, u.as_vector());
    if p.len() != field.axes().len() {
        return Err(Error::invalid(format!(
            "frame corank {} does not match graph coordinate count {}",
            p.len(),
            field.axes().len()
        )));
    }
    let value = eval_graph(field, t, p.as_slice())?;
    StateVector::from_column(frame.lift(t, &value, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::{ProjectionFamily, SplittingCertificate};
    use crate::numerics::AxisGrid;
    use nalgebra::{dmatrix, dvector, DVector};

    fn frame() -> SplitFrame {
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let family = ProjectionFamily::constant(q, -10.0, 10.0).unwrap();
        let cert = SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap();
        SplitFrame::from_certificate(&cert).unwrap()
    }

    /// Oracle graph x -> x^2 / 3 tabulated exactly.
    fn quadratic_field() -> GraphField {
        let axis = AxisGrid::symmetric(0.05, 5).unwrap();
        let slab: Vec<DVector<f64>> = (0..5)
            .map(|i| {
                let x = axis.node(i);
                dvector![x * x / 3.0]
            })
            .collect();
        GraphField::new(
            vec![0.0],
            vec![axis],
            vec![slab],
            1,
            0.47,
            0.1,
            GraphOrientation::Unstable,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn node_points_on_the_graph_are_fixed() {
        let f = quadratic_field();
        let fr = frame();
        let u = StateVector::new(vec![0.05, 0.05 * 0.05 / 3.0]).unwrap();
        let p = project_sigma(&f, &fr, 0.0, &u).unwrap();
        assert!((p.as_vector() - u.as_vector()).norm() < 1e-16);
    }

    #[test]
    fn quadratic_projection_replaces_the_kernel_part() {
        let f = quadratic_field();
        let fr = frame();
        let u = StateVector::new(vec![0.05, 0.01]).unwrap();
        let p = project_sigma(&f, &fr, 0.0, &u).unwrap();
        assert!((p[0] - 0.05).abs() < 1e-15);
        assert!((p[1] - 8.333e-4).abs() < 5e-7, "{}", p[1]);
    }

    #[test]
    fn projection_is_idempotent() {
        let f = quadratic_field();
        let fr = frame();
        let u = StateVector::new(vec![0.031, -0.2]).unwrap();
        let once = project_sigma(&f, &fr, 0.0, &u).unwrap();
        let twice = project_sigma(&f, &fr, 0.0, &once).unwrap();
        assert!(
            (once.as_vector() - twice.as_vector()).norm() <= 1e-12,
            "projection drifted by {}",
            (once.as_vector() - twice.as_vector()).norm()
        );
    }

    #[test]
    fn zero_graph_reduces_to_the_linear_projection() {
        let axis = AxisGrid::symmetric(1.0, 3).unwrap();
        let slab = vec![dvector![0.0]; 3];
        let f = GraphField::new(
            vec![0.0],
            vec![axis],
            vec![slab],
            1,
            0.0,
            0.1,
            GraphOrientation::Unstable,
            vec![],
        )
        .unwrap();
        let fr = frame();
        let u = StateVector::new(vec![0.7, -0.4]).unwrap();
        let p = project_sigma(&f, &fr, 0.0, &u).unwrap();
        assert_eq!(p[0], 0.7);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn out_of_extent_queries_error() {
        let f = quadratic_field();
        let fr = frame();
        let u = StateVector::new(vec![0.2, 0.0]).unwrap();
        assert!(project_sigma(&f, &fr, 0.0, &u).is_err());
    }

    #[test]
    fn theta_side_mirrors_the_roles() {
        // Oracle stable graph y -> x = -y^2 / 3.
        let axis = AxisGrid::symmetric(0.05, 5).unwrap();
        let slab: Vec<DVector<f64>> = (0..5)
            .map(|i| {
                let y = axis.node(i);
                dvector![-y * y / 3.0]
            })
            .collect();
        let f = GraphField::new(
            vec![0.0],
            vec![axis],
            vec![slab],
            1,
            0.47,
            0.1,
            GraphOrientation::Stable,
            vec![],
        )
        .unwrap();
        let fr = frame();
        let u = StateVector::new(vec![0.3, 0.05]).unwrap();
        let p = project_theta(&f, &fr, 0.0, &u).unwrap();
        assert!((p[1] - 0.05).abs() < 1e-15);
        assert!((p[0] - (-8.333e-4)).abs() < 5e-7);
        let err = project_sigma(&f, &fr, 0.0, &u).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
