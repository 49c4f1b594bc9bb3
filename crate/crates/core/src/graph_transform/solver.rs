//! Fixed-point solvers for invariant graph fields.
//!
//! Both solvers iterate the same two-pass scheme per grid node. For the graph
//! over the backward-invertible bundle: sweep the anchored coordinate equation
//! away from the node time (backward), then accumulate the projected source
//! along it back to the node time; the accumulated endpoint, read in the
//! complementary frame, is the next iterate's value. The stable-side solver is
//! the exact mirror (forward sweep, backward accumulation). All integrations
//! run in ambient coordinates with a per-step bundle projection, so no frame
//! rotation terms ever enter the right-hand sides.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dichotomy::{ProjectionFamily, SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::graph_transform::constants::ConstantsLedger;
use crate::graph_transform::cutoff::CutoffNonlinearity;
use crate::numerics::{
    eval_graph_clamped, integrate_dense, AxisGrid, Generator, GraphField, GraphOrientation,
    Nonlinearity, DEFAULT_BLOW_UP_CEILING,
};

/// Grid shape of a solved graph field: time nodes and a symmetric box of
/// graph coordinates, one axis per coordinate dimension.
#[derive(Debug, Clone)]
pub struct GraphGridSpec {
    /// Strictly increasing time nodes hosting one value slab each.
    pub times: Vec<f64>,
    /// Half-width of every coordinate axis.
    pub extent: f64,
    /// Node count per axis; odd, so the origin is a grid node.
    pub nodes_per_axis: usize,
    /// Slack granted on the stored field's grid Lipschitz quotients.
    pub grid_slack: f64,
}

impl GraphGridSpec {
    /// Single-slab grid, the natural shape for autonomous problems.
    pub fn single_time(t: f64, extent: f64, nodes_per_axis: usize) -> Self {
        GraphGridSpec {
            times: vec![t],
            extent,
            nodes_per_axis,
            grid_slack: 0.1,
        }
    }
}

/// Numerical controls of the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Sweep-to-sweep sup of `|change| / |coordinate|` that counts as converged.
    pub tol_fp: f64,
    /// Tail mass left outside the truncation horizon.
    pub tol_tail: f64,
    /// Upper bound on the integrator step.
    pub integrator_step: f64,
    /// Sweep budget before giving up.
    pub max_sweeps: usize,
    /// Overrides the horizon derived from `tol_tail` when set.
    pub horizon_override: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_fp: 1e-9,
            tol_tail: 1e-8,
            integrator_step: 0.01,
            max_sweeps: 60,
            horizon_override: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Unstable,
    Stable,
}

/// Per-side view of the splitting: which bundle carries the graph
/// coordinates and which carries the values.
struct SideSampler<'a> {
    side: Side,
    frame: &'a SplitFrame,
    family: &'a ProjectionFamily,
    /// Populated when the projector family is constant: coordinate basis,
    /// value basis, coordinate-side projector, value-side projector.
    cached: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

fn family_is_constant(family: &ProjectionFamily) -> bool {
    let times = family.times();
    let first = family.at(times[0]);
    times
        .iter()
        .all(|&t| (family.at(t) - &first).norm() <= 1e-13 * (1.0 + first.norm()))
}

impl<'a> SideSampler<'a> {
    fn new(side: Side, frame: &'a SplitFrame, family: &'a ProjectionFamily) -> Self {
        let cached = family_is_constant(family).then(|| {
            let t0 = family.times()[0];
            let (range, kernel) = frame.bases_at(t0);
            let q = family.at(t0);
            let p = family.complement_at(t0);
            match side {
                Side::Unstable => (range, kernel, q, p),
                Side::Stable => (kernel, range, p, q),
            }
        });
        SideSampler {
            side,
            frame,
            family,
            cached,
        }
    }

    fn bases(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        if let Some((c, v, _, _)) = &self.cached {
            return (c.clone(), v.clone());
        }
        let (range, kernel) = self.frame.bases_at(t);
        match self.side {
            Side::Unstable => (range, kernel),
            Side::Stable => (kernel, range),
        }
    }

    fn coords(&self, t: f64, u: &DVector<f64>) -> DVector<f64> {
        if let Some((c, _, _, _)) = &self.cached {
            return c.tr_mul(u);
        }
        self.bases(t).0.tr_mul(u)
    }

    fn lift_value(&self, t: f64, v: &DVector<f64>) -> DVector<f64> {
        if let Some((_, vb, _, _)) = &self.cached {
            return vb * v;
        }
        self.bases(t).1 * v
    }

    fn project_coord(&self, t: f64, u: DVector<f64>) -> DVector<f64> {
        if let Some((_, _, pc, _)) = &self.cached {
            return pc * u;
        }
        match self.side {
            Side::Unstable => self.family.at(t) * u,
            Side::Stable => self.family.complement_at(t) * u,
        }
    }

    fn project_value(&self, t: f64, u: DVector<f64>) -> DVector<f64> {
        if let Some((_, _, _, pv)) = &self.cached {
            return pv * u;
        }
        match self.side {
            Side::Unstable => self.family.complement_at(t) * u,
            Side::Stable => self.family.at(t) * u,
        }
    }

    /// Coordinate-side projector as a matrix, for source terms.
    fn coord_proj_matrix(&self, t: f64) -> DMatrix<f64> {
        if let Some((_, _, pc, _)) = &self.cached {
            return pc.clone();
        }
        match self.side {
            Side::Unstable => self.family.at(t),
            Side::Stable => self.family.complement_at(t),
        }
    }

    fn value_proj_matrix(&self, t: f64) -> DMatrix<f64> {
        if let Some((_, _, _, pv)) = &self.cached {
            return pv.clone();
        }
        match self.side {
            Side::Unstable => self.family.complement_at(t),
            Side::Stable => self.family.at(t),
        }
    }
}

fn flat_to_multi(mut flat: usize, coord_dim: usize, count: usize) -> Vec<usize> {
    let mut idx = vec![0usize; coord_dim];
    for k in (0..coord_dim).rev() {
        idx[k] = flat % count;
        flat /= count;
    }
    idx
}

/// One fixed-point update of a single grid node.
#[allow(clippy::too_many_arguments)]
fn node_value(
    sampler: &SideSampler<'_>,
    lin: &Generator,
    nl: &Nonlinearity,
    prev: &GraphField,
    tau: f64,
    eta: &DVector<f64>,
    horizon: f64,
    n_steps: usize,
    ceiling: f64,
) -> Result<DVector<f64>> {
    let d = lin.dim();
    let (coord_b, value_b) = sampler.bases(tau);
    let anchor = &coord_b * eta;
    let sweep_end = match sampler.side {
        Side::Unstable => tau - horizon,
        Side::Stable => tau + horizon,
    };

    // Anchored coordinate equation: u' = A u + P_coord f(u + graph offset).
    let sweep_field = |s: f64, u: &DVector<f64>| -> DVector<f64> {
        let g = sampler.coords(s, u);
        let offset = sampler.lift_value(s, &eval_graph_clamped(prev, s, g.as_slice()));
        lin.matrix_at(s) * u + sampler.coord_proj_matrix(s) * nl.eval(s, &(u + offset))
    };
    let track = integrate_dense(
        sweep_field,
        tau,
        sweep_end,
        anchor,
        n_steps,
        |s, u| sampler.project_coord(s, u),
        ceiling,
    )?;

    // Accumulation back toward the node time picks up the value-side source
    // along the swept coordinate path; its endpoint is the integral value.
    let acc_field = |s: f64, p: &DVector<f64>| -> DVector<f64> {
        let q_s = track.eval(s);
        let g = sampler.coords(s, &q_s);
        let offset = sampler.lift_value(s, &eval_graph_clamped(prev, s, g.as_slice()));
        lin.matrix_at(s) * p + sampler.value_proj_matrix(s) * nl.eval(s, &(&q_s + offset))
    };
    let acc = integrate_dense(
        acc_field,
        sweep_end,
        tau,
        DVector::zeros(d),
        n_steps,
        |s, p| sampler.project_value(s, p),
        ceiling,
    )?;
    let at_tau = match sampler.side {
        Side::Unstable => acc.last(),
        Side::Stable => acc.first(),
    };
    Ok(value_b.tr_mul(at_tau))
}

#[allow(clippy::too_many_arguments)]
fn graph_fixed_point(
    side: Side,
    proc: &Generator,
    cert: &SplittingCertificate,
    f: &CutoffNonlinearity,
    ledger: &ConstantsLedger,
    grid: &GraphGridSpec,
    opts: &SolveOptions,
) -> Result<GraphField> {
    let d = proc.dim();
    if cert.dim() != d {
        return Err(Error::invalid(format!(
            "certificate dimension {} does not match generator dimension {d}",
            cert.dim()
        )));
    }
    let nl = f.wrapped().clone();
    if !nl.vanishes_at_zero() {
        return Err(Error::precondition(
            "graph solvers need f(t, 0) = 0; shift the system onto a solution first",
        ));
    }
    if (ledger.ell - f.effective_ell()).abs() > 1e-12 * (1.0 + ledger.ell) {
        return Err(Error::invalid(format!(
            "ledger was built for ell = {}, field carries ell = {}",
            ledger.ell,
            f.effective_ell()
        )));
    }
    let r = cert.rank();
    let coord_dim = match side {
        Side::Unstable => r,
        Side::Stable => d - r,
    };
    let value_dim = d - coord_dim;
    if coord_dim == 0 || value_dim == 0 {
        return Err(Error::invalid(format!(
            "rank {r} of dimension {d} leaves no graph to solve on this side"
        )));
    }
    if grid.times.is_empty() {
        return Err(Error::invalid("grid needs at least one time node"));
    }
    if !(opts.integrator_step > 0.0 && opts.tol_fp > 0.0) {
        return Err(Error::invalid("integrator step and tol_fp must be positive"));
    }

    let horizon = match opts.horizon_override {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::invalid(format!("horizon must be positive, got {h}"))),
        None => ledger.tail_horizon(opts.tol_tail),
    };
    let n_steps = ((horizon / opts.integrator_step).ceil() as usize).max(8);

    // The coordinate sweep may grow along the horizon when its band sits
    // below zero (backward-invertible band with rho < 0, complementary band
    // with gamma < 0). The blow-up guard scales with the certified growth so
    // it only trips on genuine divergence beyond the splitting estimates.
    let sweep_rate = match side {
        Side::Unstable => (-ledger.rho).max(0.0),
        Side::Stable => (-ledger.gamma).max(0.0),
    };
    let drift = ledger.ell * ledger.m * (1.0 + ledger.kappa_chosen);
    let ceiling =
        DEFAULT_BLOW_UP_CEILING * (ledger.m * ((sweep_rate + drift) * horizon).exp()).max(1.0);

    let lin = proc.linear_part();
    let frame = SplitFrame::from_certificate(cert)?;
    let family = cert.projections();
    let sampler = SideSampler::new(side, &frame, family);
    let broadcast =
        sampler.cached.is_some() && lin.is_autonomous() && nl.time_invariant();
    let slab_times: Vec<f64> = if broadcast {
        vec![grid.times[0]]
    } else {
        grid.times.clone()
    };

    let axis = AxisGrid::symmetric(grid.extent, grid.nodes_per_axis)?;
    let axes = vec![axis; coord_dim];
    let n_q = axis.count().pow(coord_dim as u32);
    let etas: Vec<DVector<f64>> = (0..n_q)
        .map(|flat| {
            let idx = flat_to_multi(flat, coord_dim, axis.count());
            DVector::from_iterator(coord_dim, idx.iter().map(|&i| axis.node(i)))
        })
        .collect();
    let origin = etas
        .iter()
        .position(|e| e.iter().all(|x| *x == 0.0))
        .expect("symmetric axes always contain the origin node");

    let orientation = match side {
        Side::Unstable => GraphOrientation::Unstable,
        Side::Stable => GraphOrientation::Stable,
    };
    let metadata = |residual: f64, sweeps: usize| {
        let mut m = ledger.entries();
        m.push(("fp_residual".to_string(), residual));
        m.push(("sweeps".to_string(), sweeps as f64));
        m.push(("horizon".to_string(), horizon));
        m.push(("broadcast".to_string(), if broadcast { 1.0 } else { 0.0 }));
        m
    };

    let zero_slab = vec![DVector::zeros(value_dim); n_q];
    let mut current = GraphField::new(
        slab_times.clone(),
        axes.clone(),
        vec![zero_slab; slab_times.len()],
        value_dim,
        ledger.kappa_chosen,
        grid.grid_slack,
        orientation,
        metadata(f64::INFINITY, 0),
    )?;

    let jobs: Vec<(usize, usize)> = (0..slab_times.len())
        .flat_map(|si| (0..n_q).map(move |flat| (si, flat)))
        .collect();

    let mut last_diff = f64::INFINITY;
    let mut rising = 0usize;
    for sweep in 1..=opts.max_sweeps {
        let prev = &current;
        let updated: Vec<DVector<f64>> = jobs
            .par_iter()
            .map(|&(si, flat)| {
                if flat == origin {
                    return Ok(DVector::zeros(value_dim));
                }
                node_value(
                    &sampler,
                    &lin,
                    &nl,
                    prev,
                    slab_times[si],
                    &etas[flat],
                    horizon,
                    n_steps,
                    ceiling,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mut diff = 0.0f64;
        let mut slabs: Vec<Vec<DVector<f64>>> = Vec::with_capacity(slab_times.len());
        for si in 0..slab_times.len() {
            let mut slab = Vec::with_capacity(n_q);
            for flat in 0..n_q {
                let v = updated[si * n_q + flat].clone();
                if flat != origin {
                    let old = current.node_value(si, &flat_to_multi(flat, coord_dim, axis.count()));
                    diff = diff.max((&v - old).norm() / etas[flat].norm());
                }
                slab.push(v);
            }
            slabs.push(slab);
        }

        current = GraphField::new(
            slab_times.clone(),
            axes.clone(),
            slabs,
            value_dim,
            ledger.kappa_chosen,
            grid.grid_slack,
            orientation,
            metadata(diff, sweep),
        )?;

        if diff <= opts.tol_fp {
            return finalize(current, grid, broadcast);
        }
        if diff > last_diff {
            rising += 1;
            if rising >= 3 {
                return Err(Error::ContractionFailure {
                    iterations: sweep,
                    measured: diff / last_diff,
                    bound: ledger.nu,
                });
            }
        } else {
            rising = 0;
        }
        last_diff = diff;
    }
    Err(Error::ContractionFailure {
        iterations: opts.max_sweeps,
        measured: last_diff,
        bound: ledger.nu,
    })
}

/// Replicates a broadcast slab onto the caller's full time grid.
fn finalize(field: GraphField, grid: &GraphGridSpec, broadcast: bool) -> Result<GraphField> {
    if !broadcast || grid.times.len() == 1 {
        return Ok(field);
    }
    let n_q: usize = field.axes().iter().map(AxisGrid::count).product();
    let coord_dim = field.axes().len();
    let count = field.axes()[0].count();
    let slab: Vec<DVector<f64>> = (0..n_q)
        .map(|flat| field.node_value(0, &flat_to_multi(flat, coord_dim, count)).clone())
        .collect();
    GraphField::new(
        grid.times.clone(),
        field.axes().to_vec(),
        vec![slab; grid.times.len()],
        field.value_dim(),
        field.kappa(),
        field.grid_slack(),
        field.orientation(),
        field.metadata().to_vec(),
    )
}

/// Solves for the invariant graph over the backward-invertible bundle
/// (the inertial/unstable side).
///
/// Only the linear part of `proc` is used; the nonlinear term comes from `f`.
/// The ledger must have been built with `f`'s effective Lipschitz constant.
pub fn solve_sigma(
    proc: &Generator,
    cert: &SplittingCertificate,
    f: &CutoffNonlinearity,
    ledger: &ConstantsLedger,
    grid: &GraphGridSpec,
    opts: &SolveOptions,
) -> Result<GraphField> {
    graph_fixed_point(Side::Unstable, proc, cert, f, ledger, grid, opts)
}

/// Solves for the invariant graph over the complementary (forward-stable)
/// bundle.
pub fn solve_theta(
    proc: &Generator,
    cert: &SplittingCertificate,
    f: &CutoffNonlinearity,
    ledger: &ConstantsLedger,
    grid: &GraphGridSpec,
    opts: &SolveOptions,
) -> Result<GraphField> {
    graph_fixed_point(Side::Stable, proc, cert, f, ledger, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_transform::constants::constants_ledger;
    use crate::graph_transform::cutoff::cutoff;
    use nalgebra::{dmatrix, dvector};

    fn saddle_cert() -> SplittingCertificate {
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let family = ProjectionFamily::constant(q, -40.0, 40.0).unwrap();
        SplittingCertificate::new(family, 1.0, 1.0, -1.0).unwrap()
    }

    fn quadratic_setup() -> (Generator, SplittingCertificate, CutoffNonlinearity, ConstantsLedger)
    {
        let gen = Generator::constant(dmatrix![1.0, 0.0; 0.0, -1.0]);
        let f = Nonlinearity::autonomous(
            |u: &DVector<f64>| dvector![0.0, u[0] * u[0]],
            1.0,
            true,
        );
        let cut = cutoff(&f, 2, 0.15, 0.15).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, cut.effective_ell(), None).unwrap();
        (gen, saddle_cert(), cut, ledger)
    }

    #[test]
    fn zero_field_fixes_at_zero_in_one_sweep() {
        let gen = Generator::constant(dmatrix![1.0, 0.0; 0.0, -1.0]);
        let zero = Nonlinearity::autonomous(|u: &DVector<f64>| DVector::zeros(u.len()), 0.0, true);
        let cut = CutoffNonlinearity::unbounded(&zero, 0.0).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, 0.0, None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.5, 5);
        let field =
            solve_sigma(&gen, &saddle_cert(), &cut, &ledger, &grid, &SolveOptions::default())
                .unwrap();
        for i in 0..5 {
            assert_eq!(field.node_value(0, &[i]).norm(), 0.0);
        }
        let sweeps = field
            .metadata()
            .iter()
            .find(|(k, _)| k == "sweeps")
            .unwrap()
            .1;
        assert_eq!(sweeps, 1.0);
    }

    #[test]
    fn quadratic_graph_matches_the_series_oracle() {
        // Invariance equation sigma'(x) * x = -sigma + x^2 has the bounded
        // solution sigma = x^2 / 3; the cut-off field agrees on this box.
        let (gen, cert, cut, ledger) = quadratic_setup();
        let grid = GraphGridSpec::single_time(0.0, 0.05, 11);
        let field =
            solve_sigma(&gen, &cert, &cut, &ledger, &grid, &SolveOptions::default()).unwrap();
        let axis = field.axes()[0];
        for i in 0..axis.count() {
            let x = axis.node(i);
            let v = field.node_value(0, &[i]);
            assert!(
                (v.norm() - x * x / 3.0).abs() < 5e-3,
                "node {x}: |value| = {} vs {}",
                v.norm(),
                x * x / 3.0
            );
        }
        // Pinned spot value at the box edge.
        let edge = field.node_value(0, &[axis.count() - 1]);
        assert!((edge.norm() - 8.333e-4).abs() < 2e-5, "{}", edge.norm());
        let residual = field
            .metadata()
            .iter()
            .find(|(k, _)| k == "fp_residual")
            .unwrap()
            .1;
        assert!(residual <= 1e-9);
    }

    #[test]
    fn stable_graph_of_the_quadratic_saddle_is_flat() {
        // x(t) bounded backward forces x = 0, so the stable graph collapses
        // onto the kernel axis even though f is nonzero.
        let (gen, cert, cut, ledger) = quadratic_setup();
        let grid = GraphGridSpec::single_time(0.0, 0.05, 9);
        let field =
            solve_theta(&gen, &cert, &cut, &ledger, &grid, &SolveOptions::default()).unwrap();
        for i in 0..9 {
            assert!(field.node_value(0, &[i]).norm() <= 1e-9);
        }
    }

    #[test]
    fn mirrored_quadratic_lands_on_the_negative_branch() {
        // x' = x + y^2, y' = -y: the stable graph is x = -y^2 / 3.
        let gen = Generator::constant(dmatrix![1.0, 0.0; 0.0, -1.0]);
        let f = Nonlinearity::autonomous(
            |u: &DVector<f64>| dvector![u[1] * u[1], 0.0],
            1.0,
            true,
        );
        let cut = cutoff(&f, 2, 0.15, 0.15).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, cut.effective_ell(), None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.05, 11);
        let field =
            solve_theta(&gen, &saddle_cert(), &cut, &ledger, &grid, &SolveOptions::default())
                .unwrap();
        let frame = SplitFrame::from_certificate(&saddle_cert()).unwrap();
        let axis = field.axes()[0];
        for i in 0..axis.count() {
            let y = axis.node(i);
            // Ambient reconstruction fixes the sign: value lives on the x-axis.
            let ambient = frame.lift(0.0, field.node_value(0, &[i]), &dvector![y]);
            assert!(
                (ambient[0] - (-y * y / 3.0)).abs() < 5e-3,
                "node {y}: x = {} vs {}",
                ambient[0],
                -y * y / 3.0
            );
        }
    }

    #[test]
    fn linear_coupling_gives_a_linear_graph() {
        // With f = B u the graph is the slow eigenline of A + B; slope
        // (lambda - 1) / b for the symmetric swap coupling.
        let gen = Generator::constant(dmatrix![1.0, 0.0; 0.0, -1.0]);
        let b = 0.05;
        let f = Nonlinearity::autonomous(
            move |u: &DVector<f64>| dvector![b * u[1], b * u[0]],
            b,
            true,
        );
        let cut = CutoffNonlinearity::unbounded(&f, b).unwrap();
        let ledger = constants_ledger(1.0, 1.0, -1.0, b, None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.5, 5);
        let field =
            solve_sigma(&gen, &saddle_cert(), &cut, &ledger, &grid, &SolveOptions::default())
                .unwrap();
        let lambda = 1.0025f64.sqrt();
        let slope = (lambda - 1.0) / b;
        let frame = SplitFrame::from_certificate(&saddle_cert()).unwrap();
        let at = |i: usize| {
            let x = field.axes()[0].node(i);
            let amb = frame.lift(0.0, &dvector![x], field.node_value(0, &[i]));
            (x, amb[1])
        };
        let (x4, y4) = at(4);
        assert!((y4 / x4 - slope).abs() < 1e-5, "slope {} vs {slope}", y4 / x4);
        // Superposition: node values scale linearly in the coordinate.
        let (x3, y3) = at(3);
        assert!((y4 * (x3 / x4) - y3).abs() < 1e-8);
        let (x0, y0) = at(0);
        assert!((y0 + y4).abs() < 1e-8, "odd symmetry broken: {y0} vs {y4}, x0 {x0}");
    }

    #[test]
    fn understated_budget_is_rejected_with_the_field() {
        // A kappa claimed 10x too small cannot absorb the quadratic graph's
        // slope on this wider box; construction of the iterate must fail.
        let (gen, cert, cut, mut ledger) = quadratic_setup();
        ledger.kappa_chosen /= 10.0;
        let grid = GraphGridSpec::single_time(0.0, 0.1, 9);
        let err = solve_sigma(&gen, &cert, &cut, &ledger, &grid, &SolveOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "got {err}");
    }

    #[test]
    fn mismatched_ledger_is_rejected() {
        let (gen, cert, cut, _) = quadratic_setup();
        let other = constants_ledger(1.0, 1.0, -1.0, 0.01, None).unwrap();
        let grid = GraphGridSpec::single_time(0.0, 0.05, 5);
        let err = solve_sigma(&gen, &cert, &cut, &other, &grid, &SolveOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
