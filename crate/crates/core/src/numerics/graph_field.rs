//! Tabulated graphs `(t, q) -> value` over a box of graph coordinates.
//!
//! A graph field is the discrete representation of a manifold graph: values on
//! a tensor grid of graph coordinates, one slab per time node, interpolated
//! multilinearly in `q` and linearly in `t`. Construction validates the zero
//! section and a finite-difference Lipschitz budget, so a `GraphField` in hand
//! is already a certificate of those two properties on its grid.

use crate::error::{Error, Result};
use crate::numerics::fmt_float;
use nalgebra::DVector;
use std::io::{BufRead, Write};

/// Uniform grid on one graph-coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGrid {
    min: f64,
    max: f64,
    count: usize,
}

impl AxisGrid {
    /// Builds an axis with `count >= 2` nodes on `[min, max]`.
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::non_finite("axis extents"));
        }
        if max <= min {
            return Err(Error::invalid(format!(
                "axis needs max > min, got [{min}, {max}]"
            )));
        }
        if count < 2 {
            return Err(Error::invalid("axis needs at least two nodes"));
        }
        Ok(AxisGrid { min, max, count })
    }

    /// Symmetric axis `[-extent, extent]` with an odd node count, so the
    /// origin is a grid node.
    pub fn symmetric(extent: f64, count: usize) -> Result<Self> {
        if count % 2 == 0 {
            return Err(Error::invalid(
                "symmetric axis needs an odd node count so 0 is a node",
            ));
        }
        if !(extent > 0.0) {
            return Err(Error::invalid("symmetric axis needs a positive extent"));
        }
        AxisGrid::new(-extent, extent, count)
    }

    /// Lower extent.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// Upper extent.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Node count.
    pub fn count(&self) -> usize {
        self.count
    }

    /// The `i`-th node; endpoints are exact and symmetric midpoints land on 0.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        let w = i as f64 / (self.count - 1) as f64;
        self.min * (1.0 - w) + self.max * w
    }

    /// Node spacing.
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    /// Cell index and interpolation weight for `x` inside the axis range.
    fn locate(&self, x: f64) -> (usize, f64) {
        let cells = (self.count - 1) as f64;
        let s = ((x - self.min) / (self.max - self.min) * cells).clamp(0.0, cells);
        let i = (s.floor() as usize).min(self.count - 2);
        (i, s - i as f64)
    }

    fn contains(&self, x: f64) -> bool {
        let tol = (self.max - self.min) * 1e-12;
        x >= self.min - tol && x <= self.max + tol
    }
}

/// Which subspace the graph coordinates parameterize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOrientation {
    /// Graph over the projected (backward-invertible) subspace `Im Q`.
    Unstable,
    /// Graph over the complementary subspace `Ker Q`.
    Stable,
}

impl GraphOrientation {
    fn label(self) -> &'static str {
        match self {
            GraphOrientation::Unstable => "unstable",
            GraphOrientation::Stable => "stable",
        }
    }
}

/// Discrete manifold graph with certified zero section and Lipschitz budget.
#[derive(Debug, Clone)]
pub struct GraphField {
    times: Vec<f64>,
    axes: Vec<AxisGrid>,
    /// `values[time][flat_q]`, flat index row-major with the last axis fastest.
    values: Vec<Vec<DVector<f64>>>,
    value_dim: usize,
    kappa: f64,
    grid_slack: f64,
    orientation: GraphOrientation,
    metadata: Vec<(String, f64)>,
}

impl GraphField {
    /// Validating constructor.
    ///
    /// Rejects non-finite data, a nonzero value at the `q = 0` node, and any
    /// adjacent-node difference quotient above `kappa * (1 + grid_slack)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        times: Vec<f64>,
        axes: Vec<AxisGrid>,
        values: Vec<Vec<DVector<f64>>>,
        value_dim: usize,
        kappa: f64,
        grid_slack: f64,
        orientation: GraphOrientation,
        metadata: Vec<(String, f64)>,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("graph field needs at least one time node"));
        }
        if !times.iter().all(|t| t.is_finite()) {
            return Err(Error::non_finite("graph field time nodes"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("graph field time nodes must increase"));
        }
        if axes.is_empty() {
            return Err(Error::invalid("graph field needs at least one axis"));
        }
        if !(kappa >= 0.0) || !(grid_slack >= 0.0) {
            return Err(Error::invalid("kappa and grid_slack must be nonnegative"));
        }
        let n_q: usize = axes.iter().map(AxisGrid::count).product();
        if values.len() != times.len() || values.iter().any(|slab| slab.len() != n_q) {
            return Err(Error::invalid("graph field value table has wrong shape"));
        }
        for slab in &values {
            for v in slab {
                if v.len() != value_dim {
                    return Err(Error::invalid("graph field value has wrong dimension"));
                }
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(Error::non_finite("graph field values"));
                }
            }
        }

        let field = GraphField {
            times,
            axes,
            values,
            value_dim,
            kappa,
            grid_slack,
            orientation,
            metadata,
        };

        if let Some(origin) = field.origin_flat_index() {
            for (ti, slab) in field.values.iter().enumerate() {
                if slab[origin].iter().any(|x| *x != 0.0) {
                    return Err(Error::invalid(format!(
                        "graph field must vanish at q = 0 (time node {ti})"
                    )));
                }
            }
        }

        let measured = field.grid_lipschitz();
        let budget = field.kappa * (1.0 + field.grid_slack) + 1e-14;
        if measured > budget {
            return Err(Error::invalid(format!(
                "graph field difference quotient {measured:.6e} exceeds budget {budget:.6e}"
            )));
        }

        Ok(field)
    }

    /// Flat index of the all-zero `q` node, when every axis has one.
    fn origin_flat_index(&self) -> Option<usize> {
        let mut flat = 0;
        for axis in &self.axes {
            let zero = (0..axis.count()).find(|&i| axis.node(i) == 0.0)?;
            flat = flat * axis.count() + zero;
        }
        Some(flat)
    }

    /// Largest finite-difference slope between adjacent `q` nodes.
    pub fn grid_lipschitz(&self) -> f64 {
        let mut worst = 0.0f64;
        let strides = self.strides();
        for slab in &self.values {
            for (k, axis) in self.axes.iter().enumerate() {
                let dq = axis.spacing();
                for flat in 0..slab.len() {
                    let idx_k = (flat / strides[k]) % axis.count();
                    if idx_k + 1 < axis.count() {
                        let diff = (&slab[flat + strides[k]] - &slab[flat]).norm();
                        worst = worst.max(diff / dq);
                    }
                }
            }
        }
        worst
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.axes.len()];
        for k in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].count();
        }
        strides
    }

    /// Time nodes.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Graph-coordinate axes.
    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    /// Dimension of the stored values.
    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    /// Certified Lipschitz bound of `q -> value`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Slack allowed on the grid difference quotients.
    pub fn grid_slack(&self) -> f64 {
        self.grid_slack
    }

    /// Graph orientation.
    pub fn orientation(&self) -> GraphOrientation {
        self.orientation
    }

    /// Constants recorded by the solver that produced the field.
    pub fn metadata(&self) -> &[(String, f64)] {
        &self.metadata
    }

    /// Stored value at a `(time index, q multi-index)` node.
    pub fn node_value(&self, time_idx: usize, q_idx: &[usize]) -> &DVector<f64> {
        let strides = self.strides();
        let flat: usize = q_idx
            .iter()
            .zip(&strides)
            .map(|(&i, &s)| i * s)
            .sum();
        &self.values[time_idx][flat]
    }

    fn q_in_range(&self, q: &[f64]) -> bool {
        q.iter().zip(&self.axes).all(|(&x, a)| a.contains(x))
    }

    fn interp_slab(&self, slab: usize, q: &[f64]) -> DVector<f64> {
        let strides = self.strides();
        let locs: Vec<(usize, f64)> = q
            .iter()
            .zip(&self.axes)
            .map(|(&x, a)| a.locate(x))
            .collect();
        let mut out = DVector::zeros(self.value_dim);
        let corners = 1usize << self.axes.len();
        for corner in 0..corners {
            let mut w = 1.0;
            let mut flat = 0usize;
            for (k, &(i, s)) in locs.iter().enumerate() {
                let hi = (corner >> k) & 1 == 1;
                w *= if hi { s } else { 1.0 - s };
                flat += (i + hi as usize) * strides[k];
            }
            if w != 0.0 {
                out += &self.values[slab][flat] * w;
            }
        }
        out
    }

    fn exact_node(&self, t: f64, q: &[f64]) -> Option<DVector<f64>> {
        let ti = self.times.iter().position(|&x| x == t)?;
        let mut flat = 0usize;
        for (&x, axis) in q.iter().zip(&self.axes) {
            let i = (0..axis.count()).find(|&i| axis.node(i) == x)?;
            flat = flat * axis.count() + i;
        }
        Some(self.values[ti][flat].clone())
    }

    fn eval_inner(&self, t: f64, q: &[f64]) -> DVector<f64> {
        if let Some(v) = self.exact_node(t, q) {
            return v;
        }
        if self.times.len() == 1 {
            // A single slab means the field is constant in time.
            return self.interp_slab(0, q);
        }
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let j = match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
        {
            Ok(j) => return self.interp_slab(j, q),
            Err(j) => j.clamp(1, self.times.len() - 1) - 1,
        };
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.interp_slab(j, q) * (1.0 - w) + self.interp_slab(j + 1, q) * w
    }

    /// Writes the field in its line-oriented text format.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "graph-field")?;
        writeln!(w, "orientation {}", self.orientation.label())?;
        writeln!(w, "value_dim {}", self.value_dim)?;
        writeln!(w, "kappa {}", fmt_float(self.kappa))?;
        writeln!(w, "grid_slack {}", fmt_float(self.grid_slack))?;
        let times: Vec<String> = self.times.iter().map(|&t| fmt_float(t)).collect();
        writeln!(w, "times {} {}", self.times.len(), times.join(" "))?;
        writeln!(w, "axes {}", self.axes.len())?;
        for a in &self.axes {
            writeln!(
                w,
                "axis {} {} {}",
                fmt_float(a.min),
                fmt_float(a.max),
                a.count
            )?;
        }
        writeln!(w, "meta {}", self.metadata.len())?;
        for (k, v) in &self.metadata {
            writeln!(w, "{k} {}", fmt_float(*v))?;
        }
        let n_q: usize = self.axes.iter().map(AxisGrid::count).product();
        writeln!(w, "nodes {}", self.times.len() * n_q)?;
        for (ti, slab) in self.values.iter().enumerate() {
            for (flat, v) in slab.iter().enumerate() {
                let mut line = ti.to_string();
                let mut rem = flat;
                let strides = self.strides();
                for (k, _) in self.axes.iter().enumerate() {
                    let i = rem / strides[k];
                    rem %= strides[k];
                    line.push(' ');
                    line.push_str(&i.to_string());
                }
                for x in v.iter() {
                    line.push(' ');
                    line.push_str(&fmt_float(*x));
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    /// Serializes to a string in the text format.
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("text format is UTF-8")
    }

    /// Parses the text format produced by [`GraphField::write_to`].
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((i, Err(e))) => Err(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                }),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of input, expected {expect}"),
                }),
            }
        };

        let (ln, magic) = next("header")?;
        if magic.trim() != "graph-field" {
            return Err(Error::Parse {
                line: ln,
                message: "expected 'graph-field' header".into(),
            });
        }

        fn field<'a>(line: &'a str, ln: usize, key: &str) -> Result<&'a str> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .ok_or_else(|| Error::Parse {
                    line: ln,
                    message: format!("expected '{key} ...'"),
                })
        }
        fn parse_f64(s: &str, ln: usize) -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("bad float {s:?}"),
            })
        }
        fn parse_usize(s: &str, ln: usize) -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("bad integer {s:?}"),
            })
        }

        let (ln, line) = next("orientation")?;
        let orientation = match field(&line, ln, "orientation")? {
            "unstable" => GraphOrientation::Unstable,
            "stable" => GraphOrientation::Stable,
            other => {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("unknown orientation {other:?}"),
                })
            }
        };

        let (ln, line) = next("value_dim")?;
        let value_dim = parse_usize(field(&line, ln, "value_dim")?, ln)?;
        let (ln, line) = next("kappa")?;
        let kappa = parse_f64(field(&line, ln, "kappa")?, ln)?;
        let (ln, line) = next("grid_slack")?;
        let grid_slack = parse_f64(field(&line, ln, "grid_slack")?, ln)?;

        let (ln, line) = next("times")?;
        let rest = field(&line, ln, "times")?;
        let mut it = rest.split_whitespace();
        let n_times = parse_usize(it.next().unwrap_or(""), ln)?;
        let times: Vec<f64> = it
            .map(|s| parse_f64(s, ln))
            .collect::<Result<Vec<_>>>()?;
        if times.len() != n_times {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected {n_times} time nodes, found {}", times.len()),
            });
        }

        let (ln, line) = next("axes")?;
        let n_axes = parse_usize(field(&line, ln, "axes")?, ln)?;
        let mut axes = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            let (ln, line) = next("axis")?;
            let rest = field(&line, ln, "axis")?;
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: ln,
                    message: "axis line needs min max count".into(),
                });
            }
            axes.push(AxisGrid::new(
                parse_f64(parts[0], ln)?,
                parse_f64(parts[1], ln)?,
                parse_usize(parts[2], ln)?,
            )?);
        }

        let (ln, line) = next("meta")?;
        let n_meta = parse_usize(field(&line, ln, "meta")?, ln)?;
        let mut metadata = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            let (ln, line) = next("meta entry")?;
            let (k, v) = line.rsplit_once(' ').ok_or_else(|| Error::Parse {
                line: ln,
                message: "meta entry needs 'key value'".into(),
            })?;
            metadata.push((k.to_string(), parse_f64(v, ln)?));
        }

        let (ln, line) = next("nodes")?;
        let n_nodes = parse_usize(field(&line, ln, "nodes")?, ln)?;
        let n_q: usize = axes.iter().map(AxisGrid::count).product();
        if n_nodes != times.len() * n_q {
            return Err(Error::Parse {
                line: ln,
                message: format!(
                    "node count {n_nodes} does not match {} slabs x {n_q} grid nodes",
                    times.len()
                ),
            });
        }
        let mut values = vec![vec![DVector::zeros(value_dim); n_q]; times.len()];
        let mut strides = vec![1usize; n_axes];
        for k in (0..n_axes.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].count();
        }
        for rec in 0..n_nodes {
            let (ln, line) = next("node record")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 1 + n_axes + value_dim {
                return Err(Error::Parse {
                    line: ln,
                    message: format!(
                        "node record needs {} fields, found {}",
                        1 + n_axes + value_dim,
                        parts.len()
                    ),
                });
            }
            let ti = parse_usize(parts[0], ln)?;
            let mut flat = 0usize;
            for k in 0..n_axes {
                let i = parse_usize(parts[1 + k], ln)?;
                if ti >= times.len() || i >= axes[k].count() {
                    return Err(Error::Parse {
                        line: ln,
                        message: "node index out of range".into(),
                    });
                }
                flat += i * strides[k];
            }
            let expected_flat = rec % n_q;
            let expected_ti = rec / n_q;
            if ti != expected_ti || flat != expected_flat {
                return Err(Error::Parse {
                    line: ln,
                    message: "node records must appear in canonical order".into(),
                });
            }
            let mut v = DVector::zeros(value_dim);
            for j in 0..value_dim {
                v[j] = parse_f64(parts[1 + n_axes + j], ln)?;
            }
            values[ti][flat] = v;
        }

        GraphField::new(
            times, axes, values, value_dim, kappa, grid_slack, orientation, metadata,
        )
    }

    /// Parses the text format from a string.
    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

/// Interpolated graph value at `(t, q)`.
///
/// Queries outside the grid are an error; callers that want saturation must
/// opt in through [`eval_graph_clamped`]. Node queries return stored values
/// bit-for-bit.
pub fn eval_graph(field: &GraphField, t: f64, q: &[f64]) -> Result<DVector<f64>> {
    if q.len() != field.axes.len() {
        return Err(Error::invalid(format!(
            "graph query has {} coordinates, field has {} axes",
            q.len(),
            field.axes.len()
        )));
    }
    if !t.is_finite() || !q.iter().all(|x| x.is_finite()) {
        return Err(Error::non_finite("graph query"));
    }
    if !field.q_in_range(q) {
        return Err(Error::invalid(format!(
            "graph query {q:?} outside the tabulated box"
        )));
    }
    if field.times.len() > 1 {
        let (lo, hi) = (field.times[0], *field.times.last().unwrap());
        let tol = (hi - lo) * 1e-12;
        if t < lo - tol || t > hi + tol {
            return Err(Error::invalid(format!(
                "graph query time {t} outside [{lo}, {hi}]"
            )));
        }
    }
    Ok(field.eval_inner(t, q))
}

/// Interpolated graph value with both `t` and `q` clamped into the grid box.
pub fn eval_graph_clamped(field: &GraphField, t: f64, q: &[f64]) -> DVector<f64> {
    debug_assert_eq!(q.len(), field.axes.len());
    let qc: Vec<f64> = q
        .iter()
        .zip(&field.axes)
        .map(|(&x, a)| x.clamp(a.min, a.max))
        .collect();
    field.eval_inner(t, &qc)
}
