//! Persistence of an exponential dichotomy under a bounded linear
//! perturbation.
//!
//! Adding a term `B(t)u` with `sup_t ||B(t)|| <= ell` below an explicit budget
//! leaves a dichotomic linear process dichotomic. The perturbed projections
//! are assembled from the two invariant graphs of the perturbed process: the
//! fixed point of `v -> u - Sigma(t, v) - Theta(t, v)` splits any `u` into a
//! part on the perturbed unstable graph and a remainder on the stable one,
//! and the certified constants degrade in closed form.

use crate::dichotomy::{verify_splitting, ProjectionFamily, SplitFrame, SplittingCertificate};
use crate::error::{Error, Result};
use crate::graph_transform::{
    constants_ledger, solve_sigma, solve_theta, ConstantsLedger, CutoffNonlinearity,
    GraphGridSpec, SolveOptions,
};
use crate::numerics::{
    eval_graph, fmt_float, operator_norm, Generator, GraphField, GraphOrientation, Nonlinearity,
    StateVector,
};
use crate::report::{Check, CheckKind, CheckSet};
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// Superposition residual above which a "linear" graph is treated as a solver
/// defect rather than noise.
const LINEAR_TOL: f64 = 1e-8;

/// Iteration cap for the projection fixed point; the contraction factor is
/// below one by precondition, so hitting this is reported as a stall.
const MAX_FP_ITERS: usize = 256;

/// Fraction of the admissible perturbation budget above which a certificate
/// is flagged as thin.
const THIN_FRACTION: f64 = 0.99;

/// Admissibility of a perturbation size against the dichotomy constants.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationBudget {
    /// Largest admissible Lipschitz size, `2 gamma / (3 m (m + 1))`.
    pub bound: f64,
    /// The size that was tested.
    pub ell: f64,
    /// `bound - ell`.
    pub margin: f64,
    /// Whether `ell` is strictly below the bound.
    pub pass: bool,
    /// Passing, but with less than 1% of the budget to spare.
    pub thin: bool,
}

/// Checks a perturbation size against the roughness budget.
///
/// Persistence of the dichotomy is guaranteed for `ell` strictly below
/// `2 gamma / (3 m (m + 1))`; equality does not pass.
pub fn perturbation_bound(gamma: f64, m: f64, ell: f64) -> Result<PerturbationBudget> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!(
            "perturbation budget needs gamma > 0, got {gamma}"
        )));
    }
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::invalid(format!(
            "perturbation budget needs m >= 1, got {m}"
        )));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::invalid(format!(
            "perturbation size must be finite and nonnegative, got {ell}"
        )));
    }
    let bound = 2.0 * gamma / (3.0 * m * (m + 1.0));
    let pass = ell < bound;
    Ok(PerturbationBudget {
        bound,
        ell,
        margin: bound - ell,
        pass,
        thin: pass && ell >= THIN_FRACTION * bound,
    })
}

/// The two invariant graphs of a linearly perturbed process, with the
/// constants ledger they were solved under.
#[derive(Debug)]
pub struct LinearGraphs {
    /// Graph over the backward-invertible bundle; linear in its coordinates.
    pub sigma: GraphField,
    /// Graph over the complementary bundle; linear in its coordinates.
    pub theta: GraphField,
    /// Ledger for `(m, gamma, rho, ell)`; its kappa is the one both graphs
    /// are certified against.
    pub ledger: ConstantsLedger,
    /// Budget record for `ell`.
    pub budget: PerturbationBudget,
}

/// Solves the invariant graphs of `u' = A(t)u + B(t)u`.
///
/// The perturbation rides along as the nonlinear term `f(t, u) = B(t)u`, so
/// the graph solvers apply verbatim; afterwards both outputs are checked to
/// be linear (superposition on sampled coordinates), since anything else
/// signals a solver defect. `b` must be a purely linear generator whose
/// sampled norm stays within the declared `ell`.
pub fn linear_graphs(
    proc: &Generator,
    cert: &SplittingCertificate,
    b: &Generator,
    ell: f64,
    grid: &GraphGridSpec,
    opts: &SolveOptions,
) -> Result<LinearGraphs> {
    if b.dim() != proc.dim() || b.dim() != cert.dim() {
        return Err(Error::invalid(format!(
            "perturbation dimension {} does not match process dimension {}",
            b.dim(),
            cert.dim()
        )));
    }
    if b.nonlinearity().is_some() {
        return Err(Error::invalid(
            "perturbation must be a linear generator; it carries a nonlinear term",
        ));
    }
    if cert.rank() == 0 || cert.rank() == cert.dim() {
        return Err(Error::invalid(
            "perturbation analysis needs a proper splitting, not a one-sided one",
        ));
    }
    let measured = sampled_perturbation_norm(b, cert);
    if measured > ell * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::precondition(format!(
            "sampled perturbation norm {measured:.6e} exceeds the declared size {ell:.6e}"
        )));
    }
    let budget = perturbation_bound(cert.gamma(), cert.m(), ell)?;
    if !budget.pass {
        return Err(Error::precondition(format!(
            "perturbation size {ell:.6e} is not below the roughness budget {:.6e}",
            budget.bound
        )));
    }

    let ledger = constants_ledger(cert.m(), cert.gamma(), cert.rho(), ell, None)?;
    let nl = if b.is_autonomous() {
        let bm = b.matrix_at(0.0);
        Nonlinearity::autonomous(move |u| &bm * u, ell, true)
    } else {
        let bg = b.clone();
        Nonlinearity::new(move |t, u| bg.matrix_at(t) * u, ell, true)
    };
    let f = CutoffNonlinearity::unbounded(&nl, ell)?;
    let sigma = solve_sigma(proc, cert, &f, &ledger, grid, opts)?;
    let theta = solve_theta(proc, cert, &f, &ledger, grid, opts)?;
    assert_graph_linear(&sigma, "sigma")?;
    assert_graph_linear(&theta, "theta")?;
    Ok(LinearGraphs {
        sigma,
        theta,
        ledger,
        budget,
    })
}

/// Largest sampled `||B(t)||` over the certificate's nodes and midpoints.
fn sampled_perturbation_norm(b: &Generator, cert: &SplittingCertificate) -> f64 {
    let nodes = cert.projections().times();
    if b.is_autonomous() {
        return operator_norm(&b.matrix_at(nodes[0]));
    }
    let mut worst = 0.0f64;
    for (i, &t) in nodes.iter().enumerate() {
        worst = worst.max(operator_norm(&b.matrix_at(t)));
        if i + 1 < nodes.len() {
            worst = worst.max(operator_norm(&b.matrix_at(0.5 * (t + nodes[i + 1]))));
        }
    }
    worst
}

/// Verifies superposition on sampled coordinates: axis sums, halving, and
/// oddness. Multilinear interpolation reproduces a linear map exactly, so a
/// residual above `LINEAR_TOL` means the solved values themselves are bent.
fn assert_graph_linear(field: &GraphField, label: &str) -> Result<()> {
    let axes = field.axes();
    let times = field.times();
    let sample_times = [times[0], times[times.len() / 2], times[times.len() - 1]];
    let mut worst = 0.0f64;
    for &t in &sample_times {
        let mut axis_sum = DVector::zeros(field.value_dim());
        let mut corner = vec![0.0; axes.len()];
        for (k, axis) in axes.iter().enumerate() {
            let h = 0.8 * axis.max().min(-axis.min());
            let mut q = vec![0.0; axes.len()];
            q[k] = h;
            corner[k] = h;
            let v = eval_graph(field, t, &q)?;
            let neg: Vec<f64> = q.iter().map(|x| -x).collect();
            worst = worst.max((eval_graph(field, t, &neg)? + &v).norm());
            let half: Vec<f64> = q.iter().map(|x| 0.5 * x).collect();
            worst = worst.max((eval_graph(field, t, &half)? * 2.0 - &v).norm());
            axis_sum += v;
        }
        worst = worst.max((eval_graph(field, t, &corner)? - axis_sum).norm());
    }
    let scale = 1.0 + axes.iter().map(|a| a.max()).fold(0.0, f64::max);
    if worst > LINEAR_TOL * scale {
        return Err(Error::Structural(format!(
            "{label} graph fails superposition by {worst:.3e}; \
             the perturbed process is linear, so its fixed point must be too"
        )));
    }
    Ok(())
}

/// Applies the perturbed projection at `(t, u)`.
///
/// Iterates `v <- u - Sigma(t, v) - Theta(t, v)` (graph values read in the
/// frame of the unperturbed projections) to its fixed point `v_u`, then
/// returns the point of the unstable graph over `Q(t)v_u`. The iteration
/// contracts at factor `2 kappa < 1`, which is the precondition; both checks
/// come from the fields' certified Lipschitz budgets.
///
/// Evaluation stays inside the tabulated boxes. The projection is linear in
/// `u`, so callers with large inputs rescale into the box and divide out.
pub fn perturbed_projection(
    sigma: &GraphField,
    theta: &GraphField,
    frame: &SplitFrame,
    t: f64,
    u: &StateVector,
    tol_fp: f64,
) -> Result<StateVector> {
    if sigma.orientation() != GraphOrientation::Unstable
        || theta.orientation() != GraphOrientation::Stable
    {
        return Err(Error::invalid(
            "perturbed projection needs an unstable sigma graph and a stable theta graph",
        ));
    }
    if sigma.axes().len() + theta.axes().len() != u.dim()
        || sigma.value_dim() != theta.axes().len()
        || theta.value_dim() != sigma.axes().len()
    {
        return Err(Error::invalid(
            "graph coordinate dimensions do not assemble to the state dimension",
        ));
    }
    if !(tol_fp > 0.0 && tol_fp.is_finite()) {
        return Err(Error::invalid("fixed-point tolerance must be positive"));
    }
    let kappa = sigma.kappa().max(theta.kappa());
    if !(2.0 * kappa < 1.0) {
        return Err(Error::precondition(format!(
            "fixed-point contraction needs 2 kappa < 1, got kappa = {kappa}"
        )));
    }

    let u_vec = u.as_vector();
    let mut v = u_vec.clone();
    let mut prev_delta = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_FP_ITERS {
        let q = frame.q_coords(t, &v);
        let p = frame.p_coords(t, &v);
        let sig = eval_graph(sigma, t, q.as_slice())?;
        let the = eval_graph(theta, t, p.as_slice())?;
        let next = u_vec - frame.lift(t, &the, &sig);
        let delta = (&next - &v).norm();
        v = next;
        if delta <= tol_fp * (1.0 + v.norm()) {
            converged = true;
            break;
        }
        prev_delta = delta;
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations: MAX_FP_ITERS,
            measured: prev_delta,
            bound: 2.0 * kappa,
        });
    }

    let q = frame.q_coords(t, &v);
    let sig = eval_graph(sigma, t, q.as_slice())?;
    StateVector::from_column(frame.lift(t, &q, &sig))
}

/// Tolerances for [`certify_perturbed`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Fixed-point tolerance for each projection evaluation.
    pub tol_fp: f64,
    /// Numerical slack added to the projection distance bound.
    pub tol_distance: f64,
    /// Time offsets sampled per side when verifying the perturbed bounds.
    pub samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol_fp: 1e-12,
            tol_distance: 1e-6,
            samples: 8,
        }
    }
}

/// A certified dichotomy for the perturbed process.
///
/// Carries the perturbed projections with their degraded constants
/// `m_ell = m (1 + kappa) / (1 - 2 kappa)` and
/// `gamma_ell = gamma - ell m (1 + kappa)`, the sup-node distance to the
/// unperturbed projections, and the check records behind the certification.
#[derive(Debug, Clone)]
pub struct PerturbedDichotomy {
    certificate: SplittingCertificate,
    kappa_ell: f64,
    ell: f64,
    distance: f64,
    distance_bound: f64,
    thin_margin: bool,
    checks: CheckSet,
}

impl PerturbedDichotomy {
    /// Certificate holding the perturbed projections and `(m_ell, gamma_ell,
    /// -gamma_ell)`.
    pub fn certificate(&self) -> &SplittingCertificate {
        &self.certificate
    }

    /// Perturbed projections at the certificate nodes.
    pub fn projections(&self) -> &ProjectionFamily {
        self.certificate.projections()
    }

    /// Perturbed splitting constant.
    pub fn m_ell(&self) -> f64 {
        self.certificate.m()
    }

    /// Perturbed decay rate; the perturbed backward rate is its negative.
    pub fn gamma_ell(&self) -> f64 {
        self.certificate.gamma()
    }

    /// Lipschitz constant the graphs were certified with.
    pub fn kappa_ell(&self) -> f64 {
        self.kappa_ell
    }

    /// Perturbation size the certificate covers.
    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Sup-node `||Q(t) - Q_ell(t)||`.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Certified distance bound `2 kappa / (1 - 2 kappa)`.
    pub fn distance_bound(&self) -> f64 {
        self.distance_bound
    }

    /// Whether the perturbation used 99% or more of the admissible budget.
    pub fn thin_margin(&self) -> bool {
        self.thin_margin
    }

    /// Check records: budget, idempotency, the two decay ratios, propagator
    /// commutation, and the distance bound.
    pub fn checks(&self) -> &CheckSet {
        &self.checks
    }

    /// Writes the certificate text: a constants block, the check records,
    /// then the embedded splitting certificate.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "perturbed-dichotomy")?;
        writeln!(w, "kappa_ell {}", fmt_float(self.kappa_ell))?;
        writeln!(w, "ell {}", fmt_float(self.ell))?;
        writeln!(w, "distance {}", fmt_float(self.distance))?;
        writeln!(w, "distance_bound {}", fmt_float(self.distance_bound))?;
        writeln!(w, "thin_margin {}", u8::from(self.thin_margin))?;
        writeln!(w, "checks {}", self.checks.checks().len())?;
        for c in self.checks.checks() {
            let cmp = match c.kind {
                CheckKind::UpperBound => "le",
                CheckKind::LowerBound => "ge",
            };
            writeln!(
                w,
                "{cmp} {} {} {}",
                c.name,
                fmt_float(c.bound),
                fmt_float(c.measured)
            )?;
        }
        self.certificate.write_to(w)
    }

    /// Serializes to a string.
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("text format is UTF-8")
    }

    /// Parses the text format produced by [`PerturbedDichotomy::write_to`].
    pub fn from_text(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, &str)> {
            lines.next().map(|(i, l)| (i + 1, l)).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {expect}"),
            })
        };
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

        let (ln, magic) = next("header")?;
        if magic.trim() != "perturbed-dichotomy" {
            return Err(Error::Parse {
                line: ln,
                message: "expected 'perturbed-dichotomy' header".into(),
            });
        }
        let (ln, line) = next("kappa_ell")?;
        let kappa_ell = parse_f64(field(line, ln, "kappa_ell")?, ln)?;
        let (ln, line) = next("ell")?;
        let ell = parse_f64(field(line, ln, "ell")?, ln)?;
        let (ln, line) = next("distance")?;
        let distance = parse_f64(field(line, ln, "distance")?, ln)?;
        let (ln, line) = next("distance_bound")?;
        let distance_bound = parse_f64(field(line, ln, "distance_bound")?, ln)?;
        let (ln, line) = next("thin_margin")?;
        let thin_margin = match field(line, ln, "thin_margin")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("thin_margin must be 0 or 1, got {other:?}"),
                })
            }
        };

        if !(0.0..0.5).contains(&kappa_ell) {
            return Err(Error::Parse {
                line: 2,
                message: format!("kappa_ell must lie in [0, 1/2), got {kappa_ell}"),
            });
        }
        let expected_bound = 2.0 * kappa_ell / (1.0 - 2.0 * kappa_ell);
        if (distance_bound - expected_bound).abs() > 1e-12 * (1.0 + expected_bound) {
            return Err(Error::Parse {
                line: 5,
                message: "distance bound is inconsistent with kappa_ell".into(),
            });
        }

        let (ln, line) = next("checks")?;
        let n_checks: usize = field(line, ln, "checks")?
            .trim()
            .parse()
            .map_err(|_| Error::Parse {
                line: ln,
                message: "bad check count".into(),
            })?;
        let mut checks = CheckSet::new();
        for _ in 0..n_checks {
            let (ln, line) = next("check record")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse {
                    line: ln,
                    message: "check record needs 'cmp name bound measured'".into(),
                });
            }
            let bound = parse_f64(parts[2], ln)?;
            let measured = parse_f64(parts[3], ln)?;
            checks.push(match parts[0] {
                "le" => Check::upper(parts[1], bound, measured),
                "ge" => Check::lower(parts[1], bound, measured),
                other => {
                    return Err(Error::Parse {
                        line: ln,
                        message: format!("unknown comparison {other:?}"),
                    })
                }
            });
        }

        let header_lines = 7 + n_checks;
        let rest: String = s
            .lines()
            .skip(header_lines)
            .flat_map(|l| [l, "\n"])
            .collect();
        let certificate = SplittingCertificate::from_text(&rest).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line: line + header_lines,
                message,
            },
            other => other,
        })?;
        Ok(PerturbedDichotomy {
            certificate,
            kappa_ell,
            ell,
            distance,
            distance_bound,
            thin_margin,
            checks,
        })
    }
}

/// Assembles and certifies the perturbed dichotomy.
///
/// Builds `Q_ell` column by column at every node of `cert` through
/// [`perturbed_projection`], wraps the family in a certificate with the
/// degraded constants, and verifies the perturbed process `A + B` against it
/// by sampled propagation. The sup-node distance to the unperturbed
/// projections must respect `2 kappa / (1 - 2 kappa)` up to the configured
/// slack; a violation is a failed check, not an error.
pub fn certify_perturbed(
    proc: &Generator,
    b: &Generator,
    cert: &SplittingCertificate,
    graphs: &LinearGraphs,
    opts: &CertifyOptions,
) -> Result<PerturbedDichotomy> {
    if !cert.is_dichotomy() || !(cert.gamma() > 0.0) {
        return Err(Error::precondition(
            "roughness certification needs an exponential dichotomy, rho = -gamma < 0",
        ));
    }
    let ledger = &graphs.ledger;
    let kappa = ledger.kappa_chosen;
    if !(2.0 * kappa < 1.0) {
        return Err(Error::precondition(format!(
            "perturbed constants need 2 kappa < 1, got kappa = {kappa}"
        )));
    }
    if !graphs.budget.pass {
        return Err(Error::precondition(
            "perturbation budget must pass before certification",
        ));
    }
    if opts.samples == 0 {
        return Err(Error::invalid("verification needs at least one sample"));
    }
    let (m, gamma, ell) = (cert.m(), cert.gamma(), ledger.ell);
    let m_ell = m * (1.0 + kappa) / (1.0 - 2.0 * kappa);
    let gamma_ell = gamma - ell * m * (1.0 + kappa);
    debug_assert!(gamma_ell > 0.0, "the budget keeps the perturbed rate positive");

    let frame = SplitFrame::new(cert.projections())?;
    let dim = cert.dim();
    // Column scale: iterates stay within ||u|| / (1 - 2 kappa) and the frame
    // coordinates are bounded by m times that, so this keeps every graph
    // evaluation inside the tabulated box.
    let half = min_half_extent(&graphs.sigma)?.min(min_half_extent(&graphs.theta)?);
    let scale = 0.9 * half * (1.0 - 2.0 * kappa) / m;

    let nodes = cert.projections().times().to_vec();
    let mut matrices = Vec::with_capacity(nodes.len());
    let mut distance = 0.0f64;
    let mut idempotency = 0.0f64;
    for (&t, q_old) in nodes.iter().zip(cert.projections().matrices()) {
        let mut q = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut e = DVector::zeros(dim);
            e[j] = scale;
            let col = perturbed_projection(
                &graphs.sigma,
                &graphs.theta,
                &frame,
                t,
                &StateVector::from_column(e)?,
                opts.tol_fp,
            )?;
            for i in 0..dim {
                q[(i, j)] = col.as_vector()[i] / scale;
            }
        }
        idempotency = idempotency.max(operator_norm(&(&q * &q - &q)));
        distance = distance.max(operator_norm(&(q_old - &q)));
        matrices.push(q);
    }
    let family = ProjectionFamily::new(nodes, matrices)?;
    let certificate = SplittingCertificate::new(family, m_ell, gamma_ell, -gamma_ell)?;

    let lin = proc.linear_part();
    let perturbed = if lin.is_autonomous() && b.is_autonomous() {
        Generator::constant(lin.matrix_at(0.0) + b.matrix_at(0.0))
    } else {
        let bg = b.clone();
        Generator::time_varying(dim, move |t| lin.matrix_at(t) + bg.matrix_at(t))
    };
    let report = verify_splitting(&perturbed, &certificate, opts.samples);

    let distance_bound = 2.0 * kappa / (1.0 - 2.0 * kappa);
    let mut checks = CheckSet::new();
    checks.push(Check::upper(
        "perturbation_budget",
        graphs.budget.bound,
        ell,
    ));
    checks.push(Check::upper("projection_idempotency", 1e-8, idempotency));
    checks.push(Check::upper(
        "perturbed_backward_ratio",
        1.0 + report.ratio_tol,
        report.worst_backward_ratio,
    ));
    checks.push(Check::upper(
        "perturbed_forward_ratio",
        1.0 + report.ratio_tol,
        report.worst_forward_ratio,
    ));
    checks.push(Check::upper(
        "projection_invariance",
        report.commutation_tol,
        report.worst_commutation,
    ));
    checks.push(Check::upper(
        "projection_distance",
        distance_bound + opts.tol_distance,
        distance,
    ));

    Ok(PerturbedDichotomy {
        certificate,
        kappa_ell: kappa,
        ell,
        distance,
        distance_bound,
        thin_margin: graphs.budget.thin,
        checks,
    })
}

/// Largest symmetric coordinate box radius the field can be evaluated on.
fn min_half_extent(field: &GraphField) -> Result<f64> {
    let mut half = f64::INFINITY;
    for a in field.axes() {
        half = half.min(a.max().min(-a.min()));
    }
    if !(half > 0.0) {
        return Err(Error::invalid(
            "graph axes must straddle zero to host the projection iteration",
        ));
    }
    Ok(half)
}
