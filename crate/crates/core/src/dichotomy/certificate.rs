//! Splitting certificates and their text serialization.

use crate::dichotomy::ProjectionFamily;
use crate::error::{Error, Result};
use crate::numerics::fmt_float;
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

/// A claimed exponential splitting: projections plus `(M, gamma, rho)`.
///
/// The constructor enforces the structural invariants (`M >= 1`,
/// `gamma > rho`, idempotent constant-rank projections); the dynamical
/// bounds themselves are the business of
/// [`verify_splitting`](crate::dichotomy::verify_splitting).
#[derive(Debug, Clone)]
pub struct SplittingCertificate {
    projections: ProjectionFamily,
    m: f64,
    gamma: f64,
    rho: f64,
}

impl SplittingCertificate {
    /// Validating constructor.
    pub fn new(projections: ProjectionFamily, m: f64, gamma: f64, rho: f64) -> Result<Self> {
        if !m.is_finite() || m < 1.0 {
            return Err(Error::invalid(format!("splitting constant M = {m} must be >= 1")));
        }
        if !gamma.is_finite() {
            return Err(Error::non_finite("splitting rate gamma"));
        }
        // rho = -inf never occurs: rank-0 and full-rank estimates are
        // normalized to dichotomies, so rho stays finite.
        if !rho.is_finite() {
            return Err(Error::non_finite("splitting rate rho"));
        }
        if gamma <= rho {
            return Err(Error::invalid(format!(
                "splitting needs gamma > rho, got gamma = {gamma}, rho = {rho}"
            )));
        }
        Ok(SplittingCertificate {
            projections,
            m,
            gamma,
            rho,
        })
    }

    /// Projection family.
    pub fn projections(&self) -> &ProjectionFamily {
        &self.projections
    }

    /// Splitting constant `M`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Forward decay rate on `Ker Q`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Backward decay rate on `Im Q` (`rho < 0` means backward decay).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Rank of the projections.
    pub fn rank(&self) -> usize {
        self.projections.rank()
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.projections.dim()
    }

    /// Spectral gap `gamma - rho`.
    pub fn gap(&self) -> f64 {
        self.gamma - self.rho
    }

    /// Whether the certificate claims a dichotomy (`rho = -gamma`, `gamma > 0`).
    pub fn is_dichotomy(&self) -> bool {
        self.gamma > 0.0 && (self.rho + self.gamma).abs() <= 1e-12 * self.gamma.max(1.0)
    }

    /// Projection at `t`.
    pub fn q_at(&self, t: f64) -> DMatrix<f64> {
        self.projections.at(t)
    }

    /// Complementary projection at `t`.
    pub fn p_at(&self, t: f64) -> DMatrix<f64> {
        self.projections.complement_at(t)
    }

    /// Same projections, new constants. Used by rate-rescaling arguments and
    /// by perturbation certificates that reuse a verified family.
    pub fn with_rates(&self, m: f64, gamma: f64, rho: f64) -> Result<Self> {
        SplittingCertificate::new(self.projections.clone(), m, gamma, rho)
    }

    /// Writes the certificate in its line-oriented text format: a header with
    /// the constants, then one line per node (time followed by the row-major
    /// projection entries), every float with 17 significant digits.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "splitting-certificate")?;
        writeln!(w, "m {}", fmt_float(self.m))?;
        writeln!(w, "gamma {}", fmt_float(self.gamma))?;
        writeln!(w, "rho {}", fmt_float(self.rho))?;
        writeln!(w, "rank {}", self.rank())?;
        writeln!(w, "dim {}", self.dim())?;
        writeln!(w, "nodes {}", self.projections.times().len())?;
        for (t, q) in self
            .projections
            .times()
            .iter()
            .zip(self.projections.matrices())
        {
            let mut line = fmt_float(*t);
            for i in 0..q.nrows() {
                for j in 0..q.ncols() {
                    line.push(' ');
                    line.push_str(&fmt_float(q[(i, j)]));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Serializes to a string.
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("text format is UTF-8")
    }

    /// Parses the text format produced by [`SplittingCertificate::write_to`].
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((i, Err(e))) => Err(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                }),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of input, expected {what}"),
                }),
            }
        };
        fn tagged<'a>(line: &'a str, ln: usize, key: &str) -> Result<&'a str> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
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

        let (ln, magic) = next("header")?;
        if magic.trim() != "splitting-certificate" {
            return Err(Error::Parse {
                line: ln,
                message: "expected 'splitting-certificate' header".into(),
            });
        }
        let (ln, line) = next("m")?;
        let m = parse_f64(tagged(&line, ln, "m")?, ln)?;
        let (ln, line) = next("gamma")?;
        let gamma = parse_f64(tagged(&line, ln, "gamma")?, ln)?;
        let (ln, line) = next("rho")?;
        let rho = parse_f64(tagged(&line, ln, "rho")?, ln)?;
        let (ln, line) = next("rank")?;
        let rank = parse_usize(tagged(&line, ln, "rank")?, ln)?;
        let (ln, line) = next("dim")?;
        let dim = parse_usize(tagged(&line, ln, "dim")?, ln)?;
        let (ln, line) = next("nodes")?;
        let n_nodes = parse_usize(tagged(&line, ln, "nodes")?, ln)?;

        let mut times = Vec::with_capacity(n_nodes);
        let mut mats = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, line) = next("node line")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 1 + dim * dim {
                return Err(Error::Parse {
                    line: ln,
                    message: format!(
                        "node line needs {} fields, found {}",
                        1 + dim * dim,
                        parts.len()
                    ),
                });
            }
            times.push(parse_f64(parts[0], ln)?);
            let mut q = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    q[(i, j)] = parse_f64(parts[1 + i * dim + j], ln)?;
                }
            }
            mats.push(q);
        }
        let projections = ProjectionFamily::new(times, mats)?;
        if projections.rank() != rank {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "declared rank {rank} does not match projections (rank {})",
                    projections.rank()
                ),
            });
        }
        SplittingCertificate::new(projections, m, gamma, rho)
    }

    /// Parses the text format from a string.
    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sample() -> SplittingCertificate {
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let fam = ProjectionFamily::constant(q, -2.0, 2.0).unwrap();
        SplittingCertificate::new(fam, 1.0, 1.0, -1.0).unwrap()
    }

    #[test]
    fn invariants_enforced() {
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let fam = ProjectionFamily::constant(q, 0.0, 1.0).unwrap();
        assert!(SplittingCertificate::new(fam.clone(), 0.5, 1.0, -1.0).is_err());
        assert!(SplittingCertificate::new(fam.clone(), 1.0, -1.0, 1.0).is_err());
        assert!(SplittingCertificate::new(fam, 1.0, 1.0, -1.0).is_ok());
    }

    #[test]
    fn dichotomy_detection() {
        let cert = sample();
        assert!(cert.is_dichotomy());
        let skew = cert.with_rates(1.0, 2.0, -1.0).unwrap();
        assert!(!skew.is_dichotomy());
    }

    #[test]
    fn text_round_trip() {
        let cert = sample();
        let text = cert.to_text();
        let back = SplittingCertificate::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.rank(), 1);
        assert_eq!(back.gamma(), 1.0);
    }

    #[test]
    fn parse_rejects_rank_mismatch() {
        let text = sample().to_text().replace("rank 1", "rank 2");
        assert!(SplittingCertificate::from_text(&text).is_err());
    }
}
