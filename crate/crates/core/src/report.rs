//! Inequality check records shared by the verification routines and the CLI.

use crate::numerics::fmt_float;

/// Direction of a certified inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Passes when `measured <= bound`.
    UpperBound,
    /// Passes when `measured >= bound`.
    LowerBound,
}

/// One certified inequality: what was bounded, by what, and the margin.
#[derive(Debug, Clone)]
pub struct Check {
    /// Stable identifier, reported verbatim in summaries.
    pub name: String,
    /// The certified bound.
    pub bound: f64,
    /// The measured quantity.
    pub measured: f64,
    /// Direction of the inequality.
    pub kind: CheckKind,
}

impl Check {
    /// An upper-bound check `measured <= bound`.
    pub fn upper(name: impl Into<String>, bound: f64, measured: f64) -> Self {
        Check {
            name: name.into(),
            bound,
            measured,
            kind: CheckKind::UpperBound,
        }
    }

    /// A lower-bound check `measured >= bound`.
    pub fn lower(name: impl Into<String>, bound: f64, measured: f64) -> Self {
        Check {
            name: name.into(),
            bound,
            measured,
            kind: CheckKind::LowerBound,
        }
    }

    /// Signed distance to the bound; nonnegative means the check passes.
    pub fn margin(&self) -> f64 {
        match self.kind {
            CheckKind::UpperBound => self.bound - self.measured,
            CheckKind::LowerBound => self.measured - self.bound,
        }
    }

    /// Whether the inequality holds.
    pub fn passed(&self) -> bool {
        self.margin() >= 0.0
    }

    /// One-line summary record.
    pub fn summary_line(&self) -> String {
        let cmp = match self.kind {
            CheckKind::UpperBound => "le",
            CheckKind::LowerBound => "ge",
        };
        format!(
            "check {} cmp={} bound={} measured={} margin={} status={}",
            self.name,
            cmp,
            fmt_float(self.bound),
            fmt_float(self.measured),
            fmt_float(self.margin()),
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// An ordered collection of checks with an overall verdict.
#[derive(Debug, Clone, Default)]
pub struct CheckSet {
    checks: Vec<Check>,
}

impl CheckSet {
    /// Empty set.
    pub fn new() -> Self {
        CheckSet::default()
    }

    /// Appends a check.
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Appends every check from another set.
    pub fn extend(&mut self, other: CheckSet) {
        self.checks.extend(other.checks);
    }

    /// All recorded checks.
    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    /// Whether every check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// Number of failing checks.
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    /// Finds a check by name.
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Full summary text: one line per check plus a verdict line.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.summary_line());
            out.push('\n');
        }
        out.push_str(&format!(
            "result {} checks={} failures={}\n",
            if self.all_passed() { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.failures()
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_verdicts() {
        let mut set = CheckSet::new();
        set.push(Check::upper("residual", 1e-4, 3e-5));
        set.push(Check::lower("rate", 0.9, 1.1));
        assert!(set.all_passed());
        set.push(Check::upper("too_big", 1.0, 2.0));
        assert!(!set.all_passed());
        assert_eq!(set.failures(), 1);
        assert!(set.get("too_big").unwrap().margin() < 0.0);
    }

    #[test]
    fn summary_is_one_line_per_check() {
        let mut set = CheckSet::new();
        set.push(Check::upper("a", 1.0, 0.5));
        let text = set.summary_text();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("status=PASS"));
        assert!(text.ends_with("result PASS checks=1 failures=0\n"));
    }
}
