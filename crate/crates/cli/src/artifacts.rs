//! Run artifacts: manifest, summary, and comma-separated result tables.
//!
//! Every file is assembled in memory in a fixed order and written once, so
//! reruns of the same configuration are byte-identical.

use std::fs;
use std::path::Path;

use manifold_core::graph_transform::ConstantsLedger;
use manifold_core::numerics::fmt_float;
use manifold_core::report::CheckSet;
use manifold_core::Result;

/// Everything a scenario run produces besides its exit status.
#[derive(Debug, Default)]
pub struct ScenarioOutput {
    /// Certified inequalities, in check order.
    pub checks: CheckSet,
    /// Extra manifest lines (key, formatted value) after the parameters.
    pub manifest: Vec<(String, String)>,
    /// Named artifact files: `(file name, content)`.
    pub files: Vec<(String, String)>,
}

impl ScenarioOutput {
    /// Records one manifest entry.
    pub fn kv(&mut self, key: impl Into<String>, value: f64) {
        self.manifest.push((key.into(), fmt_float(value)));
    }

    /// Records a full constants ledger under `prefix.` manifest keys.
    pub fn ledger(&mut self, prefix: &str, ledger: &ConstantsLedger) {
        for (name, value) in [
            ("m", ledger.m),
            ("gamma", ledger.gamma),
            ("rho", ledger.rho),
            ("ell", ledger.ell),
            ("gap_threshold", ledger.gap_threshold),
            ("gap_ratio", ledger.gap_ratio),
            ("kappa_minus", ledger.kappa_minus),
            ("kappa_plus", ledger.kappa_plus),
            ("kappa_star", ledger.kappa_star),
            ("kappa_chosen", ledger.kappa_chosen),
            ("delta", ledger.delta),
            ("delta_hat", ledger.delta_hat),
            ("nu", ledger.nu),
        ] {
            self.manifest
                .push((format!("{prefix}.{name}"), fmt_float(value)));
        }
    }

    /// Adds a comma-separated table with a header row; numeric cells use
    /// full-precision decimals.
    pub fn table(&mut self, name: impl Into<String>, header: &str, rows: Vec<Vec<String>>) {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.files.push((name.into(), text));
    }

    /// Adds a preformatted text artifact.
    pub fn text(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }
}

/// Formats a row of floats for [`ScenarioOutput::table`].
pub fn cells(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_float(v)).collect()
}

/// Writes manifest, summary, and artifact files into `out_dir`.
pub fn write_run(
    out_dir: &Path,
    scenario: &str,
    params: &[(String, String)],
    output: &ScenarioOutput,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;

    let mut manifest = format!("scenario={scenario}\n");
    for (key, value) in params {
        manifest.push_str(&format!("param.{key}={value}\n"));
    }
    for (key, value) in &output.manifest {
        manifest.push_str(&format!("{key}={value}\n"));
    }
    fs::write(out_dir.join("manifest.txt"), manifest)?;
    fs::write(out_dir.join("summary.txt"), output.checks.summary_text())?;
    for (name, content) in &output.files {
        fs::write(out_dir.join(name), content)?;
    }
    Ok(())
}
