//! Sectioned key=value scenario configuration.
//!
//! Two sections are recognized: `[scenario]` holds the single `name` key,
//! `[params]` holds numeric overrides of the named scenario's defaults.
//! Parsing is strict: unknown sections, unknown keys, duplicate keys, and
//! non-finite or malformed numbers are all errors carrying the offending
//! line number. Blank lines and `#` comments are skipped.

use manifold_core::{Error, Result};

/// A parsed configuration before scenario-schema validation.
#[derive(Debug, Clone)]
pub struct RawConfig {
    /// Scenario name from the `[scenario]` section.
    pub name: String,
    /// Line the name was read from, for unknown-scenario diagnostics.
    pub name_line: usize,
    /// Overrides in file order: line number, key, value.
    pub overrides: Vec<(usize, String, f64)>,
}

#[derive(PartialEq)]
enum Section {
    None,
    Scenario,
    Params,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses configuration text. Errors name the 1-based offending line.
pub fn parse_config(text: &str) -> Result<RawConfig> {
    let mut section = Section::None;
    let mut name: Option<(String, usize)> = None;
    let mut overrides: Vec<(usize, String, f64)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                return Err(parse_err(lineno, "unterminated section header"));
            };
            section = match header.trim() {
                "scenario" => Section::Scenario,
                "params" => Section::Params,
                other => {
                    return Err(parse_err(lineno, format!("unknown section [{other}]")));
                }
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(lineno, "expected key = value"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(parse_err(lineno, "empty key"));
        }
        if value.is_empty() {
            return Err(parse_err(lineno, format!("key {key} has no value")));
        }
        match section {
            Section::None => {
                return Err(parse_err(lineno, format!("key {key} outside any section")));
            }
            Section::Scenario => {
                if key != "name" {
                    return Err(parse_err(
                        lineno,
                        format!("the [scenario] section only takes name, got {key}"),
                    ));
                }
                if name.is_some() {
                    return Err(parse_err(lineno, "duplicate scenario name"));
                }
                name = Some((value.to_string(), lineno));
            }
            Section::Params => {
                if overrides.iter().any(|(_, k, _)| k == key) {
                    return Err(parse_err(lineno, format!("duplicate key {key}")));
                }
                let parsed: f64 = value.parse().map_err(|_| {
                    parse_err(lineno, format!("key {key}: {value} is not a number"))
                })?;
                if !parsed.is_finite() {
                    return Err(parse_err(lineno, format!("key {key} must be finite")));
                }
                overrides.push((lineno, key.to_string(), parsed));
            }
        }
    }

    let Some((name, name_line)) = name else {
        return Err(parse_err(
            last_line.max(1),
            "missing [scenario] section with a name key",
        ));
    };
    Ok(RawConfig {
        name,
        name_line,
        overrides,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_keys_and_comments_parse() {
        let cfg = parse_config(
            "# demo\n[scenario]\nname = quadratic_manifold\n\n[params]\nextent = 0.3\nnodes=25\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "quadratic_manifold");
        assert_eq!(cfg.name_line, 3);
        assert_eq!(cfg.overrides.len(), 2);
        assert_eq!(cfg.overrides[0], (6, "extent".to_string(), 0.3));
    }

    #[test]
    fn malformed_lines_carry_their_number() {
        for (text, line) in [
            ("[scenario]\nname = a\n[weird]\n", 3),
            ("[scenario]\nname = a\n[params]\nfoo\n", 4),
            ("key = 1\n", 1),
            ("[params]\nx = twelve\n", 2),
            ("[params]\nx = inf\n", 2),
            ("[params]\nx = 1\nx = 2\n", 3),
            ("[scenario]\nname = a\nname = b\n", 3),
            ("[scenario]\n", 1),
            ("", 1),
        ] {
            match parse_config(text) {
                Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "input {text:?}"),
                other => panic!("input {text:?} gave {other:?}"),
            }
        }
    }
}
