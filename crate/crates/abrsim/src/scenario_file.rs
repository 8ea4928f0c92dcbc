//! Scenario files in TOML and dotted-path field overrides.

use std::fs;
use std::path::Path;

use abrsim_core::Scenario;
use toml::{Table, Value};

use crate::error::CliError;

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, CliError> {
    toml::from_str(text).map_err(|source| CliError::Parse {
        origin: origin.to_owned(),
        source,
    })
}

/// Reads a scenario file. A path that does not exist but names a built-in
/// template (`n_source`, `vsvd_chain`, ...) resolves to that template.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    if !path.exists() {
        return path
            .to_str()
            .and_then(Scenario::template)
            .ok_or_else(|| CliError::Missing { path: path.to_owned() });
    }
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn to_toml(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenarios serialize to TOML")
}

/// Parses an override value as a TOML value, falling back to a bare string
/// so `feedback=relative_rate` works without quotes.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn override_error(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Override {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

/// Sets `field` (dotted path, numeric segments index arrays) to `value` and
/// re-reads the scenario so unknown fields and type errors are rejected.
pub fn apply_override(scenario: &Scenario, field: &str, value: Value) -> Result<Scenario, CliError> {
    let mut root = Value::try_from(scenario).expect("scenarios serialize to TOML");
    let segments: Vec<&str> = field.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(override_error(field, "empty path segment"));
    }
    let (last, parents) = segments.split_last().expect("split yields one segment");
    let mut node = &mut root;
    for seg in parents {
        node = match node {
            Value::Table(t) => t.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| override_error(field, format!("`{seg}` is not an array index")))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| override_error(field, format!("index {i} out of range, length {len}")))?
            }
            _ => return Err(override_error(field, format!("`{seg}` is not a table"))),
        };
    }
    match node {
        Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        Value::Array(a) => {
            let i: usize = last
                .parse()
                .map_err(|_| override_error(field, format!("`{last}` is not an array index")))?;
            let len = a.len();
            *a.get_mut(i)
                .ok_or_else(|| override_error(field, format!("index {i} out of range, length {len}")))? = value;
        }
        _ => return Err(override_error(field, "parent is not a table")),
    }
    root.try_into()
        .map_err(|e: toml::de::Error| override_error(field, e.message().to_owned()))
}
