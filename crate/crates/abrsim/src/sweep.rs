//! Parameter sweeps: one run and one report directory per value.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use abrsim_core::Scenario;
use serde::Serialize;

use crate::error::CliError;
use crate::scenario_file::{apply_override, parse_value};
use crate::{execute, validate, write_report};

/// `field=v1,v2,...` where `field` is a dotted scenario path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSpec {
    pub field: String,
    pub values: Vec<String>,
}

impl FromStr for SweepSpec {
    type Err = CliError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| CliError::SweepSpec {
            spec: spec.to_owned(),
            reason: reason.to_owned(),
        };
        let (field, values) = spec.split_once('=').ok_or_else(|| bad("expected FIELD=V1,V2,..."))?;
        let field = field.trim();
        if field.is_empty() {
            return Err(bad("missing field name"));
        }
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_owned()).collect();
        if values.iter().any(String::is_empty) {
            return Err(bad("empty value"));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(bad(&format!("value `{v}` repeated")));
            }
        }
        Ok(SweepSpec {
            field: field.to_owned(),
            values,
        })
    }
}

impl SweepSpec {
    /// Report directory name for one value.
    pub fn dir_name(&self, value: &str) -> String {
        format!("{}={}", self.field, value)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._=-+".contains(c) { c } else { '_' })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub field: String,
    pub value: String,
    pub dir: String,
    pub status: &'static str,
    pub fairness_index: Option<f64>,
    pub conservation_balanced: Option<bool>,
    pub error: Option<String>,
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_owned(),
        source,
    }
}

fn run_one(scenario: &Scenario, out: &Path, dir: &str) -> Result<abrsim_core::RunReport, CliError> {
    let report = execute(scenario)?;
    let partial = out.join(format!(".partial-{dir}"));
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(write_err(&partial))?;
    }
    write_report(&partial, &report, scenario)?;
    let done = out.join(dir);
    if done.exists() {
        fs::remove_dir_all(&done).map_err(write_err(&done))?;
    }
    fs::rename(&partial, &done).map_err(write_err(&done))?;
    Ok(report)
}

/// Runs every value of the sweep on up to `workers` threads, writes
/// `out/<field>=<value>/` per completed run and `out/index.csv`.
///
/// Every value is applied and validated before the first run starts, so a
/// bad field or value fails the sweep without writing anything.
pub fn run_sweep(
    base: &Scenario,
    spec: &SweepSpec,
    out: &Path,
    workers: usize,
) -> Result<Vec<SweepEntry>, CliError> {
    let plan: Vec<(String, Scenario)> = spec
        .values
        .iter()
        .map(|v| {
            let s = apply_override(base, &spec.field, parse_value(v))?;
            validate(&s)?;
            Ok((v.clone(), s))
        })
        .collect::<Result<_, CliError>>()?;
    fs::create_dir_all(out).map_err(write_err(out))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepEntry>>> = Mutex::new(vec![None; plan.len()]);
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, plan.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((value, scenario)) = plan.get(i) else {
                    break;
                };
                let dir = spec.dir_name(value);
                let outcome = run_one(scenario, out, &dir);
                let entry = SweepEntry {
                    field: spec.field.clone(),
                    value: value.clone(),
                    dir,
                    status: if outcome.is_ok() { "ok" } else { "failed" },
                    fairness_index: outcome.as_ref().ok().and_then(|r| r.fairness_index),
                    conservation_balanced: outcome.as_ref().ok().map(|r| r.conservation.balanced()),
                    error: outcome.err().map(|e| e.to_string()),
                };
                results.lock().expect("no worker panics while holding the lock")[i] = Some(entry);
            });
        }
    });
    let entries: Vec<SweepEntry> = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|e| e.expect("every planned run reports"))
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &entries {
        w.serialize(e).expect("in-memory CSV write");
    }
    let index: PathBuf = out.join("index.csv");
    let tmp = out.join(".index.csv.tmp");
    fs::write(&tmp, w.into_inner().expect("in-memory CSV flush")).map_err(write_err(&tmp))?;
    fs::rename(&tmp, &index).map_err(write_err(&index))?;

    let failed = entries.iter().filter(|e| e.status != "ok").count();
    if failed > 0 {
        return Err(CliError::SweepFailed {
            failed,
            total: entries.len(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec() {
        let s: SweepSpec = "topology.n=2, 5,10".parse().unwrap();
        assert_eq!(s.field, "topology.n");
        assert_eq!(s.values, ["2", "5", "10"]);
        assert_eq!(s.dir_name("5"), "topology.n=5");
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["topology.n", "=1,2", "seed=1,,2", "seed=1,1"] {
            assert!(bad.parse::<SweepSpec>().is_err(), "{bad}");
        }
    }
}
