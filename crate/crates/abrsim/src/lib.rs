//! File formats, report output and sweeps for the `abrsim` command.

pub mod error;
pub mod report;
pub mod scenario_file;
pub mod sweep;

use abrsim_core::engine::{EngineError, Simulation};
use abrsim_core::{RunReport, Scenario};

pub use error::CliError;
pub use report::write_report;
pub use scenario_file::{apply_override, load_scenario, parse_scenario};
pub use sweep::{run_sweep, SweepSpec};

/// Builds and validates the network without running it.
pub fn validate(scenario: &Scenario) -> Result<(), CliError> {
    let net = scenario.build().map_err(|e| CliError::Invalid(EngineError::from(e)))?;
    Simulation::new(&net).map_err(CliError::Invalid)?;
    Ok(())
}

/// Runs a scenario, separating validation failures from runtime ones.
pub fn execute(scenario: &Scenario) -> Result<RunReport, CliError> {
    let net = scenario.build().map_err(|e| CliError::Invalid(EngineError::from(e)))?;
    let sim = Simulation::new(&net).map_err(CliError::Invalid)?;
    sim.run().map_err(CliError::Runtime)
}

/// One-line human summary of a finished run.
pub fn summary_line(report: &RunReport) -> String {
    let fairness = report
        .fairness_index
        .map_or_else(|| "n/a".to_owned(), |j| format!("{j:.4}"));
    format!(
        "{} seed {}: fairness {}, {} cells created, conservation {}, invariants {}",
        report.scenario,
        report.seed,
        fairness,
        report.conservation.created,
        if report.conservation.balanced() { "exact" } else { "BROKEN" },
        if report.checks.all_clear() { "clear" } else { "VIOLATED" },
    )
}
