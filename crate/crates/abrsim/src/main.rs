use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use abrsim::{execute, load_scenario, run_sweep, summary_line, write_report, CliError, SweepSpec};
use clap::Parser;

/// Discrete-event simulator for ATM ABR traffic management.
#[derive(Debug, Parser)]
#[command(name = "abrsim", version)]
struct Args {
    /// Scenario file (TOML) or the name of a built-in template.
    scenario: PathBuf,
    /// Output directory for the report and CSV series.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the simulated duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Runs once per value: `--sweep topology.n=2,5,10`.
    #[arg(long, value_name = "FIELD=V1,V2,...")]
    sweep: Option<String>,
    /// Prints nothing on success.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abrsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(d) = args.duration {
        scenario.duration = d;
    }
    match &args.sweep {
        None => {
            let report = execute(&scenario)?;
            write_report(&args.out, &report, &scenario)?;
            if !args.quiet {
                println!("{} -> {}", summary_line(&report), args.out.display());
            }
        }
        Some(spec) => {
            let spec: SweepSpec = spec.parse()?;
            let workers = thread::available_parallelism().map_or(1, |n| n.get());
            let result = run_sweep(&scenario, &spec, &args.out, workers);
            if !args.quiet {
                if let Ok(entries) = &result {
                    for e in entries {
                        println!("{} -> {}", e.value, args.out.join(&e.dir).display());
                    }
                }
            }
            result?;
        }
    }
    Ok(())
}
