use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use scalesim::harness::{self, Scenario, ScenarioConfig};
use scalesim::{par, Error};

#[derive(Parser)]
#[command(name = "scalesim", version, about = "Wireless network scaling-law sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the known scenario names.
    ListScenarios,
    /// Fit the log-log exponent of one metric in a results CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        metric: String,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => run(config, out, seed, jobs),
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<20} {}", s.name(), s.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Fit { csv, metric } => match fit(&csv, &metric) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, jobs: Option<usize>) -> ExitCode {
    let mut cfg = match ScenarioConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let result = match par::with_threads(jobs, || harness::run_scenario(&cfg)) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    if let Err(e) = harness::write_results(&result, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAIL);
    }
    println!(
        "{}: {} rows, {} failed points, written to {}",
        cfg.scenario,
        result.rows.len(),
        result.failures.len(),
        out.display()
    );
    for c in &result.checks {
        println!(
            "{} {:<32} observed={} expected={} {} tol={}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.expected,
            c.relation,
            c.tolerance
        );
    }
    if result.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn fit(csv: &Path, metric: &str) -> anyhow::Result<()> {
    let rows = harness::read_results_csv(csv)?;
    let f = harness::fit_metric(&rows, metric).with_context(|| format!("fitting {}", csv.display()))?;
    println!("metric={metric}");
    println!("exponent={}", f.exponent);
    println!("intercept={}", f.intercept);
    println!("stderr={}", f.stderr);
    println!("r_squared={}", f.r_squared);
    Ok(())
}
