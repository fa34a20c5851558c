//! `elloc` — distributed-MIMO-radar target localization experiments.
//!
//! Exit codes: 0 success, 1 usage error (bad arguments, unreadable or
//! invalid spec file, unknown names), 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use elloc_core::experiment::{crlb_sweep, run_experiment, ExperimentSpec, Method};
use elloc_core::geom::dist;
use elloc_core::metrics::MetricsReport;
use elloc_core::scenario::Scenario;
use elloc_core::validate;
use elloc_core::Error;

#[derive(Parser)]
#[command(
    name = "elloc",
    version,
    about = "Elliptic localization for distributed MIMO radar: gradient-flow network solvers, CRLB benchmarks and Monte-Carlo sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the Monte-Carlo experiment described by a TOML spec file
    Run {
        /// Path to the experiment spec
        spec: PathBuf,
    },
    /// Print a built-in antenna geometry
    Scenario {
        /// One of: scenario1-2d, scenario2-3d
        name: String,
    },
    /// Print the CRLB sweep of a spec file without running any trials
    Crlb {
        /// Path to the experiment spec
        spec: PathBuf,
    },
    /// Compare the network estimator against the brute-force grid oracle
    Oracle {
        /// Path to the experiment spec
        spec: PathBuf,
    },
    /// Run the built-in gradient and invariant self-checks
    Validate,
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let outcome = match cli.command {
        Command::Run { spec } => load_spec(&spec).map(|s| cmd_run(&s)),
        Command::Scenario { name } => cmd_scenario(&name).map(Ok),
        Command::Crlb { spec } => load_spec(&spec).map(|s| cmd_crlb(&s)),
        Command::Oracle { spec } => load_spec(&spec).map(|s| cmd_oracle(&s)),
        Command::Validate => Ok(cmd_validate()),
    };

    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("elloc: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(e) => {
            eprintln!("elloc: {e}");
            eprintln!("usage: elloc <run|crlb|oracle> <spec.toml> | elloc scenario <name> | elloc validate");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Spec loading problems are usage errors; everything after is runtime.
fn load_spec(path: &Path) -> Result<ExperimentSpec, Error> {
    ExperimentSpec::from_path(path)
}

fn cmd_run(spec: &ExperimentSpec) -> Result<(), Error> {
    let results = run_experiment(spec)?;
    println!("method,{}", MetricsReport::csv_header());
    for point in &results.points {
        for mr in &point.per_method {
            println!("{},{}", mr.method, mr.report.csv_row(point.point.snr_db));
        }
    }
    if let Some(dir) = &spec.output.dir {
        println!("wrote tables to {}", dir.display());
    }
    Ok(())
}

fn cmd_scenario(name: &str) -> Result<(), Error> {
    let s = Scenario::builtin(name)?;
    println!(
        "{name}: D = {}, M = {} transmitters, N = {} receivers",
        s.dim,
        s.num_tx(),
        s.num_rx()
    );
    let fmt = |p: &[f64]| {
        p.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for (i, t) in s.transmitters.iter().enumerate() {
        println!("tx {}: {}", i + 1, fmt(t));
    }
    for (i, r) in s.receivers.iter().enumerate() {
        println!("rx {}: {}", i + 1, fmt(r));
    }
    println!("target: {}", fmt(&s.target));
    Ok(())
}

fn cmd_crlb(spec: &ExperimentSpec) -> Result<(), Error> {
    let sweep = crlb_sweep(spec)?;
    if sweep.iter().any(|(p, _)| p.sigma2_p.is_some()) {
        println!("snr_db,sigma2_p,root_crlb");
        for (point, root) in sweep {
            println!(
                "{},{},{root}",
                point.snr_db,
                point.sigma2_p.map_or(String::from(""), |v| v.to_string())
            );
        }
    } else {
        println!("snr_db,root_crlb");
        for (point, root) in sweep {
            println!("{},{root}", point.snr_db);
        }
    }
    Ok(())
}

fn cmd_oracle(spec: &ExperimentSpec) -> Result<(), Error> {
    if spec.noise.antenna_variance.is_some() || spec.sweep.antenna_variance.is_some() {
        return Err(Error::InvalidInput(
            "the oracle comparison does not support antenna-error mode".into(),
        ));
    }
    let mut spec = spec.clone();
    spec.sweep.methods = vec![Method::Rnfnn, Method::Oracle];
    spec.output.dir = None;
    let results = run_experiment(&spec)?;
    println!("snr_db,trials,mean_gap,max_gap,mean_obj_rnfnn_minus_oracle");
    for point in &results.points {
        let rnfnn = &point.per_method[0].trials;
        let oracle = &point.per_method[1].trials;
        let gaps: Vec<f64> = rnfnn
            .iter()
            .zip(oracle)
            .map(|(r, o)| dist(&r.estimate, &o.estimate))
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let max = gaps.iter().cloned().fold(0.0, f64::max);
        // Positive mean error difference means the oracle found lower
        // objective values (it searches the whole box).
        let mean_err_diff = rnfnn
            .iter()
            .zip(oracle)
            .map(|(r, o)| r.error - o.error)
            .sum::<f64>()
            / gaps.len() as f64;
        println!(
            "{},{},{mean},{max},{mean_err_diff}",
            point.point.snr_db,
            gaps.len()
        );
    }
    Ok(())
}

fn cmd_validate() -> Result<(), Error> {
    let checks = validate::run_all();
    let mut all_pass = true;
    for check in &checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status}  {} — {}", check.name, check.detail);
        all_pass &= check.passed;
    }
    if all_pass {
        println!("{} checks passed", checks.len());
        Ok(())
    } else {
        Err(Error::InvalidInput("self-checks failed".into()))
    }
}
