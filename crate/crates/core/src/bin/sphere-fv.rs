use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sphere_fv::cli::{self, CliError, ScenarioConfig};

/// Finite volume runs and checks for scalar conservation laws on the sphere.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Directory for diag.csv, state_<step>.vtk and report.json.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for the sample points of residual checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its diagnostics.
    Run { config: PathBuf },
    /// Compare a decoupled 2D run against independent per-band 1D schemes.
    Oracle { config: PathBuf },
    /// Refine the mesh and report L1 errors with observed orders.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Print mesh statistics and write cells.csv and faces.csv.
    MeshInfo { config: PathBuf },
    /// Bracket compatibility and divergence residuals of the flux.
    CheckFlux {
        config: PathBuf,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
}

const ORACLE_TOLERANCE: f64 = 1e-12;

fn print_json<T: serde::Serialize>(v: &T) {
    // a closed pipe (`| head`) is not an error
    let _ = writeln!(io::stdout(), "{}", serde_json::to_string_pretty(v).expect("serializable report"));
}

fn execute(args: &Args) -> Result<i32, CliError> {
    let load = |p: &PathBuf| ScenarioConfig::load(p);
    match &args.command {
        Command::Run { config } => {
            let report = cli::run_scenario(&load(config)?.build()?, &args.out_dir)?;
            print_json(&report.summary);
            if !report.passed {
                eprintln!("an asserted invariant failed; see {}", args.out_dir.join("report.json").display());
            }
            Ok(report.exit_code())
        }
        Command::Oracle { config } => {
            let report = cli::oracle_compare(&load(config)?.build()?)?;
            print_json(&report);
            Ok(i32::from(report.max_discrepancy > ORACLE_TOLERANCE))
        }
        Command::Converge { config, levels } => {
            let table = cli::convergence_study(&load(config)?, *levels)?;
            let _ = writeln!(io::stdout(), "{table}");
            Ok(0)
        }
        Command::MeshInfo { config } => {
            print_json(&cli::mesh_info(&load(config)?.build()?, Some(&args.out_dir))?);
            Ok(0)
        }
        Command::CheckFlux { config, points } => {
            print_json(&cli::check_flux(&load(config)?.build()?, args.seed, *points)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("--threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
