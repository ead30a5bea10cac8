//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quasikin::check::{run_suite, Suite};
use quasikin::par;
use quasikin::scenario::{self, CommandError, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};

#[derive(Parser)]
#[command(name = "quasikin", version, about = "Kinetic plasma solver in the quasineutral regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario at its configured epsilon.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `[output] dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the `[sweep]` epsilon list and write convergence.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the incompressible Euler reference alone.
    Euler {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite (`fast` or `full`) and write a JSON report.
    Check {
        suite: String,
        /// Report path (default `check_<suite>.json`).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("QUASIKIN_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("QUASIKIN_THREADS must be a positive integer, got '{s}'")),
    }
}

fn fail(e: CommandError) -> ExitCode {
    eprintln!("quasikin: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match threads_from_env() {
        Ok(t) => par::init_threads(t),
        Err(msg) => {
            eprintln!("quasikin: configuration error: {msg}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match cli.command {
        Command::Simulate { config, out } => match scenario::run_scenario(&config, out.as_deref()) {
            Ok(o) => {
                println!("wrote {} records to {}", o.records.len(), o.dir.display());
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => fail(e),
        },
        Command::Sweep { config, out } => match scenario::sweep_epsilon(&config, out.as_deref()) {
            Ok(report) => {
                for r in &report.rows {
                    println!(
                        "eps {:<8} sup_H {:<12} final_J_divfree {:<12} {}",
                        r.epsilon,
                        r.sup_h_mod.map(|v| format!("{v:.4e}")).unwrap_or_default(),
                        r.final_j_err_divfree.map(|v| format!("{v:.4e}")).unwrap_or_default(),
                        r.status
                    );
                }
                let code = if report.all_ok() { EXIT_OK } else { scenario::EXIT_RUNTIME };
                ExitCode::from(code as u8)
            }
            Err(e) => fail(e),
        },
        Command::Euler { config, out } => match scenario::run_euler(&config, out.as_deref()) {
            Ok(steps) => {
                println!("{steps} Euler steps");
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => fail(e),
        },
        Command::Check { suite, report } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("quasikin: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            let result = run_suite(suite, |r| println!("{}", r.line()));
            let name = if suite == Suite::Fast { "fast" } else { "full" };
            let path = report.unwrap_or_else(|| PathBuf::from(format!("check_{name}.json")));
            if let Err(e) = result.write_json(&path) {
                eprintln!("quasikin: runtime error: {e}");
                return ExitCode::from(scenario::EXIT_RUNTIME as u8);
            }
            println!("report: {}", path.display());
            ExitCode::from(if result.passed { EXIT_OK } else { EXIT_CHECK_FAILED } as u8)
        }
    }
}
