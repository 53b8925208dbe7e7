use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use recoil_cli::compare::compare_runs;
use recoil_cli::spec::Format;
use recoil_cli::{execute, scenarios, with_thread_limit, RunOptions, ScenarioSpec};

/// Brownian motion with and without medium recoil.
#[derive(Parser)]
#[command(name = "recoil", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario spec.
    Run {
        spec: PathBuf,
        /// Output directory (overrides the spec).
        #[arg(long)]
        out: Option<PathBuf>,
        /// RNG seed (overrides the spec).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Stop at the first failed gate; unevaluable gates fail.
        #[arg(long)]
        strict: bool,
    },
    /// List the built-in scenarios.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Compare the files of two run directories.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn run(spec_path: PathBuf, opts: RunOptions) -> u8 {
    let (spec, text) = match ScenarioSpec::load(&spec_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match with_thread_limit(|| execute(&spec, &text, &opts)) {
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
        Ok(Ok(outcome)) => {
            for g in &outcome.report.gates {
                let value = g.value.map(|v| format!("{v:.3e}")).unwrap_or_default();
                let tol = g.tolerance.map(|v| format!(" (tol {v:.1e})")).unwrap_or_default();
                let regime = match (&g.expected, &g.observed) {
                    (Some(e), Some(o)) => format!(" expected {e}, got {o}"),
                    _ => String::new(),
                };
                println!("{:<8} {:<32} {value}{tol}{regime}", format!("{:?}", g.status).to_uppercase(), g.name);
            }
            println!("wrote {}", outcome.dir.display());
            if outcome.passed() {
                0
            } else {
                eprintln!("tolerance gates failed");
                1
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { spec, out, seed, format, strict } => run(spec, RunOptions { out, seed, format, strict }),
        Command::List { json } => {
            if json {
                println!("{}", scenarios::json());
            } else {
                print!("{}", scenarios::table_text());
            }
            0
        }
        Command::Compare { run_a, run_b, json } => match compare_runs(&run_a, &run_b) {
            Ok(c) => {
                if json {
                    println!("{}", serde_json::to_string_pretty(&c).expect("serializable comparison"));
                } else {
                    print!("{}", c.text());
                }
                if c.identical() {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    };
    ExitCode::from(code)
}
