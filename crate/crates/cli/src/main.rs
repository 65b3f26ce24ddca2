use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcl::experiment::{self, gradcheck, ExperimentConfig, RunStatus, Task};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qcl", version, about = "Train and evaluate quantum circuit learning models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Parent directory for the run directory (overrides `output_dir`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Base seed; every seed of the bundle is derived from it.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Re-render the SVG figures of an existing run directory.
    Plot { run_dir: PathBuf },
    /// Check parameter-shift gradients and the commutator identity on random instances.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the fully resolved default config of a task.
    Defaults { task: String },
}

fn fail(kind: &str, message: impl std::fmt::Display, extra: Option<serde_json::Value>) -> ExitCode {
    let mut err = json!({ "kind": kind, "message": message.to_string() });
    if let Some(extra) = extra {
        err["details"] = extra;
    }
    eprintln!("{}", json!({ "error": err }));
    ExitCode::FAILURE
}

fn report(e: qcl::Error) -> ExitCode {
    fail(e.kind(), &e, None)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out_dir, seed_override } => {
            let mut cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return report(e),
            };
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            if let Some(seed) = seed_override {
                cfg.override_seeds(seed);
                if let Err(e) = cfg.validate() {
                    return report(e);
                }
            }
            match experiment::run(&cfg) {
                Ok(summary) if summary.status == RunStatus::Aborted => fail(
                    "numerical",
                    format!("training aborted; partial artifacts in {}", summary.run_dir.display()),
                    serde_json::to_value(&summary).ok(),
                ),
                Ok(summary) => {
                    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
                    ExitCode::SUCCESS
                }
                Err(e) => report(e),
            }
        }
        Command::Plot { run_dir } => match experiment::emit_plots(&run_dir) {
            Ok(files) => {
                println!("{}", json!({ "files": files }));
                ExitCode::SUCCESS
            }
            Err(e) => report(e),
        },
        Command::Gradcheck { instances, seed } => {
            let checks = gradcheck::gradient_check(instances, seed)
                .and_then(|g| Ok(vec![g, gradcheck::commutator_check(instances, seed)?]));
            match checks {
                Ok(checks) => {
                    let passed = checks.iter().all(|c| c.passed);
                    let out = json!({ "passed": passed, "checks": checks });
                    if passed {
                        println!("{out}");
                        ExitCode::SUCCESS
                    } else {
                        fail("check_failed", "gradient self-check failed", Some(out))
                    }
                }
                Err(e) => report(e),
            }
        }
        Command::Defaults { task } => match task.parse::<Task>().and_then(|t| ExperimentConfig::defaults(t).to_json()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => report(e),
        },
    }
}
