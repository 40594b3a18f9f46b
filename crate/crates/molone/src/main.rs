use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use molone::harness::{run_experiment, write_atomic};
use molone::plan::ExperimentPlan;
use molone::render::matrix_text;
use molone::service::{serve, ServiceConfig, SessionManager};
use molone::{summary, HarnessError};
use molone_core::engine::{EngineConfig, PboSession};
use molone_core::{BenchmarkId, BenchmarkProblem};

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURES: u8 = 3;

#[derive(Parser)]
#[command(
    name = "molone",
    version,
    about = "Preferential Bayesian optimization with explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (benchmark, agent, seed) cell of an experiment plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Override the number of seeds per cell.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Results directory; defaults to the plan's output_dir or ./results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate the trajectories under a results directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print the explanation matrix for the first pair of a session.
    ExplainDemo {
        #[arg(long, default_value = "dtlz2")]
        benchmark: BenchmarkId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long, env = "MOLONE_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Event log directory; sessions are in memory only when absent.
        #[arg(long, env = "MOLONE_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, env = "MOLONE_MAX_SESSIONS", default_value_t = 1000)]
        max_sessions: usize,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        HarnessError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            plan,
            runs,
            jobs,
            out,
        } => {
            let mut p = match ExperimentPlan::load(&plan) {
                Ok(p) => p,
                Err(e) => return fail(&e),
            };
            if let Some(n) = runs {
                p = p.with_runs(n);
            }
            let out = out
                .or_else(|| p.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            match run_experiment(&p, &out, jobs) {
                Ok(report) => {
                    println!(
                        "{} runs completed, {} failed -> {}",
                        report.completed.len(),
                        report.failures.len(),
                        out.display()
                    );
                    for f in &report.failures {
                        eprintln!(
                            "failed: {} {} seed {}: {}",
                            f.benchmark, f.agent, f.seed, f.error
                        );
                    }
                    if report.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURES)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Summarize { input, format } => {
            let s = match summary::summarize(&input) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let (bytes, name) = match format {
                Format::Csv => (s.to_csv(), "summary.csv"),
                Format::Json => (
                    serde_json::to_vec_pretty(&s).map_err(Into::into),
                    "summary.json",
                ),
            };
            match bytes.and_then(|b| write_atomic(&input.join(name), &b).map(|_| b)) {
                Ok(b) => {
                    print!("{}", String::from_utf8_lossy(&b));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::ExplainDemo { benchmark, seed } => {
            let config = EngineConfig {
                explanations: true,
                ..EngineConfig::default()
            };
            let session = PboSession::initialize(BenchmarkProblem::new(benchmark), seed, config);
            match session {
                Ok(s) => {
                    let bundle = s
                        .pending()
                        .and_then(|p| p.bundle.as_ref())
                        .expect("explanations are enabled");
                    print!("{}", matrix_text(&bundle.matrix));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e.into()),
            }
        }
        Command::Serve {
            bind,
            data_dir,
            max_sessions,
        } => {
            let config = ServiceConfig {
                data_dir,
                max_sessions,
                ..ServiceConfig::default()
            };
            let manager = match SessionManager::new(config) {
                Ok(m) => Arc::new(m),
                Err(e) => return fail(&e),
            };
            eprintln!(
                "listening on {bind} ({} sessions restored)",
                manager.session_count()
            );
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(serve(bind, manager)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
