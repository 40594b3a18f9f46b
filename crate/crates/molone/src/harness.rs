//! Multi-seed simulated runs and their on-disk results.
//!
//! Layout of a results directory:
//!
//! ```text
//! metadata.json                  resolved plan and software version
//! trajectories/<cell>.csv        one file per (benchmark, agent, seed)
//! summary.csv, summary.json      per-index aggregates (see `summary`)
//! failures.csv                   runs that errored
//! timings.csv                    wall-clock per run, kept apart so the rest is byte-stable
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use molone_core::agents::{AgentPolicy, AgentSpec};
use molone_core::engine::{Choice, EngineConfig, PboSession, Phase};
use molone_core::{BenchmarkId, BenchmarkProblem, OutcomeVector, RngStream};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HarnessError, IoContext, Result};
use crate::plan::ExperimentPlan;
use crate::summary;

pub const TRAJECTORY_HEADER: [&str; 5] = [
    "run_seed",
    "benchmark",
    "agent",
    "comparison_index",
    "best_utility_so_far",
];

/// One simulated decision: what the agent saw and what it chose.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub true_a: OutcomeVector,
    pub true_b: OutcomeVector,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub benchmark: BenchmarkId,
    pub agent: AgentSpec,
    pub seed: u64,
    pub trajectory: Vec<f64>,
    pub decisions: Vec<Decision>,
    pub wall_time_ms: u128,
}

pub fn agent_stream(agent: AgentSpec, seed: u64) -> RngStream {
    RngStream::new(seed, "agent").fork(agent)
}

/// Runs one full session with a simulated agent that sees true outcomes.
pub fn simulate_run(
    benchmark: BenchmarkId,
    agent: AgentSpec,
    seed: u64,
    engine: &EngineConfig,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let problem = BenchmarkProblem::new(benchmark);
    let config = EngineConfig {
        explanations: engine.explanations || agent.needs_explanations(),
        ..engine.clone()
    };
    let policy = AgentPolicy::new(
        agent,
        &problem,
        config.total_comparisons(),
        &agent_stream(agent, seed),
    )?;
    let mut session = PboSession::initialize(problem.clone(), seed, config)?;
    let mut decisions = Vec::with_capacity(session.config().total_comparisons());
    while session.phase() != Phase::Done {
        let pending = session
            .pending()
            .ok_or_else(|| HarnessError::Data("session has no pending pair".into()))?;
        let true_a = problem.evaluate(&pending.pair.a.x)?;
        let true_b = problem.evaluate(&pending.pair.b.x)?;
        let choice = policy.choose(
            (true_a.values(), true_b.values()),
            pending.bundle.as_ref(),
            decisions.len(),
        )?;
        let pair_id = pending.pair.pair_id;
        session.submit_choice(pair_id, choice)?;
        decisions.push(Decision {
            true_a,
            true_b,
            choice,
        });
    }
    Ok(RunOutcome {
        benchmark,
        agent,
        seed,
        trajectory: session.trajectory().to_vec(),
        decisions,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

pub fn agent_slug(agent: AgentSpec) -> String {
    agent.to_string().replace(':', "-")
}

pub fn trajectory_path(dir: &Path, benchmark: BenchmarkId, agent: AgentSpec, seed: u64) -> PathBuf {
    dir.join("trajectories").join(format!(
        "{benchmark}__{}__seed{seed}.csv",
        agent_slug(agent)
    ))
}

pub fn format_real(v: f64) -> String {
    format!("{v:.12}")
}

pub fn trajectory_csv(run: &RunOutcome) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER)?;
    for (i, v) in run.trajectory.iter().enumerate() {
        w.write_record([
            run.seed.to_string(),
            run.benchmark.to_string(),
            run.agent.to_string(),
            (i + 1).to_string(),
            format_real(*v),
        ])?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Data(e.to_string()))
}

/// Writes through a temporary sibling and renames, so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).at(&tmp)?;
        f.write_all(bytes).at(&tmp)?;
        f.sync_all().at(&tmp)?;
    }
    fs::rename(&tmp, path).at(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub benchmark: BenchmarkId,
    pub agent: AgentSpec,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub completed: Vec<RunOutcome>,
    pub failures: Vec<RunFailure>,
    /// (benchmark, agent) cells in which every seed failed.
    pub failed_cells: Vec<(BenchmarkId, AgentSpec)>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    software: &'static str,
    version: &'static str,
    seeds: Vec<u64>,
    plan: &'a ExperimentPlan,
}

pub fn run_experiment(
    plan: &ExperimentPlan,
    out_dir: &Path,
    jobs: usize,
) -> Result<ExperimentReport> {
    plan.validate()?;
    fs::create_dir_all(out_dir.join("trajectories")).at(out_dir)?;
    let seeds = plan.resolved_seeds();
    let metadata = Metadata {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seeds: seeds.clone(),
        plan,
    };
    write_atomic(
        &out_dir.join("metadata.json"),
        &serde_json::to_vec_pretty(&metadata)?,
    )?;

    let mut cells = Vec::new();
    for &b in &plan.benchmarks {
        for &a in &plan.agents {
            for &s in &seeds {
                cells.push((b, a, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<std::result::Result<RunOutcome, RunFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(b, a, s)| {
                let run = simulate_run(b, a, s, &plan.engine).and_then(|r| {
                    write_atomic(&trajectory_path(out_dir, b, a, s), &trajectory_csv(&r)?)
                        .map(|_| r)
                });
                run.map_err(|e| RunFailure {
                    benchmark: b,
                    agent: a,
                    seed: s,
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => completed.push(run),
            Err(f) => failures.push(f),
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["run_seed", "benchmark", "agent", "error"])?;
    for f in &failures {
        w.write_record([
            f.seed.to_string(),
            f.benchmark.to_string(),
            f.agent.to_string(),
            f.error.clone(),
        ])?;
    }
    write_atomic(
        &out_dir.join("failures.csv"),
        &w.into_inner()
            .map_err(|e| HarnessError::Data(e.to_string()))?,
    )?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["run_seed", "benchmark", "agent", "wall_time_ms"])?;
    for r in &completed {
        w.write_record([
            r.seed.to_string(),
            r.benchmark.to_string(),
            r.agent.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    write_atomic(
        &out_dir.join("timings.csv"),
        &w.into_inner()
            .map_err(|e| HarnessError::Data(e.to_string()))?,
    )?;

    if !completed.is_empty() {
        let s = summary::summarize(out_dir)?;
        write_atomic(&out_dir.join("summary.csv"), &s.to_csv()?)?;
        write_atomic(
            &out_dir.join("summary.json"),
            &serde_json::to_vec_pretty(&s)?,
        )?;
    }

    let mut failed_cells = Vec::new();
    for &b in &plan.benchmarks {
        for &a in &plan.agents {
            if !completed.iter().any(|r| r.benchmark == b && r.agent == a) {
                failed_cells.push((b, a));
            }
        }
    }
    Ok(ExperimentReport {
        out_dir: out_dir.to_path_buf(),
        completed,
        failures,
        failed_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let run = RunOutcome {
            benchmark: BenchmarkId::Dtlz2,
            agent: AgentSpec::Noisy(10),
            seed: 4,
            trajectory: vec![1.0, 1.25],
            decisions: Vec::new(),
            wall_time_ms: 0,
        };
        let text = String::from_utf8(trajectory_csv(&run).unwrap()).unwrap();
        assert_eq!(
            text,
            "run_seed,benchmark,agent,comparison_index,best_utility_so_far\n\
             4,dtlz2,noisy:10,1,1.000000000000\n\
             4,dtlz2,noisy:10,2,1.250000000000\n"
        );
        assert!(trajectory_path(
            Path::new("out"),
            BenchmarkId::Dtlz2,
            AgentSpec::Noisy(10),
            4
        )
        .ends_with("trajectories/dtlz2__noisy-10__seed4.csv"));
    }
}
