//! Experiment plans: which benchmarks, agents and seeds to run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use molone_core::agents::AgentSpec;
use molone_core::engine::EngineConfig;
use molone_core::BenchmarkId;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};

pub const DEFAULT_RUNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub benchmarks: Vec<BenchmarkId>,
    pub agents: Vec<AgentSpec>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// Explicit seeds; when absent, `base_seed .. base_seed + n_runs`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

impl ExperimentPlan {
    pub fn new(benchmarks: Vec<BenchmarkId>, agents: Vec<AgentSpec>, n_runs: usize) -> Self {
        Self {
            benchmarks,
            agents,
            n_runs,
            seeds: None,
            base_seed: 0,
            engine: EngineConfig::default(),
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Overrides the run count; explicit seed lists are truncated or extended from `base_seed`.
    pub fn with_runs(mut self, n: usize) -> Self {
        self.n_runs = n;
        if let Some(seeds) = &mut self.seeds {
            let mut next = self.base_seed;
            while seeds.len() < n {
                if !seeds.contains(&next) {
                    seeds.push(next);
                }
                next += 1;
            }
            seeds.truncate(n);
        }
        self
    }

    pub fn resolved_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.n_runs as u64)
                .map(|i| self.base_seed + i)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.benchmarks.is_empty() {
            return bad("plan lists no benchmarks".into());
        }
        if self.agents.is_empty() {
            return bad("plan lists no agents".into());
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        let seeds = self.resolved_seeds();
        if seeds.len() != self.n_runs {
            return bad(format!(
                "{} seeds given for n_runs = {}",
                seeds.len(),
                self.n_runs
            ));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let total = self.engine.total_comparisons();
        for a in &self.agents {
            if let AgentSpec::Noisy(n) = a {
                if *n > total {
                    return bad(format!(
                        "agent {a} needs {n} wrong answers but a run has only {total} comparisons"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_plan() {
        let p: ExperimentPlan =
            serde_json::from_str(r#"{"benchmarks":["dtlz2"],"agents":["ideal","noisy:10"]}"#)
                .unwrap();
        assert_eq!(p.n_runs, DEFAULT_RUNS);
        assert_eq!(p.agents[1], AgentSpec::Noisy(10));
        assert_eq!(p.resolved_seeds(), (0..10).collect::<Vec<u64>>());
        p.validate().unwrap();
    }

    #[test]
    fn rejects_bad_plans() {
        let mut p = ExperimentPlan::new(vec![BenchmarkId::Zdt1], vec![AgentSpec::Ideal], 2);
        p.seeds = Some(vec![3, 3]);
        assert!(p.validate().is_err());
        let p = ExperimentPlan::new(vec![BenchmarkId::Zdt1], vec![AgentSpec::Noisy(40)], 2);
        assert!(p.validate().is_err());
        assert!(serde_json::from_str::<ExperimentPlan>(
            r#"{"benchmarks":["dtlz9"],"agents":["ideal"]}"#
        )
        .is_err());
    }

    #[test]
    fn run_override_extends_seed_list() {
        let mut p = ExperimentPlan::new(vec![BenchmarkId::Zdt1], vec![AgentSpec::Ideal], 2);
        p.seeds = Some(vec![1, 7]);
        let p = p.with_runs(4);
        assert_eq!(p.resolved_seeds(), vec![1, 7, 0, 2]);
        p.validate().unwrap();
    }
}
