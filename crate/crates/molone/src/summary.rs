//! Aggregates over trajectory CSVs.

use std::collections::BTreeMap;
use std::path::Path;

use molone_core::agents::AgentSpec;
use molone_core::BenchmarkId;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};
use crate::harness::format_real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub comparison_index: usize,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub benchmark: BenchmarkId,
    pub agent: AgentSpec,
    pub seeds: Vec<u64>,
    pub rows: Vec<IndexStats>,
}

impl CellSummary {
    pub fn final_stats(&self) -> &IndexStats {
        self.rows.last().expect("cells are never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub agent: AgentSpec,
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRanking {
    pub benchmark: BenchmarkId,
    /// Best final mean first.
    pub ranking: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub rankings: Vec<BenchmarkRanking>,
}

pub fn stats(comparison_index: usize, values: &[f64]) -> IndexStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    IndexStats {
        comparison_index,
        runs: n,
        mean,
        std,
        median,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

type Run = (u64, Vec<f64>);

/// Aggregates runs keyed by cell. Runs are sorted by seed first, so the
/// result does not depend on input order.
pub fn summarize_runs(runs: BTreeMap<(BenchmarkId, AgentSpec), Vec<Run>>) -> Result<Summary> {
    if runs.is_empty() {
        return Err(HarnessError::Data("no completed runs to summarize".into()));
    }
    let mut cells = Vec::new();
    for ((benchmark, agent), mut rs) in runs {
        rs.sort_by_key(|r| r.0);
        let len = rs.iter().map(|r| r.1.len()).max().unwrap_or(0);
        if len == 0 || rs.iter().any(|r| r.1.len() != len) {
            return Err(HarnessError::Data(format!(
                "{benchmark}/{agent}: runs have unequal or empty trajectories"
            )));
        }
        let rows = (0..len)
            .map(|i| stats(i + 1, &rs.iter().map(|r| r.1[i]).collect::<Vec<_>>()))
            .collect();
        cells.push(CellSummary {
            benchmark,
            agent,
            seeds: rs.iter().map(|r| r.0).collect(),
            rows,
        });
    }
    let mut rankings: Vec<BenchmarkRanking> = Vec::new();
    for c in &cells {
        let entry = RankEntry {
            agent: c.agent,
            final_mean: c.final_stats().mean,
        };
        match rankings.iter_mut().find(|r| r.benchmark == c.benchmark) {
            Some(r) => r.ranking.push(entry),
            None => rankings.push(BenchmarkRanking {
                benchmark: c.benchmark,
                ranking: vec![entry],
            }),
        }
    }
    for r in &mut rankings {
        r.ranking.sort_by(|a, b| {
            b.final_mean
                .total_cmp(&a.final_mean)
                .then(a.agent.cmp(&b.agent))
        });
    }
    Ok(Summary { cells, rankings })
}

/// Reads every `trajectories/*.csv` under `dir`.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let tdir = dir.join("trajectories");
    if !tdir.is_dir() {
        return Err(HarnessError::Data(format!(
            "{} holds no trajectories",
            dir.display()
        )));
    }
    let mut files: Vec<_> = std::fs::read_dir(&tdir)
        .at(&tdir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut runs: BTreeMap<(BenchmarkId, AgentSpec), Vec<Run>> = BTreeMap::new();
    for path in files {
        let mut reader = csv::Reader::from_path(&path)?;
        let mut key = None;
        let mut traj = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let bad = |what: &str| HarnessError::Data(format!("{}: bad {what}", path.display()));
            let seed: u64 = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("run_seed"))?;
            let b: BenchmarkId = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("benchmark"))?;
            let a: AgentSpec = rec
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("agent"))?;
            let idx: usize = rec
                .get(3)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("comparison_index"))?;
            let v: f64 = rec
                .get(4)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("best_utility_so_far"))?;
            if idx != traj.len() + 1 || key.is_some_and(|k| k != (seed, b, a)) {
                return Err(bad("row order"));
            }
            key = Some((seed, b, a));
            traj.push(v);
        }
        if let Some((seed, b, a)) = key {
            runs.entry((b, a)).or_default().push((seed, traj));
        }
    }
    summarize_runs(runs)
}

impl Summary {
    pub fn cell(&self, benchmark: BenchmarkId, agent: AgentSpec) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.benchmark == benchmark && c.agent == agent)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "benchmark",
            "agent",
            "comparison_index",
            "runs",
            "mean",
            "std",
            "median",
            "min",
            "max",
        ])?;
        for c in &self.cells {
            for r in &c.rows {
                w.write_record([
                    c.benchmark.to_string(),
                    c.agent.to_string(),
                    r.comparison_index.to_string(),
                    r.runs.to_string(),
                    format_real(r.mean),
                    format_real(r.std),
                    format_real(r.median),
                    format_real(r.min),
                    format_real(r.max),
                ])?;
            }
        }
        w.into_inner()
            .map_err(|e| HarnessError::Data(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(runs: Vec<Run>) -> Summary {
        let mut m = BTreeMap::new();
        m.insert((BenchmarkId::Dtlz2, AgentSpec::Ideal), runs);
        summarize_runs(m).unwrap()
    }

    #[test]
    fn single_run_has_zero_spread() {
        let s = one_cell(vec![(3, vec![0.5, 0.7])]);
        let c = &s.cells[0];
        assert_eq!(c.rows[1].mean, 0.7);
        assert_eq!(c.rows[1].std, 0.0);
    }

    #[test]
    fn two_run_mean() {
        let s = one_cell(vec![(1, vec![1.0]), (2, vec![2.0])]);
        let f = s.cells[0].final_stats();
        assert_eq!(f.mean, 1.5);
        assert_eq!(f.median, 1.5);
        assert_eq!((f.min, f.max), (1.0, 2.0));
    }

    #[test]
    fn order_of_runs_is_irrelevant() {
        let a = one_cell(vec![
            (1, vec![1.0, 2.0]),
            (2, vec![0.3, 0.9]),
            (5, vec![0.1, 0.2]),
        ]);
        let b = one_cell(vec![
            (5, vec![0.1, 0.2]),
            (1, vec![1.0, 2.0]),
            (2, vec![0.3, 0.9]),
        ]);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_is_a_data_error() {
        assert!(matches!(
            summarize_runs(BTreeMap::new()),
            Err(HarnessError::Data(_))
        ));
    }

    #[test]
    fn ranking_orders_by_final_mean() {
        let mut m = BTreeMap::new();
        m.insert((BenchmarkId::Zdt1, AgentSpec::Ideal), vec![(0, vec![1.0])]);
        m.insert((BenchmarkId::Zdt1, AgentSpec::Molone), vec![(0, vec![3.0])]);
        let s = summarize_runs(m).unwrap();
        assert_eq!(s.rankings[0].ranking[0].agent, AgentSpec::Molone);
    }
}
