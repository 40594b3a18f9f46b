//! The preference-exploration / experimentation loop as a state machine.
//!
//! A run evaluates `n_init` Sobol designs, bootstraps the utility model with a
//! few comparisons decided by the true utility, then alternates
//! `rounds_per_stage` pairwise comparisons with one experimentation batch,
//! `stages` times.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{eubo_select, select_batch, BatchConfig};
use crate::benchmarks::{BenchmarkProblem, DesignPoint, OutcomeVector};
use crate::error::contract;
use crate::explain::{explain_pair, ExplainConfig, ExplanationBundle};
use crate::gp::{GpConfig, GpModel, PosteriorSummary};
use crate::pref::{ComparisonRecord, ComparisonSource, PrefConfig, PreferenceModel};
use crate::sampling::sobol;
use crate::{Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn other(self) -> Self {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingChoice,
    Experimenting,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub n_init: usize,
    pub n_seed_comparisons: usize,
    pub stages: usize,
    pub rounds_per_stage: usize,
    pub pair_pool: usize,
    pub pair_shortlist: usize,
    pub pair_draws: usize,
    pub batch: BatchConfig,
    pub gp: GpConfig,
    pub pref: PrefConfig,
    pub explain: ExplainConfig,
    /// Attach an explanation bundle to every generated pair.
    pub explanations: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_init: 20,
            n_seed_comparisons: 4,
            stages: 4,
            rounds_per_stage: 8,
            pair_pool: 256,
            pair_shortlist: 16,
            pair_draws: 64,
            batch: BatchConfig::default(),
            gp: GpConfig::default(),
            pref: PrefConfig::default(),
            explain: ExplainConfig::default(),
            explanations: false,
        }
    }
}

impl EngineConfig {
    pub fn total_comparisons(&self) -> usize {
        self.stages * self.rounds_per_stage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSample {
    pub x: DesignPoint,
    pub y_pred: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub pair_id: u64,
    pub a: CandidateSample,
    pub b: CandidateSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPair {
    pub pair: CandidatePair,
    pub bundle: Option<ExplanationBundle>,
}

#[derive(Debug, Clone)]
pub struct PboSession {
    problem: BenchmarkProblem,
    seed: u64,
    config: EngineConfig,
    root: RngStream,
    observations: Vec<(DesignPoint, OutcomeVector)>,
    comparisons: Vec<ComparisonRecord>,
    stage_index: usize,
    round_index: usize,
    phase: Phase,
    pending: Option<PendingPair>,
    trajectory: Vec<f64>,
    next_pair_id: u64,
    gp: GpModel,
    pref: PreferenceModel,
}

fn fit_pref(
    problem: &BenchmarkProblem,
    records: &[ComparisonRecord],
    config: &PrefConfig,
    rng: &RngStream,
) -> Result<PreferenceModel> {
    if records.is_empty() {
        Ok(PreferenceModel::prior(problem.output_dim, config))
    } else {
        PreferenceModel::fit(records, config, rng)
    }
}

impl PboSession {
    pub fn initialize(problem: BenchmarkProblem, seed: u64, config: EngineConfig) -> Result<Self> {
        contract!(config.n_init >= 2, "n_init must be at least 2");
        contract!(config.pair_pool >= 2, "pair_pool must be at least 2");
        let root = RngStream::new(seed, "session");
        let designs = sobol(config.n_init, problem.input_dim, &root.fork("init"))?;
        let mut observations = Vec::with_capacity(config.n_init + config.stages * config.batch.q);
        for x in designs {
            let y = problem.evaluate(&x)?;
            observations.push((x, y));
        }
        let (xs, ys): (Vec<_>, Vec<_>) = observations.iter().cloned().unzip();
        let gp = GpModel::fit(xs, ys, &config.gp, &root.fork("gp").fork(0))?;

        let mut comparisons =
            Vec::with_capacity(config.n_seed_comparisons + config.total_comparisons());
        let mut r = root.fork("seed_pairs").rng();
        for _ in 0..config.n_seed_comparisons {
            let i = r.random_range(0..observations.len());
            let mut j = r.random_range(0..observations.len() - 1);
            if j >= i {
                j += 1;
            }
            let (yi, yj) = (&observations[i].1, &observations[j].1);
            let (winner, loser) = if problem.true_utility(yi)? >= problem.true_utility(yj)? {
                (yi, yj)
            } else {
                (yj, yi)
            };
            comparisons.push(ComparisonRecord {
                winner: winner.clone(),
                loser: loser.clone(),
                source: ComparisonSource::SeedRandom,
            });
        }
        let pref = fit_pref(
            &problem,
            &comparisons,
            &config.pref,
            &root.fork("pref").fork(0),
        )?;
        let mut session = Self {
            problem,
            seed,
            config,
            root,
            observations,
            comparisons,
            stage_index: 0,
            round_index: 0,
            phase: Phase::AwaitingChoice,
            pending: None,
            trajectory: Vec::new(),
            next_pair_id: 1,
            gp,
            pref,
        };
        if session.config.total_comparisons() == 0 {
            session.phase = Phase::Done;
        } else {
            session.issue_pair()?;
        }
        Ok(session)
    }

    /// Candidate pair for the current round by expected utility of the best option.
    pub fn generate_pair(&self) -> Result<CandidatePair> {
        if self.phase == Phase::Done {
            return Err(Error::State("session is done".into()));
        }
        let pair_id = self.next_pair_id;
        let pool = sobol(
            self.config.pair_pool,
            self.problem.input_dim,
            &self.root.fork("pair_pool").fork(pair_id),
        )?;
        let summaries: Vec<PosteriorSummary> = pool.iter().map(|x| self.gp.posterior(x)).collect();
        let predicted = summaries
            .iter()
            .map(|s| OutcomeVector::new(s.mean.clone()))
            .collect::<Result<Vec<_>>>()?;
        let (i, j) = eubo_select(
            &self.pref,
            &pool,
            &predicted,
            self.config.pair_shortlist,
            self.config.pair_draws,
            &self.root.fork("eubo").fork(pair_id),
        )?;
        Ok(CandidatePair {
            pair_id,
            a: CandidateSample {
                x: pool[i].clone(),
                y_pred: summaries[i].clone(),
            },
            b: CandidateSample {
                x: pool[j].clone(),
                y_pred: summaries[j].clone(),
            },
        })
    }

    /// Explanation bundle for a pair; uses dedicated streams so it never
    /// perturbs the rest of the run.
    pub fn explain(&self, pair: &CandidatePair) -> Result<ExplanationBundle> {
        let base = self.root.fork("explain").fork(pair.pair_id);
        explain_pair(
            &pair.a.x,
            &pair.b.x,
            &self.gp,
            &self.pref,
            &self.config.explain,
            &base.fork("a"),
            &base.fork("b"),
        )
    }

    fn issue_pair(&mut self) -> Result<()> {
        let pair = self.generate_pair()?;
        let bundle = if self.config.explanations {
            Some(self.explain(&pair)?)
        } else {
            None
        };
        self.next_pair_id += 1;
        self.pending = Some(PendingPair { pair, bundle });
        self.phase = Phase::AwaitingChoice;
        Ok(())
    }

    /// Attaches an explanation to the pending pair if it has none yet.
    pub fn ensure_explanation(&mut self) -> Result<&ExplanationBundle> {
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::State("no pending pair".into()))?;
        if pending.bundle.is_none() {
            let bundle = self.explain(&pending.pair)?;
            self.pending.as_mut().unwrap().bundle = Some(bundle);
        }
        Ok(self.pending.as_ref().unwrap().bundle.as_ref().unwrap())
    }

    /// Records the decision on the pending pair and advances the protocol.
    /// On error the session is left unchanged.
    pub fn submit_choice(&mut self, pair_id: u64, choice: Choice) -> Result<()> {
        if self.phase != Phase::AwaitingChoice {
            return Err(Error::State(format!(
                "cannot submit a choice while {:?}",
                self.phase
            )));
        }
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::State("no pending pair".into()))?;
        if pending.pair.pair_id != pair_id {
            return Err(Error::Conflict {
                given: pair_id,
                pending: pending.pair.pair_id,
            });
        }
        let pair = &pending.pair;
        let (w, l) = match choice {
            Choice::A => (&pair.a, &pair.b),
            Choice::B => (&pair.b, &pair.a),
        };
        let record = ComparisonRecord {
            winner: OutcomeVector::new(w.y_pred.mean.clone())?,
            loser: OutcomeVector::new(l.y_pred.mean.clone())?,
            source: ComparisonSource::SimulatedAgent,
        };
        let mut next = self.clone();
        next.comparisons.push(record);
        let n = next.comparisons.len();
        next.pref = fit_pref(
            &next.problem,
            &next.comparisons,
            &next.config.pref,
            &next.root.fork("pref").fork(n),
        )?;
        next.pending = None;
        next.round_index += 1;
        if next.round_index == next.config.rounds_per_stage {
            next.phase = Phase::Experimenting;
            next.experimentation_batch()?;
            next.round_index = 0;
            next.stage_index += 1;
        }
        next.trajectory.push(next.best_so_far());
        if next.stage_index == next.config.stages {
            next.phase = Phase::Done;
        } else {
            next.issue_pair()?;
        }
        *self = next;
        Ok(())
    }

    /// Marks the most recent comparison as coming from a human.
    pub fn set_last_source(&mut self, source: ComparisonSource) {
        if let Some(r) = self.comparisons.last_mut() {
            r.source = source;
        }
    }

    /// Evaluates a batch of designs chosen by qNEIUU and refits the outcome model.
    pub fn experimentation_batch(&mut self) -> Result<()> {
        if self.phase != Phase::Experimenting {
            return Err(Error::State(format!(
                "cannot run a batch while {:?}",
                self.phase
            )));
        }
        let baseline: Vec<DesignPoint> = self.observations.iter().map(|(x, _)| x.clone()).collect();
        let stage = self.stage_index;
        let batch = select_batch(
            &self.gp,
            &self.pref,
            &baseline,
            &self.config.batch,
            &self.root.fork("batch").fork(stage),
        )?;
        for x in batch {
            let y = self.problem.evaluate(&x)?;
            self.observations.push((x, y));
        }
        let (xs, ys): (Vec<_>, Vec<_>) = self.observations.iter().cloned().unzip();
        self.gp = GpModel::fit(
            xs,
            ys,
            &self.config.gp,
            &self.root.fork("gp").fork(stage + 1),
        )?;
        Ok(())
    }

    /// Best true utility over all evaluated designs.
    pub fn best_so_far(&self) -> f64 {
        self.observations
            .iter()
            .filter_map(|(_, y)| self.problem.true_utility(y).ok())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn problem(&self) -> &BenchmarkProblem {
        &self.problem
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn observations(&self) -> &[(DesignPoint, OutcomeVector)] {
        &self.observations
    }

    pub fn comparisons(&self) -> &[ComparisonRecord] {
        &self.comparisons
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stage_index(&self) -> usize {
        self.stage_index
    }

    pub fn round_index(&self) -> usize {
        self.round_index
    }

    pub fn pending(&self) -> Option<&PendingPair> {
        self.pending.as_ref()
    }

    /// Best-so-far true utility after each submitted choice.
    pub fn trajectory(&self) -> &[f64] {
        &self.trajectory
    }

    pub fn comparisons_done(&self) -> usize {
        self.trajectory.len()
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn pref(&self) -> &PreferenceModel {
        &self.pref
    }
}
