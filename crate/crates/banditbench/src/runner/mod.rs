//! The experiment driver: per-unit context assembly, the sequential
//! assignment loop, and the full (state mode × reward kind × agent × seed)
//! grid.
//!
//! A run visits units in a seeded permutation (reshuffled on wraparound),
//! and per step: build context → agent acts → reward → regret → agent
//! observes. Given a config and seed the whole run is deterministic, so logs
//! and summaries are byte-identical across repeats.
//!
//! The normalized score of a run is `(r − r_uniform) / (r* − r_uniform)`,
//! with the uniform baseline run under the same (mode, reward, seed): the
//! oracle scores 1 and uniform scores 0 by construction.

pub mod gridfile;
pub mod report;

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::agents::{build_agent, AgentEnv, AgentFamily, AgentSpec, BuildError};
use crate::guidelines::{recommendation_vector, BoundRuleSet};
use crate::ingest::Dataset;
use crate::num::Scalar;
use crate::rewards::{instant_regret, optimal_action, reward_scalar, RewardKind};
use crate::rng::{derive_stream, RngSeed};
use crate::types::{Context, ContextError, ContextMode, DrugId, UnitId};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("state mode `{0}` needs a rule file")]
    MissingRulesForMode(ContextMode),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("horizon must be >= 1")]
    ZeroHorizon,
}

/// One experiment cell: everything that identifies a single run.
#[derive(Debug, Clone)]
pub struct RunCell {
    pub mode: ContextMode,
    pub reward: RewardKind,
    pub agent: AgentSpec,
    pub seed: u64,
    /// Steps to run; defaults to one pass over the units.
    pub horizon: Option<usize>,
}

/// One step of a run's log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S: Scalar> {
    pub t: usize,
    pub unit: UnitId,
    pub action: DrugId,
    pub reward: S,
    pub instant_regret: S,
    pub cum_reward: S,
    pub cum_regret: S,
}

/// Final accounting for one run.
#[derive(Debug, Clone)]
pub struct RunResult<S: Scalar> {
    pub mode: ContextMode,
    pub reward_kind: RewardKind,
    pub agent: String,
    pub seed: u64,
    pub horizon: usize,
    /// Σ r_t for the agent.
    pub cum_reward: S,
    /// Σ r_t for the per-unit optimal policy over the same sequence.
    pub oracle_reward: S,
    /// `oracle_reward − cum_reward`, exactly.
    pub regret: S,
    pub arm_counts: Vec<usize>,
}

/// A run's result plus its full step log.
#[derive(Debug, Clone)]
pub struct RunOutput<S: Scalar> {
    pub result: RunResult<S>,
    pub steps: Vec<StepRecord<S>>,
}

/// Assembles the agent-facing context for one unit under `mode`.
pub fn build_context<S: Scalar>(
    dataset: &Dataset<S>,
    rules: Option<&BoundRuleSet>,
    unit: UnitId,
    mode: ContextMode,
) -> Result<Context<S>, RunError> {
    let need_rules = || rules.ok_or(RunError::MissingRulesForMode(mode));
    match mode {
        ContextMode::Genomic => Ok(Context::genomic(dataset.feature_row(unit).to_vec())),
        ContextMode::Guideline => {
            let rec = recommendation_vector(need_rules()?, dataset, unit);
            Ok(Context::guideline(rec)?)
        }
        ContextMode::Both => {
            let rec = recommendation_vector(need_rules()?, dataset, unit);
            Ok(Context::both(dataset.feature_row(unit).to_vec(), rec)?)
        }
    }
}

fn context_dim<S: Scalar>(dataset: &Dataset<S>, mode: ContextMode) -> usize {
    mode.context_len(dataset.feature_width(), dataset.n_drugs())
}

/// Runs one cell to completion.
pub fn run_single<S: Scalar>(
    dataset: &Arc<Dataset<S>>,
    rules: Option<&Arc<BoundRuleSet>>,
    cell: &RunCell,
) -> Result<RunOutput<S>, RunError> {
    let n = dataset.n_units();
    let k = dataset.n_drugs();
    let horizon = cell.horizon.unwrap_or(n);
    if horizon == 0 {
        return Err(RunError::ZeroHorizon);
    }
    if matches!(cell.mode, ContextMode::Guideline | ContextMode::Both) && rules.is_none() {
        return Err(RunError::MissingRulesForMode(cell.mode));
    }

    let seed = RngSeed(cell.seed);
    let env = AgentEnv {
        n_drugs: k,
        context_dim: context_dim(dataset.as_ref(), cell.mode),
        reward_kind: cell.reward,
        dataset: Some(dataset),
        rules,
    };
    let mut agent = build_agent(&cell.agent, &env, seed.derive("agent"))?;

    let mut shuffle_rng = derive_stream(seed, "shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut shuffle_rng);

    let mut steps = Vec::with_capacity(horizon);
    let mut arm_counts = vec![0usize; k];
    let mut cum_reward = S::zero();
    let mut cum_regret = S::zero();
    let mut oracle_reward = S::zero();

    for t in 0..horizon {
        let pos = t % n;
        if t > 0 && pos == 0 {
            order.shuffle(&mut shuffle_rng);
        }
        let unit = UnitId(order[pos]);
        let context = build_context(dataset.as_ref(), rules.map(Arc::as_ref), unit, cell.mode)?;
        let action = agent.act(unit, &context);
        let reward = reward_scalar(dataset.as_ref(), unit, action, cell.reward);
        let regret = instant_regret(dataset.as_ref(), unit, action, cell.reward);
        let best = optimal_action(dataset.as_ref(), unit, cell.reward);
        oracle_reward += reward_scalar(dataset.as_ref(), unit, best, cell.reward);
        agent.observe(unit, &context, action, reward);

        cum_reward += reward;
        cum_regret += regret;
        arm_counts[action.0] += 1;
        steps.push(StepRecord {
            t,
            unit,
            action,
            reward,
            instant_regret: regret,
            cum_reward,
            cum_regret,
        });
    }

    let result = RunResult {
        mode: cell.mode,
        reward_kind: cell.reward,
        agent: cell.agent.display_string(),
        seed: cell.seed,
        horizon,
        cum_reward,
        oracle_reward,
        regret: oracle_reward - cum_reward,
        arm_counts,
    };
    Ok(RunOutput { result, steps })
}

/// The grid: cross product of modes, rewards, agents, and seeds.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub modes: Vec<ContextMode>,
    pub rewards: Vec<RewardKind>,
    pub agents: Vec<AgentSpec>,
    pub seeds: Vec<u64>,
    pub horizon: Option<usize>,
}

impl GridSpec {
    /// All cells in deterministic (mode, reward, agent, seed) order.
    pub fn cells(&self) -> Vec<RunCell> {
        let mut out = Vec::new();
        for mode in &self.modes {
            for reward in &self.rewards {
                for agent in &self.agents {
                    for seed in &self.seeds {
                        out.push(RunCell {
                            mode: *mode,
                            reward: *reward,
                            agent: agent.clone(),
                            seed: *seed,
                            horizon: self.horizon,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Outcome of one grid cell; failures are per-cell, never aborting the grid.
pub struct CellOutcome<S: Scalar> {
    pub cell: RunCell,
    pub outcome: Result<RunOutput<S>, RunError>,
    /// `(r − r_uniform) / (r* − r_uniform)` against this cell's baseline.
    pub normalized_score: Option<f64>,
}

/// All grid outputs plus the per-(mode, reward, seed) uniform baselines.
pub struct GridResults<S: Scalar> {
    pub cells: Vec<CellOutcome<S>>,
    /// Uniform cumulative reward keyed by (mode, reward, seed).
    pub baselines: HashMap<(ContextMode, RewardKind, u64), S>,
}

/// Normalized score for a result given its uniform baseline reward.
pub fn normalized_score<S: Scalar>(result: &RunResult<S>, uniform_reward: S) -> f64 {
    let denom = result.oracle_reward - uniform_reward;
    if denom.abs() < S::of(1e-12) {
        return 0.0;
    }
    ((result.cum_reward - uniform_reward) / denom).as_()
}

/// Runs every cell of the grid (plus one uniform baseline per
/// (mode, reward, seed)) on up to `jobs` threads. Cell results are
/// independent of execution order and concurrency.
pub fn run_grid<S: Scalar>(
    dataset: &Arc<Dataset<S>>,
    rules: Option<&Arc<BoundRuleSet>>,
    spec: &GridSpec,
    jobs: usize,
) -> GridResults<S> {
    let cells = spec.cells();

    let mut baseline_cells = Vec::new();
    for mode in &spec.modes {
        for reward in &spec.rewards {
            for seed in &spec.seeds {
                baseline_cells.push(RunCell {
                    mode: *mode,
                    reward: *reward,
                    agent: AgentSpec::new(AgentFamily::Uniform),
                    seed: *seed,
                    horizon: spec.horizon,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");

    let (baseline_outs, cell_outs): (Vec<_>, Vec<_>) = pool.install(|| {
        use rayon::prelude::*;
        let b: Vec<Result<RunOutput<S>, RunError>> = baseline_cells
            .par_iter()
            .map(|cell| run_single(dataset, rules, cell))
            .collect();
        let c: Vec<Result<RunOutput<S>, RunError>> = cells
            .par_iter()
            .map(|cell| run_single(dataset, rules, cell))
            .collect();
        (b, c)
    });

    let mut baselines = HashMap::new();
    for (cell, out) in baseline_cells.iter().zip(&baseline_outs) {
        if let Ok(out) = out {
            baselines.insert((cell.mode, cell.reward, cell.seed), out.result.cum_reward);
        }
    }

    let cells = cells
        .into_iter()
        .zip(cell_outs)
        .map(|(cell, outcome)| {
            let normalized_score = match &outcome {
                Ok(out) => baselines
                    .get(&(cell.mode, cell.reward, cell.seed))
                    .map(|u| normalized_score(&out.result, *u)),
                Err(_) => None,
            };
            CellOutcome {
                cell,
                outcome,
                normalized_score,
            }
        })
        .collect();

    GridResults { cells, baselines }
}

/// Mean and (sample) standard deviation over seeds for one aggregate row.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mode: ContextMode,
    pub reward: RewardKind,
    pub agent: String,
    pub n_seeds: usize,
    pub mean_regret: f64,
    pub sd_regret: f64,
    pub mean_normalized: f64,
    pub sd_normalized: f64,
}

impl<S: Scalar> GridResults<S> {
    /// Per-(mode, reward, agent) means ± sd over seeds, in grid order.
    pub fn aggregate(&self) -> Vec<Aggregate> {
        let mut order: Vec<(ContextMode, RewardKind, String)> = Vec::new();
        let mut groups: HashMap<(ContextMode, RewardKind, String), Vec<(f64, f64)>> = HashMap::new();
        for cell in &self.cells {
            if let (Ok(out), Some(score)) = (&cell.outcome, cell.normalized_score) {
                let key = (cell.cell.mode, cell.cell.reward, out.result.agent.clone());
                if !groups.contains_key(&key) {
                    order.push(key.clone());
                }
                groups.entry(key).or_default().push((out.result.regret.as_(), score));
            }
        }
        order
            .into_iter()
            .map(|key| {
                let vals = &groups[&key];
                let n = vals.len();
                let (mr, mn) = (
                    vals.iter().map(|v| v.0).sum::<f64>() / n as f64,
                    vals.iter().map(|v| v.1).sum::<f64>() / n as f64,
                );
                let var = |sel: fn(&(f64, f64)) -> f64, mean: f64| {
                    if n < 2 {
                        0.0
                    } else {
                        vals.iter().map(|v| (sel(v) - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                    }
                };
                Aggregate {
                    mode: key.0,
                    reward: key.1,
                    agent: key.2,
                    n_seeds: n,
                    mean_regret: mr,
                    sd_regret: var(|v| v.0, mr).sqrt(),
                    mean_normalized: mn,
                    sd_normalized: var(|v| v.1, mn).sqrt(),
                }
            })
            .collect()
    }
}
