//! Treatment-assignment agents: scripted baselines (uniform, guideline,
//! oracle) and Thompson-sampling posterior approximations (Bayesian linear,
//! neural greedy/dropout/parameter-noise/bootstrapped/neural-linear, and
//! Bayes by backprop).
//!
//! Hyperparameter defaults:
//!
//! | family       | defaults                                        |
//! |--------------|-------------------------------------------------|
//! | linear       | noise prior a0 = 6, b0 = 6; ridge λ = 0.25       |
//! | neurallinear | noise prior a0 = 3, b0 = 3; ridge λ = 0.25; rms2 |
//! | greedy       | fixed learning rate γ = 0.01                     |
//! | dropout      | keep probability p = 0.8; rms3                   |
//! | paramnoise   | initial noise σ = 0.01, level ε = 0.01; rms2     |
//! | bootstrap    | q = 5 replicas, inclusion p = 0.85; rms3         |
//! | bbb          | observation noise σ = 0.1; rms3                  |
//!
//! Networks default to one hidden layer of 100 rectifier units and train for
//! 100 steps of batch 512 every 20 decisions. RMS3 decays from γ = 1 on a
//! clock that never resets; RMS2 restarts its decay every training period.
//!
//! Every learning agent opens with a forced-exploration prologue: during the
//! first 2k decisions each arm is played exactly twice, round-robin.

pub mod bbb;
pub mod linear;
pub mod mlp;
pub mod neural;
pub mod train;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::guidelines::BoundRuleSet;
use crate::ingest::Dataset;
use crate::num::Scalar;
use crate::rewards::RewardKind;
use crate::rng::{derive_stream, RngSeed, RngStream};
use crate::types::{Context, DrugId, ParseEnumError, UnitId};

use bbb::BayesByBackprop;
use linear::{nig_thompson_act, with_intercept, NigPosterior};
use neural::{Bootstrapped, Dropout, NetConfig, NeuralGreedy, NeuralLinear, ParamNoise};
use train::{ScheduleKind, TrainSchedule};

/// A sequential treatment-assignment policy. One instance is strictly
/// act → observe per step; distinct instances share nothing.
pub trait Agent<S: Scalar>: Send {
    fn act(&mut self, unit: UnitId, context: &Context<S>) -> DrugId;
    fn observe(&mut self, unit: UnitId, context: &Context<S>, action: DrugId, reward: S);
}

/// Uniform draw over the k arms from the agent's stream.
pub fn uniform_act(n_drugs: usize, rng: &mut impl Rng) -> DrugId {
    assert!(n_drugs >= 1);
    DrugId(rng.random_range(0..n_drugs))
}

/// The agent families available in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentFamily {
    Uniform,
    LinearTs,
    NeuralGreedy,
    Dropout,
    ParamNoise,
    Bootstrapped,
    NeuralLinear,
    BayesByBackprop,
    Guideline,
    Oracle,
}

impl AgentFamily {
    pub const ALL: [AgentFamily; 10] = [
        AgentFamily::Uniform,
        AgentFamily::LinearTs,
        AgentFamily::NeuralGreedy,
        AgentFamily::Dropout,
        AgentFamily::ParamNoise,
        AgentFamily::Bootstrapped,
        AgentFamily::NeuralLinear,
        AgentFamily::BayesByBackprop,
        AgentFamily::Guideline,
        AgentFamily::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentFamily::Uniform => "uniform",
            AgentFamily::LinearTs => "linear",
            AgentFamily::NeuralGreedy => "greedy",
            AgentFamily::Dropout => "dropout",
            AgentFamily::ParamNoise => "paramnoise",
            AgentFamily::Bootstrapped => "bootstrap",
            AgentFamily::NeuralLinear => "neurallinear",
            AgentFamily::BayesByBackprop => "bbb",
            AgentFamily::Guideline => "guideline",
            AgentFamily::Oracle => "oracle",
        }
    }

    /// Learning agents adapt from rewards; the rest are scripted.
    pub fn is_learning(self) -> bool {
        !matches!(self, AgentFamily::Uniform | AgentFamily::Guideline | AgentFamily::Oracle)
    }
}

impl fmt::Display for AgentFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentFamily {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or(ParseEnumError {
                what: "agent family",
                got: s.to_string(),
                expected: "uniform|linear|greedy|dropout|paramnoise|bootstrap|neurallinear|bbb|guideline|oracle",
            })
    }
}

/// Resolved hyperparameters; `Default` is the documented defaults table.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    /// Bayesian linear noise prior shape a0.
    pub lin_shape: f64,
    /// Bayesian linear noise prior scale b0.
    pub lin_scale: f64,
    /// Bayesian linear ridge prior λ.
    pub lin_ridge: f64,
    /// Neural-linear noise prior shape a0.
    pub nl_shape: f64,
    /// Neural-linear noise prior scale b0.
    pub nl_scale: f64,
    /// Neural-linear ridge prior λ.
    pub nl_ridge: f64,
    /// Fixed learning rate γ for the greedy network.
    pub greedy_rate: f64,
    /// Dropout keep probability.
    pub keep_prob: f64,
    /// Parameter-noise initial σ.
    pub noise_sigma: f64,
    /// Parameter-noise adaptation level ε.
    pub noise_level: f64,
    /// Bootstrap ensemble size q.
    pub n_replicas: usize,
    /// Bootstrap per-replica inclusion probability p.
    pub inclusion_p: f64,
    /// Bayes-by-backprop observation noise σ.
    pub bbb_noise: f64,
    /// Bayes-by-backprop initial posterior std.
    pub bbb_init_std: f64,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Decisions between training periods.
    pub train_period: usize,
    /// Gradient steps per training period.
    pub train_steps: usize,
    /// Mini-batch size (sampled with replacement).
    pub batch_size: usize,
    /// RMS gradient-square smoothing constant.
    pub rms_smoothing: f64,
    /// RMS denominator floor.
    pub rms_epsilon: f64,
    /// RMS2 initial rate γ0 (restarts every period).
    pub rms2_initial: f64,
    /// RMS3 initial rate γ0 (global clock, never reset).
    pub rms3_initial: f64,
    /// Decay time constant τ in γ0 / (1 + t/τ), in gradient steps.
    pub decay_tau: f64,
    /// Per-family schedule override.
    pub schedule: Option<ScheduleKind>,
}

impl Default for Hyper {
    fn default() -> Hyper {
        Hyper {
            lin_shape: 6.0,
            lin_scale: 6.0,
            lin_ridge: 0.25,
            nl_shape: 3.0,
            nl_scale: 3.0,
            nl_ridge: 0.25,
            greedy_rate: 0.01,
            keep_prob: 0.8,
            noise_sigma: 0.01,
            noise_level: 0.01,
            n_replicas: 5,
            inclusion_p: 0.85,
            bbb_noise: 0.1,
            bbb_init_std: 0.02,
            hidden: vec![100],
            train_period: 20,
            train_steps: 100,
            batch_size: 512,
            rms_smoothing: 0.9,
            rms_epsilon: 1e-8,
            rms2_initial: 0.05,
            rms3_initial: 1.0,
            decay_tau: 10.0,
            schedule: None,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum AgentSpecError {
    #[error(transparent)]
    Family(#[from] ParseEnumError),
    #[error("bad agent option `{key}={value}`: {message}")]
    BadOption {
        key: String,
        value: String,
        message: String,
    },
    #[error("agent option `{key}` is not recognized")]
    UnknownOption { key: String },
}

/// One agent configuration: a family plus resolved hyperparameters.
///
/// Textual form: `family` or `family:key=value,key=value`, e.g.
/// `dropout:keep=0.9,period=10` or `greedy:schedule=rms3`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub family: AgentFamily,
    pub hyper: Hyper,
    overrides: Vec<(String, String)>,
}

impl AgentSpec {
    pub fn new(family: AgentFamily) -> AgentSpec {
        AgentSpec {
            family,
            hyper: Hyper::default(),
            overrides: Vec::new(),
        }
    }

    /// Parses `family[:key=value,...]`.
    ///
    /// Keys: `a0` `b0` `ridge` (prior; routed to the neural-linear fields
    /// when the family is `neurallinear`), `gamma`, `keep`, `sigma` (routed
    /// to the observation noise for `bbb`), `level`, `q`, `p`, `init_std`,
    /// `hidden` (e.g. `100` or `64x32`), `period`, `steps`, `batch`,
    /// `smoothing`, `rms_eps`, `tau`, `rms2_gamma0`, `rms3_gamma0`,
    /// `schedule` (`fixed|rms2|rms3`).
    pub fn parse(text: &str) -> Result<AgentSpec, AgentSpecError> {
        let (name, options) = match text.split_once(':') {
            Some((n, o)) => (n, Some(o)),
            None => (text, None),
        };
        let family: AgentFamily = name.trim().parse()?;
        let mut spec = AgentSpec::new(family);
        let Some(options) = options else {
            return Ok(spec);
        };
        for pair in options.split(',') {
            let pair = pair.trim();
            if pair.is_empty() {
                continue;
            }
            let (key, value) = pair.split_once('=').ok_or_else(|| AgentSpecError::BadOption {
                key: pair.to_string(),
                value: String::new(),
                message: "expected key=value".to_string(),
            })?;
            spec.apply_option(key.trim(), value.trim())?;
            spec.overrides.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(spec)
    }

    fn apply_option(&mut self, key: &str, value: &str) -> Result<(), AgentSpecError> {
        let bad = |message: &str| AgentSpecError::BadOption {
            key: key.to_string(),
            value: value.to_string(),
            message: message.to_string(),
        };
        let as_f64 = || value.parse::<f64>().map_err(|_| bad("expected a number"));
        let as_usize = || value.parse::<usize>().map_err(|_| bad("expected a count"));
        let h = &mut self.hyper;
        match key {
            "a0" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                if self.family == AgentFamily::NeuralLinear {
                    h.nl_shape = v;
                } else {
                    h.lin_shape = v;
                }
            }
            "b0" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                if self.family == AgentFamily::NeuralLinear {
                    h.nl_scale = v;
                } else {
                    h.lin_scale = v;
                }
            }
            "ridge" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                if self.family == AgentFamily::NeuralLinear {
                    h.nl_ridge = v;
                } else {
                    h.lin_ridge = v;
                }
            }
            "gamma" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                h.greedy_rate = v;
            }
            "keep" => {
                let v = as_f64()?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(bad("must be in (0, 1]"));
                }
                h.keep_prob = v;
            }
            "sigma" => {
                let v = as_f64()?;
                if v < 0.0 {
                    return Err(bad("must be >= 0"));
                }
                if self.family == AgentFamily::BayesByBackprop {
                    if v <= 0.0 {
                        return Err(bad("must be > 0"));
                    }
                    h.bbb_noise = v;
                } else {
                    h.noise_sigma = v;
                }
            }
            "level" => {
                let v = as_f64()?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(bad("must be in (0, 1)"));
                }
                h.noise_level = v;
            }
            "q" => {
                let v = as_usize()?;
                if v < 1 {
                    return Err(bad("must be >= 1"));
                }
                h.n_replicas = v;
            }
            "p" => {
                let v = as_f64()?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(bad("must be in (0, 1]"));
                }
                h.inclusion_p = v;
            }
            "init_std" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                h.bbb_init_std = v;
            }
            "hidden" => {
                let widths: Result<Vec<usize>, _> = value.split('x').map(str::parse::<usize>).collect();
                let widths = widths.map_err(|_| bad("expected widths like 100 or 64x32"))?;
                if widths.iter().any(|w| *w == 0) {
                    return Err(bad("widths must be >= 1"));
                }
                h.hidden = widths;
            }
            "period" => {
                let v = as_usize()?;
                if v < 1 {
                    return Err(bad("must be >= 1"));
                }
                h.train_period = v;
            }
            "steps" => h.train_steps = as_usize()?,
            "batch" => {
                let v = as_usize()?;
                if v < 1 {
                    return Err(bad("must be >= 1"));
                }
                h.batch_size = v;
            }
            "smoothing" => {
                let v = as_f64()?;
                if !(0.0..1.0).contains(&v) {
                    return Err(bad("must be in [0, 1)"));
                }
                h.rms_smoothing = v;
            }
            "rms_eps" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                h.rms_epsilon = v;
            }
            "tau" => {
                let v = as_f64()?;
                if v <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                h.decay_tau = v;
            }
            "rms2_gamma0" => h.rms2_initial = as_f64()?,
            "rms3_gamma0" => h.rms3_initial = as_f64()?,
            "schedule" => {
                h.schedule = Some(value.parse::<ScheduleKind>().map_err(|e| bad(&e.to_string()))?)
            }
            _ => return Err(AgentSpecError::UnknownOption { key: key.to_string() }),
        }
        Ok(())
    }

    /// The effective training schedule for this spec's family.
    pub fn schedule(&self) -> TrainSchedule {
        let h = &self.hyper;
        let kind = h.schedule.unwrap_or(match self.family {
            AgentFamily::NeuralGreedy => ScheduleKind::Fixed,
            AgentFamily::ParamNoise | AgentFamily::NeuralLinear => ScheduleKind::Rms2,
            _ => ScheduleKind::Rms3,
        });
        match kind {
            ScheduleKind::Fixed => TrainSchedule::Fixed { rate: h.greedy_rate },
            ScheduleKind::Rms2 => TrainSchedule::Rms2 {
                initial: h.rms2_initial,
                tau: h.decay_tau,
            },
            ScheduleKind::Rms3 => TrainSchedule::Rms3 {
                initial: h.rms3_initial,
                tau: h.decay_tau,
            },
        }
    }

    fn net_config(&self, context_dim: usize, n_drugs: usize) -> NetConfig {
        let mut widths = Vec::with_capacity(self.hyper.hidden.len() + 2);
        widths.push(context_dim);
        widths.extend_from_slice(&self.hyper.hidden);
        widths.push(n_drugs);
        NetConfig {
            widths,
            schedule: self.schedule(),
            smoothing: self.hyper.rms_smoothing,
            epsilon: self.hyper.rms_epsilon,
            train_period: self.hyper.train_period,
            train_steps: self.hyper.train_steps,
            batch_size: self.hyper.batch_size,
        }
    }

    /// Canonical textual form (`family` plus any overrides).
    pub fn display_string(&self) -> String {
        if self.overrides.is_empty() {
            self.family.as_str().to_string()
        } else {
            let opts: Vec<String> = self.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{}:{}", self.family.as_str(), opts.join(","))
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_string())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("agent `{0}` needs a rule file")]
    MissingRules(AgentFamily),
    #[error("agent `{0}` needs dataset access")]
    MissingDataset(AgentFamily),
}

/// Everything an agent may bind to at construction time.
pub struct AgentEnv<'a, S: Scalar> {
    pub n_drugs: usize,
    pub context_dim: usize,
    pub reward_kind: RewardKind,
    pub dataset: Option<&'a Arc<Dataset<S>>>,
    pub rules: Option<&'a Arc<BoundRuleSet>>,
}

/// Builds the agent for `spec`, wiring its labelled random sub-streams from
/// `seed` (the run's agent seed). Learning agents are wrapped in the
/// round-robin forced-exploration prologue.
pub fn build_agent<S: Scalar>(
    spec: &AgentSpec,
    env: &AgentEnv<'_, S>,
    seed: RngSeed,
) -> Result<Box<dyn Agent<S>>, BuildError> {
    let h = &spec.hyper;
    let k = env.n_drugs;
    let agent: Box<dyn Agent<S>> = match spec.family {
        AgentFamily::Uniform => Box::new(UniformAgent {
            n_drugs: k,
            rng: derive_stream(seed, "policy"),
        }),
        AgentFamily::Guideline => Box::new(GuidelineAgent {
            dataset: Arc::clone(env.dataset.ok_or(BuildError::MissingDataset(spec.family))?),
            rules: Arc::clone(env.rules.ok_or(BuildError::MissingRules(spec.family))?),
        }),
        AgentFamily::Oracle => Box::new(OracleAgent {
            dataset: Arc::clone(env.dataset.ok_or(BuildError::MissingDataset(spec.family))?),
            kind: env.reward_kind,
        }),
        AgentFamily::LinearTs => Box::new(LinearThompson::new(
            k,
            env.context_dim,
            S::of(h.lin_ridge),
            S::of(h.lin_shape),
            S::of(h.lin_scale),
            seed,
        )),
        AgentFamily::NeuralGreedy => Box::new(NeuralGreedy::new(&spec.net_config(env.context_dim, k), seed)),
        AgentFamily::Dropout => Box::new(Dropout::new(
            &spec.net_config(env.context_dim, k),
            S::of(h.keep_prob),
            seed,
        )),
        AgentFamily::ParamNoise => Box::new(ParamNoise::new(
            &spec.net_config(env.context_dim, k),
            S::of(h.noise_sigma),
            S::of(h.noise_level),
            seed,
        )),
        AgentFamily::Bootstrapped => Box::new(Bootstrapped::new(
            &spec.net_config(env.context_dim, k),
            h.n_replicas,
            S::of(h.inclusion_p),
            seed,
        )),
        AgentFamily::NeuralLinear => Box::new(NeuralLinear::new(
            &spec.net_config(env.context_dim, k),
            S::of(h.nl_ridge),
            S::of(h.nl_shape),
            S::of(h.nl_scale),
            seed,
        )),
        AgentFamily::BayesByBackprop => {
            let cfg = spec.net_config(env.context_dim, k);
            Box::new(BayesByBackprop::new(
                &cfg.widths,
                S::of(h.bbb_noise),
                S::of(h.bbb_init_std),
                cfg.schedule,
                cfg.smoothing,
                cfg.epsilon,
                cfg.train_period,
                cfg.train_steps,
                cfg.batch_size,
                seed,
            ))
        }
    };
    if spec.family.is_learning() {
        Ok(Box::new(ForcedExploration {
            inner: agent,
            n_drugs: k,
            step: 0,
        }))
    } else {
        Ok(agent)
    }
}

/// Round-robin prologue: the first 2k decisions take each arm exactly
/// twice, then the wrapped policy takes over. Observations always reach the
/// wrapped agent.
struct ForcedExploration<S: Scalar> {
    inner: Box<dyn Agent<S>>,
    n_drugs: usize,
    step: usize,
}

impl<S: Scalar> Agent<S> for ForcedExploration<S> {
    fn act(&mut self, unit: UnitId, context: &Context<S>) -> DrugId {
        let choice = if self.step < 2 * self.n_drugs {
            DrugId(self.step % self.n_drugs)
        } else {
            self.inner.act(unit, context)
        };
        self.step += 1;
        choice
    }

    fn observe(&mut self, unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        self.inner.observe(unit, context, action, reward);
    }
}

struct UniformAgent {
    n_drugs: usize,
    rng: RngStream,
}

impl<S: Scalar> Agent<S> for UniformAgent {
    fn act(&mut self, _unit: UnitId, _context: &Context<S>) -> DrugId {
        uniform_act(self.n_drugs, &mut self.rng)
    }

    fn observe(&mut self, _unit: UnitId, _context: &Context<S>, _action: DrugId, _reward: S) {}
}

struct GuidelineAgent<S: Scalar> {
    dataset: Arc<Dataset<S>>,
    rules: Arc<BoundRuleSet>,
}

impl<S: Scalar> Agent<S> for GuidelineAgent<S> {
    fn act(&mut self, unit: UnitId, _context: &Context<S>) -> DrugId {
        crate::guidelines::guideline_act(&self.rules, &self.dataset, unit)
    }

    fn observe(&mut self, _unit: UnitId, _context: &Context<S>, _action: DrugId, _reward: S) {}
}

struct OracleAgent<S: Scalar> {
    dataset: Arc<Dataset<S>>,
    kind: RewardKind,
}

impl<S: Scalar> Agent<S> for OracleAgent<S> {
    fn act(&mut self, unit: UnitId, _context: &Context<S>) -> DrugId {
        crate::rewards::optimal_action(&self.dataset, unit, self.kind)
    }

    fn observe(&mut self, _unit: UnitId, _context: &Context<S>, _action: DrugId, _reward: S) {}
}

/// Conjugate Bayesian linear Thompson sampling on raw contexts.
pub struct LinearThompson<S: Scalar> {
    posteriors: Vec<NigPosterior<S>>,
    rng: RngStream,
}

impl<S: Scalar> LinearThompson<S> {
    pub fn new(n_drugs: usize, context_dim: usize, ridge: S, a0: S, b0: S, seed: RngSeed) -> LinearThompson<S> {
        LinearThompson {
            posteriors: (0..n_drugs)
                .map(|_| NigPosterior::new(context_dim + 1, ridge, a0, b0))
                .collect(),
            rng: derive_stream(seed, "thompson"),
        }
    }

    pub fn posteriors(&self) -> &[NigPosterior<S>] {
        &self.posteriors
    }
}

impl<S: Scalar> Agent<S> for LinearThompson<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        nig_thompson_act(&self.posteriors, context.as_slice(), &mut self.rng)
            .expect("posterior precision must stay positive definite")
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        let x = with_intercept(context.as_slice());
        self.posteriors[action.0]
            .update(&x, reward)
            .expect("contexts and rewards are finite");
    }
}

impl<S: Scalar> Agent<S> for NeuralGreedy<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        NeuralGreedy::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        NeuralGreedy::observe(self, context.as_slice(), action, reward);
    }
}

impl<S: Scalar> Agent<S> for Dropout<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        Dropout::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        Dropout::observe(self, context.as_slice(), action, reward);
    }
}

impl<S: Scalar> Agent<S> for ParamNoise<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        ParamNoise::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        ParamNoise::observe(self, context.as_slice(), action, reward);
    }
}

impl<S: Scalar> Agent<S> for Bootstrapped<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        Bootstrapped::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        Bootstrapped::observe(self, context.as_slice(), action, reward);
    }
}

impl<S: Scalar> Agent<S> for NeuralLinear<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        NeuralLinear::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        NeuralLinear::observe(self, context.as_slice(), action, reward);
    }
}

impl<S: Scalar> Agent<S> for BayesByBackprop<S> {
    fn act(&mut self, _unit: UnitId, context: &Context<S>) -> DrugId {
        BayesByBackprop::act(self, context.as_slice())
    }

    fn observe(&mut self, _unit: UnitId, context: &Context<S>, action: DrugId, reward: S) {
        BayesByBackprop::observe(self, context.as_slice(), action, reward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_act_bounds_and_frequencies() {
        let mut rng = derive_stream(RngSeed(60), "uniform-test");
        assert_eq!(uniform_act(1, &mut rng), DrugId(0));
        let k = 7;
        let draws = 70_000;
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[uniform_act(k, &mut rng).0] += 1;
        }
        for (arm, c) in counts.iter().enumerate() {
            let freq = *c as f64 / draws as f64;
            assert!((freq - 1.0 / 7.0).abs() < 0.02, "arm {arm}: {freq}");
        }
    }

    #[test]
    fn uniform_act_reproducible_for_fixed_stream() {
        let a: Vec<usize> = {
            let mut rng = derive_stream(RngSeed(61), "uniform-repro");
            (0..100).map(|_| uniform_act(5, &mut rng).0).collect()
        };
        let b: Vec<usize> = {
            let mut rng = derive_stream(RngSeed(61), "uniform-repro");
            (0..100).map(|_| uniform_act(5, &mut rng).0).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn defaults_match_documented_table() {
        let h = Hyper::default();
        assert_eq!((h.lin_shape, h.lin_scale, h.lin_ridge), (6.0, 6.0, 0.25));
        assert_eq!((h.nl_shape, h.nl_scale, h.nl_ridge), (3.0, 3.0, 0.25));
        assert_eq!(h.greedy_rate, 0.01);
        assert_eq!(h.keep_prob, 0.8);
        assert_eq!((h.noise_sigma, h.noise_level), (0.01, 0.01));
        assert_eq!((h.n_replicas, h.inclusion_p), (5, 0.85));
        assert_eq!(h.bbb_noise, 0.1);
        assert_eq!(h.hidden, vec![100]);
        assert_eq!((h.train_steps, h.batch_size, h.train_period), (100, 512, 20));
    }

    #[test]
    fn family_default_schedules() {
        assert_eq!(
            AgentSpec::new(AgentFamily::NeuralGreedy).schedule(),
            TrainSchedule::Fixed { rate: 0.01 }
        );
        assert_eq!(
            AgentSpec::new(AgentFamily::Dropout).schedule(),
            TrainSchedule::Rms3 { initial: 1.0, tau: 10.0 }
        );
        assert_eq!(
            AgentSpec::new(AgentFamily::Bootstrapped).schedule(),
            TrainSchedule::Rms3 { initial: 1.0, tau: 10.0 }
        );
        assert_eq!(
            AgentSpec::new(AgentFamily::ParamNoise).schedule(),
            TrainSchedule::Rms2 { initial: 0.05, tau: 10.0 }
        );
        assert_eq!(
            AgentSpec::new(AgentFamily::NeuralLinear).schedule(),
            TrainSchedule::Rms2 { initial: 0.05, tau: 10.0 }
        );
        // RMS3 starts at γ = 1.
        assert_eq!(AgentSpec::new(AgentFamily::Dropout).schedule().rate_at(0, 0), 1.0);
    }

    #[test]
    fn spec_parsing_round_trips() {
        let spec = AgentSpec::parse("dropout:keep=0.9,period=10").unwrap();
        assert_eq!(spec.family, AgentFamily::Dropout);
        assert_eq!(spec.hyper.keep_prob, 0.9);
        assert_eq!(spec.hyper.train_period, 10);
        assert_eq!(spec.display_string(), "dropout:keep=0.9,period=10");

        let plain = AgentSpec::parse("linear").unwrap();
        assert_eq!(plain.display_string(), "linear");

        assert!(AgentSpec::parse("dropout:keep=1.5").is_err());
        assert!(AgentSpec::parse("dropout:nonsense=1").is_err());
        assert!(AgentSpec::parse("warp").is_err());
    }

    #[test]
    fn sigma_and_priors_route_by_family() {
        let pn = AgentSpec::parse("paramnoise:sigma=0.05").unwrap();
        assert_eq!(pn.hyper.noise_sigma, 0.05);
        assert_eq!(pn.hyper.bbb_noise, 0.1);
        let bbb = AgentSpec::parse("bbb:sigma=0.2").unwrap();
        assert_eq!(bbb.hyper.bbb_noise, 0.2);
        assert_eq!(bbb.hyper.noise_sigma, 0.01);
        let nl = AgentSpec::parse("neurallinear:a0=4").unwrap();
        assert_eq!(nl.hyper.nl_shape, 4.0);
        assert_eq!(nl.hyper.lin_shape, 6.0);
    }

    #[test]
    fn hidden_widths_parse() {
        let spec = AgentSpec::parse("greedy:hidden=64x32").unwrap();
        assert_eq!(spec.hyper.hidden, vec![64, 32]);
    }
}
