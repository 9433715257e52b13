//! Replay buffer, learning-rate schedules, and the RMS-style trainer shared
//! by the neural agents.
//!
//! A training period runs a fixed number of mini-batch gradient steps
//! (default 100 steps of batch 512, sampled with replacement) on the masked
//! squared error. Schedules:
//!
//! - `fixed`: constant rate.
//! - `rms2`: rate decays as `γ0 / (1 + t/τ)` with `t` reset to zero at the
//!   start of every training period.
//! - `rms3`: same decay law on a global step counter that is never reset;
//!   starts at `γ0 = 1`.

use rand::Rng;

use super::mlp::{Mlp, MlpTensors};
use crate::num::Scalar;
use crate::rng::RngStream;
use crate::types::ParseEnumError;

/// Learning-rate schedule for RMS-style training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainSchedule {
    Fixed { rate: f64 },
    Rms2 { initial: f64, tau: f64 },
    Rms3 { initial: f64, tau: f64 },
}

impl TrainSchedule {
    /// Rate for a step: `global_step` counts every step the trainer ever
    /// took, `step_in_period` counts from the start of the current call.
    pub fn rate_at(&self, global_step: u64, step_in_period: u64) -> f64 {
        match self {
            TrainSchedule::Fixed { rate } => *rate,
            TrainSchedule::Rms2 { initial, tau } => initial / (1.0 + step_in_period as f64 / tau),
            TrainSchedule::Rms3 { initial, tau } => initial / (1.0 + global_step as f64 / tau),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainSchedule::Fixed { .. } => "fixed",
            TrainSchedule::Rms2 { .. } => "rms2",
            TrainSchedule::Rms3 { .. } => "rms3",
        }
    }
}

/// Schedule selector used in agent hyperparameter overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Fixed,
    Rms2,
    Rms3,
}

impl std::str::FromStr for ScheduleKind {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(ScheduleKind::Fixed),
            "rms2" => Ok(ScheduleKind::Rms2),
            "rms3" => Ok(ScheduleKind::Rms3),
            other => Err(ParseEnumError {
                what: "schedule",
                got: other.to_string(),
                expected: "fixed|rms2|rms3",
            }),
        }
    }
}

/// Append-only (context, action, reward) log with per-replica membership for
/// bootstrapped training. Plain agents use a single replica that holds
/// everything.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S: Scalar> {
    contexts: Vec<Vec<S>>,
    actions: Vec<usize>,
    rewards: Vec<S>,
    replicas: Vec<Vec<usize>>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(n_replicas: usize) -> ReplayBuffer<S> {
        assert!(n_replicas >= 1);
        ReplayBuffer {
            contexts: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            replicas: vec![Vec::new(); n_replicas],
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_replicas(&self) -> usize {
        self.replicas.len()
    }

    pub fn replica_len(&self, replica: usize) -> usize {
        self.replicas[replica].len()
    }

    /// Appends a datapoint included in every replica.
    pub fn push(&mut self, context: Vec<S>, action: usize, reward: S) {
        let idx = self.len();
        self.contexts.push(context);
        self.actions.push(action);
        self.rewards.push(reward);
        for r in &mut self.replicas {
            r.push(idx);
        }
    }

    /// Appends a datapoint included only in the replicas whose mask bit is
    /// set. The caller guarantees at least one bit.
    pub fn push_with_mask(&mut self, context: Vec<S>, action: usize, reward: S, mask: &[bool]) {
        assert_eq!(mask.len(), self.replicas.len());
        debug_assert!(mask.iter().any(|m| *m), "datapoint must enter at least one replica");
        let idx = self.len();
        self.contexts.push(context);
        self.actions.push(action);
        self.rewards.push(reward);
        for (r, include) in self.replicas.iter_mut().zip(mask) {
            if *include {
                r.push(idx);
            }
        }
    }

    pub fn entry(&self, idx: usize) -> (&[S], usize, S) {
        (&self.contexts[idx], self.actions[idx], self.rewards[idx])
    }

    /// Uniform draw (with replacement) from one replica's membership.
    pub fn sample_index(&self, replica: usize, rng: &mut impl Rng) -> usize {
        let members = &self.replicas[replica];
        members[rng.random_range(0..members.len())]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[S], usize, S)> {
        (0..self.len()).map(|i| self.entry(i))
    }

    pub fn count_for_arm(&self, arm: usize) -> usize {
        self.actions.iter().filter(|a| **a == arm).count()
    }
}

/// RMSProp-style trainer with a schedule-driven learning rate.
#[derive(Debug, Clone)]
pub struct NetTrainer<S: Scalar> {
    schedule: TrainSchedule,
    smoothing: S,
    epsilon: S,
    cache: MlpTensors<S>,
    global_step: u64,
    steps_per_period: usize,
    batch_size: usize,
}

impl<S: Scalar> NetTrainer<S> {
    pub fn new(net: &Mlp<S>, schedule: TrainSchedule, smoothing: f64, epsilon: f64, steps: usize, batch: usize) -> NetTrainer<S> {
        NetTrainer {
            schedule,
            smoothing: S::of(smoothing),
            epsilon: S::of(epsilon),
            cache: ones_like(net),
            global_step: 0,
            steps_per_period: steps,
            batch_size: batch,
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        self.schedule
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    /// Runs one training period on `replica`'s slice of the buffer: batches
    /// sampled with replacement from `batch_rng`; `dropout`, when set, draws
    /// one mask per hidden layer per example from `mask_rng`.
    ///
    /// Returns the mean per-example loss of the final step.
    pub fn train(
        &mut self,
        net: &mut Mlp<S>,
        buffer: &ReplayBuffer<S>,
        replica: usize,
        dropout: Option<S>,
        batch_rng: &mut RngStream,
        mask_rng: Option<&mut RngStream>,
    ) -> S {
        assert!(!buffer.is_empty(), "training needs a non-empty buffer");
        if buffer.replica_len(replica) == 0 {
            return S::zero();
        }
        let mut mask_rng = mask_rng;
        let hidden_layers = net.n_layers() - 1;
        let hidden_widths: Vec<usize> = net.widths()[1..net.widths().len() - 1].to_vec();
        let mut last_loss = S::zero();
        for step in 0..self.steps_per_period {
            let rate = S::of(self.schedule.rate_at(self.global_step, step as u64));
            let mut grads = net.zero_tensors();
            let mut loss = S::zero();
            for _ in 0..self.batch_size {
                let idx = buffer.sample_index(replica, batch_rng);
                let (ctx, arm, reward) = buffer.entry(idx);
                loss += match (dropout, mask_rng.as_deref_mut()) {
                    (Some(keep), Some(rng)) => {
                        let masks: Vec<Vec<bool>> = (0..hidden_layers)
                            .map(|l| {
                            (0..hidden_widths[l])
                                .map(|_| crate::rng::draw_uniform::<S>(rng) < keep)
                                .collect()
                            })
                            .collect();
                        net.accumulate_masked_grad(ctx, arm, reward, Some((&masks, keep)), &mut grads)
                    }
                    _ => net.accumulate_masked_grad(ctx, arm, reward, None, &mut grads),
                };
            }
            let inv_batch = S::one() / S::of(self.batch_size as f64);
            grads.scale(inv_batch);
            last_loss = loss * inv_batch;
            self.apply(net, &grads, rate);
        }
        last_loss
    }

    /// One RMSProp step at `rate`, advancing the global clock.
    pub fn apply(&mut self, net: &mut Mlp<S>, grads: &MlpTensors<S>, rate: S) {
        rms_update(net, &mut self.cache, grads, rate, self.smoothing, self.epsilon);
        self.global_step += 1;
    }
}

/// The mean-square accumulator starts at one, so the first steps are
/// gradient-scaled rather than sign-scaled; it then relaxes toward the
/// running g² average. Schedules that start at γ = 1 rely on this.
pub fn ones_like<S: Scalar>(net: &Mlp<S>) -> MlpTensors<S> {
    let mut t = net.zero_tensors();
    t.fill(S::one());
    t
}

/// One RMSProp step: `cache = ρ·cache + (1−ρ)·g²`,
/// `param -= rate · g / (√cache + ε)`.
pub fn rms_update<S: Scalar>(
    net: &mut Mlp<S>,
    cache: &mut MlpTensors<S>,
    grads: &MlpTensors<S>,
    rate: S,
    smoothing: S,
    epsilon: S,
) {
    let one_minus = S::one() - smoothing;
    net.for_each_param(cache, grads, |param, cache, g| {
        *cache = smoothing * *cache + one_minus * g * g;
        *param -= rate * g / (cache.sqrt() + epsilon);
    });
}
