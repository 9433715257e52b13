//! Neural posterior approximations: greedy, decision-time dropout,
//! parameter noise, bootstrapped ensembles, and the neural-linear hybrid.
//!
//! Every agent draws from its own labelled sub-streams (`init`, `batch`,
//! `dropout`, `noise`, `bootstrap`, `thompson`), so degenerate settings
//! reduce exactly to the greedy agent: extra draws happen on streams the
//! greedy agent never touches.

use rand::Rng;

use super::linear::{nig_thompson_act, with_intercept, NigPosterior};
use super::mlp::Mlp;
use super::train::{NetTrainer, ReplayBuffer, TrainSchedule};
use crate::num::{argmax, Scalar};
use crate::rng::{derive_stream, draw_standard_normal, draw_uniform, RngSeed, RngStream};
use crate::types::DrugId;

/// Greedy choice on the network's predicted rewards; ties lowest index.
pub fn greedy_act<S: Scalar>(net: &Mlp<S>, x: &[S]) -> DrugId {
    DrugId(argmax(&net.forward(x)))
}

/// One decision-time dropout draw: a single mask over each hidden layer,
/// kept activations scaled by `1/keep`, then a greedy choice.
pub fn dropout_act<S: Scalar>(net: &Mlp<S>, x: &[S], keep: S, rng: &mut impl Rng) -> DrugId {
    let masks = sample_masks(net, keep, rng);
    DrugId(argmax(&net.forward_dropout(x, &masks, keep)))
}

fn sample_masks<S: Scalar>(net: &Mlp<S>, keep: S, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    let widths = net.widths();
    (1..widths.len() - 1)
        .map(|l| (0..widths[l]).map(|_| draw_uniform::<S>(rng) < keep).collect())
        .collect()
}

/// Greedy choice on a noise-perturbed copy of the network, plus the adapted
/// noise scale.
///
/// Disagreement with the unperturbed choice shrinks `σ` by `1 + ε`;
/// agreement grows it by `(1 + ε)^(ε/(1−ε))`. The up/down drifts cancel
/// exactly when the disagreement rate equals the level `ε`, so the scale
/// self-tunes to perturb about one decision in `1/ε`.
pub fn param_noise_act<S: Scalar>(
    net: &Mlp<S>,
    x: &[S],
    sigma: S,
    level: S,
    rng: &mut impl Rng,
) -> (DrugId, S) {
    assert!(level > S::zero() && level < S::one(), "noise level in (0, 1)");
    let mut perturbed = net.clone();
    for w in &mut perturbed.weights {
        for v in w.iter_mut() {
            *v += sigma * draw_standard_normal::<S>(rng);
        }
    }
    for b in &mut perturbed.biases {
        for v in b.iter_mut() {
            *v += sigma * draw_standard_normal::<S>(rng);
        }
    }
    let noisy_choice = DrugId(argmax(&perturbed.forward(x)));
    let greedy_choice = greedy_act(net, x);
    let shrink = S::one() + level;
    let adapted = if noisy_choice == greedy_choice {
        sigma * shrink.powf(level / (S::one() - level))
    } else {
        sigma / shrink
    };
    (noisy_choice, adapted)
}

/// Shared shape/schedule/cadence settings for one neural agent.
#[derive(Debug, Clone)]
pub struct NetConfig {
    pub widths: Vec<usize>,
    pub schedule: TrainSchedule,
    pub smoothing: f64,
    pub epsilon: f64,
    pub train_period: usize,
    pub train_steps: usize,
    pub batch_size: usize,
}

impl NetConfig {
    fn build<S: Scalar>(&self, seed: RngSeed) -> (Mlp<S>, NetTrainer<S>, RngStream) {
        let mut init_rng = derive_stream(seed, "init");
        let net = Mlp::init(&self.widths, &mut init_rng);
        let trainer = NetTrainer::new(
            &net,
            self.schedule,
            self.smoothing,
            self.epsilon,
            self.train_steps,
            self.batch_size,
        );
        let batch_rng = derive_stream(seed, "batch");
        (net, trainer, batch_rng)
    }
}

/// Greedy network agent: fixed-rate training, argmax decisions.
#[derive(Debug, Clone)]
pub struct NeuralGreedy<S: Scalar> {
    net: Mlp<S>,
    trainer: NetTrainer<S>,
    buffer: ReplayBuffer<S>,
    batch_rng: RngStream,
    train_period: usize,
    observed: usize,
}

impl<S: Scalar> NeuralGreedy<S> {
    pub fn new(config: &NetConfig, seed: RngSeed) -> NeuralGreedy<S> {
        let (net, trainer, batch_rng) = config.build(seed);
        NeuralGreedy {
            net,
            trainer,
            buffer: ReplayBuffer::new(1),
            batch_rng,
            train_period: config.train_period,
            observed: 0,
        }
    }

    pub fn net(&self) -> &Mlp<S> {
        &self.net
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        greedy_act(&self.net, x)
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        self.buffer.push(x.to_vec(), arm.0, reward);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            self.trainer
                .train(&mut self.net, &self.buffer, 0, None, &mut self.batch_rng, None);
        }
    }
}

/// Dropout agent: one mask per decision, dropout also active in training.
#[derive(Debug, Clone)]
pub struct Dropout<S: Scalar> {
    net: Mlp<S>,
    trainer: NetTrainer<S>,
    buffer: ReplayBuffer<S>,
    keep: S,
    batch_rng: RngStream,
    mask_rng: RngStream,
    train_period: usize,
    observed: usize,
}

impl<S: Scalar> Dropout<S> {
    pub fn new(config: &NetConfig, keep: S, seed: RngSeed) -> Dropout<S> {
        assert!(keep > S::zero() && keep <= S::one(), "keep probability in (0, 1]");
        let (net, trainer, batch_rng) = config.build(seed);
        Dropout {
            net,
            trainer,
            buffer: ReplayBuffer::new(1),
            keep,
            batch_rng,
            mask_rng: derive_stream(seed, "dropout"),
            train_period: config.train_period,
            observed: 0,
        }
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        dropout_act(&self.net, x, self.keep, &mut self.mask_rng)
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        self.buffer.push(x.to_vec(), arm.0, reward);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            self.trainer.train(
                &mut self.net,
                &self.buffer,
                0,
                Some(self.keep),
                &mut self.batch_rng,
                Some(&mut self.mask_rng),
            );
        }
    }
}

/// Parameter-noise agent: explores by perturbing weights at decision time
/// and adapts the noise scale from action disagreement.
#[derive(Debug, Clone)]
pub struct ParamNoise<S: Scalar> {
    net: Mlp<S>,
    trainer: NetTrainer<S>,
    buffer: ReplayBuffer<S>,
    sigma: S,
    level: S,
    batch_rng: RngStream,
    noise_rng: RngStream,
    train_period: usize,
    observed: usize,
}

impl<S: Scalar> ParamNoise<S> {
    pub fn new(config: &NetConfig, sigma: S, level: S, seed: RngSeed) -> ParamNoise<S> {
        assert!(sigma >= S::zero());
        let (net, trainer, batch_rng) = config.build(seed);
        ParamNoise {
            net,
            trainer,
            buffer: ReplayBuffer::new(1),
            sigma,
            level,
            batch_rng,
            noise_rng: derive_stream(seed, "noise"),
            train_period: config.train_period,
            observed: 0,
        }
    }

    pub fn sigma(&self) -> S {
        self.sigma
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        let (choice, adapted) = param_noise_act(&self.net, x, self.sigma, self.level, &mut self.noise_rng);
        self.sigma = adapted;
        choice
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        self.buffer.push(x.to_vec(), arm.0, reward);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            self.trainer
                .train(&mut self.net, &self.buffer, 0, None, &mut self.batch_rng, None);
        }
    }
}

/// Bootstrapped ensemble: each decision follows one uniformly drawn replica;
/// each datapoint enters each replica's buffer with probability `p` (at
/// least one replica always receives it).
#[derive(Debug, Clone)]
pub struct Bootstrapped<S: Scalar> {
    replicas: Vec<Mlp<S>>,
    trainers: Vec<NetTrainer<S>>,
    buffer: ReplayBuffer<S>,
    inclusion: S,
    batch_rng: RngStream,
    boot_rng: RngStream,
    train_period: usize,
    observed: usize,
}

impl<S: Scalar> Bootstrapped<S> {
    pub fn new(config: &NetConfig, n_replicas: usize, inclusion: S, seed: RngSeed) -> Bootstrapped<S> {
        assert!(n_replicas >= 1);
        assert!(inclusion > S::zero() && inclusion <= S::one());
        let mut init_rng = derive_stream(seed, "init");
        let mut replicas = Vec::with_capacity(n_replicas);
        let mut trainers = Vec::with_capacity(n_replicas);
        for _ in 0..n_replicas {
            let net: Mlp<S> = Mlp::init(&config.widths, &mut init_rng);
            trainers.push(NetTrainer::new(
                &net,
                config.schedule,
                config.smoothing,
                config.epsilon,
                config.train_steps,
                config.batch_size,
            ));
            replicas.push(net);
        }
        Bootstrapped {
            replicas,
            trainers,
            buffer: ReplayBuffer::new(n_replicas),
            inclusion,
            batch_rng: derive_stream(seed, "batch"),
            boot_rng: derive_stream(seed, "bootstrap"),
            train_period: config.train_period,
            observed: 0,
        }
    }

    pub fn n_replicas(&self) -> usize {
        self.replicas.len()
    }

    pub fn buffer(&self) -> &ReplayBuffer<S> {
        &self.buffer
    }

    pub fn replica_net(&self, replica: usize) -> &Mlp<S> {
        &self.replicas[replica]
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        let j = self.boot_rng.random_range(0..self.replicas.len());
        greedy_act(&self.replicas[j], x)
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        let q = self.replicas.len();
        let mut mask: Vec<bool> = (0..q).map(|_| draw_uniform::<S>(&mut self.boot_rng) < self.inclusion).collect();
        if !mask.iter().any(|m| *m) {
            mask[self.boot_rng.random_range(0..q)] = true;
        }
        self.buffer.push_with_mask(x.to_vec(), arm.0, reward, &mask);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            for (r, (net, trainer)) in self.replicas.iter_mut().zip(&mut self.trainers).enumerate() {
                trainer.train(net, &self.buffer, r, None, &mut self.batch_rng, None);
            }
        }
    }
}

/// Neural-linear hybrid: Bayesian linear Thompson sampling on the network's
/// last hidden representation; posteriors are rebuilt from the whole buffer
/// after every representation retrain.
#[derive(Debug, Clone)]
pub struct NeuralLinear<S: Scalar> {
    net: Mlp<S>,
    trainer: NetTrainer<S>,
    buffer: ReplayBuffer<S>,
    posteriors: Vec<NigPosterior<S>>,
    ridge: S,
    prior_shape: S,
    prior_scale: S,
    batch_rng: RngStream,
    thompson_rng: RngStream,
    train_period: usize,
    observed: usize,
}

impl<S: Scalar> NeuralLinear<S> {
    pub fn new(config: &NetConfig, ridge: S, a0: S, b0: S, seed: RngSeed) -> NeuralLinear<S> {
        let (net, trainer, batch_rng) = config.build(seed);
        let k = net.output_dim();
        let rep_dim = net.hidden_dim() + 1;
        let posteriors = (0..k).map(|_| NigPosterior::new(rep_dim, ridge, a0, b0)).collect();
        NeuralLinear {
            net,
            trainer,
            buffer: ReplayBuffer::new(1),
            posteriors,
            ridge,
            prior_shape: a0,
            prior_scale: b0,
            batch_rng,
            thompson_rng: derive_stream(seed, "thompson"),
            train_period: config.train_period,
            observed: 0,
        }
    }

    pub fn posteriors(&self) -> &[NigPosterior<S>] {
        &self.posteriors
    }

    fn representation(&self, x: &[S]) -> Vec<S> {
        self.net.forward_with_hidden(x).1
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        let rep = self.representation(x);
        nig_thompson_act(&self.posteriors, &rep, &mut self.thompson_rng)
            .expect("posterior precision must stay positive definite")
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        let rep = with_intercept(&self.representation(x));
        self.posteriors[arm.0]
            .update(&rep, reward)
            .expect("finite representation and reward");
        self.buffer.push(x.to_vec(), arm.0, reward);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            self.trainer
                .train(&mut self.net, &self.buffer, 0, None, &mut self.batch_rng, None);
            self.rebuild_posteriors();
        }
    }

    /// Replays the whole buffer through the current representation into
    /// fresh posteriors.
    fn rebuild_posteriors(&mut self) {
        let rep_dim = self.net.hidden_dim() + 1;
        self.posteriors = (0..self.net.output_dim())
            .map(|_| NigPosterior::new(rep_dim, self.ridge, self.prior_shape, self.prior_scale))
            .collect();
        for i in 0..self.buffer.len() {
            let (ctx, arm, reward) = self.buffer.entry(i);
            let rep = with_intercept(&self.net.forward_with_hidden(ctx).1);
            self.posteriors[arm]
                .fold_observation(&rep, reward)
                .expect("finite representation and reward");
        }
        for p in &mut self.posteriors {
            p.refresh().expect("replayed posterior stays positive definite");
        }
    }
}
