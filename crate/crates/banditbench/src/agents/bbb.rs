//! Stochastic variational inference over network weights (Bayes by
//! backprop).
//!
//! Every weight gets an independent Gaussian `N(μ, softplus(ρ)²)`; the prior
//! is standard normal. One training step draws a single reparameterized
//! weight sample, then descends the negative evidence lower bound:
//!
//! ```text
//! L = KL(q ‖ N(0, I)) + (N / B) · Σ_batch (out_a − y)² / (2σ²)
//! ```
//!
//! with `σ` the observation-noise scale and the data term rescaled from the
//! mini-batch to the full buffer of `N` observations.

use rand::Rng;

use super::mlp::{Mlp, MlpTensors};
use super::train::{rms_update, ReplayBuffer, TrainSchedule};
use crate::num::{argmax, Scalar};
use crate::rng::{derive_stream, draw_standard_normal, RngSeed, RngStream};
use crate::types::DrugId;

fn softplus<S: Scalar>(x: S) -> S {
    // ln(1 + e^x), stable for large |x|.
    if x > S::of(30.0) {
        x
    } else {
        x.exp().ln_1p().max(S::min_positive_value())
    }
}

fn softplus_inv<S: Scalar>(y: S) -> S {
    // x with softplus(x) = y: ln(e^y − 1).
    if y > S::of(30.0) {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Mean-field Gaussian posterior over a network's parameters.
#[derive(Debug, Clone)]
pub struct VariationalMlp<S: Scalar> {
    mu: Mlp<S>,
    rho: Mlp<S>,
}

impl<S: Scalar> VariationalMlp<S> {
    /// Means from the usual network init, all standard deviations at
    /// `init_std` (through the softplus parameterization).
    pub fn init(widths: &[usize], init_std: S, rng: &mut impl Rng) -> VariationalMlp<S> {
        let mu = Mlp::init(widths, rng);
        let mut rho = Mlp::zeros(widths);
        let r = softplus_inv(init_std);
        for w in &mut rho.weights {
            w.iter_mut().for_each(|v| *v = r);
        }
        for b in &mut rho.biases {
            b.iter_mut().for_each(|v| *v = r);
        }
        VariationalMlp { mu, rho }
    }

    pub fn mean_net(&self) -> &Mlp<S> {
        &self.mu
    }

    /// Mutable access to the means (finite-difference probes in tests).
    pub fn mu_mut(&mut self) -> &mut Mlp<S> {
        &mut self.mu
    }

    /// Mutable access to the std parameters (same purpose).
    pub fn rho_mut(&mut self) -> &mut Mlp<S> {
        &mut self.rho
    }

    pub fn widths(&self) -> &[usize] {
        self.mu.widths()
    }

    /// Std of one weight (for inspection in tests/diagnostics).
    pub fn weight_std(&self, layer: usize, idx: usize) -> S {
        softplus(self.rho.weights[layer][idx])
    }

    /// Forces every std to `std` (the means stay put).
    pub fn set_all_stds(&mut self, std: S) {
        let r = softplus_inv(std);
        for w in &mut self.rho.weights {
            w.iter_mut().for_each(|v| *v = r);
        }
        for b in &mut self.rho.biases {
            b.iter_mut().for_each(|v| *v = r);
        }
    }

    /// Draws one ε tensor bundle (a standard normal per parameter).
    pub fn sample_eps(&self, rng: &mut impl Rng) -> MlpTensors<S> {
        let mut eps = self.mu.zero_tensors();
        for w in &mut eps.weights {
            w.iter_mut().for_each(|v| *v = draw_standard_normal(rng));
        }
        for b in &mut eps.biases {
            b.iter_mut().for_each(|v| *v = draw_standard_normal(rng));
        }
        eps
    }

    /// Realizes the weight sample `μ + softplus(ρ)·ε`.
    pub fn realize(&self, eps: &MlpTensors<S>) -> Mlp<S> {
        let mut net = self.mu.clone();
        for l in 0..net.weights.len() {
            for i in 0..net.weights[l].len() {
                net.weights[l][i] += softplus(self.rho.weights[l][i]) * eps.weights[l][i];
            }
            for i in 0..net.biases[l].len() {
                net.biases[l][i] += softplus(self.rho.biases[l][i]) * eps.biases[l][i];
            }
        }
        net
    }

    /// KL(q ‖ N(0, I)) summed over all parameters.
    pub fn kl_to_standard_normal(&self) -> S {
        let half = S::of(0.5);
        let mut kl = S::zero();
        let mut add = |mu: S, rho: S| {
            let sigma = softplus(rho);
            kl += half * (mu * mu + sigma * sigma - S::one()) - sigma.ln();
        };
        for l in 0..self.mu.weights.len() {
            for i in 0..self.mu.weights[l].len() {
                add(self.mu.weights[l][i], self.rho.weights[l][i]);
            }
            for i in 0..self.mu.biases[l].len() {
                add(self.mu.biases[l][i], self.rho.biases[l][i]);
            }
        }
        kl
    }

    /// Negative ELBO for a fixed weight sample and mini-batch:
    /// `KL + data_scale · Σ ½(out_a − y)²`.
    pub fn elbo_loss(&self, eps: &MlpTensors<S>, batch: &[(Vec<S>, usize, S)], data_scale: S) -> S {
        let net = self.realize(eps);
        let mut data = S::zero();
        for (x, arm, y) in batch {
            let out = net.forward(x);
            let err = out[*arm] - *y;
            data += err * err / S::of(2.0);
        }
        self.kl_to_standard_normal() + data_scale * data
    }

    /// Analytic gradients of [`VariationalMlp::elbo_loss`] with respect to
    /// `(μ, ρ)` at the same fixed sample and batch.
    pub fn elbo_grads(
        &self,
        eps: &MlpTensors<S>,
        batch: &[(Vec<S>, usize, S)],
        data_scale: S,
    ) -> (MlpTensors<S>, MlpTensors<S>) {
        let net = self.realize(eps);
        let mut gw = net.zero_tensors();
        for (x, arm, y) in batch {
            net.accumulate_masked_grad(x, *arm, *y, None, &mut gw);
        }
        gw.scale(data_scale);

        let mut gmu = self.mu.zero_tensors();
        let mut grho = self.mu.zero_tensors();
        for l in 0..self.mu.weights.len() {
            for i in 0..self.mu.weights[l].len() {
                let (mu, rho) = (self.mu.weights[l][i], self.rho.weights[l][i]);
                let sigma = softplus(rho);
                let gate = sigmoid(rho);
                gmu.weights[l][i] = gw.weights[l][i] + mu;
                grho.weights[l][i] =
                    gw.weights[l][i] * eps.weights[l][i] * gate + (sigma - S::one() / sigma) * gate;
            }
            for i in 0..self.mu.biases[l].len() {
                let (mu, rho) = (self.mu.biases[l][i], self.rho.biases[l][i]);
                let sigma = softplus(rho);
                let gate = sigmoid(rho);
                gmu.biases[l][i] = gw.biases[l][i] + mu;
                grho.biases[l][i] =
                    gw.biases[l][i] * eps.biases[l][i] * gate + (sigma - S::one() / sigma) * gate;
            }
        }
        (gmu, grho)
    }
}

/// Thompson-style decision from the variational posterior: sample one weight
/// configuration, forward, argmax.
pub fn bbb_act<S: Scalar>(var: &VariationalMlp<S>, x: &[S], rng: &mut impl Rng) -> DrugId {
    let eps = var.sample_eps(rng);
    DrugId(argmax(&var.realize(&eps).forward(x)))
}

/// The Bayes-by-backprop agent.
#[derive(Debug, Clone)]
pub struct BayesByBackprop<S: Scalar> {
    var: VariationalMlp<S>,
    noise_sigma: S,
    schedule: TrainSchedule,
    smoothing: S,
    epsilon: S,
    mu_cache: MlpTensors<S>,
    rho_cache: MlpTensors<S>,
    global_step: u64,
    buffer: ReplayBuffer<S>,
    train_period: usize,
    train_steps: usize,
    batch_size: usize,
    batch_rng: RngStream,
    eps_rng: RngStream,
    act_rng: RngStream,
    observed: usize,
}

impl<S: Scalar> BayesByBackprop<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        widths: &[usize],
        noise_sigma: S,
        init_std: S,
        schedule: TrainSchedule,
        smoothing: f64,
        epsilon: f64,
        train_period: usize,
        train_steps: usize,
        batch_size: usize,
        seed: RngSeed,
    ) -> BayesByBackprop<S> {
        assert!(noise_sigma > S::zero());
        let mut init_rng = derive_stream(seed, "init");
        let var = VariationalMlp::init(widths, init_std, &mut init_rng);
        let mu_cache = super::train::ones_like(var.mean_net());
        let rho_cache = super::train::ones_like(var.mean_net());
        BayesByBackprop {
            var,
            noise_sigma,
            schedule,
            smoothing: S::of(smoothing),
            epsilon: S::of(epsilon),
            mu_cache,
            rho_cache,
            global_step: 0,
            buffer: ReplayBuffer::new(1),
            train_period,
            train_steps,
            batch_size,
            batch_rng: derive_stream(seed, "batch"),
            eps_rng: derive_stream(seed, "elbo"),
            act_rng: derive_stream(seed, "weights"),
            observed: 0,
        }
    }

    pub fn variational(&self) -> &VariationalMlp<S> {
        &self.var
    }

    pub fn variational_mut(&mut self) -> &mut VariationalMlp<S> {
        &mut self.var
    }

    pub fn act(&mut self, x: &[S]) -> DrugId {
        bbb_act(&self.var, x, &mut self.act_rng)
    }

    pub fn observe(&mut self, x: &[S], arm: DrugId, reward: S) {
        self.buffer.push(x.to_vec(), arm.0, reward);
        self.observed += 1;
        if self.observed % self.train_period == 0 {
            self.train_period_now();
        }
    }

    fn train_period_now(&mut self) {
        let n = self.buffer.len();
        let scale = S::of(n as f64 / self.batch_size as f64) / (self.noise_sigma * self.noise_sigma);
        for step in 0..self.train_steps {
            let rate = S::of(self.schedule.rate_at(self.global_step, step as u64));
            self.train_step(scale, rate);
        }
    }

    /// One reparameterized gradient step on the negative ELBO.
    pub fn train_step(&mut self, data_scale: S, rate: S) {
        let eps = self.var.sample_eps(&mut self.eps_rng);
        let batch: Vec<(Vec<S>, usize, S)> = (0..self.batch_size)
            .map(|_| {
                let idx = self.buffer.sample_index(0, &mut self.batch_rng);
                let (ctx, arm, y) = self.buffer.entry(idx);
                (ctx.to_vec(), arm, y)
            })
            .collect();
        let (gmu, grho) = self.var.elbo_grads(&eps, &batch, data_scale);
        rms_update(&mut self.var.mu, &mut self.mu_cache, &gmu, rate, self.smoothing, self.epsilon);
        rms_update(&mut self.var.rho, &mut self.rho_cache, &grho, rate, self.smoothing, self.epsilon);
        self.global_step += 1;
    }
}
