//! Minimal dense network: rectifier hidden layers, linear k-output head,
//! hand-rolled backprop.
//!
//! The training loss is the squared error of the chosen arm's output only;
//! other heads receive no gradient. The last hidden activation is exposed as
//! the representation consumed by the neural-linear agent. Dropout, when
//! enabled, samples one mask per hidden layer and scales kept units by
//! `1/keep` (identical machinery at decision time and in training).

use rand::Rng;

use crate::num::Scalar;
use crate::rng::draw_standard_normal;

/// Dense feed-forward network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S: Scalar> {
    widths: Vec<usize>,
    /// Per layer: row-major out × in weights, then out biases.
    pub weights: Vec<Vec<S>>,
    pub biases: Vec<Vec<S>>,
}

/// Gradient (or any parameter-shaped tensor bundle) for an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpTensors<S: Scalar> {
    pub weights: Vec<Vec<S>>,
    pub biases: Vec<Vec<S>>,
}

impl<S: Scalar> Mlp<S> {
    /// He-style initialization: `w ~ N(0, 2/fan_in)`, biases zero.
    pub fn init(widths: &[usize], rng: &mut impl Rng) -> Mlp<S> {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let scale = S::of((2.0 / fan_in as f64).sqrt());
            weights.push((0..fan_in * fan_out).map(|_| scale * draw_standard_normal::<S>(rng)).collect());
            biases.push(vec![S::zero(); fan_out]);
        }
        Mlp {
            widths: widths.to_vec(),
            weights,
            biases,
        }
    }

    /// All-zero network with the given shape.
    pub fn zeros(widths: &[usize]) -> Mlp<S> {
        assert!(widths.len() >= 2);
        Mlp {
            widths: widths.to_vec(),
            weights: (0..widths.len() - 1).map(|l| vec![S::zero(); widths[l] * widths[l + 1]]).collect(),
            biases: (0..widths.len() - 1).map(|l| vec![S::zero(); widths[l + 1]]).collect(),
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Width of the last hidden layer (the neural-linear representation).
    pub fn hidden_dim(&self) -> usize {
        self.widths[self.widths.len() - 2]
    }

    pub fn zero_tensors(&self) -> MlpTensors<S> {
        MlpTensors {
            weights: self.weights.iter().map(|w| vec![S::zero(); w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![S::zero(); b.len()]).collect(),
        }
    }

    fn affine(&self, layer: usize, input: &[S]) -> Vec<S> {
        let n_in = self.widths[layer];
        debug_assert_eq!(input.len(), n_in);
        let w = &self.weights[layer];
        let mut out = self.biases[layer].clone();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = S::zero();
            for (wi, xi) in row.iter().zip(input) {
                acc += *wi * *xi;
            }
            *out_o += acc;
        }
        out
    }

    /// Plain forward pass: k predicted rewards.
    pub fn forward(&self, x: &[S]) -> Vec<S> {
        self.forward_with_hidden(x).0
    }

    /// Forward pass returning (outputs, last hidden activation).
    ///
    /// With no hidden layer the "representation" is the input itself.
    pub fn forward_with_hidden(&self, x: &[S]) -> (Vec<S>, Vec<S>) {
        let mut a = x.to_vec();
        let mut hidden = a.clone();
        for l in 0..self.n_layers() {
            let mut z = self.affine(l, &a);
            if l + 1 < self.n_layers() {
                for v in &mut z {
                    *v = v.max(S::zero());
                }
                hidden = z.clone();
            }
            a = z;
        }
        (a, hidden)
    }

    /// Forward pass with one dropout mask per hidden layer; kept units are
    /// scaled by `1/keep`.
    pub fn forward_dropout(&self, x: &[S], masks: &[Vec<bool>], keep: S) -> Vec<S> {
        debug_assert_eq!(masks.len(), self.n_layers().saturating_sub(1));
        let inv_keep = S::one() / keep;
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let mut z = self.affine(l, &a);
            if l + 1 < self.n_layers() {
                for (v, kept) in z.iter_mut().zip(&masks[l]) {
                    *v = if *kept { v.max(S::zero()) * inv_keep } else { S::zero() };
                }
            }
            a = z;
        }
        a
    }

    /// Accumulates into `grads` the gradient of `0.5·(out[arm] − y)²` for one
    /// example and returns that example's loss term. Masked: only `arm`'s
    /// head receives output error. `dropout` carries (per-hidden-layer masks,
    /// keep probability) when the caller trains with dropout.
    pub fn accumulate_masked_grad(
        &self,
        x: &[S],
        arm: usize,
        y: S,
        dropout: Option<(&[Vec<bool>], S)>,
        grads: &mut MlpTensors<S>,
    ) -> S {
        let n_layers = self.n_layers();
        // Forward, retaining activations and rectifier/dropout derivatives.
        let mut activations: Vec<Vec<S>> = Vec::with_capacity(n_layers + 1);
        let mut gate: Vec<Vec<S>> = Vec::with_capacity(n_layers.saturating_sub(1));
        activations.push(x.to_vec());
        for l in 0..n_layers {
            let mut z = self.affine(l, &activations[l]);
            if l + 1 < n_layers {
                let mut g = vec![S::zero(); z.len()];
                match dropout {
                    Some((masks, keep)) => {
                        let inv_keep = S::one() / keep;
                        for (i, v) in z.iter_mut().enumerate() {
                            if masks[l][i] && *v > S::zero() {
                                *v *= inv_keep;
                                g[i] = inv_keep;
                            } else {
                                *v = S::zero();
                            }
                        }
                    }
                    None => {
                        for (i, v) in z.iter_mut().enumerate() {
                            if *v > S::zero() {
                                g[i] = S::one();
                            } else {
                                *v = S::zero();
                            }
                        }
                    }
                }
                gate.push(g);
            }
            activations.push(z);
        }

        let out = activations.last().unwrap();
        let err = out[arm] - y;

        // Backward. The output delta is zero except at the chosen arm.
        let mut delta = vec![S::zero(); self.output_dim()];
        delta[arm] = err;
        for l in (0..n_layers).rev() {
            let n_in = self.widths[l];
            let input = &activations[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == S::zero() {
                    continue;
                }
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += *d * *xi;
                }
                grads.biases[l][o] += *d;
            }
            if l > 0 {
                let mut prev = vec![S::zero(); n_in];
                let w = &self.weights[l];
                for (o, d) in delta.iter().enumerate() {
                    if *d == S::zero() {
                        continue;
                    }
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += *d * *wi;
                    }
                }
                for (p, g) in prev.iter_mut().zip(&gate[l - 1]) {
                    *p *= *g;
                }
                delta = prev;
            }
        }
        err * err / S::of(2.0)
    }

    /// Analytic gradient of `out[arm]` with respect to the input.
    pub fn input_gradient(&self, x: &[S], arm: usize) -> Vec<S> {
        let n_layers = self.n_layers();
        let mut activations: Vec<Vec<S>> = vec![x.to_vec()];
        let mut gate: Vec<Vec<S>> = Vec::new();
        for l in 0..n_layers {
            let mut z = self.affine(l, &activations[l]);
            if l + 1 < n_layers {
                let mut g = vec![S::zero(); z.len()];
                for (i, v) in z.iter_mut().enumerate() {
                    if *v > S::zero() {
                        g[i] = S::one();
                    } else {
                        *v = S::zero();
                    }
                }
                gate.push(g);
            }
            activations.push(z);
        }
        let mut delta = vec![S::zero(); self.output_dim()];
        delta[arm] = S::one();
        for l in (0..n_layers).rev() {
            let n_in = self.widths[l];
            let w = &self.weights[l];
            let mut prev = vec![S::zero(); n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == S::zero() {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += *d * *wi;
                }
            }
            if l > 0 {
                for (p, g) in prev.iter_mut().zip(&gate[l - 1]) {
                    *p *= *g;
                }
            }
            delta = prev;
        }
        delta
    }

    /// In-place elementwise map over all parameters, paired with another
    /// parameter-shaped bundle (used by optimizers).
    pub fn for_each_param(&mut self, other: &mut MlpTensors<S>, grads: &MlpTensors<S>, mut f: impl FnMut(&mut S, &mut S, S)) {
        for l in 0..self.weights.len() {
            for i in 0..self.weights[l].len() {
                f(&mut self.weights[l][i], &mut other.weights[l][i], grads.weights[l][i]);
            }
            for i in 0..self.biases[l].len() {
                f(&mut self.biases[l][i], &mut other.biases[l][i], grads.biases[l][i]);
            }
        }
    }
}

impl<S: Scalar> MlpTensors<S> {
    pub fn fill(&mut self, v: S) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x = v);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn scale(&mut self, v: S) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x *= v);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::{derive_stream, RngSeed};

    #[test]
    fn zero_weights_give_zero_outputs() {
        let net = Mlp::<f64>::zeros(&[5, 8, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5, 3.0, -1.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mut net = Mlp::<f64>::zeros(&[3, 3]);
        for i in 0..3 {
            net.weights[0][i * 3 + i] = 1.0;
        }
        let x = [0.7, -1.3, 2.2];
        assert_eq!(net.forward(&x), x.to_vec());
    }

    #[test]
    fn hidden_representation_has_hidden_width() {
        let mut rng = derive_stream(RngSeed(2), "mlp-hidden");
        let net = Mlp::<f64>::init(&[4, 10, 3], &mut rng);
        let (out, hidden) = net.forward_with_hidden(&[0.1, 0.2, -0.3, 0.4]);
        assert_eq!(out.len(), 3);
        assert_eq!(hidden.len(), 10);
        assert!(hidden.iter().all(|h| *h >= 0.0), "rectified representation");
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let mut rng = derive_stream(RngSeed(3), "mlp-fd-input");
        for trial in 0..20 {
            let net = Mlp::<f64>::init(&[6, 9, 4], &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let arm = trial % 4;
            let grad = net.input_gradient(&x, arm);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut plus = x.clone();
                plus[i] += h;
                let mut minus = x.clone();
                minus[i] -= h;
                let fd = (net.forward(&plus)[arm] - net.forward(&minus)[arm]) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-4, "trial {trial} input {i}: analytic {} vs fd {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn masked_loss_gradient_matches_central_differences() {
        let mut rng = derive_stream(RngSeed(4), "mlp-fd-param");
        for trial in 0..20 {
            let net = Mlp::<f64>::init(&[5, 7, 3], &mut rng);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let arm = trial % 3;
            let y: f64 = rng.random_range(-1.0..1.0);
            let mut grads = net.zero_tensors();
            net.accumulate_masked_grad(&x, arm, y, None, &mut grads);

            let loss = |net: &Mlp<f64>| {
                let out = net.forward(&x);
                (out[arm] - y) * (out[arm] - y) / 2.0
            };
            let h = 1e-6;
            for l in 0..net.n_layers() {
                for i in 0..net.weights[l].len() {
                    let mut plus = net.clone();
                    plus.weights[l][i] += h;
                    let mut minus = net.clone();
                    minus.weights[l][i] -= h;
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let rel = (grads.weights[l][i] - fd).abs() / fd.abs().max(1.0);
                    assert!(rel < 1e-4, "trial {trial} layer {l} w[{i}]: {} vs {fd}", grads.weights[l][i]);
                }
                for i in 0..net.biases[l].len() {
                    let mut plus = net.clone();
                    plus.biases[l][i] += h;
                    let mut minus = net.clone();
                    minus.biases[l][i] -= h;
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let rel = (grads.biases[l][i] - fd).abs() / fd.abs().max(1.0);
                    assert!(rel < 1e-4, "trial {trial} layer {l} b[{i}]");
                }
            }
        }
    }

    #[test]
    fn unobserved_heads_get_zero_gradient() {
        let mut rng = derive_stream(RngSeed(5), "mlp-mask");
        let net = Mlp::<f64>::init(&[4, 6, 3], &mut rng);
        let x = [0.5, -0.5, 1.0, 0.25];
        let mut grads = net.zero_tensors();
        net.accumulate_masked_grad(&x, 1, 0.7, None, &mut grads);
        let n_in = 6;
        let last = net.n_layers() - 1;
        for o in [0usize, 2usize] {
            for i in 0..n_in {
                assert_eq!(grads.weights[last][o * n_in + i], 0.0, "head {o} weight {i}");
            }
            assert_eq!(grads.biases[last][o], 0.0, "head {o} bias");
        }
        assert!(grads.biases[last][1] != 0.0, "observed head must receive gradient");
    }

    #[test]
    fn dropout_keep_one_equals_plain_forward() {
        let mut rng = derive_stream(RngSeed(6), "mlp-keep1");
        let net = Mlp::<f64>::init(&[5, 12, 4], &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let masks = vec![vec![true; 12]];
        assert_eq!(net.forward_dropout(&x, &masks, 1.0), net.forward(&x));
    }

    #[test]
    fn dropout_gradient_matches_central_differences() {
        let mut rng = derive_stream(RngSeed(7), "mlp-fd-dropout");
        let net = Mlp::<f64>::init(&[4, 8, 2], &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let masks = vec![(0..8).map(|i| i % 3 != 0).collect::<Vec<bool>>()];
        let keep = 0.8;
        let (arm, y) = (1, 0.3);
        let mut grads = net.zero_tensors();
        net.accumulate_masked_grad(&x, arm, y, Some((&masks, keep)), &mut grads);
        let loss = |net: &Mlp<f64>| {
            let out = net.forward_dropout(&x, &masks, keep);
            (out[arm] - y) * (out[arm] - y) / 2.0
        };
        let h = 1e-6;
        for l in 0..net.n_layers() {
            for i in 0..net.weights[l].len() {
                let mut plus = net.clone();
                plus.weights[l][i] += h;
                let mut minus = net.clone();
                minus.weights[l][i] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let rel = (grads.weights[l][i] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-4, "layer {l} w[{i}]");
            }
        }
    }
}
