use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Relu => z.max(F::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative<F: Scalar>(self, z: F, a: F) -> F {
        match self {
            Activation::Relu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - a * a,
            Activation::Identity => F::one(),
        }
    }
}

/// Fully connected layer; `weights` is row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct DenseLayer<F> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub activation: Activation,
}

impl<F: Scalar> DenseLayer<F> {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| F::lit(rng.random_range(-limit..=limit)))
            .collect();
        Self { in_dim, out_dim, weights, bias: vec![F::zero(); out_dim], activation }
    }

    fn affine(&self, x: &[F]) -> Vec<F> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }
}

/// Shape of one layer, used for checkpoints and construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct DenseNetwork<F> {
    layers: Vec<DenseLayer<F>>,
    /// Bumped on every parameter update so stale caches can be detected.
    #[serde(skip)]
    version: u64,
}

/// Per-layer inputs, pre-activations and outputs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    version: u64,
    inputs: Vec<Vec<F>>,
    pre: Vec<Vec<F>>,
    post: Vec<Vec<F>>,
}

impl<F: Scalar> ForwardCache<F> {
    pub fn output(&self) -> &[F] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[F] {
        &self.inputs[0]
    }
}

/// Parameter gradients aligned with a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape<F> {
    pub weights: Vec<Vec<F>>,
    pub bias: Vec<Vec<F>>,
}

impl<F: Scalar> GradientTape<F> {
    pub fn zeros_like(net: &DenseNetwork<F>) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![F::zero(); l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![F::zero(); l.bias.len()]).collect(),
        }
    }

    fn buffers(&self) -> impl Iterator<Item = &F> {
        self.weights.iter().chain(&self.bias).flatten()
    }

    fn buffers_mut(&mut self) -> impl Iterator<Item = &mut F> {
        self.weights.iter_mut().chain(self.bias.iter_mut()).flatten()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        for (a, &b) in self.buffers_mut().zip(other.buffers()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: F) {
        for a in self.buffers_mut() {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.buffers().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.buffers().all(|v| *v == F::zero())
    }

    /// Flat view in the same order as [`DenseNetwork::params`].
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn squared_norm(&self) -> F {
        self.buffers().map(|&v| v * v).sum()
    }
}

impl<F: Scalar> DenseNetwork<F> {
    pub fn new(layers: Vec<DenseLayer<F>>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("network needs at least one layer");
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return invalid(format!("layer {i} buffers do not match {}x{}", l.out_dim, l.in_dim));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return invalid(format!("layer {i} has non-finite parameters"));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                ));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// Builds a network with the given widths, `hidden` activation between
    /// layers and `output` activation on the last.
    pub fn seeded<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return invalid("need at least an input and output width, all positive");
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::init(widths[i], widths[i + 1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec { in_dim: l.in_dim, out_dim: l.out_dim, activation: l.activation })
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameters: per layer, weights then bias.
    pub fn params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.param_count() {
            return invalid(format!("{} params for a network with {}", params.len(), self.param_count()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        self.version += 1;
        Ok(())
    }

    pub fn predict(&self, x: &[F]) -> Result<Vec<F>> {
        Ok(self.forward(x)?.post.pop().unwrap_or_default())
    }

    pub fn forward(&self, x: &[F]) -> Result<ForwardCache<F>> {
        if x.len() != self.input_dim() {
            return invalid(format!("input has {} features, network expects {}", x.len(), self.input_dim()));
        }
        let n = self.layers.len();
        let mut cache = ForwardCache {
            version: self.version,
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut current = x.to_vec();
        for l in &self.layers {
            let z = l.affine(&current);
            let a: Vec<F> = z.iter().map(|&zi| l.activation.apply(zi)).collect();
            cache.inputs.push(std::mem::replace(&mut current, a.clone()));
            cache.pre.push(z);
            cache.post.push(a);
        }
        Ok(cache)
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient with
    /// respect to the input.
    pub fn backward(&self, cache: &ForwardCache<F>, upstream: &[F]) -> Result<(GradientTape<F>, Vec<F>)> {
        let mut tape = GradientTape::zeros_like(self);
        let dx = self.backward_into(cache, upstream, &mut tape)?;
        Ok((tape, dx))
    }

    /// Like [`backward`](Self::backward) but accumulates into `tape`.
    pub fn backward_into(&self, cache: &ForwardCache<F>, upstream: &[F], tape: &mut GradientTape<F>) -> Result<Vec<F>> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::ContractViolation("forward cache does not belong to this network state".into()));
        }
        if upstream.len() != self.output_dim() {
            return invalid(format!("upstream gradient has {} entries, output has {}", upstream.len(), self.output_dim()));
        }
        let mut grad = upstream.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let dz: Vec<F> = grad
                .iter()
                .zip(&cache.pre[li])
                .zip(&cache.post[li])
                .map(|((&g, &z), &a)| g * l.activation.derivative(z, a))
                .collect();
            let input = &cache.inputs[li];
            let tw = &mut tape.weights[li];
            let tb = &mut tape.bias[li];
            let mut dx = vec![F::zero(); l.in_dim];
            for (o, &d) in dz.iter().enumerate() {
                if d == F::zero() {
                    continue;
                }
                tb[o] += d;
                let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                let trow = &mut tw[o * l.in_dim..(o + 1) * l.in_dim];
                for i in 0..l.in_dim {
                    trow[i] += d * input[i];
                    dx[i] += d * row[i];
                }
            }
            grad = dx;
        }
        Ok(grad)
    }

    /// Gradient-descent update `params -= gamma * tape`.
    pub fn sgd_step(&mut self, tape: &GradientTape<F>, gamma: F) -> Result<()> {
        if !(gamma > F::zero()) {
            return invalid(format!("learning rate {gamma} must be positive"));
        }
        if !tape.is_finite() {
            return Err(Error::TrainingDivergence { epoch: 0, reason: "non-finite gradient".into() });
        }
        for (li, l) in self.layers.iter_mut().enumerate() {
            for (w, &g) in l.weights.iter_mut().zip(&tape.weights[li]) {
                *w -= gamma * g;
            }
            for (b, &g) in l.bias.iter_mut().zip(&tape.bias[li]) {
                *b -= gamma * g;
            }
        }
        self.version += 1;
        Ok(())
    }
}

/// Free-function form of [`DenseNetwork::sgd_step`].
pub fn sgd_step<F: Scalar>(net: &mut DenseNetwork<F>, tape: &GradientTape<F>, gamma: F) -> Result<()> {
    net.sgd_step(tape, gamma)
}

/// Gradient reversal: identity forward, `-lambda * g` backward.
pub fn gradient_reversal<F: Scalar>(upstream: &[F], lambda: F) -> Vec<F> {
    assert!(lambda >= F::zero(), "reversal coefficient must be non-negative");
    upstream.iter().map(|&g| -lambda * g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(in_dim: usize, out_dim: usize, w: Vec<f64>, b: Vec<f64>, act: Activation) -> DenseLayer<f64> {
        DenseLayer { in_dim, out_dim, weights: w, bias: b, activation: act }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNetwork::new(vec![layer(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Identity)]).unwrap();
        assert_eq!(net.predict(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn relu_on_negative_preactivations_is_zero() {
        let net = DenseNetwork::new(vec![layer(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![-5.0, -5.0], Activation::Relu)]).unwrap();
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_matches_hand_computation() {
        // h = tanh(W1 x + b1), y = W2 h + b2
        let w1 = vec![0.5, -1.0, 2.0, 0.25];
        let b1 = vec![0.1, -0.2];
        let w2 = vec![1.5, -0.5];
        let b2 = vec![0.3];
        let net = DenseNetwork::new(vec![
            layer(2, 2, w1, b1, Activation::Tanh),
            layer(2, 1, w2, b2, Activation::Identity),
        ])
        .unwrap();
        let x = [0.4, -0.8];
        let h0 = (0.5 * 0.4 + -1.0 * -0.8 + 0.1f64).tanh();
        let h1 = (2.0 * 0.4 + 0.25 * -0.8 - 0.2f64).tanh();
        let y = 1.5 * h0 - 0.5 * h1 + 0.3;
        assert!((net.predict(&x).unwrap()[0] - y).abs() < 1e-15);
    }

    #[test]
    fn linear_input_gradient_is_transpose_product() {
        let net = DenseNetwork::new(vec![layer(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.0; 3], Activation::Identity)]).unwrap();
        let cache = net.forward(&[1.0, 1.0]).unwrap();
        let (_, dx) = net.backward(&cache, &[1.0, -1.0, 2.0]).unwrap();
        assert_eq!(dx, vec![1.0 - 3.0 + 10.0, 2.0 - 4.0 + 12.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNetwork::<f64>::seeded(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let cache = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (tape, dx) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(tape.is_zero());
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNetwork::<f64>::seeded(&[2, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let cache = net.forward(&[1.0, 1.0]).unwrap();
        let (tape, _) = net.backward(&cache, &[1.0, 1.0]).unwrap();
        net.sgd_step(&tape, 0.1).unwrap();
        assert!(matches!(net.backward(&cache, &[1.0, 1.0]), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn dimension_mismatch_is_invalid_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNetwork::<f64>::seeded(&[2, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sgd_single_parameter() {
        let mut net = DenseNetwork::new(vec![layer(1, 1, vec![3.0], vec![0.0], Activation::Identity)]).unwrap();
        let tape = GradientTape { weights: vec![vec![2.0]], bias: vec![vec![0.0]] };
        net.sgd_step(&tape, 1.0).unwrap();
        assert_eq!(net.params(), vec![1.0, 0.0]);

        let before = net.clone();
        net.sgd_step(&GradientTape::zeros_like(&net), 0.5).unwrap();
        assert_eq!(net.params(), before.params());
    }

    #[test]
    fn sgd_rejects_non_finite_and_bad_rate() {
        let mut net = DenseNetwork::new(vec![layer(1, 1, vec![3.0], vec![0.0], Activation::Identity)]).unwrap();
        let bad = GradientTape { weights: vec![vec![f64::NAN]], bias: vec![vec![0.0]] };
        assert!(matches!(net.sgd_step(&bad, 0.1), Err(Error::TrainingDivergence { .. })));
        let ok = GradientTape::zeros_like(&net);
        assert!(net.sgd_step(&ok, 0.0).is_err());
    }

    #[test]
    fn quadratic_loss_decreases_monotonically() {
        // loss(w) = (w * 1)^2 has L = 2; gamma < 1/L must never increase it
        let mut net = DenseNetwork::new(vec![layer(1, 1, vec![3.0], vec![0.0], Activation::Identity)]).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let cache = net.forward(&[1.0]).unwrap();
            let y = cache.output()[0];
            let loss = y * y;
            assert!(loss <= prev);
            prev = loss;
            let (mut tape, _) = net.backward(&cache, &[2.0 * y]).unwrap();
            tape.bias[0][0] = 0.0;
            net.sgd_step(&tape, 0.4).unwrap();
        }
        // closed form: w_t = 3 (1 - 0.8)^t
        assert!((net.params()[0] - 3.0 * 0.2f64.powi(50)).abs() < 1e-30);
    }

    #[test]
    fn gradient_reversal_examples() {
        assert_eq!(gradient_reversal(&[1.0, -2.0], 1.0), vec![-1.0, 2.0]);
        assert_eq!(gradient_reversal(&[1.0, -2.0], 0.0), vec![-0.0, 0.0]);
        assert_eq!(gradient_reversal(&[2.0, -4.0], 0.5), vec![-1.0, 2.0]);
        let g = [0.3, -0.7];
        assert_eq!(gradient_reversal(&gradient_reversal(&g, 1.0), 1.0), g.to_vec());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = DenseNetwork::<f32>::seeded(&[3, 5, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let p = net.params();
        assert_eq!(p.len(), 3 * 5 + 5 + 5 * 2 + 2);
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
    }
}
