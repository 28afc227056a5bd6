//! Stochastic observation-to-action policies with exact score gradients.
//!
//! Parameters are a single flat `f64` vector. Each layer stores its weights
//! input-major (`w[i * out + o]`) followed by its bias, so a sparse input only
//! touches the weight rows of its nonzero entries.

mod checkpoint;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::SimRng;
use crate::{Error, Result};

pub use checkpoint::{decode, decode_expecting, encode, FORMAT_VERSION, MAGIC};

/// Shape of a policy network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Architecture {
    /// One logit row per input feature, no bias. With one-hot observations
    /// this is a lookup table of logits.
    Tabular { inputs: usize, actions: usize },
    /// `tanh` hidden layers and a linear softmax head.
    Feedforward { inputs: usize, hidden: Vec<usize>, actions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    bias: bool,
    offset: usize,
}

impl Layer {
    fn weights(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> core::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + if self.bias { self.outputs } else { 0 }
    }

    fn len(&self) -> usize {
        self.inputs * self.outputs + if self.bias { self.outputs } else { 0 }
    }
}

impl Architecture {
    pub fn feedforward(inputs: usize, hidden: &[usize], actions: usize) -> Self {
        Architecture::Feedforward { inputs, hidden: hidden.to_vec(), actions }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Architecture::Tabular { inputs, .. } | Architecture::Feedforward { inputs, .. } => *inputs,
        }
    }

    pub fn action_count(&self) -> usize {
        match self {
            Architecture::Tabular { actions, .. } | Architecture::Feedforward { actions, .. } => *actions,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Layer::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let sizes_ok = match self {
            Architecture::Tabular { inputs, actions } => *inputs > 0 && *actions > 0,
            Architecture::Feedforward { inputs, hidden, actions } => {
                *inputs > 0 && *actions > 0 && hidden.iter().all(|&h| h > 0)
            }
        };
        if sizes_ok {
            Ok(())
        } else {
            Err(Error::invalid("architecture", format!("all layer sizes must be positive: {self}")))
        }
    }

    fn layers(&self) -> Vec<Layer> {
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut push = |inputs: usize, outputs: usize, bias: bool| {
            let layer = Layer { inputs, outputs, bias, offset };
            offset += layer.len();
            layers.push(layer);
        };
        match self {
            Architecture::Tabular { inputs, actions } => push(*inputs, *actions, false),
            Architecture::Feedforward { inputs, hidden, actions } => {
                let mut width = *inputs;
                for &h in hidden {
                    push(width, h, true);
                    width = h;
                }
                push(width, *actions, true);
            }
        }
        layers
    }
}

impl core::fmt::Display for Architecture {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Architecture::Tabular { inputs, actions } => write!(f, "tabular({inputs}->{actions})"),
            Architecture::Feedforward { inputs, hidden, actions } => {
                write!(f, "feedforward({inputs}")?;
                for h in hidden {
                    write!(f, "->{h}")?;
                }
                write!(f, "->{actions})")
            }
        }
    }
}

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// Accepts any non-negative vector summing to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) || libm::fabs(sum - 1.0) > 1e-9 {
            return Err(Error::invalid("probs", "not a probability distribution"));
        }
        Ok(ActionDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        sample_index(&self.probs, rng)
    }

    /// Most probable action (lowest index on ties).
    pub fn mode(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scratch space for a forward pass; reused across calls to avoid allocation.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    /// Post-activation outputs of each hidden layer.
    hidden: Vec<Vec<f64>>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Parameters of a stochastic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    params: Vec<f64>,
    layers: Vec<Layer>,
}

impl PolicyParams {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = vec![0.0; arch.param_count()];
        let layers = arch.layers();
        Ok(PolicyParams { arch, params, layers })
    }

    /// Uniform(-scale, scale) initialisation.
    pub fn random(arch: Architecture, scale: f64, rng: &mut SimRng) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        for w in &mut p.params {
            *w = rng.gen_range(-scale..=scale);
        }
        Ok(p)
    }

    pub fn from_parts(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::ShapeMismatch { expected: arch.param_count(), got: params.len() });
        }
        let layers = arch.layers();
        Ok(PolicyParams { arch, params, layers })
    }

    /// Tabular policy from explicit logit rows (`logits[input][action]`).
    pub fn tabular(logits: &[Vec<f64>]) -> Result<Self> {
        let inputs = logits.len();
        let actions = logits.first().map_or(0, Vec::len);
        if logits.iter().any(|row| row.len() != actions) {
            return Err(Error::invalid("logits", "ragged logit table"));
        }
        let params = logits.iter().flatten().copied().collect();
        Self::from_parts(Architecture::Tabular { inputs, actions }, params)
    }

    /// Tabular policy that puts logit `strength` on `action` for every input.
    pub fn constant(inputs: usize, actions: usize, action: usize, strength: f64) -> Result<Self> {
        if action >= actions {
            return Err(Error::ActionOutOfRange { seat: 0, action, count: actions });
        }
        let mut row = vec![0.0; actions];
        row[action] = strength;
        Self::tabular(&vec![row; inputs])
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn action_count(&self) -> usize {
        self.arch.action_count()
    }

    pub fn forward(&self, obs: &[f64]) -> Result<ActionDistribution> {
        let mut ws = Workspace::default();
        self.forward_into(obs, &mut ws)?;
        Ok(ActionDistribution { probs: ws.probs })
    }

    /// Forward pass into `ws`; returns the action probabilities.
    pub fn forward_into<'w>(&self, obs: &[f64], ws: &'w mut Workspace) -> Result<&'w [f64]> {
        if obs.len() != self.arch.input_len() {
            return Err(Error::ShapeMismatch { expected: self.arch.input_len(), got: obs.len() });
        }
        let layers = &self.layers;
        let n_hidden = layers.len() - 1;
        ws.hidden.resize_with(n_hidden, Vec::new);
        for (l, layer) in layers.iter().enumerate() {
            let (done, rest) = ws.hidden.split_at_mut(l);
            let input: &[f64] = if l == 0 { obs } else { &done[l - 1] };
            let out = if l < n_hidden { &mut rest[0] } else { &mut ws.logits };
            self.affine(layer, input, out);
            if l < n_hidden {
                for v in out.iter_mut() {
                    *v = libm::tanh(*v);
                }
            }
        }
        softmax_into(&ws.logits, &mut ws.probs);
        Ok(&ws.probs)
    }

    fn affine(&self, layer: &Layer, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        if layer.bias {
            out.extend_from_slice(&self.params[layer.biases()]);
        } else {
            out.resize(layer.outputs, 0.0);
        }
        let w = &self.params[layer.weights()];
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w[i * layer.outputs..(i + 1) * layer.outputs];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += x * wij;
            }
        }
    }

    /// Accumulates `scale * d(objective)/d(params)` into `grad`, where
    /// `dlogits` is the gradient of the objective with respect to the logits
    /// of the forward pass currently held in `ws` (computed from `obs`).
    pub fn backward(&self, obs: &[f64], ws: &mut Workspace, dlogits: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = &self.layers;
        ws.delta.clear();
        ws.delta.extend_from_slice(dlogits);
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let input: &[f64] = if l == 0 { obs } else { &ws.hidden[l - 1] };
            if layer.bias {
                for (g, d) in grad[layer.biases()].iter_mut().zip(&ws.delta) {
                    *g += d;
                }
            }
            let w = &self.params[layer.weights()];
            let gw = &mut grad[layer.weights()];
            for (i, &x) in input.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let row = &mut gw[i * layer.outputs..(i + 1) * layer.outputs];
                for (g, d) in row.iter_mut().zip(&ws.delta) {
                    *g += x * d;
                }
            }
            if l > 0 {
                // delta for the previous tanh layer: (W d) * (1 - h^2)
                ws.delta_next.clear();
                for (i, &h) in input.iter().enumerate() {
                    let row = &w[i * layer.outputs..(i + 1) * layer.outputs];
                    let dot: f64 = row.iter().zip(&ws.delta).map(|(a, b)| a * b).sum();
                    ws.delta_next.push(dot * (1.0 - h * h));
                }
                core::mem::swap(&mut ws.delta, &mut ws.delta_next);
            }
        }
    }

    /// Exact gradient of `log pi(action | obs)` with respect to every parameter.
    pub fn grad_log_prob(&self, obs: &[f64], action: usize) -> Result<Vec<f64>> {
        let count = self.action_count();
        if action >= count {
            return Err(Error::ActionOutOfRange { seat: 0, action, count });
        }
        let mut ws = Workspace::default();
        self.forward_into(obs, &mut ws)?;
        let dlogits: Vec<f64> =
            ws.probs.iter().enumerate().map(|(a, p)| if a == action { 1.0 - p } else { -p }).collect();
        let mut grad = vec![0.0; self.params.len()];
        self.backward(obs, &mut ws, &dlogits, &mut grad);
        Ok(grad)
    }

    pub fn log_prob(&self, obs: &[f64], action: usize) -> Result<f64> {
        let mut ws = Workspace::default();
        self.forward_into(obs, &mut ws)?;
        let max = ws.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(ws.logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
        ws.logits
            .get(action)
            .map(|z| z - lse)
            .ok_or(Error::ActionOutOfRange { seat: 0, action, count: self.action_count() })
    }
}

pub(crate) fn softmax_into(logits: &[f64], probs: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probs.clear();
    probs.extend(logits.iter().map(|z| libm::exp(z - max)));
    let sum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// Gradient of the entropy `H = -sum p log p` with respect to the logits.
pub(crate) fn entropy_logit_grad(probs: &[f64], out: &mut [f64]) {
    let entropy: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * libm::log(p)).sum::<f64>();
    for (o, &p) in out.iter_mut().zip(probs) {
        let log_p = if p > 0.0 { libm::log(p) } else { 0.0 };
        *o = -p * (log_p + entropy);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn net(seed: u64) -> PolicyParams {
        let mut rng = rng_from_seed(seed);
        PolicyParams::random(Architecture::feedforward(6, &[5, 4], 3), 0.8, &mut rng).unwrap()
    }

    #[test]
    fn zero_params_give_uniform() {
        let p = PolicyParams::zeros(Architecture::feedforward(4, &[8, 8], 5)).unwrap();
        let d = p.forward(&[0.3, -1.0, 2.0, 0.0]).unwrap();
        for &q in d.probs() {
            assert!((q - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_tabular_logit() {
        let p = PolicyParams::constant(5, 2, 0, 50.0).unwrap();
        let d = p.forward(&[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(d.probs()[0] > 1.0 - 1e-9);
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let p = net(1);
        assert_eq!(p.forward(&[0.0; 5]).unwrap_err(), Error::ShapeMismatch { expected: 6, got: 5 });
    }

    #[test]
    fn forward_is_deterministic() {
        let p = net(3);
        let obs = [0.1, 0.0, -0.4, 1.0, 0.0, 0.7];
        let first = p.forward(&obs).unwrap();
        for _ in 0..100 {
            assert_eq!(p.forward(&obs).unwrap(), first);
        }
    }

    #[test]
    fn tabular_gradient_matches_softmax_derivative() {
        let p = PolicyParams::tabular(&[vec![0.3, -0.2, 1.0], vec![0.0, 0.5, -1.0]]).unwrap();
        let obs = [0.0, 1.0];
        let probs = p.forward(&obs).unwrap();
        let g = p.grad_log_prob(&obs, 1).unwrap();
        // row 0 is untouched by a one-hot on input 1
        assert_eq!(&g[0..3], &[0.0, 0.0, 0.0]);
        assert!((g[3] + probs.probs()[0]).abs() < 1e-15);
        assert!((g[4] - (1.0 - probs.probs()[1])).abs() < 1e-15);
        assert!((g[5] + probs.probs()[2]).abs() < 1e-15);
    }

    #[test]
    fn zero_inputs_give_zero_first_layer_gradient() {
        let p = net(5);
        let obs = [0.0, 1.5, 0.0, 0.0, -0.3, 0.0];
        let g = p.grad_log_prob(&obs, 2).unwrap();
        for i in [0usize, 2, 3, 5] {
            assert!(g[i * 5..(i + 1) * 5].iter().all(|&x| x == 0.0), "row {i}");
        }
        assert!(g[5..10].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn grad_rejects_bad_action() {
        assert!(matches!(net(1).grad_log_prob(&[0.0; 6], 3), Err(Error::ActionOutOfRange { .. })));
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = rng_from_seed(9);
        let d = ActionDistribution::new(vec![1.0, 0.0]).unwrap();
        assert!((0..1000).all(|_| d.sample(&mut rng) == 0));
        let d = ActionDistribution::new(vec![0.0, 1.0]).unwrap();
        assert!((0..1000).all(|_| d.sample(&mut rng) == 1));
        assert!(ActionDistribution::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn uniform_sampling_frequency() {
        let mut rng = rng_from_seed(11);
        let d = ActionDistribution::new(vec![0.5, 0.5]).unwrap();
        let zeros = (0..10_000).filter(|_| d.sample(&mut rng) == 0).count();
        let freq = zeros as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn same_rng_state_same_sample() {
        let d = ActionDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut r1 = rng_from_seed(5);
        let mut r2 = r1.clone();
        for _ in 0..50 {
            assert_eq!(d.sample(&mut r1), d.sample(&mut r2));
        }
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let logits = [0.4, -1.2, 0.9];
        let entropy = |z: &[f64]| {
            let mut p = Vec::new();
            softmax_into(z, &mut p);
            -p.iter().map(|q| q * libm::log(*q)).sum::<f64>()
        };
        let mut probs = Vec::new();
        softmax_into(&logits, &mut probs);
        let mut g = [0.0; 3];
        entropy_logit_grad(&probs, &mut g);
        for i in 0..3 {
            let (mut up, mut down) = (logits, logits);
            up[i] += 1e-6;
            down[i] -= 1e-6;
            let fd = (entropy(&up) - entropy(&down)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }
}
