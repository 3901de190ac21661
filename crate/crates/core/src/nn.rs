//! Small fully connected networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

/// Multi-layer perceptron with rectifier activations on hidden layers and a
/// linear output layer. `weights[k]` has shape `(dims[k + 1], dims[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input followed by each layer's post-activation output.
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Uniform fan-in initialization, `U(-1/sqrt(in), 1/sqrt(in))` for
    /// weights and biases alike.
    pub fn init<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-bound..bound)));
            biases.push(Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..bound)));
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            dims: self.dims.clone(),
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Rebuilds a network from row-major weight and bias vectors.
    pub fn from_parts(dims: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if dims.len() < 2 || weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} layer dims with {} weight and {} bias tensors",
                dims.len(),
                weights.len(),
                biases.len()
            )));
        }
        let mut ws = Vec::with_capacity(weights.len());
        let mut bs = Vec::with_capacity(biases.len());
        for (k, (w, b)) in weights.into_iter().zip(biases).enumerate() {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let w = Array2::from_shape_vec((fan_out, fan_in), w)
                .map_err(|e| Error::ShapeMismatch(format!("layer {k} weights: {e}")))?;
            if b.len() != fan_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} bias has {} entries, expected {fan_out}",
                    b.len()
                )));
            }
            ws.push(w);
            bs.push(Array1::from(b));
        }
        let mlp = Mlp {
            dims,
            weights: ws,
            biases: bs,
        };
        if !mlp.is_finite() {
            return Err(Error::ShapeMismatch("network contains non-finite values".into()));
        }
        Ok(mlp)
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> ForwardCache {
        assert_eq!(x.ncols(), self.input_dim(), "input width");
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(x.to_owned());
        let last = self.weights.len() - 1;
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut h = activations[k].dot(&w.t());
            h += b;
            if k < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(h);
        }
        ForwardCache { activations }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut cache = self.forward(x);
        cache.activations.pop().unwrap()
    }

    /// Backpropagates `d_out` (gradient of the loss with respect to the
    /// outputs). Returns parameter gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, d_out: ArrayView2<f64>) -> (Mlp, Array2<f64>) {
        let mut grads = self.zeros_like();
        let mut delta = d_out.to_owned();
        for k in (0..self.weights.len()).rev() {
            let input = &cache.activations[k];
            grads.weights[k] = delta.t().dot(input);
            grads.biases[k] = delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&self.weights[k]);
            if k > 0 {
                // input of layer k is a rectified hidden activation
                Zip::from(&mut d_in).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        (grads, delta)
    }

    /// Parameter tensors as flat slices: all weights, then all biases.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .chain(self.biases.iter().map(|b| b.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let (ws, bs) = (&mut self.weights, &mut self.biases);
        ws.iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .chain(bs.iter_mut().map(|b| b.as_slice_mut().expect("standard layout")))
            .collect()
    }

    /// Calls `f(param, other)` for every parameter paired with the matching
    /// entry of `other`.
    pub fn zip_apply(&mut self, other: &Mlp, mut f: impl FnMut(&mut f64, f64)) {
        assert_eq!(self.dims, other.dims, "network shapes differ");
        for (p, o) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in p.iter_mut().zip(o) {
                f(x, y);
            }
        }
    }

    pub fn add_assign(&mut self, other: &Mlp) {
        self.zip_apply(other, |p, g| *p += g);
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

/// Elementwise `target = tau * online + (1 - tau) * target`.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.dims != online.dims {
        return Err(Error::ShapeMismatch(format!(
            "target {:?} vs online {:?}",
            target.dims, online.dims
        )));
    }
    target.zip_apply(online, |t, o| *t = tau * o + (1.0 - tau) * *t);
    Ok(())
}

pub const ACTION_DIM: usize = 4;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Squashed-Gaussian policy. The network emits a mean and a log standard
/// deviation per action dimension; actions are `(tanh(z) + 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub log_std_clamp: [f64; 2],
}

/// Reparameterized actor samples for a batch, with everything needed to
/// backpropagate through them.
#[derive(Debug, Clone)]
pub struct ActorSample {
    pub cache: ForwardCache,
    pub noise: Array2<f64>,
    pub z: Array2<f64>,
    pub log_std: Array2<f64>,
    /// Whether each log std was inside the clamp range (gradient passes).
    pub log_std_free: Array2<bool>,
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
}

impl Actor {
    pub fn init<R: Rng>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![state_dim];
        dims.extend_from_slice(hidden);
        dims.push(2 * ACTION_DIM);
        Actor {
            net: Mlp::init(&dims, rng),
            log_std_clamp: [LOG_STD_MIN, LOG_STD_MAX],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Deterministic action `(tanh(mean) + 1) / 2` for each row.
    pub fn mean_action(&self, states: ArrayView2<f64>) -> Array2<f64> {
        let out = self.net.predict(states);
        out.slice(ndarray::s![.., ..ACTION_DIM])
            .mapv(|m| (m.tanh() + 1.0) / 2.0)
    }

    pub fn sample(&self, states: ArrayView2<f64>, noise: ArrayView2<f64>) -> ActorSample {
        assert_eq!(noise.dim(), (states.nrows(), ACTION_DIM), "noise shape");
        let cache = self.net.forward(states);
        let out = cache.output();
        let n = states.nrows();
        let [lo, hi] = self.log_std_clamp;
        let mut z = Array2::zeros((n, ACTION_DIM));
        let mut log_std = Array2::zeros((n, ACTION_DIM));
        let mut free = Array2::from_elem((n, ACTION_DIM), true);
        let mut action = Array2::zeros((n, ACTION_DIM));
        let mut log_prob = Array1::zeros(n);
        for b in 0..n {
            for d in 0..ACTION_DIM {
                let raw = out[[b, ACTION_DIM + d]];
                let ls = raw.clamp(lo, hi);
                free[[b, d]] = (lo..=hi).contains(&raw);
                let eps = noise[[b, d]];
                let zz = out[[b, d]] + ls.exp() * eps;
                z[[b, d]] = zz;
                log_std[[b, d]] = ls;
                action[[b, d]] = (zz.tanh() + 1.0) / 2.0;
                log_prob[b] += squashed_log_prob(eps, ls, zz);
            }
        }
        ActorSample {
            cache,
            noise: noise.to_owned(),
            z,
            log_std,
            log_std_free: free,
            action,
            log_prob,
        }
    }

    /// Parameter gradient given the loss gradients with respect to the
    /// pre-squash value `z` and directly with respect to the log std
    /// (beyond its effect through `z`).
    pub fn backward(&self, s: &ActorSample, d_z: ArrayView2<f64>, d_log_std: ArrayView2<f64>) -> Mlp {
        let n = s.z.nrows();
        let mut d_out = Array2::zeros((n, 2 * ACTION_DIM));
        for b in 0..n {
            for d in 0..ACTION_DIM {
                let gz = d_z[[b, d]];
                d_out[[b, d]] = gz;
                if s.log_std_free[[b, d]] {
                    d_out[[b, ACTION_DIM + d]] =
                        gz * s.log_std[[b, d]].exp() * s.noise[[b, d]] + d_log_std[[b, d]];
                }
            }
        }
        self.net.backward(&s.cache, d_out.view()).0
    }
}

/// Log density of one squashed action dimension in `[0, 1]` action space,
/// given the standard-normal noise, the log std and the pre-squash value.
#[inline]
pub fn squashed_log_prob(noise: f64, log_std: f64, z: f64) -> f64 {
    // log(1 - tanh(z)^2) in a form that stays finite for large |z|
    let log_one_minus_tanh2 = 2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z));
    -0.5 * noise * noise - log_std - HALF_LOG_2PI - log_one_minus_tanh2 + std::f64::consts::LN_2
}
