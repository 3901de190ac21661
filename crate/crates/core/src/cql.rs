//! Offline conservative Q-learning with twin critics and a fixed-temperature
//! squashed-Gaussian actor.

use std::fmt;
use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::TransitionDataset;
use crate::error::{Error, Result};
use crate::infer::PolicyBundle;
use crate::nn::{polyak_update, Actor, Mlp, ACTION_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqlConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Conservative penalty coefficient (alpha).
    pub conservative_weight: f64,
    pub batch_size: usize,
    pub temperature: f64,
    /// Kept for completeness; the temperature is never learned, so this
    /// must be zero.
    pub temperature_lr: f64,
    pub tau: f64,
    pub discount: f64,
    pub n_sampled_actions: usize,
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    /// Convergence is not declared before this many epochs.
    pub min_epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub explosion_factor: f64,
    pub explosion_warmup: usize,
    pub action_diff_limit: f64,
    pub convergence_window: usize,
    pub convergence_variance: f64,
}

impl Default for CqlConfig {
    fn default() -> Self {
        CqlConfig {
            actor_lr: 1.0e-3,
            critic_lr: 4.0e-3,
            conservative_weight: 0.8,
            batch_size: 128,
            temperature: 0.143298,
            temperature_lr: 0.0,
            tau: 1.97555e-3,
            discount: 0.99,
            n_sampled_actions: 10,
            hidden: vec![64, 64],
            max_epochs: 200,
            min_epochs: 20,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            explosion_factor: 100.0,
            explosion_warmup: 1,
            action_diff_limit: 1.0,
            convergence_window: 3,
            convergence_variance: 0.01,
        }
    }
}

impl CqlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("temperature", self.temperature),
            ("tau", self.tau),
            ("discount", self.discount),
            ("explosion_factor", self.explosion_factor),
            ("action_diff_limit", self.action_diff_limit),
            ("convergence_variance", self.convergence_variance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.conservative_weight.is_finite() && self.conservative_weight >= 0.0) {
            return Err(Error::InvalidArgument("conservative_weight must be non-negative".into()));
        }
        if self.temperature_lr != 0.0 {
            return Err(Error::InvalidArgument("temperature_lr must be 0 (fixed temperature)".into()));
        }
        if self.tau > 1.0 || self.discount > 1.0 {
            return Err(Error::InvalidArgument("tau and discount must be at most 1".into()));
        }
        if self.batch_size == 0 || self.n_sampled_actions == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, n_sampled_actions and max_epochs must be positive".into(),
            ));
        }
        if self.convergence_window < 2 {
            return Err(Error::InvalidArgument("convergence_window must be at least 2".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Two online Q-networks and their Polyak-averaged targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair {
    pub online: [Mlp; 2],
    pub target: [Mlp; 2],
}

impl CriticPair {
    pub fn init<R: Rng>(state_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![state_dim + ACTION_DIM];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let online = [Mlp::init(&dims, rng), Mlp::init(&dims, rng)];
        CriticPair {
            target: online.clone(),
            online,
        }
    }

    pub fn from_online(q1: Mlp, q2: Mlp) -> Self {
        CriticPair {
            target: [q1.clone(), q2.clone()],
            online: [q1, q2],
        }
    }

    /// `min(Q1, Q2)(s, a)` per row using the online networks.
    pub fn q_min(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array1<f64> {
        let x = concatenate![Axis(1), states, actions];
        let a = q_column(&self.online[0], x.view());
        let b = q_column(&self.online[1], x.view());
        ndarray::Zip::from(&a).and(&b).map_collect(|&p, &q| p.min(q))
    }
}

fn q_column(net: &Mlp, x: ArrayView2<f64>) -> Array1<f64> {
    net.predict(x).column(0).to_owned()
}

/// A minibatch of scaled states, normalized actions and rewards.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random draws consumed by one critic update, fixed up front so the loss
/// is a deterministic function of the parameters.
#[derive(Debug, Clone)]
pub struct CriticNoise {
    /// Reparameterization noise for next-state actions, `(B, 4)`.
    pub next: Array2<f64>,
    /// Uniform actions, `(B * n, 4)`; rows `b * n .. (b + 1) * n` belong to
    /// transition `b`.
    pub uniform: Array2<f64>,
    /// Reparameterization noise for current-state policy actions, `(B * n, 4)`.
    pub policy: Array2<f64>,
}

impl CriticNoise {
    pub fn sample<R: Rng>(rng: &mut R, batch: usize, n: usize) -> Self {
        CriticNoise {
            next: normal_matrix(rng, batch),
            uniform: Array2::from_shape_fn((batch * n, ACTION_DIM), |_| rng.random::<f64>()),
            policy: normal_matrix(rng, batch * n),
        }
    }

    pub fn samples_per_state(&self) -> usize {
        if self.next.nrows() == 0 {
            0
        } else {
            self.uniform.nrows() / self.next.nrows()
        }
    }
}

pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, ACTION_DIM), |_| rng.sample(StandardNormal))
}

#[derive(Debug, Clone)]
pub struct CriticStep {
    /// Bellman plus conservative terms, summed over both critics.
    pub loss: f64,
    pub bellman: f64,
    /// Conservative term (alpha included), summed over both critics.
    pub conservative_penalty: f64,
    pub grads: [Mlp; 2],
}

fn repeat_rows(x: ArrayView2<f64>, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows() * n, x.ncols()));
    for (b, row) in x.outer_iter().enumerate() {
        for j in 0..n {
            out.row_mut(b * n + j).assign(&row);
        }
    }
    out
}

/// Twin-critic loss: half mean squared Bellman error against the soft
/// min-target, plus `alpha * mean(logsumexp(Q over sampled actions) -
/// Q(s, a_data))`. The sampled set holds the dataset action (log weight 0),
/// `n` uniform actions (log density 0) and `n` policy actions weighted by
/// their inverse density.
pub fn critic_loss_and_grad(
    batch: &Batch,
    critics: &CriticPair,
    actor: &Actor,
    cfg: &CqlConfig,
    noise: &CriticNoise,
) -> CriticStep {
    let bsz = batch.len();
    let n = noise.samples_per_state();
    let inv_b = 1.0 / bsz as f64;

    let next = actor.sample(batch.next_states.view(), noise.next.view());
    let next_x = concatenate![Axis(1), batch.next_states, next.action];
    let t1 = q_column(&critics.target[0], next_x.view());
    let t2 = q_column(&critics.target[1], next_x.view());
    let y: Array1<f64> = (0..bsz)
        .map(|b| {
            let soft = t1[b].min(t2[b]) - cfg.temperature * next.log_prob[b];
            batch.rewards[b] + cfg.discount * (1.0 - batch.dones[b]) * soft
        })
        .collect();

    let rep_states = repeat_rows(batch.states.view(), n);
    let pi = actor.sample(rep_states.view(), noise.policy.view());
    let x = concatenate![
        Axis(0),
        concatenate![Axis(1), batch.states, batch.actions],
        concatenate![Axis(1), rep_states, noise.uniform],
        concatenate![Axis(1), rep_states, pi.action]
    ];

    let alpha = cfg.conservative_weight;
    let mut loss = 0.0;
    let mut bellman_total = 0.0;
    let mut penalty_total = 0.0;
    let grads = [0, 1].map(|i| {
        let net = &critics.online[i];
        let cache = net.forward(x.view());
        let q = cache.output().column(0).to_owned();
        let mut d_q = Array2::zeros((x.nrows(), 1));
        let mut bellman = 0.0;
        let mut gap = 0.0;
        let mut vals = Vec::with_capacity(1 + 2 * n);
        for b in 0..bsz {
            let q_data = q[b];
            let err = q_data - y[b];
            bellman += 0.5 * err * err;
            vals.clear();
            vals.push(q_data);
            vals.extend((0..n).map(|j| q[bsz + b * n + j]));
            vals.extend((0..n).map(|j| q[bsz + bsz * n + b * n + j] - pi.log_prob[b * n + j]));
            let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = vals.iter().map(|v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            gap += lse - q_data;
            let w = |v: f64| (v - m).exp() / sum;
            d_q[[b, 0]] = inv_b * err + alpha * inv_b * (w(vals[0]) - 1.0);
            for j in 0..n {
                d_q[[bsz + b * n + j, 0]] = alpha * inv_b * w(vals[1 + j]);
                d_q[[bsz + bsz * n + b * n + j, 0]] = alpha * inv_b * w(vals[1 + n + j]);
            }
        }
        let bellman = bellman * inv_b;
        let penalty = alpha * gap * inv_b;
        loss += bellman + penalty;
        bellman_total += bellman;
        penalty_total += penalty;
        net.backward(&cache, d_q.view()).0
    });
    CriticStep {
        loss,
        bellman: bellman_total,
        conservative_penalty: penalty_total,
        grads,
    }
}

/// Actor loss `mean(temperature * log pi(a|s) - min(Q1, Q2)(s, a))` with `a`
/// reparameterized from `noise` (shape `(B, 4)`), and its gradient.
pub fn actor_loss_and_grad(
    batch: &Batch,
    critics: &CriticPair,
    actor: &Actor,
    cfg: &CqlConfig,
    noise: ArrayView2<f64>,
) -> (f64, Mlp) {
    let bsz = batch.len();
    let inv_b = 1.0 / bsz as f64;
    let sample = actor.sample(batch.states.view(), noise);
    let x = concatenate![Axis(1), batch.states, sample.action];
    let caches = [0, 1].map(|i| critics.online[i].forward(x.view()));
    let q1 = caches[0].output().column(0).to_owned();
    let q2 = caches[1].output().column(0).to_owned();

    let mut loss = 0.0;
    let mut sel = [Array2::zeros((bsz, 1)), Array2::zeros((bsz, 1))];
    for b in 0..bsz {
        let (q, k) = if q1[b] <= q2[b] { (q1[b], 0) } else { (q2[b], 1) };
        loss += cfg.temperature * sample.log_prob[b] - q;
        sel[k][[b, 0]] = 1.0;
    }
    loss *= inv_b;

    let state_dim = batch.states.ncols();
    let mut dq_da = Array2::<f64>::zeros((bsz, ACTION_DIM));
    for k in 0..2 {
        let (_, d_in) = critics.online[k].backward(&caches[k], sel[k].view());
        dq_da += &d_in.slice(s![.., state_dim..]);
    }
    let mut d_z = Array2::zeros((bsz, ACTION_DIM));
    for b in 0..bsz {
        for d in 0..ACTION_DIM {
            let u = sample.z[[b, d]].tanh();
            d_z[[b, d]] = inv_b * (cfg.temperature * 2.0 * u - dq_da[[b, d]] * (1.0 - u * u) / 2.0);
        }
    }
    let d_ls = Array2::from_elem((bsz, ACTION_DIM), -cfg.temperature * inv_b);
    (loss, actor.backward(&sample, d_z.view(), d_ls.view()))
}

/// Mean squared Euclidean distance between the deterministic policy action
/// and the dataset action.
pub fn action_diff(states: ArrayView2<f64>, actions: ArrayView2<f64>, actor: &Actor) -> Result<f64> {
    if states.nrows() == 0 {
        return Err(Error::Empty("action_diff needs at least one transition"));
    }
    let pi = actor.mean_action(states);
    let d = &pi - &actions;
    Ok(d.mapv(|v| v * v).sum() / states.nrows() as f64)
}

/// Mean over initial states of `min(Q1, Q2)(s, mean_action(s))`.
pub fn initial_state_value(states: ArrayView2<f64>, critics: &CriticPair, actor: &Actor) -> Result<f64> {
    if states.nrows() == 0 {
        return Err(Error::Empty("no initial states"));
    }
    let a = actor.mean_action(states);
    Ok(critics.q_min(states, a.view()).mean().unwrap())
}

/// Plain SGD or Adam state for one network.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    moments: Option<(Mlp, Mlp)>,
    step: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, like: &Mlp) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => None,
            OptimizerKind::Adam => Some((like.zeros_like(), like.zeros_like())),
        };
        Optimizer {
            kind,
            moments,
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut Mlp, grads: &Mlp, lr: f64) {
        self.step += 1;
        match (self.kind, &mut self.moments) {
            (OptimizerKind::Sgd, _) => params.zip_apply(grads, |p, g| *p -= lr * g),
            (OptimizerKind::Adam, Some((m, v))) => {
                m.zip_apply(grads, |m, g| *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g);
                v.zip_apply(grads, |v, g| *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g);
                let c1 = 1.0 - ADAM_BETA1.powi(self.step);
                let c2 = 1.0 - ADAM_BETA2.powi(self.step);
                let mut update = m.clone();
                update.zip_apply(v, |u, v| *u = (*u / c1) / ((v / c2).sqrt() + ADAM_EPS));
                params.zip_apply(&update, |p, u| *p -= lr * u);
            }
            (OptimizerKind::Adam, None) => unreachable!("Adam always carries moments"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Explosion,
    ActionDiff,
    Converged,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Explosion => "explosion",
            StopReason::ActionDiff => "action_diff",
            StopReason::Converged => "converged",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub conservative_penalty: f64,
    pub initial_state_value: f64,
    pub action_diff: f64,
}

/// Sample variance (divisor `n - 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Evaluates the early-stopping rules after the last epoch in `history`.
/// Explosion takes precedence over action divergence, which takes
/// precedence over convergence.
pub fn check_stop(history: &[EpochMetrics], cfg: &CqlConfig) -> Option<StopReason> {
    let last = history.last()?;
    let e = history.len() - 1;
    if e >= cfg.explosion_warmup {
        let min_prev = history[..e]
            .iter()
            .map(|m| m.critic_loss)
            .fold(f64::INFINITY, f64::min);
        if last.critic_loss > cfg.explosion_factor * min_prev {
            return Some(StopReason::Explosion);
        }
    }
    if last.action_diff > cfg.action_diff_limit {
        return Some(StopReason::ActionDiff);
    }
    let w = cfg.convergence_window;
    if history.len() >= w.max(cfg.min_epochs) {
        let values: Vec<f64> = history[history.len() - w..]
            .iter()
            .map(|m| m.initial_state_value)
            .collect();
        if sample_variance(&values) < cfg.convergence_variance {
            return Some(StopReason::Converged);
        }
    }
    None
}

/// Training tensors: scaled states, normalized rewards, and the rows that
/// are first-iteration states.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub all: Batch,
    pub initial_rows: Vec<usize>,
}

impl TrainingData {
    pub fn from_dataset(dataset: &TransitionDataset) -> Result<Self> {
        let ts = &dataset.transitions;
        if ts.is_empty() {
            return Err(Error::Empty("dataset has no transitions"));
        }
        let scaler = dataset.scaler();
        let stats = dataset.reward_stats();
        let dim = scaler.dim();
        let mut states = Array2::zeros((ts.len(), dim));
        let mut next_states = Array2::zeros((ts.len(), dim));
        let mut actions = Array2::zeros((ts.len(), ACTION_DIM));
        let mut rewards = Array1::zeros(ts.len());
        let mut dones = Array1::zeros(ts.len());
        let mut initial_rows = Vec::new();
        for (i, t) in ts.iter().enumerate() {
            states
                .row_mut(i)
                .assign(&Array1::from(scaler.transform(t.state.as_slice())?));
            next_states
                .row_mut(i)
                .assign(&Array1::from(scaler.transform(t.next_state.as_slice())?));
            actions.row_mut(i).assign(&Array1::from(t.action.to_vec()));
            rewards[i] = stats.normalize(t.reward);
            dones[i] = if t.done { 1.0 } else { 0.0 };
            if t.iteration == 0 {
                initial_rows.push(i);
            }
        }
        Ok(TrainingData {
            all: Batch {
                states,
                actions,
                rewards,
                next_states,
                dones,
            },
            initial_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            states: self.all.states.select(Axis(0), rows),
            actions: self.all.actions.select(Axis(0), rows),
            rewards: self.all.rewards.select(Axis(0), rows),
            next_states: self.all.next_states.select(Axis(0), rows),
            dones: self.all.dones.select(Axis(0), rows),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub actor: Actor,
    pub critics: CriticPair,
    pub history: Vec<EpochMetrics>,
    pub stop_reason: StopReason,
    /// Conservative penalty recorded at every gradient step.
    pub step_penalties: Vec<f64>,
}

/// Runs offline training on prepared tensors. A pure function of
/// `(data, cfg)`.
pub fn train_on(data: &TrainingData, cfg: &CqlConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.len() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} transitions, fewer than one batch of {}",
            data.len(),
            cfg.batch_size
        )));
    }
    if data.initial_rows.is_empty() {
        return Err(Error::Empty("no initial states"));
    }
    let state_dim = data.all.states.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut actor = Actor::init(state_dim, &cfg.hidden, &mut rng);
    let mut critics = CriticPair::init(state_dim, &cfg.hidden, &mut rng);
    let mut actor_opt = Optimizer::new(cfg.optimizer, &actor.net);
    let mut critic_opts = [0, 1].map(|i| Optimizer::new(cfg.optimizer, &critics.online[i]));
    let initial = data.all.states.select(Axis(0), &data.initial_rows);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    let mut step_penalties = Vec::new();
    let mut previous = (actor.clone(), critics.clone());
    let mut step = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut c_sum, mut a_sum, mut p_sum, mut steps) = (0.0, 0.0, 0.0, 0usize);
        for rows in order.chunks_exact(cfg.batch_size) {
            let batch = data.select(rows);
            let noise = CriticNoise::sample(&mut rng, batch.len(), cfg.n_sampled_actions);
            let c = critic_loss_and_grad(&batch, &critics, &actor, cfg, &noise);
            if !c.loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "critic loss",
                    step,
                });
            }
            for (i, g) in c.grads.iter().enumerate() {
                critic_opts[i].apply(&mut critics.online[i], g, cfg.critic_lr);
            }
            let a_noise = normal_matrix(&mut rng, batch.len());
            let (a_loss, a_grad) = actor_loss_and_grad(&batch, &critics, &actor, cfg, a_noise.view());
            if !a_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "actor loss",
                    step,
                });
            }
            actor_opt.apply(&mut actor.net, &a_grad, cfg.actor_lr);
            for i in 0..2 {
                polyak_update(&mut critics.target[i], &critics.online[i], cfg.tau)?;
            }
            step_penalties.push(c.conservative_penalty);
            c_sum += c.loss;
            a_sum += a_loss;
            p_sum += c.conservative_penalty;
            steps += 1;
            step += 1;
        }
        let k = steps as f64;
        history.push(EpochMetrics {
            epoch,
            critic_loss: c_sum / k,
            actor_loss: a_sum / k,
            conservative_penalty: p_sum / k,
            initial_state_value: initial_state_value(initial.view(), &critics, &actor)?,
            action_diff: action_diff(data.all.states.view(), data.all.actions.view(), &actor)?,
        });
        let m = history.last().unwrap();
        log::debug!(
            "epoch {epoch}: critic {:.4} actor {:.4} penalty {:.4} v0 {:.4} diff {:.4}",
            m.critic_loss,
            m.actor_loss,
            m.conservative_penalty,
            m.initial_state_value,
            m.action_diff
        );
        match check_stop(&history, cfg) {
            Some(reason @ (StopReason::Explosion | StopReason::ActionDiff)) => {
                let (actor, critics) = previous;
                return Ok(TrainOutcome {
                    actor,
                    critics,
                    history,
                    stop_reason: reason,
                    step_penalties,
                });
            }
            Some(reason) => {
                return Ok(TrainOutcome {
                    actor,
                    critics,
                    history,
                    stop_reason: reason,
                    step_penalties,
                })
            }
            None => previous = (actor.clone(), critics.clone()),
        }
    }
    Ok(TrainOutcome {
        actor,
        critics,
        history,
        stop_reason: StopReason::MaxEpochs,
        step_penalties,
    })
}

/// Hex SHA-256 over the training config and the dataset identity.
pub fn fingerprint(dataset: &TransitionDataset, cfg: &CqlConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(dataset.metadata.corpus_hash.as_bytes());
    h.update(dataset.metadata.seed.to_le_bytes());
    h.update((dataset.transitions.len() as u64).to_le_bytes());
    hex::encode(h.finalize())
}

/// Trains on a dataset and packages the actor with the dataset's scaler and
/// action bounds.
pub fn train(dataset: &TransitionDataset, cfg: &CqlConfig) -> Result<(PolicyBundle, TrainOutcome)> {
    let data = TrainingData::from_dataset(dataset)?;
    let outcome = train_on(&data, cfg)?;
    let bundle = PolicyBundle::new(
        &outcome.actor,
        dataset.scaler().clone(),
        dataset.metadata.bounds,
        fingerprint(dataset, cfg),
    );
    Ok((bundle, outcome))
}

pub const METRICS_HEADER: &str =
    "epoch\tcritic_loss\tactor_loss\tconservative_penalty\tinitial_state_value\taction_diff\tstop_reason";

/// Tab-separated metrics table; the stop reason appears on the last row.
pub fn metrics_table(history: &[EpochMetrics], stop: StopReason) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (i, m) in history.iter().enumerate() {
        let reason = if i + 1 == history.len() { stop.to_string() } else { String::new() };
        out.push_str(&format!(
            "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{}\n",
            m.epoch, m.critic_loss, m.actor_loss, m.conservative_penalty, m.initial_state_value, m.action_diff, reason
        ));
    }
    out
}

pub fn write_metrics(path: impl AsRef<Path>, history: &[EpochMetrics], stop: StopReason) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(metrics_table(history, stop).as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(losses: &[f64], values: &[f64], diffs: &[f64]) -> Vec<EpochMetrics> {
        (0..losses.len())
            .map(|i| EpochMetrics {
                epoch: i,
                critic_loss: losses[i],
                actor_loss: 0.0,
                conservative_penalty: 0.0,
                initial_state_value: values[i],
                action_diff: diffs[i],
            })
            .collect()
    }

    fn cfg() -> CqlConfig {
        CqlConfig {
            min_epochs: 0,
            ..CqlConfig::default()
        }
    }

    #[test]
    fn explosion_waits_for_warmup() {
        let h = metrics(&[1.0], &[0.0], &[0.0]);
        assert_eq!(check_stop(&h, &cfg()), None);
        let h = metrics(&[1.0, 150.0], &[0.0, 5.0], &[0.0, 0.0]);
        assert_eq!(check_stop(&h, &cfg()), Some(StopReason::Explosion));
        let h = metrics(&[1.0, 100.0], &[0.0, 5.0], &[0.0, 0.0]);
        assert_eq!(check_stop(&h, &cfg()), None);
    }

    #[test]
    fn explosion_is_relative_to_running_minimum() {
        let h = metrics(&[10.0, 0.5, 60.0], &[0.0, 3.0, 9.0], &[0.0; 3]);
        assert_eq!(check_stop(&h, &cfg()), Some(StopReason::Explosion));
    }

    #[test]
    fn convergence_uses_sample_variance() {
        let h = metrics(&[1.0; 3], &[5.0, 5.001, 5.002], &[0.0; 3]);
        assert!((sample_variance(&[5.0, 5.001, 5.002]) - 1e-6).abs() < 1e-12);
        assert_eq!(check_stop(&h, &cfg()), Some(StopReason::Converged));
        let gated = CqlConfig {
            min_epochs: 4,
            ..CqlConfig::default()
        };
        assert_eq!(check_stop(&h, &gated), None);
    }

    #[test]
    fn action_diff_limit_is_strict() {
        let h = metrics(&[1.0], &[0.0], &[1.0]);
        assert_eq!(check_stop(&h, &cfg()), None);
        let h = metrics(&[1.0], &[0.0], &[1.0001]);
        assert_eq!(check_stop(&h, &cfg()), Some(StopReason::ActionDiff));
    }

    #[test]
    fn config_validation() {
        assert!(CqlConfig::default().validate().is_ok());
        for bad in [
            CqlConfig {
                temperature_lr: 0.1,
                ..CqlConfig::default()
            },
            CqlConfig {
                batch_size: 0,
                ..CqlConfig::default()
            },
            CqlConfig {
                tau: 1.5,
                ..CqlConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn metrics_table_marks_last_row() {
        let h = metrics(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]);
        let t = metrics_table(&h, StopReason::MaxEpochs);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with('\t'));
        assert!(lines[2].ends_with("max_epochs"));
    }
}
