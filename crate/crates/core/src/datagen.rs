//! Offline dataset generation.
//!
//! Each design gets `runs_per_design` routing runs. The first
//! `floor(perturb_fraction * runs)` follow the baseline schedule with
//! multiplicative noise whose scale grows with the run index; the rest hold
//! one Sobol-sampled weight vector for the whole run. Every iteration of
//! every run becomes one [`Transition`].

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{extract_features, fit_scaler, RawStateVector, Scaler};
use crate::grid::{Design, StaticFeatures};
use crate::infer::ActionBounds;
use crate::reward::{fit_reward_stats, RewardConfig, RewardStats};
use crate::router::{run_flow, IterationState, Trajectory, WeightVector, DEFAULT_MAX_ITERATIONS};
use crate::sobol::sobol_point;

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const METADATA_FILE: &str = "metadata.json";
pub const TRANSITIONS_FILE: &str = "transitions.jsonl";

/// Hand-tuned reference schedule: the overlap cost doubles every iteration,
/// neighbor markers step up after iteration 2.
pub fn baseline_schedule(iteration: usize) -> WeightVector {
    let drc_cost = (8.0 * 2f64.powi(iteration.min(16) as i32)).min(16384.0);
    WeightVector {
        drc_cost,
        marker_cost: if iteration <= 2 { 32.0 } else { 128.0 },
        fixed_shape_cost: 128.0,
        marker_decay: 0.95,
    }
}

pub fn baseline_policy(_: &StaticFeatures, history: &[IterationState]) -> Result<WeightVector> {
    Ok(baseline_schedule(history.len()))
}

pub const EPSILON_MAX: f64 = 0.5;
/// Log2 span the cost perturbation covers at `u * epsilon = 1`.
pub const COST_LOG2_SPAN: f64 = 14.0;
/// Decay span the decay perturbation covers at `u * epsilon = 1`.
pub const DECAY_SPAN: f64 = 0.49;

/// Baseline schedule with per-iteration noise of scale `epsilon`.
#[derive(Debug, Clone)]
pub struct PerturbedSampler<R> {
    pub epsilon: f64,
    pub bounds: ActionBounds,
    rng: R,
}

impl<R: Rng> PerturbedSampler<R> {
    pub fn weights(&mut self, iteration: usize) -> WeightVector {
        let u: [f64; 4] = std::array::from_fn(|_| self.rng.random_range(-1.0..=1.0));
        self.perturb(iteration, u)
    }

    /// Applies the noise `u` (each in `[-1, 1]`) to the baseline weights.
    pub fn perturb(&self, iteration: usize, u: [f64; 4]) -> WeightVector {
        let b = baseline_schedule(iteration);
        let scale = |x: f64, u: f64| x * (u * self.epsilon * COST_LOG2_SPAN).exp2();
        self.bounds.clamp(&WeightVector {
            drc_cost: scale(b.drc_cost, u[0]),
            marker_cost: scale(b.marker_cost, u[1]),
            fixed_shape_cost: scale(b.fixed_shape_cost, u[2]),
            marker_decay: b.marker_decay + u[3] * self.epsilon * DECAY_SPAN,
        })
    }
}

/// Sampler for run `run_idx` of `total_runs`; the noise scale grows
/// linearly from 0 to [`EPSILON_MAX`] over the runs.
pub fn perturbed_sequence<R: Rng>(run_idx: usize, total_runs: usize, rng: R) -> PerturbedSampler<R> {
    assert!(run_idx < total_runs, "run index {run_idx} out of {total_runs}");
    let epsilon = if total_runs <= 1 {
        0.0
    } else {
        EPSILON_MAX * run_idx as f64 / (total_runs - 1) as f64
    };
    PerturbedSampler {
        epsilon,
        bounds: ActionBounds::default(),
        rng,
    }
}

/// How a run chose its weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Behavior {
    Perturbed { run_idx: usize, total: usize },
    Sobol { index: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: RawStateVector,
    pub action: [f64; 4],
    pub reward: f64,
    pub next_state: RawStateVector,
    pub done: bool,
    pub design_name: String,
    pub run_id: usize,
    pub iteration: usize,
}

/// One transition per iteration. The state before iteration `t` is built
/// from the first `t` iteration states; the action is the normalized weight
/// vector used in iteration `t`. The first iteration earns no improvement
/// credit since there is no earlier count to compare against.
pub fn trajectory_transitions(
    traj: &Trajectory,
    run_id: usize,
    rewards: &RewardConfig,
    bounds: &ActionBounds,
) -> Vec<Transition> {
    let states = &traj.states;
    let Some(first) = states.first() else {
        return Vec::new();
    };
    let drv0 = first.total_drvs;
    let last = states.len() - 1;
    (0..states.len())
        .map(|t| {
            let prev = if t == 0 { drv0 } else { states[t - 1].total_drvs };
            let done = traj.converged && t == last;
            Transition {
                state: extract_features(&states[..t], &traj.static_features),
                action: bounds.normalize(&states[t].weights),
                reward: rewards.raw_reward(prev, states[t].total_drvs, done, drv0),
                next_state: extract_features(&states[..=t], &traj.static_features),
                done,
                design_name: traj.design_name.clone(),
                run_id,
                iteration: t,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub runs_per_design: usize,
    pub perturb_fraction: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub rewards: RewardConfig,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            runs_per_design: 10,
            perturb_fraction: 0.6,
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            rewards: RewardConfig::default(),
        }
    }
}

impl CollectConfig {
    /// `(perturbation runs, Sobol runs)` per design.
    pub fn split(&self) -> (usize, usize) {
        let perturb = (self.perturb_fraction * self.runs_per_design as f64).floor() as usize;
        let perturb = perturb.min(self.runs_per_design);
        (perturb, self.runs_per_design - perturb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub format_version: u32,
    pub seed: u64,
    pub runs_per_design: usize,
    pub perturb_fraction: f64,
    pub perturb_runs: usize,
    pub sobol_runs: usize,
    pub epsilon_max: f64,
    pub max_iterations: usize,
    pub corpus_hash: String,
    pub designs: Vec<String>,
    pub skipped_designs: Vec<String>,
    pub rewards: RewardConfig,
    pub bounds: ActionBounds,
    pub scaler: Scaler,
    pub reward_stats: RewardStats,
    pub num_runs: usize,
    pub converged_runs: usize,
    pub num_transitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub metadata: DatasetMetadata,
    pub transitions: Vec<Transition>,
}

impl TransitionDataset {
    pub fn scaler(&self) -> &Scaler {
        &self.metadata.scaler
    }

    pub fn reward_stats(&self) -> &RewardStats {
        &self.metadata.reward_stats
    }
}

pub fn corpus_hash(designs: &[Design]) -> String {
    let mut h = Sha256::new();
    for d in designs {
        h.update(d.to_json().as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Stream id for the run RNG so each (design, run) pair draws independent,
/// reproducible noise regardless of scheduling.
fn run_rng(seed: u64, design_idx: usize, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((design_idx as u64) << 32) | run as u64);
    rng
}

fn execute_run(
    design: &Design,
    design_idx: usize,
    run: usize,
    cfg: &CollectConfig,
    bounds: &ActionBounds,
) -> Result<(Behavior, Trajectory)> {
    let (perturb, _) = cfg.split();
    if run < perturb {
        let mut sampler = perturbed_sequence(run, perturb, run_rng(cfg.seed, design_idx, run));
        let mut policy =
            |_: &StaticFeatures, history: &[IterationState]| Ok(sampler.weights(history.len()));
        let traj = run_flow(design, &mut policy, cfg.max_iterations)?;
        Ok((Behavior::Perturbed { run_idx: run, total: perturb }, traj))
    } else {
        let index = (run - perturb + 1) as u32;
        let p = sobol_point(index, 4);
        let w = bounds.denormalize([p[0], p[1], p[2], p[3]]);
        let mut policy = |_: &StaticFeatures, _: &[IterationState]| Ok(w);
        let traj = run_flow(design, &mut policy, cfg.max_iterations)?;
        Ok((Behavior::Sobol { index }, traj))
    }
}

/// Result of one collection run, kept for summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub design_name: String,
    pub run_id: usize,
    pub behavior: Behavior,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs every (design, run) pair and assembles the dataset. Runs execute in
/// parallel on the current rayon pool; results are merged in
/// (design, run) order.
pub fn collect(designs: &[Design], cfg: &CollectConfig) -> Result<(TransitionDataset, Vec<RunRecord>)> {
    if cfg.runs_per_design < 2 {
        return Err(Error::InvalidArgument("runs_per_design must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&cfg.perturb_fraction) {
        return Err(Error::InvalidArgument("perturb_fraction must lie in [0, 1]".into()));
    }
    let bounds = ActionBounds::default();
    let jobs: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..cfg.runs_per_design).map(move |r| (d, r)))
        .collect();
    let results: Vec<Result<(Behavior, Trajectory)>> = jobs
        .par_iter()
        .map(|&(d, r)| execute_run(&designs[d], d, r, cfg, &bounds))
        .collect();

    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    let mut transitions = Vec::new();
    let mut records = Vec::new();
    for (d, design) in designs.iter().enumerate() {
        let runs = &results[d * cfg.runs_per_design..(d + 1) * cfg.runs_per_design];
        if let Some(Err(e)) = runs.iter().find(|r| r.is_err()) {
            log::warn!("skipping design {}: {e}", design.name);
            skipped.push(design.name.clone());
            continue;
        }
        kept.push(design.name.clone());
        for (r, res) in runs.iter().enumerate() {
            let (behavior, traj) = res.as_ref().expect("errors handled above");
            let run_id = d * cfg.runs_per_design + r;
            transitions.extend(trajectory_transitions(traj, run_id, &cfg.rewards, &bounds));
            records.push(RunRecord {
                design_name: design.name.clone(),
                run_id,
                behavior: *behavior,
                iterations: traj.iterations(),
                converged: traj.converged,
            });
        }
    }
    if transitions.len() < 2 {
        return Err(Error::Empty("collection produced fewer than two transitions"));
    }
    let states: Vec<RawStateVector> = transitions.iter().map(|t| t.state).collect();
    let scaler = fit_scaler(&states)?;
    let raw: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
    let reward_stats = fit_reward_stats(&raw)?;
    let (perturb_runs, sobol_runs) = cfg.split();
    let metadata = DatasetMetadata {
        format_version: DATASET_FORMAT_VERSION,
        seed: cfg.seed,
        runs_per_design: cfg.runs_per_design,
        perturb_fraction: cfg.perturb_fraction,
        perturb_runs,
        sobol_runs,
        epsilon_max: EPSILON_MAX,
        max_iterations: cfg.max_iterations,
        corpus_hash: corpus_hash(designs),
        designs: kept,
        skipped_designs: skipped,
        rewards: cfg.rewards,
        bounds,
        scaler,
        reward_stats,
        num_runs: records.len(),
        converged_runs: records.iter().filter(|r| r.converged).count(),
        num_transitions: transitions.len(),
    };
    Ok((
        TransitionDataset {
            metadata,
            transitions,
        },
        records,
    ))
}

/// Writes `metadata.json` and `transitions.jsonl` into `dir`.
pub fn save_dataset(dataset: &TransitionDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta_path = dir.join(METADATA_FILE);
    let meta = serde_json::to_string_pretty(&dataset.metadata).expect("metadata serializes");
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))?;
    let rec_path = dir.join(TRANSITIONS_FILE);
    let file = fs::File::create(&rec_path).map_err(|e| Error::io(&rec_path, e))?;
    let mut w = BufWriter::new(file);
    for t in &dataset.transitions {
        let line = serde_json::to_string(t).expect("transition serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(&rec_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&rec_path, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<TransitionDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let metadata: DatasetMetadata = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    if metadata.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: metadata.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let rec_path = dir.join(TRANSITIONS_FILE);
    let file = fs::File::open(&rec_path).map_err(|e| Error::io(&rec_path, e))?;
    let mut transitions = Vec::with_capacity(metadata.num_transitions);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&rec_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Transition = serde_json::from_str(&line).map_err(|e| Error::Corrupt {
            path: rec_path.clone(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        transitions.push(t);
    }
    if transitions.len() != metadata.num_transitions {
        return Err(Error::Corrupt {
            path: rec_path,
            message: format!(
                "expected {} transitions, found {}",
                metadata.num_transitions,
                transitions.len()
            ),
        });
    }
    Ok(TransitionDataset {
        metadata,
        transitions,
    })
}
