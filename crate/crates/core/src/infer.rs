//! Policy bundles and per-iteration weight inference.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, Scaler};
use crate::grid::StaticFeatures;
use crate::nn::{Actor, Mlp, ACTION_DIM};
use crate::router::{IterationState, WeightPolicy, WeightVector};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Maps between normalized actions in `[0, 1]^4` and router weights.
/// Costs are log2-scaled, `cost = 2^(a * log2_max)`; the decay is linear,
/// `decay = decay_min + a * decay_span`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub drc_cost_log2_max: f64,
    pub marker_cost_log2_max: f64,
    pub fixed_shape_cost_log2_max: f64,
    pub decay_min: f64,
    pub decay_span: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        ActionBounds {
            drc_cost_log2_max: 14.0,
            marker_cost_log2_max: 10.0,
            fixed_shape_cost_log2_max: 10.0,
            decay_min: 0.5,
            decay_span: 0.49,
        }
    }
}

impl ActionBounds {
    pub fn denormalize(&self, action: [f64; 4]) -> WeightVector {
        let a = action.map(|x| x.clamp(0.0, 1.0));
        WeightVector {
            drc_cost: (a[0] * self.drc_cost_log2_max).exp2(),
            marker_cost: (a[1] * self.marker_cost_log2_max).exp2(),
            fixed_shape_cost: (a[2] * self.fixed_shape_cost_log2_max).exp2(),
            marker_decay: self.decay_min + a[3] * self.decay_span,
        }
    }

    pub fn normalize(&self, w: &WeightVector) -> [f64; 4] {
        [
            w.drc_cost.log2() / self.drc_cost_log2_max,
            w.marker_cost.log2() / self.marker_cost_log2_max,
            w.fixed_shape_cost.log2() / self.fixed_shape_cost_log2_max,
            (w.marker_decay - self.decay_min) / self.decay_span,
        ]
        .map(|x| x.clamp(0.0, 1.0))
    }

    /// Clamps each weight into its range.
    pub fn clamp(&self, w: &WeightVector) -> WeightVector {
        WeightVector {
            drc_cost: w.drc_cost.clamp(1.0, self.drc_cost_log2_max.exp2()),
            marker_cost: w.marker_cost.clamp(1.0, self.marker_cost_log2_max.exp2()),
            fixed_shape_cost: w.fixed_shape_cost.clamp(1.0, self.fixed_shape_cost_log2_max.exp2()),
            marker_decay: w
                .marker_decay
                .clamp(self.decay_min, self.decay_min + self.decay_span),
        }
    }

    pub fn contains(&self, w: &WeightVector) -> bool {
        self.clamp(w) == *w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorFile {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    log_std_clamp: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    format_version: u32,
    scaler: Scaler,
    bounds: ActionBounds,
    actor: ActorFile,
    fingerprint: String,
}

/// Everything needed to run a trained policy: actor parameters, the
/// feature scaler and the action bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BundleFile", into = "BundleFile")]
pub struct PolicyBundle {
    pub format_version: u32,
    pub scaler: Scaler,
    pub bounds: ActionBounds,
    pub actor: Actor,
    pub fingerprint: String,
}

impl PolicyBundle {
    pub fn new(actor: &Actor, scaler: Scaler, bounds: ActionBounds, fingerprint: String) -> Self {
        PolicyBundle {
            format_version: BUNDLE_FORMAT_VERSION,
            scaler,
            bounds,
            actor: actor.clone(),
            fingerprint,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes") + "\n"
    }

    /// Scaled features to a normalized action in `[0, 1]^4`.
    pub fn mean_action(&self, raw_features: &[f64]) -> Result<[f64; 4]> {
        let x = self.scaler.transform(raw_features)?;
        let x = Array2::from_shape_vec((1, x.len()), x).expect("one row");
        let a = self.actor.mean_action(x.view());
        Ok([a[[0, 0]], a[[0, 1]], a[[0, 2]], a[[0, 3]]])
    }
}

impl From<PolicyBundle> for BundleFile {
    fn from(b: PolicyBundle) -> Self {
        let net = &b.actor.net;
        BundleFile {
            format_version: b.format_version,
            scaler: b.scaler,
            bounds: b.bounds,
            actor: ActorFile {
                layer_dims: net.dims.clone(),
                weights: net.weights.iter().map(|w| w.iter().copied().collect()).collect(),
                biases: net.biases.iter().map(|v| v.to_vec()).collect(),
                log_std_clamp: b.actor.log_std_clamp,
            },
            fingerprint: b.fingerprint,
        }
    }
}

impl TryFrom<BundleFile> for PolicyBundle {
    type Error = Error;

    fn try_from(f: BundleFile) -> Result<Self> {
        if f.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: f.format_version,
                expected: BUNDLE_FORMAT_VERSION,
            });
        }
        let net = Mlp::from_parts(f.actor.layer_dims, f.actor.weights, f.actor.biases)?;
        if net.input_dim() != f.scaler.dim() || net.output_dim() != 2 * ACTION_DIM {
            return Err(Error::ShapeMismatch(format!(
                "actor maps {} -> {}, expected {} -> {}",
                net.input_dim(),
                net.output_dim(),
                f.scaler.dim(),
                2 * ACTION_DIM
            )));
        }
        if f.scaler.std.len() != f.scaler.dim() || f.scaler.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::ShapeMismatch("scaler std must be positive, one per feature".into()));
        }
        let [lo, hi] = f.actor.log_std_clamp;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::ShapeMismatch("invalid log std clamp".into()));
        }
        Ok(PolicyBundle {
            format_version: f.format_version,
            scaler: f.scaler,
            bounds: f.bounds,
            actor: Actor {
                net,
                log_std_clamp: f.actor.log_std_clamp,
            },
            fingerprint: f.fingerprint,
        })
    }
}

pub fn save_bundle(bundle: &PolicyBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bundle.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<PolicyBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bundle(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Corrupt {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parses bundle JSON. The version is checked before the rest of the
/// document so older or newer layouts report a version mismatch.
pub fn parse_bundle(text: &str) -> Result<PolicyBundle> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        what: "policy bundle".into(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse {
            what: "policy bundle".into(),
            message: "missing format_version".into(),
        })?;
    if found != BUNDLE_FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: BUNDLE_FORMAT_VERSION,
        });
    }
    let file: BundleFile = serde_json::from_value(value).map_err(parse_err)?;
    PolicyBundle::try_from(file)
}

/// Weights for the next iteration: features of the prefix, scaled, through
/// the actor's mean action, mapped back into weight space.
pub fn infer_weights(
    bundle: &PolicyBundle,
    prefix: &[IterationState],
    features: &StaticFeatures,
) -> Result<WeightVector> {
    let raw = extract_features(prefix, features);
    let a = bundle.mean_action(raw.as_slice())?;
    Ok(bundle.bounds.denormalize(a))
}

/// Adapts a bundle to the router's policy interface.
#[derive(Debug, Clone, Copy)]
pub struct BundlePolicy<'a>(pub &'a PolicyBundle);

impl WeightPolicy for BundlePolicy<'_> {
    fn next_weights(&mut self, features: &StaticFeatures, history: &[IterationState]) -> Result<WeightVector> {
        infer_weights(self.0, history, features)
    }
}
