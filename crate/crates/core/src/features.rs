//! Fixed-size state vectors and their standardization.
//!
//! Layout of the 23 raw features:
//!
//! | index  | feature                                                   |
//! |--------|-----------------------------------------------------------|
//! | 0..=8  | static design features, in [`StaticFeatures`] order       |
//! | 9      | total DRVs                                                |
//! | 10     | maximum partition DRVs                                    |
//! | 11, 12 | mean and population std of partition DRVs                 |
//! | 13, 14 | mean and maximum of neighbor DRVs                         |
//! | 15     | total wirelength (um)                                     |
//! | 16     | DRV density: total DRVs per partition                     |
//! | 17     | DRV reduction rate `(prev - cur) / max(1, prev)`          |
//! | 18     | number of completed iterations                            |
//! | 19..=21| log2 of the previous drc, marker and fixed-shape costs    |
//! | 22     | previous marker decay                                     |
//!
//! An empty history describes the design before routing starts: all dynamic
//! fields are zero and the previous weights are the baseline iteration-0
//! weights.

use serde::{Deserialize, Serialize};

use crate::datagen::baseline_schedule;
use crate::error::{Error, Result};
use crate::grid::StaticFeatures;
use crate::router::{IterationState, WeightVector};

pub const STATE_DIM: usize = 23;

pub const TOTAL_DRVS: usize = 9;
pub const DRV_REDUCTION_RATE: usize = 17;
pub const ITERATION: usize = 18;
pub const PREV_WEIGHTS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawStateVector(pub [f64; STATE_DIM]);

impl RawStateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn mean_std(xs: &[u32]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn weight_fields(w: &WeightVector) -> [f64; 4] {
    [
        w.drc_cost.log2(),
        w.marker_cost.log2(),
        w.fixed_shape_cost.log2(),
        w.marker_decay,
    ]
}

pub fn extract_features(prefix: &[IterationState], features: &StaticFeatures) -> RawStateVector {
    let mut v = [0.0; STATE_DIM];
    v[..StaticFeatures::LEN].copy_from_slice(&features.to_array());
    let Some(cur) = prefix.last() else {
        v[PREV_WEIGHTS..].copy_from_slice(&weight_fields(&baseline_schedule(0)));
        return RawStateVector(v);
    };
    let (p_mean, p_std) = mean_std(&cur.partition_drvs);
    let (n_mean, _) = mean_std(&cur.neighbor_drvs);
    let total = cur.total_drvs as f64;
    v[TOTAL_DRVS] = total;
    v[10] = cur.max_partition_drv as f64;
    v[11] = p_mean;
    v[12] = p_std;
    v[13] = n_mean;
    v[14] = cur.neighbor_drvs.iter().copied().max().unwrap_or(0) as f64;
    v[15] = cur.total_wirelength_um;
    v[16] = if cur.partition_drvs.is_empty() {
        0.0
    } else {
        total / cur.partition_drvs.len() as f64
    };
    if prefix.len() >= 2 {
        let prev = prefix[prefix.len() - 2].total_drvs as f64;
        v[DRV_REDUCTION_RATE] = (prev - total) / prev.max(1.0);
    }
    v[ITERATION] = prefix.len() as f64;
    v[PREV_WEIGHTS..].copy_from_slice(&weight_fields(&cur.weights));
    RawStateVector(v)
}

/// Per-feature standardization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits population mean and std per column. Constant columns get std 1.
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = vectors.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Empty("scaler needs at least one vector"));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("scaler rows differ in length".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = (v / n).sqrt();
                if s <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature vector has {} entries, scaler expects {}",
                raw.len(),
                self.dim()
            )));
        }
        Ok(raw
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn inverse_transform(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        if scaled.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "scaled vector has {} entries, scaler expects {}",
                scaled.len(),
                self.dim()
            )));
        }
        Ok(scaled
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((z, m), s)| z * s + m)
            .collect())
    }
}

pub fn fit_scaler(vectors: &[RawStateVector]) -> Result<Scaler> {
    if vectors.len() < 2 {
        return Err(Error::Empty("scaler needs at least two vectors"));
    }
    Scaler::fit(vectors.iter().map(RawStateVector::as_slice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::StaticFeatures;
    use proptest::prelude::*;

    fn statics() -> StaticFeatures {
        StaticFeatures {
            die_area_um2: 576.0,
            total_pins: 60.0,
            pin_density: 60.0 / 576.0,
            num_macros: 3.0,
            instance_density: 0.05,
            num_nets: 22.0,
            avg_pins_per_net: 60.0 / 22.0,
            net_density: 22.0 / 576.0,
            num_routing_layers: 3.0,
        }
    }

    fn state(iteration: usize, total: u32) -> IterationState {
        IterationState {
            iteration,
            weights: baseline_schedule(iteration),
            partition_drvs: vec![total, 0, 0, 0],
            max_partition_drv: total,
            neighbor_drvs: vec![0, total, total, 0],
            total_drvs: total,
            total_wirelength_um: 100.0,
        }
    }

    #[test]
    fn single_state_has_zero_reduction() {
        let v = extract_features(&[state(0, 40)], &statics());
        assert_eq!(v.0[DRV_REDUCTION_RATE], 0.0);
        assert_eq!(v.0[TOTAL_DRVS], 40.0);
        assert_eq!(v.0[ITERATION], 1.0);
    }

    #[test]
    fn halving_drvs_is_half_reduction() {
        let v = extract_features(&[state(0, 100), state(1, 50)], &statics());
        assert_eq!(v.0[DRV_REDUCTION_RATE], 0.5);
        assert_eq!(v.0[16], 12.5);
        assert_eq!(v.0[11], 12.5);
        assert_eq!(v.0[14], 50.0);
    }

    #[test]
    fn zero_drvs_zero_dynamic_fields() {
        let v = extract_features(&[state(0, 0), state(1, 0)], &statics());
        for i in (9..=14).chain([16, 17]) {
            assert_eq!(v.0[i], 0.0, "field {i}");
        }
    }

    #[test]
    fn empty_history_uses_baseline_weights() {
        let v = extract_features(&[], &statics());
        let b = baseline_schedule(0);
        assert_eq!(v.0[ITERATION], 0.0);
        assert_eq!(v.0[DRV_REDUCTION_RATE], 0.0);
        assert_eq!(&v.0[19..], &[b.drc_cost.log2(), b.marker_cost.log2(), b.fixed_shape_cost.log2(), b.marker_decay]);
        assert_eq!(&v.0[..9], &statics().to_array());
    }

    #[test]
    fn scaler_on_one_two_three() {
        let rows = [[1.0], [2.0], [3.0]];
        let s = Scaler::fit(rows.iter().map(|r| &r[..])).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let t: Vec<f64> = rows.iter().map(|r| s.transform(r).unwrap()[0]).collect();
        for (got, want) in t.iter().zip([-1.2247449, 0.0, 1.2247449]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_column_gets_unit_std() {
        let rows = [[5.0], [5.0], [5.0]];
        let s = Scaler::fit(rows.iter().map(|r| &r[..])).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (5.0, 1.0));
        assert_eq!(s.transform(&[5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn fit_rejects_short_input() {
        assert!(fit_scaler(&[]).is_err());
        assert!(fit_scaler(&[RawStateVector([0.0; STATE_DIM])]).is_err());
    }

    #[test]
    fn transform_checks_length() {
        let s = Scaler {
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
        };
        assert!(matches!(s.transform(&[1.0]), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #[test]
        fn mean_and_mean_plus_std(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..20)) {
            let s = Scaler::fit(rows.iter().map(|r| &r[..])).unwrap();
            prop_assert!(s.transform(&s.mean).unwrap().iter().all(|&z| z == 0.0));
            let shifted: Vec<f64> = s.mean.iter().zip(&s.std).map(|(m, d)| m + d).collect();
            for z in s.transform(&shifted).unwrap() {
                prop_assert!((z - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn transform_is_affine(
            x in prop::collection::vec(-1e3f64..1e3, 3),
            y in prop::collection::vec(-1e3f64..1e3, 3),
            a in -2.0f64..2.0,
        ) {
            let s = Scaler { mean: vec![1.0, -2.0, 30.0], std: vec![0.5, 3.0, 7.0] };
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + (1.0 - a) * q).collect();
            let lhs = s.transform(&mix).unwrap();
            let (tx, ty) = (s.transform(&x).unwrap(), s.transform(&y).unwrap());
            for i in 0..3 {
                let rhs = a * tx[i] + (1.0 - a) * ty[i];
                prop_assert!((lhs[i] - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn transform_matches_formula_and_inverts(raw in prop::collection::vec(-1e4f64..1e4, 3)) {
            let s = Scaler { mean: vec![1.0, -2.0, 30.0], std: vec![0.5, 3.0, 7.0] };
            let z = s.transform(&raw).unwrap();
            for i in 0..3 {
                prop_assert_eq!(z[i], (raw[i] - s.mean[i]) / s.std[i]);
            }
            let back = s.inverse_transform(&z).unwrap();
            for i in 0..3 {
                prop_assert!((back[i] - raw[i]).abs() < 1e-9);
            }
        }
    }
}
