//! Batch fitting and evaluation over link-sample datasets.

use std::collections::BTreeMap;

use linkpred_core::netsim::{derive_seed, LinkSample};
use linkpred_core::regress::{self, MapeReport, ModelWeights, RegressError};
use linkpred_core::{FeatureKind, FeatureVector};
use serde::Serialize;

/// Ridge values tried by [`select_ridge`].
pub const RIDGE_GRID: [f64; 7] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.08];

const SPLIT_STREAM: u64 = 0x5911;
const VALIDATION_STREAM: u64 = 0x7a11;

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Whether a scenario lands in the held-out part of the split.
pub fn is_held_out(seed: u64, scenario_id: u32, holdout: f64) -> bool {
    unit(derive_seed(seed, &[SPLIT_STREAM, scenario_id as u64])) < holdout
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<LinkSample>,
    pub test: Vec<LinkSample>,
}

/// Splits whole scenarios, keeping the input order within each part.
pub fn split_by_scenario(samples: &[LinkSample], seed: u64, holdout: f64) -> Split {
    let mut s = Split::default();
    for x in samples {
        if is_held_out(seed, x.scenario_id, holdout) {
            s.test.push(*x);
        } else {
            s.train.push(*x);
        }
    }
    s
}

pub fn features(samples: &[LinkSample], kind: FeatureKind) -> Result<Vec<FeatureVector>, RegressError> {
    samples.iter().map(|s| kind.evaluate(&s.params)).collect()
}

pub fn fit(samples: &[LinkSample], kind: FeatureKind, ridge: f64) -> Result<ModelWeights, RegressError> {
    let rows = features(samples, kind)?;
    let y: Vec<f64> = samples.iter().map(|s| s.occupancy).collect();
    regress::fit_ridge(&rows, &y, ridge)
}

pub fn predict(w: &ModelWeights, samples: &[LinkSample]) -> Result<Vec<f64>, RegressError> {
    samples
        .iter()
        .map(|s| regress::predict_occupancy(w, &w.kind().evaluate(&s.params)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub samples: usize,
    pub occupancy_mse: f64,
    pub occupancy_mape: f64,
    pub occupancy_mape_excluded: usize,
    pub delay_mse: f64,
    pub delay_mape: f64,
    pub delay_mape_excluded: usize,
}

fn delays(occupancy: &[f64], samples: &[LinkSample]) -> Result<Vec<f64>, RegressError> {
    occupancy
        .iter()
        .zip(samples)
        .map(|(&y, s)| regress::delay_from_occupancy(y, s.mean_packet_bits, s.capacity))
        .collect()
}

/// Occupancy and delay errors of a model; delays come from predicted
/// occupancy through `y * E|P| / c`.
pub fn evaluate(w: &ModelWeights, samples: &[LinkSample]) -> Result<Metrics, RegressError> {
    let pred = predict(w, samples)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.occupancy).collect();
    let occ = regress::mape(&pred, &truth)?;
    let d_pred = delays(&pred, samples)?;
    let d_truth: Vec<f64> = samples.iter().map(|s| s.delay).collect();
    let del = regress::mape(&d_pred, &d_truth)?;
    Ok(Metrics {
        samples: samples.len(),
        occupancy_mse: regress::mse(&pred, &truth)?,
        occupancy_mape: occ.percent,
        occupancy_mape_excluded: occ.excluded,
        delay_mse: regress::mse(&d_pred, &d_truth)?,
        delay_mape: del.percent,
        delay_mape_excluded: del.excluded,
    })
}

/// Delay MAPE when the measured occupancy itself is converted to delay.
pub fn ground_truth_delay_mape(samples: &[LinkSample]) -> Result<MapeReport, RegressError> {
    let truth: Vec<f64> = samples.iter().map(|s| s.occupancy).collect();
    let d: Vec<f64> = samples.iter().map(|s| s.delay).collect();
    regress::mape(&delays(&truth, samples)?, &d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeSearch {
    pub chosen: f64,
    /// `(alpha, validation occupancy MAPE)`; `None` when the fit failed.
    pub scores: Vec<(f64, Option<f64>)>,
}

/// Picks the ridge with the lowest occupancy MAPE on a scenario-level
/// validation split of `train`.
pub fn select_ridge(
    train: &[LinkSample],
    kind: FeatureKind,
    grid: &[f64],
    seed: u64,
) -> Result<RidgeSearch, RegressError> {
    let (mut fit_part, mut val_part) = (Vec::new(), Vec::new());
    for s in train {
        if unit(derive_seed(seed, &[VALIDATION_STREAM, s.scenario_id as u64])) < 0.2 {
            val_part.push(*s);
        } else {
            fit_part.push(*s);
        }
    }
    if fit_part.is_empty() || val_part.is_empty() {
        log::warn!("too few scenarios for a validation split; scoring ridge values on the training data");
        fit_part = train.to_vec();
        val_part = train.to_vec();
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        let score = fit(&fit_part, kind, alpha)
            .and_then(|w| evaluate(&w, &val_part))
            .map(|m| m.occupancy_mape)
            .ok();
        if let Some(m) = score {
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((alpha, m));
            }
        }
        scores.push((alpha, score));
    }
    match best {
        Some((chosen, _)) => Ok(RidgeSearch { chosen, scores }),
        None => Err(RegressError::Empty),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathMetrics {
    pub path: Vec<u32>,
    /// Snapshots in which every link of the path was observed.
    pub snapshots: usize,
    pub delay_mape: Option<f64>,
    pub delay_mape_excluded: usize,
}

/// End-to-end delay MAPE per declared path: predicted link delays are
/// summed along the path in each `(scenario, snapshot)` and compared with
/// the summed measured delays.
pub fn path_delay_metrics(
    w: &ModelWeights,
    samples: &[LinkSample],
    paths: &[Vec<u32>],
) -> Result<Vec<PathMetrics>, RegressError> {
    let pred = delays(&predict(w, samples)?, samples)?;
    type Snap = (BTreeMap<u32, f64>, BTreeMap<u32, f64>);
    let mut groups: BTreeMap<(u32, u32), Snap> = BTreeMap::new();
    for (s, d) in samples.iter().zip(pred) {
        let g = groups.entry((s.scenario_id, s.snapshot_id)).or_default();
        g.0.insert(s.link_id, d);
        g.1.insert(s.link_id, s.delay);
    }
    paths
        .iter()
        .map(|path| {
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for (pred, truth) in groups.values() {
                if let (Ok(a), Ok(b)) = (
                    regress::aggregate_path_delay(pred, path),
                    regress::aggregate_path_delay(truth, path),
                ) {
                    p.push(a);
                    t.push(b);
                }
            }
            let m = if p.is_empty() { None } else { regress::mape(&p, &t).ok() };
            Ok(PathMetrics {
                path: path.clone(),
                snapshots: p.len(),
                delay_mape: m.map(|m| m.percent),
                delay_mape_excluded: m.map_or(0, |m| m.excluded),
            })
        })
        .collect()
}
