//! Block-wise replay of a dataset through a streaming estimator and the
//! residual monitor, with a per-sample trace.

use std::io::Write;

use linkpred_core::adaptive::{
    AdaptiveError, Block, Estimator, ExactRls, LmsState, MonitorConfig, ResidualMonitor, RlsConfig, RlsState,
    TaylorOrder, WeightUpdate,
};
use linkpred_core::netsim::LinkSample;
use linkpred_core::regress::RegressError;
use linkpred_core::FeatureKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, EstimatorSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Regularized RLS through the inversion lemma and Taylor correction.
    Rls {
        forgetting: f64,
        ridge: f64,
        taylor_order: u8,
    },
    /// Direct solve of the regularized exponential normal equations.
    ExactRls { forgetting: f64, ridge: f64 },
    Lms { step_size: f64, ridge: f64 },
}

impl EstimatorSpec {
    pub fn build(&self, dim: usize) -> Result<Estimator, AdaptiveError> {
        Ok(match *self {
            EstimatorSpec::Rls {
                forgetting,
                ridge,
                taylor_order,
            } => {
                let order = TaylorOrder::from_order(taylor_order).ok_or(AdaptiveError::Parameter {
                    name: "taylor order",
                    value: taylor_order as f64,
                })?;
                let cfg = RlsConfig::new(forgetting, ridge)
                    .with_taylor_order(order)
                    .with_update(WeightUpdate::Regularized);
                Estimator::Rls(RlsState::new(dim, cfg)?)
            }
            EstimatorSpec::ExactRls { forgetting, ridge } => Estimator::ExactRls(ExactRls::new(dim, forgetting, ridge)?),
            EstimatorSpec::Lms { step_size, ridge } => Estimator::Lms(LmsState::new(dim, step_size, ridge)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub basis: FeatureKind,
    pub block: usize,
    pub estimator: EstimatorSpec,
    pub monitor: MonitorConfig,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("invalid stream setting: {0}")]
    Config(String),
    #[error("sample {sample}: {source}")]
    Features { sample: u64, source: RegressError },
    #[error("sample {sample}: {source}")]
    Estimator { sample: u64, source: AdaptiveError },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// One replayed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based index of the sample in the replay.
    pub sample: u64,
    /// Estimator step (block) that consumed the sample.
    pub step: u64,
    pub scenario_id: u32,
    pub snapshot_id: u32,
    pub link_id: u32,
    pub target: f64,
    /// A-priori prediction with the weights before the block update.
    pub prediction: f64,
    pub residual: f64,
    pub rmse: Option<f64>,
    pub baseline: Option<f64>,
    pub flagged: bool,
    pub onset: bool,
    /// Weights after the block update.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Streamer {
    config: StreamConfig,
    estimator: Estimator,
    monitor: ResidualMonitor,
    samples: u64,
    breakdowns: u64,
}

impl Streamer {
    pub fn new(config: StreamConfig) -> Result<Self, StreamError> {
        if config.block == 0 {
            return Err(StreamError::Config("block size must be >= 1".into()));
        }
        let cfg_err = |e: AdaptiveError| StreamError::Config(e.to_string());
        Ok(Self {
            estimator: config.estimator.build(config.basis.arity()).map_err(cfg_err)?,
            monitor: ResidualMonitor::new(config.monitor).map_err(cfg_err)?,
            config,
            samples: 0,
            breakdowns: 0,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn monitor(&self) -> &ResidualMonitor {
        &self.monitor
    }

    /// Samples consumed so far.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Blocks on which the RLS gain had to be re-initialized.
    pub fn breakdowns(&self) -> u64 {
        self.breakdowns
    }

    pub fn theta(&self) -> Vec<f64> {
        self.estimator.theta_vec()
    }

    /// Replays `samples` in blocks; a trailing partial block is applied as is.
    pub fn feed<F: FnMut(&TraceRow)>(&mut self, samples: &[LinkSample], mut sink: F) -> Result<(), StreamError> {
        let kind = self.config.basis;
        for chunk in samples.chunks(self.config.block) {
            let mut rows = Vec::with_capacity(chunk.len());
            for (i, s) in chunk.iter().enumerate() {
                let u = kind.evaluate(&s.params).map_err(|source| StreamError::Features {
                    sample: self.samples + i as u64 + 1,
                    source,
                })?;
                rows.push(u.into_values());
            }
            let targets: Vec<f64> = chunk.iter().map(|s| s.occupancy).collect();
            let block = Block::from_rows(&rows, &targets).map_err(|source| StreamError::Estimator {
                sample: self.samples + 1,
                source,
            })?;
            let before = self.estimator.theta_vec();
            let predictions: Vec<f64> = rows
                .iter()
                .map(|u| u.iter().zip(&before).map(|(a, b)| a * b).sum())
                .collect();
            match self.estimator.step(&block) {
                Ok(_) => {}
                Err(AdaptiveError::Breakdown { .. }) => self.breakdowns += 1,
                // Exact solver before the system is identifiable: weights wait.
                Err(AdaptiveError::Singular { .. }) => {}
                Err(source) => {
                    return Err(StreamError::Estimator {
                        sample: self.samples + 1,
                        source,
                    })
                }
            }
            let theta = self.estimator.theta_vec();
            let step = self.estimator.steps();
            for (i, s) in chunk.iter().enumerate() {
                let residual = targets[i] - predictions[i];
                let st = self.monitor.update(residual);
                self.samples += 1;
                sink(&TraceRow {
                    sample: self.samples,
                    step,
                    scenario_id: s.scenario_id,
                    snapshot_id: s.snapshot_id,
                    link_id: s.link_id,
                    target: targets[i],
                    prediction: predictions[i],
                    residual,
                    rmse: st.rmse,
                    baseline: st.baseline,
                    flagged: st.flagged,
                    onset: st.onset,
                    theta: theta.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self, dataset_sha256: Option<String>, config: serde_json::Value) -> Checkpoint {
        let estimator = match &self.estimator {
            Estimator::Lms(s) => EstimatorSnapshot::Lms(s.snapshot()),
            Estimator::Rls(s) => EstimatorSnapshot::Rls(s.snapshot()),
            Estimator::ExactRls(s) => EstimatorSnapshot::ExactRls(s.snapshot()),
        };
        Checkpoint {
            format: crate::checkpoint::CHECKPOINT_FORMAT.into(),
            generator: crate::TOOL.into(),
            basis: self.config.basis.to_string(),
            block: self.config.block,
            spec: self.config.estimator,
            samples: self.samples,
            breakdowns: self.breakdowns,
            estimator,
            monitor: self.monitor.snapshot(),
            dataset_sha256,
            config,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, StreamError> {
        let bad = |m: String| StreamError::Checkpoint(m);
        let basis: FeatureKind = c.basis.parse().map_err(|e| bad(format!("{e}")))?;
        let estimator = match &c.estimator {
            EstimatorSnapshot::Lms(s) => LmsState::from_snapshot(s).map(Estimator::Lms),
            EstimatorSnapshot::Rls(s) => RlsState::from_snapshot(s).map(Estimator::Rls),
            EstimatorSnapshot::ExactRls(s) => ExactRls::from_snapshot(s).map(Estimator::ExactRls),
        }
        .map_err(|e| bad(e.to_string()))?;
        if estimator.theta().len() != basis.arity() {
            return Err(bad(format!("weights do not match basis {basis}")));
        }
        let monitor = ResidualMonitor::from_snapshot(&c.monitor).map_err(|e| bad(e.to_string()))?;
        if c.block == 0 {
            return Err(bad("block size must be >= 1".into()));
        }
        Ok(Self {
            config: StreamConfig {
                basis,
                block: c.block,
                estimator: c.spec,
                monitor: *monitor.config(),
            },
            estimator,
            monitor,
            samples: c.samples,
            breakdowns: c.breakdowns,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace CSV column names for a basis of the given arity.
pub fn trace_columns(arity: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "sample",
        "step",
        "scenario_id",
        "snapshot_id",
        "link_id",
        "target",
        "prediction",
        "residual",
        "rmse",
        "baseline",
        "flagged",
        "onset",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..arity).map(|i| format!("theta_{i}")));
    cols
}

/// Writes trace rows as CSV. `header` emits the comment lines and column
/// names; resumed runs append rows only.
pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, arity: usize, comments: &[String], header: bool) -> Result<Self, csv::Error> {
        if header {
            for c in comments {
                writeln!(out, "{c}")?;
            }
        }
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            out.write_record(trace_columns(arity))?;
        }
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &TraceRow) -> Result<(), csv::Error> {
        let mut rec = vec![
            r.sample.to_string(),
            r.step.to_string(),
            r.scenario_id.to_string(),
            r.snapshot_id.to_string(),
            r.link_id.to_string(),
            r.target.to_string(),
            r.prediction.to_string(),
            r.residual.to_string(),
            opt(r.rmse),
            opt(r.baseline),
            u8::from(r.flagged).to_string(),
            u8::from(r.onset).to_string(),
        ];
        rec.extend(r.theta.iter().map(|t| t.to_string()));
        self.out.write_record(rec)
    }

    pub fn finish(mut self) -> Result<W, csv::Error> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}
