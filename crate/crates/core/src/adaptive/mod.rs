//! Streaming estimators for the linear occupancy models.
//!
//! Data arrive in blocks `(U, y)` where `U` is `dim x b` (one column per
//! sample) and `y` has `b` entries. All estimators are single-writer: feed
//! one link's blocks sequentially.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

mod correlation;
mod lms;
mod monitor;
mod rls;

pub use correlation::{Averaging, CorrelationEstimate};
pub use lms::{LmsSnapshot, LmsState};
pub use monitor::{MonitorConfig, MonitorSnapshot, MonitorStatus, ResidualMonitor};
pub use rls::{
    ExactRls, ExactRlsSnapshot, PendingSnapshot, RlsConfig, RlsInit, RlsSnapshot, RlsState, TaylorOrder, WeightUpdate,
    TAYLOR_GUARD,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("block has dimension {got}, estimator expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("block has {inputs} input columns but {targets} targets")]
    BlockShape { inputs: usize, targets: usize },
    #[error("invalid {name}: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("weights diverged at step {step}; reduce the step size")]
    Diverged { step: u64 },
    #[error("numerical breakdown at step {step} (denominator {denominator:e}); gain matrix re-initialized")]
    Breakdown { step: u64, denominator: f64 },
    #[error("regularized correlation matrix is singular at step {step}")]
    Singular { step: u64 },
    #[error("snapshot is inconsistent: {0}")]
    Snapshot(&'static str),
}

/// A block of samples, one column of `inputs` per target.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl Block {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self, AdaptiveError> {
        if inputs.ncols() != targets.len() {
            return Err(AdaptiveError::BlockShape {
                inputs: inputs.ncols(),
                targets: targets.len(),
            });
        }
        Ok(Self { inputs, targets })
    }

    /// Builds a block from feature rows of equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], targets: &[f64]) -> Result<Self, AdaptiveError> {
        if rows.len() != targets.len() {
            return Err(AdaptiveError::BlockShape {
                inputs: rows.len(),
                targets: targets.len(),
            });
        }
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != dim) {
            return Err(AdaptiveError::Dimension {
                expected: dim,
                got: bad.as_ref().len(),
            });
        }
        let inputs = DMatrix::from_fn(dim, rows.len(), |i, j| rows[j].as_ref()[i]);
        Ok(Self {
            inputs,
            targets: DVector::from_column_slice(targets),
        })
    }

    pub fn single(u: &[f64], y: f64) -> Self {
        Self {
            inputs: DMatrix::from_column_slice(u.len(), 1, u),
            targets: DVector::from_element(1, y),
        }
    }

    pub fn dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<(), AdaptiveError> {
        if self.dim() != expected {
            return Err(AdaptiveError::Dimension {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// A-priori residuals `y - U^T theta`.
    pub fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.targets - self.inputs.tr_mul(theta)
    }
}

/// Batch ridge equivalent to a stream ridge after `samples` samples with no
/// forgetting. The stream regularizes raw sums, the batch fit averages them.
pub fn batch_equivalent_ridge(stream_ridge: f64, samples: usize) -> f64 {
    stream_ridge / samples.max(1) as f64
}

/// Any of the streaming estimators behind one interface.
#[derive(Debug, Clone)]
pub enum Estimator {
    Lms(LmsState),
    Rls(RlsState),
    ExactRls(ExactRls),
}

impl Estimator {
    /// Applies one block and returns its a-priori residuals.
    pub fn step(&mut self, block: &Block) -> Result<DVector<f64>, AdaptiveError> {
        match self {
            Estimator::Lms(s) => s.step(block),
            Estimator::Rls(s) => s.step(block),
            Estimator::ExactRls(s) => s.step(block),
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        match self {
            Estimator::Lms(s) => s.theta(),
            Estimator::Rls(s) => s.theta(),
            Estimator::ExactRls(s) => s.theta(),
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            Estimator::Lms(s) => s.steps(),
            Estimator::Rls(s) => s.steps(),
            Estimator::ExactRls(s) => s.steps(),
        }
    }

    pub fn theta_vec(&self) -> Vec<f64> {
        self.theta().iter().copied().collect()
    }
}

pub(crate) fn check_finite_param(name: &'static str, value: f64, ok: bool) -> Result<(), AdaptiveError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(AdaptiveError::Parameter { name, value })
    }
}
