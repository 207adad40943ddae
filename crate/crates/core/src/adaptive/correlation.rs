use alloc::collections::VecDeque;
use nalgebra::{DMatrix, DVector};

use super::{check_finite_param, AdaptiveError, Block};

/// How past blocks are weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Averaging {
    /// Unweighted sum of the last `window + 1` blocks.
    Sliding { window: usize },
    /// `R(n) = lambda R(n-1) + U U^T`.
    Exponential { forgetting: f64 },
}

/// Time-dependent estimates of `R_uu` and `R_yu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    mode: Averaging,
    ruu: DMatrix<f64>,
    ryu: DVector<f64>,
    count: u64,
    history: VecDeque<(DMatrix<f64>, DVector<f64>)>,
}

impl CorrelationEstimate {
    pub fn new(dim: usize, mode: Averaging) -> Result<Self, AdaptiveError> {
        if let Averaging::Exponential { forgetting } = mode {
            check_finite_param("forgetting factor", forgetting, (0.0..=1.0).contains(&forgetting))?;
        }
        Ok(Self {
            mode,
            ruu: DMatrix::zeros(dim, dim),
            ryu: DVector::zeros(dim),
            count: 0,
            history: VecDeque::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.ryu.len()
    }

    pub fn mode(&self) -> Averaging {
        self.mode
    }

    pub fn ruu(&self) -> &DMatrix<f64> {
        &self.ruu
    }

    pub fn ryu(&self) -> &DVector<f64> {
        &self.ryu
    }

    /// Samples seen so far (all blocks, including evicted ones).
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Blocks currently held by a sliding window.
    pub fn retained_blocks(&self) -> usize {
        self.history.len()
    }

    pub fn update(&mut self, block: &Block) -> Result<(), AdaptiveError> {
        block.check_dim(self.dim())?;
        let u = block.inputs();
        let outer = u * u.transpose();
        let cross = u * block.targets();
        match self.mode {
            Averaging::Exponential { forgetting } => {
                self.ruu *= forgetting;
                self.ruu += outer;
                self.ryu *= forgetting;
                self.ryu += cross;
            }
            Averaging::Sliding { window } => {
                self.history.push_back((outer, cross));
                while self.history.len() > window + 1 {
                    self.history.pop_front();
                }
                // Re-summing keeps the estimate free of cancellation drift.
                self.ruu.fill(0.0);
                self.ryu.fill(0.0);
                for (o, c) in &self.history {
                    self.ruu += o;
                    self.ryu += c;
                }
            }
        }
        crate::linalg::symmetrize(&mut self.ruu);
        self.count += block.len() as u64;
        Ok(())
    }

    pub(crate) fn from_parts(mode: Averaging, ruu: DMatrix<f64>, ryu: DVector<f64>, count: u64) -> Self {
        Self {
            mode,
            ruu,
            ryu,
            count,
            history: VecDeque::new(),
        }
    }
}
