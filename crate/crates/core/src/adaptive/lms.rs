use alloc::vec::Vec;
use nalgebra::DVector;

use super::{check_finite_param, AdaptiveError, Block};

/// Regularized block LMS:
/// `theta <- (1 - mu alpha) theta - mu U (U^T theta - y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsState {
    theta: DVector<f64>,
    step_size: f64,
    ridge: f64,
    steps: u64,
}

impl LmsState {
    pub fn new(dim: usize, step_size: f64, ridge: f64) -> Result<Self, AdaptiveError> {
        Self::with_theta(DVector::zeros(dim), step_size, ridge)
    }

    pub fn with_theta(theta: DVector<f64>, step_size: f64, ridge: f64) -> Result<Self, AdaptiveError> {
        check_finite_param("step size", step_size, step_size > 0.0)?;
        check_finite_param("ridge", ridge, ridge >= 0.0)?;
        Ok(Self {
            theta,
            step_size,
            ridge,
            steps: 0,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn snapshot(&self) -> LmsSnapshot {
        LmsSnapshot {
            theta: self.theta.iter().copied().collect(),
            step_size: self.step_size,
            ridge: self.ridge,
            steps: self.steps,
        }
    }

    pub fn from_snapshot(s: &LmsSnapshot) -> Result<Self, AdaptiveError> {
        let mut st = Self::with_theta(DVector::from_column_slice(&s.theta), s.step_size, s.ridge)?;
        st.steps = s.steps;
        Ok(st)
    }

    pub fn step(&mut self, block: &Block) -> Result<DVector<f64>, AdaptiveError> {
        block.check_dim(self.theta.len())?;
        let residuals = block.residuals(&self.theta);
        let next = &self.theta * (1.0 - self.step_size * self.ridge) + block.inputs() * &residuals * self.step_size;
        self.steps += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(AdaptiveError::Diverged { step: self.steps });
        }
        self.theta = next;
        Ok(residuals)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LmsSnapshot {
    pub theta: Vec<f64>,
    pub step_size: f64,
    pub ridge: f64,
    pub steps: u64,
}
