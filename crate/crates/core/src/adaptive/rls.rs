//! Regularized forgetting-factor RLS.
//!
//! The gain `K(n) = [R(n) + alpha I]^-1` is propagated without inverting
//! `K(n)`: the rank-`b` inversion lemma gives `Q(n+1)^-1` for
//! `Q(n+1) = lambda K(n)^-1 + U U^T`, and the remaining shift
//! `delta = alpha (1 - lambda)` is applied through a truncated Neumann
//! (Taylor) series `[Q + delta I]^-1 = Q^-1 - delta Q^-2 + delta^2 Q^-3 - ...`.
//!
//! [`ExactRls`] solves the same regularized normal equations by direct
//! factorization at every step and is the reference the recursion is
//! checked against.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::correlation::{Averaging, CorrelationEstimate};
use super::{check_finite_param, AdaptiveError, Block};
use crate::linalg;

/// Steps between positive-definiteness spot checks of the gain.
const PD_CHECK_INTERVAL: u64 = 100;
/// `delta * ||Q^-1||` beyond which the first-order expansion degrades.
pub const TAYLOR_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorOrder {
    /// `K = Q^-1 - delta Q^-2`.
    First,
    /// `K = Q^-1 - delta Q^-2 + delta^2 Q^-3`.
    Second,
}

impl TaylorOrder {
    pub fn from_order(order: u8) -> Option<Self> {
        match order {
            1 => Some(TaylorOrder::First),
            2 => Some(TaylorOrder::Second),
            _ => None,
        }
    }

    pub fn order(self) -> u8 {
        match self {
            TaylorOrder::First => 1,
            TaylorOrder::Second => 2,
        }
    }
}

/// Weight recursion applied after the gain update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightUpdate {
    /// `theta + K U (y - U^T theta) - delta K theta`. With an exact gain this
    /// reproduces the regularized solution at every step.
    Regularized,
    /// `theta + K U (y - U^T theta)` without the regularization leakage term.
    Plain,
}

/// Initial gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RlsInit {
    /// `K(0) = I / alpha` when `alpha > 0`. With `alpha = 0` the recursion
    /// starts once the accumulated correlation matrix is invertible.
    Auto,
    /// `K(0) = I / epsilon`.
    Identity { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsConfig {
    pub forgetting: f64,
    pub ridge: f64,
    pub taylor_order: TaylorOrder,
    pub update: WeightUpdate,
    pub init: RlsInit,
    /// Gain re-initialization `I / epsilon` after a numerical breakdown.
    pub reset_epsilon: f64,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.9,
            ridge: 0.08,
            taylor_order: TaylorOrder::First,
            update: WeightUpdate::Regularized,
            init: RlsInit::Auto,
            reset_epsilon: 1e-3,
        }
    }
}

impl RlsConfig {
    pub fn new(forgetting: f64, ridge: f64) -> Self {
        Self {
            forgetting,
            ridge,
            ..Self::default()
        }
    }

    pub fn with_taylor_order(mut self, order: TaylorOrder) -> Self {
        self.taylor_order = order;
        self
    }

    pub fn with_init(mut self, init: RlsInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_update(mut self, update: WeightUpdate) -> Self {
        self.update = update;
        self
    }

    /// `delta = alpha (1 - lambda)`.
    pub fn delta(&self) -> f64 {
        self.ridge * (1.0 - self.forgetting)
    }

    fn validate(&self) -> Result<(), AdaptiveError> {
        check_finite_param(
            "forgetting factor",
            self.forgetting,
            self.forgetting > 0.0 && self.forgetting <= 1.0,
        )?;
        check_finite_param("ridge", self.ridge, self.ridge >= 0.0)?;
        check_finite_param("reset epsilon", self.reset_epsilon, self.reset_epsilon > 0.0)?;
        if let RlsInit::Identity { epsilon } = self.init {
            check_finite_param("initial epsilon", epsilon, epsilon > 0.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RlsState {
    cfg: RlsConfig,
    theta: DVector<f64>,
    gain: DMatrix<f64>,
    /// Correlations still being accumulated before the first invertible gain.
    pending: Option<CorrelationEstimate>,
    steps: u64,
    resets: u32,
    taylor_warnings: u64,
}

impl RlsState {
    pub fn new(dim: usize, cfg: RlsConfig) -> Result<Self, AdaptiveError> {
        cfg.validate()?;
        let (gain, pending) = match cfg.init {
            RlsInit::Identity { epsilon } => (DMatrix::identity(dim, dim) / epsilon, None),
            RlsInit::Auto if cfg.ridge > 0.0 => (DMatrix::identity(dim, dim) / cfg.ridge, None),
            RlsInit::Auto => (
                DMatrix::zeros(dim, dim),
                Some(CorrelationEstimate::new(
                    dim,
                    Averaging::Exponential {
                        forgetting: cfg.forgetting,
                    },
                )?),
            ),
        };
        Ok(Self {
            cfg,
            theta: DVector::zeros(dim),
            gain,
            pending,
            steps: 0,
            resets: 0,
            taylor_warnings: 0,
        })
    }

    /// Continues from an exact solver's current solution and gain.
    pub fn from_exact(exact: &ExactRls, cfg: RlsConfig) -> Result<Self, AdaptiveError> {
        cfg.validate()?;
        if cfg.forgetting != exact.forgetting() || cfg.ridge != exact.ridge() {
            return Err(AdaptiveError::Parameter {
                name: "warm start hyperparameters",
                value: cfg.forgetting,
            });
        }
        let gain = exact
            .gain_matrix()
            .ok_or(AdaptiveError::Singular { step: exact.steps() })?;
        Ok(Self {
            cfg,
            theta: exact.theta().clone(),
            gain,
            pending: None,
            steps: exact.steps(),
            resets: 0,
            taylor_warnings: 0,
        })
    }

    pub fn config(&self) -> &RlsConfig {
        &self.cfg
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// `K(n)`, the regularized inverse correlation matrix.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn delta(&self) -> f64 {
        self.cfg.delta()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of gain re-initializations so far.
    pub fn resets(&self) -> u32 {
        self.resets
    }

    /// Steps where `delta ||Q^-1||` exceeded [`TAYLOR_GUARD`].
    pub fn taylor_warnings(&self) -> u64 {
        self.taylor_warnings
    }

    /// True until the deferred initialization has produced a gain.
    pub fn is_pending(&self) -> bool {
        self.pending.is_some()
    }

    fn reset_gain(&mut self) {
        let d = self.theta.len();
        self.gain = DMatrix::identity(d, d) / self.cfg.reset_epsilon;
        self.resets += 1;
    }

    fn try_finish_init(&mut self) {
        let Some(p) = &self.pending else { return };
        if (p.count() as usize) < self.theta.len() {
            return;
        }
        if let Ok(theta) = linalg::solve_spd(p.ruu(), p.ryu()) {
            if let Some(ch) = p.ruu().clone().cholesky() {
                self.gain = ch.inverse();
                linalg::symmetrize(&mut self.gain);
                self.theta = theta;
                self.pending = None;
            }
        }
    }

    /// Applies one block and returns its a-priori residuals.
    ///
    /// On a non-positive lemma denominator the gain is reset to
    /// `I / reset_epsilon` (weights kept) and a `Breakdown` error reports it.
    pub fn step(&mut self, block: &Block) -> Result<DVector<f64>, AdaptiveError> {
        block.check_dim(self.theta.len())?;
        let residuals = block.residuals(&self.theta);
        if let Some(p) = &mut self.pending {
            p.update(block)?;
            self.steps += 1;
            self.try_finish_init();
            return Ok(residuals);
        }
        self.steps += 1;
        let lambda = self.cfg.forgetting;
        let delta = self.cfg.delta();
        let u = block.inputs();
        let ku = &self.gain * u;

        // S = I + (1/lambda) U^T K U
        let mut s = u.tr_mul(&ku) / lambda;
        for i in 0..s.nrows() {
            s[(i, i)] += 1.0;
        }
        let s_inv = if s.nrows() == 1 {
            let den = s[(0, 0)];
            if !(den > 0.0 && den.is_finite()) {
                return Err(self.breakdown(den));
            }
            DMatrix::from_element(1, 1, 1.0 / den)
        } else {
            match s.clone().cholesky() {
                Some(ch) => ch.inverse(),
                None => {
                    let den = s.diagonal().min();
                    return Err(self.breakdown(den));
                }
            }
        };

        let mut q_inv = &self.gain / lambda - &ku * s_inv * ku.transpose() / (lambda * lambda);
        linalg::symmetrize(&mut q_inv);

        let mut gain = if delta == 0.0 {
            q_inv
        } else {
            if delta * q_inv.lp_norm(1).max(row_sum_norm(&q_inv)) > TAYLOR_GUARD {
                self.taylor_warnings += 1;
                if self.taylor_warnings == 1 {
                    log::warn!(
                        "rls step {}: delta*||Q^-1|| > {TAYLOR_GUARD}, Taylor correction may be inaccurate",
                        self.steps
                    );
                }
            }
            let q2 = &q_inv * &q_inv;
            let mut g = &q_inv - &q2 * delta;
            if self.cfg.taylor_order == TaylorOrder::Second {
                g += &q2 * &q_inv * (delta * delta);
            }
            g
        };
        linalg::symmetrize(&mut gain);

        let mut theta = &self.theta + &gain * (u * &residuals);
        if self.cfg.update == WeightUpdate::Regularized && delta != 0.0 {
            theta -= &gain * &self.theta * delta;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(AdaptiveError::Diverged { step: self.steps });
        }
        self.theta = theta;
        self.gain = gain;

        if self.steps.is_multiple_of(PD_CHECK_INTERVAL) && self.gain.clone().cholesky().is_none() {
            log::warn!("rls step {}: gain lost positive definiteness, re-initialized", self.steps);
            self.reset_gain();
        }
        Ok(residuals)
    }

    fn breakdown(&mut self, denominator: f64) -> AdaptiveError {
        log::warn!(
            "rls step {}: lemma denominator {denominator:e} <= 0, gain re-initialized",
            self.steps
        );
        self.reset_gain();
        AdaptiveError::Breakdown {
            step: self.steps,
            denominator,
        }
    }

    pub fn snapshot(&self) -> RlsSnapshot {
        RlsSnapshot {
            forgetting: self.cfg.forgetting,
            ridge: self.cfg.ridge,
            taylor_order: self.cfg.taylor_order.order(),
            regularized_update: self.cfg.update == WeightUpdate::Regularized,
            init_epsilon: match self.cfg.init {
                RlsInit::Auto => None,
                RlsInit::Identity { epsilon } => Some(epsilon),
            },
            reset_epsilon: self.cfg.reset_epsilon,
            theta: self.theta.iter().copied().collect(),
            gain: row_major(&self.gain),
            pending: self.pending.as_ref().map(|p| PendingSnapshot {
                ruu: row_major(p.ruu()),
                ryu: p.ryu().iter().copied().collect(),
                count: p.count(),
            }),
            steps: self.steps,
            resets: self.resets,
            taylor_warnings: self.taylor_warnings,
        }
    }

    pub fn from_snapshot(s: &RlsSnapshot) -> Result<Self, AdaptiveError> {
        let dim = s.theta.len();
        if s.gain.len() != dim * dim {
            return Err(AdaptiveError::Snapshot("gain is not dim x dim"));
        }
        let cfg = RlsConfig {
            forgetting: s.forgetting,
            ridge: s.ridge,
            taylor_order: TaylorOrder::from_order(s.taylor_order)
                .ok_or(AdaptiveError::Snapshot("taylor order must be 1 or 2"))?,
            update: if s.regularized_update {
                WeightUpdate::Regularized
            } else {
                WeightUpdate::Plain
            },
            init: s.init_epsilon.map_or(RlsInit::Auto, |epsilon| RlsInit::Identity { epsilon }),
            reset_epsilon: s.reset_epsilon,
        };
        cfg.validate()?;
        let pending = match &s.pending {
            None => None,
            Some(p) => {
                if p.ruu.len() != dim * dim || p.ryu.len() != dim {
                    return Err(AdaptiveError::Snapshot("pending correlations have wrong shape"));
                }
                Some(CorrelationEstimate::from_parts(
                    Averaging::Exponential {
                        forgetting: s.forgetting,
                    },
                    DMatrix::from_row_slice(dim, dim, &p.ruu),
                    DVector::from_column_slice(&p.ryu),
                    p.count,
                ))
            }
        };
        Ok(Self {
            cfg,
            theta: DVector::from_column_slice(&s.theta),
            gain: DMatrix::from_row_slice(dim, dim, &s.gain),
            pending,
            steps: s.steps,
            resets: s.resets,
            taylor_warnings: s.taylor_warnings,
        })
    }
}

fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Plain-data image of an [`RlsState`]; restoring it continues bit-identically.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RlsSnapshot {
    pub forgetting: f64,
    pub ridge: f64,
    pub taylor_order: u8,
    pub regularized_update: bool,
    pub init_epsilon: Option<f64>,
    pub reset_epsilon: f64,
    pub theta: Vec<f64>,
    /// Row-major `dim x dim`.
    pub gain: Vec<f64>,
    pub pending: Option<PendingSnapshot>,
    pub steps: u64,
    pub resets: u32,
    pub taylor_warnings: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PendingSnapshot {
    pub ruu: Vec<f64>,
    pub ryu: Vec<f64>,
    pub count: u64,
}

/// Reference solver: exponential correlation estimates and a direct solve of
/// `(R_uu + alpha I) theta = R_yu` at every step.
#[derive(Debug, Clone)]
pub struct ExactRls {
    corr: CorrelationEstimate,
    ridge: f64,
    theta: DVector<f64>,
    steps: u64,
}

impl ExactRls {
    pub fn new(dim: usize, forgetting: f64, ridge: f64) -> Result<Self, AdaptiveError> {
        check_finite_param("forgetting factor", forgetting, forgetting > 0.0 && forgetting <= 1.0)?;
        check_finite_param("ridge", ridge, ridge >= 0.0)?;
        Ok(Self {
            corr: CorrelationEstimate::new(dim, Averaging::Exponential { forgetting })?,
            ridge,
            theta: DVector::zeros(dim),
            steps: 0,
        })
    }

    pub fn forgetting(&self) -> f64 {
        match self.corr.mode() {
            Averaging::Exponential { forgetting } => forgetting,
            Averaging::Sliding { .. } => unreachable!("exact RLS uses exponential averaging"),
        }
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn correlation(&self) -> &CorrelationEstimate {
        &self.corr
    }

    fn regularized(&self) -> DMatrix<f64> {
        let mut a = self.corr.ruu().clone();
        for i in 0..a.nrows() {
            a[(i, i)] += self.ridge;
        }
        a
    }

    /// `(R_uu + alpha I)^-1`, if it exists.
    pub fn gain_matrix(&self) -> Option<DMatrix<f64>> {
        let mut g = self.regularized().cholesky()?.inverse();
        linalg::symmetrize(&mut g);
        Some(g)
    }

    /// Applies one block and returns its a-priori residuals. While the
    /// regularized matrix is singular the weights are left unchanged.
    pub fn step(&mut self, block: &Block) -> Result<DVector<f64>, AdaptiveError> {
        block.check_dim(self.theta.len())?;
        let residuals = block.residuals(&self.theta);
        self.corr.update(block)?;
        self.steps += 1;
        match linalg::solve_spd(&self.regularized(), self.corr.ryu()) {
            Ok(theta) => {
                self.theta = theta;
                Ok(residuals)
            }
            Err(_) => Err(AdaptiveError::Singular { step: self.steps }),
        }
    }

    pub fn snapshot(&self) -> ExactRlsSnapshot {
        ExactRlsSnapshot {
            forgetting: self.forgetting(),
            ridge: self.ridge,
            ruu: row_major(self.corr.ruu()),
            ryu: self.corr.ryu().iter().copied().collect(),
            count: self.corr.count(),
            theta: self.theta.iter().copied().collect(),
            steps: self.steps,
        }
    }

    pub fn from_snapshot(s: &ExactRlsSnapshot) -> Result<Self, AdaptiveError> {
        let dim = s.theta.len();
        if s.ruu.len() != dim * dim || s.ryu.len() != dim {
            return Err(AdaptiveError::Snapshot("correlations have wrong shape"));
        }
        let mut e = Self::new(dim, s.forgetting, s.ridge)?;
        e.corr = CorrelationEstimate::from_parts(
            Averaging::Exponential {
                forgetting: s.forgetting,
            },
            DMatrix::from_row_slice(dim, dim, &s.ruu),
            DVector::from_column_slice(&s.ryu),
            s.count,
        );
        e.theta = DVector::from_column_slice(&s.theta);
        e.steps = s.steps;
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExactRlsSnapshot {
    pub forgetting: f64,
    pub ridge: f64,
    pub ruu: Vec<f64>,
    pub ryu: Vec<f64>,
    pub count: u64,
    pub theta: Vec<f64>,
    pub steps: u64,
}
