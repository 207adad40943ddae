//! Batch estimation: ridge-regularized normal equations over either basis,
//! the Bernstein basis itself, accuracy metrics and the occupancy to delay
//! conversion.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::features::{FeatureKind, FeatureVector};
use crate::linalg::{self, LinalgError};
use crate::queueing::QueueError;

/// Targets with `|y|` below this are left out of the MAPE.
pub const MAPE_MIN_TRUTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressError {
    #[error("bernstein argument {0} outside [0, 1]")]
    BasisDomain(f64),
    #[error("bernstein order must be >= 1")]
    BasisOrder,
    #[error("basis mismatch: model is {model}, features are {features}")]
    BasisMismatch { model: FeatureKind, features: FeatureKind },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no samples")]
    Empty,
    #[error("ridge must be finite and >= 0, got {0}")]
    Ridge(f64),
    #[error("theta has {got} entries, basis {kind} needs {want}")]
    ThetaArity { kind: FeatureKind, got: usize, want: usize },
    #[error("theta has non-finite entries")]
    NonFinite,
    #[error("normal equations are singular along {direction:?}; use ridge > 0")]
    Singular { direction: Vec<f64> },
    #[error("solve failed: {0}")]
    Solve(LinalgError),
    #[error("capacity and packet size must be > 0 (capacity {capacity}, packet {packet_bits})")]
    Capacity { capacity: f64, packet_bits: f64 },
    #[error("link {0} on path has no delay")]
    MissingLink(u32),
    #[error("MAPE undefined: all {0} targets are below the exclusion threshold")]
    MapeUndefined(usize),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

impl From<LinalgError> for RegressError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { direction, .. } => RegressError::Singular { direction },
            other => RegressError::Solve(other),
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    libm::round(c)
}

/// `[f_0(x), .., f_D(x)]` with `f_n(x) = C(D, n) x^n (1 - x)^(D - n)`.
///
/// Callers clamp `x` themselves; out-of-range values are rejected.
pub fn bernstein_basis(x: f64, order: u32) -> Result<FeatureVector, RegressError> {
    if order < 1 {
        return Err(RegressError::BasisOrder);
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(RegressError::BasisDomain(x));
    }
    let d = order as i32;
    let values = (0..=order)
        .map(|n| binomial(order, n) * libm::pow(x, n as f64) * libm::pow(1.0 - x, (d - n as i32) as f64))
        .collect();
    Ok(FeatureVector::new(FeatureKind::Bernstein { order }, values))
}

/// Fitted coefficients for one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    kind: FeatureKind,
    theta: Vec<f64>,
    ridge: f64,
    trained_on: usize,
}

impl ModelWeights {
    pub fn new(kind: FeatureKind, theta: Vec<f64>, ridge: f64, trained_on: usize) -> Result<Self, RegressError> {
        if theta.len() != kind.arity() {
            return Err(RegressError::ThetaArity {
                kind,
                got: theta.len(),
                want: kind.arity(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite);
        }
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(RegressError::Ridge(ridge));
        }
        Ok(Self {
            kind,
            theta,
            ridge,
            trained_on,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }
}

/// Running sums `sum u u^T`, `sum y u` and the sample count. Partial sums
/// over disjoint partitions can be merged by addition.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    kind: FeatureKind,
    uu: DMatrix<f64>,
    yu: DVector<f64>,
    count: usize,
}

impl NormalEquations {
    pub fn new(kind: FeatureKind) -> Self {
        let d = kind.arity();
        Self {
            kind,
            uu: DMatrix::zeros(d, d),
            yu: DVector::zeros(d),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, u: &FeatureVector, y: f64) -> Result<(), RegressError> {
        if u.kind() != self.kind {
            return Err(RegressError::BasisMismatch {
                model: self.kind,
                features: u.kind(),
            });
        }
        let v = u.values();
        let d = v.len();
        for i in 0..d {
            self.yu[i] += y * v[i];
            for j in i..d {
                self.uu[(i, j)] += v[i] * v[j];
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &NormalEquations) -> Result<(), RegressError> {
        if other.kind != self.kind {
            return Err(RegressError::BasisMismatch {
                model: self.kind,
                features: other.kind,
            });
        }
        self.uu += &other.uu;
        self.yu += &other.yu;
        self.count += other.count;
        Ok(())
    }

    /// Sample-averaged correlation matrix `(1/N) sum u u^T`.
    pub fn correlation(&self) -> DMatrix<f64> {
        let mut r = self.uu.clone();
        let d = r.nrows();
        for i in 0..d {
            for j in 0..i {
                r[(i, j)] = r[(j, i)];
            }
        }
        r / self.count.max(1) as f64
    }

    /// Sample-averaged cross-correlation `(1/N) sum y u`.
    pub fn cross_correlation(&self) -> DVector<f64> {
        &self.yu / self.count.max(1) as f64
    }

    /// Solves `(R_uu + ridge I) theta = R_yu`.
    pub fn solve(&self, ridge: f64) -> Result<ModelWeights, RegressError> {
        if self.count == 0 {
            return Err(RegressError::Empty);
        }
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(RegressError::Ridge(ridge));
        }
        let mut a = self.correlation();
        for i in 0..a.nrows() {
            a[(i, i)] += ridge;
        }
        let b = self.cross_correlation();
        // An all-zero right-hand side has the exact solution zero.
        let theta = if b.iter().all(|&v| v == 0.0) && ridge > 0.0 {
            DVector::zeros(b.len())
        } else {
            linalg::solve_spd(&a, &b)?
        };
        ModelWeights::new(self.kind, theta.iter().copied().collect(), ridge, self.count)
    }
}

/// Ridge fit of `targets` on `rows` with sample-averaged correlations.
pub fn fit_ridge(rows: &[FeatureVector], targets: &[f64], ridge: f64) -> Result<ModelWeights, RegressError> {
    if rows.len() != targets.len() {
        return Err(RegressError::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    let first = rows.first().ok_or(RegressError::Empty)?;
    let mut ne = NormalEquations::new(first.kind());
    for (u, &y) in rows.iter().zip(targets) {
        ne.add(u, y)?;
    }
    ne.solve(ridge)
}

/// `theta^T u`.
pub fn predict_occupancy(w: &ModelWeights, u: &FeatureVector) -> Result<f64, RegressError> {
    if w.kind != u.kind() {
        return Err(RegressError::BasisMismatch {
            model: w.kind,
            features: u.kind(),
        });
    }
    Ok(w.theta.iter().zip(u.values()).map(|(a, b)| a * b).sum())
}

/// Link delay from predicted occupancy: `y * E|P| / c`.
pub fn delay_from_occupancy(occupancy: f64, mean_packet_bits: f64, capacity: f64) -> Result<f64, RegressError> {
    if !(capacity > 0.0 && mean_packet_bits > 0.0) {
        return Err(RegressError::Capacity {
            capacity,
            packet_bits: mean_packet_bits,
        });
    }
    Ok(occupancy * mean_packet_bits / capacity)
}

/// Sum of per-link delays along `path`.
pub fn aggregate_path_delay(link_delays: &BTreeMap<u32, f64>, path: &[u32]) -> Result<f64, RegressError> {
    path.iter().try_fold(0.0, |acc, link| {
        link_delays
            .get(link)
            .map(|d| acc + d)
            .ok_or(RegressError::MissingLink(*link))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapeReport {
    /// Percent, e.g. `10.0` for 10%.
    pub percent: f64,
    pub used: usize,
    pub excluded: usize,
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<(), RegressError> {
    if pred.len() != truth.len() {
        return Err(RegressError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(RegressError::Empty);
    }
    Ok(())
}

/// Mean absolute percentage error over targets with `|y| >= 1e-6`.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<MapeReport, RegressError> {
    check_lengths(pred, truth)?;
    let mut acc = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if t.abs() >= MAPE_MIN_TRUTH {
            acc += ((p - t) / t).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(RegressError::MapeUndefined(pred.len()));
    }
    Ok(MapeReport {
        percent: 100.0 * acc / used as f64,
        used,
        excluded: pred.len() - used,
    })
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, RegressError> {
    check_lengths(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}
