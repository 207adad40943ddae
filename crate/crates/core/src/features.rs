//! Regression inputs and the basis that produced them.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::queueing::{self, QueueParams};
use crate::regress::{self, RegressError};

/// Which basis a feature vector (or a weight vector) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// `[1, pi_0, L, rho_e, S_e]`.
    QueueFeatures,
    /// Bernstein polynomials of the given order evaluated at `rho_e`.
    Bernstein { order: u32 },
}

impl FeatureKind {
    /// Default Bernstein order used by the curve model.
    pub const DEFAULT_BERNSTEIN_ORDER: u32 = 8;

    pub fn arity(&self) -> usize {
        match *self {
            FeatureKind::QueueFeatures => 5,
            FeatureKind::Bernstein { order } => order as usize + 1,
        }
    }

    /// Evaluates this basis on a link's queue parameters. The Bernstein
    /// basis is evaluated at the clamped effective utilization.
    pub fn evaluate(&self, params: &QueueParams) -> Result<FeatureVector, RegressError> {
        match *self {
            FeatureKind::QueueFeatures => Ok(queueing::compute_features(params)?),
            FeatureKind::Bernstein { order } => {
                regress::bernstein_basis(params.effective_utilization(), order)
            }
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::QueueFeatures => f.write_str("linear4"),
            FeatureKind::Bernstein { order } => write!(f, "bernstein:{order}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown basis `{0}` (expected `linear4` or `bernstein:<order>`)")]
pub struct ParseBasisError(pub alloc::string::String);

impl FromStr for FeatureKind {
    type Err = ParseBasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseBasisError(s.into());
        match s {
            "linear4" => Ok(FeatureKind::QueueFeatures),
            "bernstein" => Ok(FeatureKind::Bernstein {
                order: Self::DEFAULT_BERNSTEIN_ORDER,
            }),
            _ => {
                let order = s.strip_prefix("bernstein:").ok_or_else(err)?;
                let order: u32 = order.parse().map_err(|_| err())?;
                if order == 0 {
                    return Err(err());
                }
                Ok(FeatureKind::Bernstein { order })
            }
        }
    }
}

/// An ordered feature vector tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    kind: FeatureKind,
    values: Vec<f64>,
}

impl FeatureVector {
    /// # Panics
    /// If the length does not match the basis arity.
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), kind.arity(), "feature length does not match {kind}");
        Self { kind, values }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
