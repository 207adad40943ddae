//! Closed-form M/M/1/K analytics and the four queue-theoretic regression
//! features.
//!
//! All functions are pure. Utilization close to one (`|rho - 1| < 1e-9`)
//! switches to the analytic limits of the geometric sums.

use alloc::vec::Vec;
use thiserror::Error;

use crate::features::{FeatureKind, FeatureVector};

/// Distance from `rho = 1` under which the uniform-limit branch is used.
pub const SATURATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QueueError {
    #[error("arrival rate must be finite and >= 0, got {0}")]
    ArrivalRate(f64),
    #[error("effective arrival rate must lie in [0, arrival rate], got {effective} (arrival {arrival})")]
    EffectiveArrivalRate { effective: f64, arrival: f64 },
    #[error("service rate must be finite and > 0, got {0}")]
    ServiceRate(f64),
    #[error("buffer must hold at least one packet, got {0}")]
    BufferSlots(u32),
    #[error("utilization must be > 0 for queue features, got {0}")]
    Utilization(f64),
}

/// Per-link M/M/1/K parameters. Rates are in packets per second and
/// `buffer_slots` is the system capacity K in packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    arrival_rate: f64,
    effective_arrival_rate: f64,
    service_rate: f64,
    buffer_slots: u32,
}

impl QueueParams {
    /// Builds validated parameters. A zero arrival rate is accepted and
    /// represents an idle link (the empty-system limit).
    pub fn new(
        arrival_rate: f64,
        effective_arrival_rate: f64,
        service_rate: f64,
        buffer_slots: u32,
    ) -> Result<Self, QueueError> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(QueueError::ArrivalRate(arrival_rate));
        }
        if !(effective_arrival_rate.is_finite()
            && effective_arrival_rate >= 0.0
            && effective_arrival_rate <= arrival_rate)
        {
            return Err(QueueError::EffectiveArrivalRate {
                effective: effective_arrival_rate,
                arrival: arrival_rate,
            });
        }
        if !(service_rate.is_finite() && service_rate > 0.0) {
            return Err(QueueError::ServiceRate(service_rate));
        }
        if buffer_slots < 1 {
            return Err(QueueError::BufferSlots(buffer_slots));
        }
        Ok(Self {
            arrival_rate,
            effective_arrival_rate,
            service_rate,
            buffer_slots,
        })
    }

    /// Parameters where every arrival is accepted (`lambda_e = lambda`).
    pub fn lossless(arrival_rate: f64, service_rate: f64, buffer_slots: u32) -> Result<Self, QueueError> {
        Self::new(arrival_rate, arrival_rate, service_rate, buffer_slots)
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn effective_arrival_rate(&self) -> f64 {
        self.effective_arrival_rate
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    pub fn buffer_slots(&self) -> u32 {
        self.buffer_slots
    }

    /// Offered utilization `lambda / mu`.
    pub fn utilization(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// Effective utilization `lambda_e / mu`, clamped to `[0, 1]`.
    pub fn effective_utilization(&self) -> f64 {
        (self.effective_arrival_rate / self.service_rate).clamp(0.0, 1.0)
    }
}

fn is_saturated(rho: f64) -> bool {
    (rho - 1.0).abs() < SATURATION_EPS
}

/// Stationary distribution `pi_0..pi_K` of the birth-death chain.
///
/// For `rho > 1` the geometric terms are evaluated from the full-buffer end
/// (`pi_k = pi_K * rho^(k-K)`) so large utilizations do not overflow.
pub fn steady_state_distribution(p: &QueueParams) -> Vec<f64> {
    let k = p.buffer_slots as i32;
    let rho = p.utilization();
    let n = (k + 1) as usize;
    if rho == 0.0 {
        let mut pi = alloc::vec![0.0; n];
        pi[0] = 1.0;
        return pi;
    }
    if is_saturated(rho) {
        return alloc::vec![1.0 / n as f64; n];
    }
    if rho < 1.0 {
        let pi0 = (1.0 - rho) / (1.0 - libm::pow(rho, (k + 1) as f64));
        (0..=k).map(|i| pi0 * libm::pow(rho, i as f64)).collect()
    } else {
        let r = rho.recip();
        let pik = (1.0 - r) / (1.0 - libm::pow(r, (k + 1) as f64));
        (0..=k).map(|i| pik * libm::pow(r, (k - i) as f64)).collect()
    }
}

/// Probability that the system is full, `pi_K`: the fraction of arrivals
/// dropped in steady state.
pub fn blocking_probability(p: &QueueParams) -> f64 {
    *steady_state_distribution(p)
        .last()
        .expect("distribution has K+1 >= 2 entries")
}

/// Textbook mean number in system, `sum k * pi_k`.
pub fn expected_occupancy(p: &QueueParams) -> f64 {
    steady_state_distribution(p)
        .iter()
        .enumerate()
        .map(|(k, pi)| k as f64 * pi)
        .sum()
}

/// Mean sojourn time of accepted packets by Little's law,
/// `E[N] / (lambda * (1 - pi_K))`. Zero for an idle link.
pub fn expected_delay(p: &QueueParams) -> f64 {
    let pi = steady_state_distribution(p);
    let accepted = p.arrival_rate() * (1.0 - pi[pi.len() - 1]);
    if accepted == 0.0 {
        return 0.0;
    }
    let mean: f64 = pi.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    mean / accepted
}

/// `sum_{k=0}^{K} k x^k`.
fn weighted_geometric_sum(x: f64, k: u32) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for i in 1..=k {
        pow *= x;
        acc += i as f64 * pow;
    }
    acc
}

/// The four queue features, in model order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueFeatures {
    /// Probability of an empty system.
    pub empty_probability: f64,
    /// `rho + pi_0 * sum k rho^k`.
    pub load: f64,
    /// Effective utilization, clamped to `[0, 1]`.
    pub effective_utilization: f64,
    /// `sum k rho_e^k`, the unnormalized effective occupancy.
    pub effective_sum: f64,
}

impl QueueFeatures {
    pub fn from_params(p: &QueueParams) -> Result<Self, QueueError> {
        let rho = p.utilization();
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(QueueError::Utilization(rho));
        }
        let k = p.buffer_slots;
        let rho_e = p.effective_utilization();
        if rho == 0.0 {
            return Ok(Self {
                empty_probability: 1.0,
                load: 0.0,
                effective_utilization: rho_e,
                effective_sum: weighted_geometric_sum(rho_e, k),
            });
        }
        let pi = steady_state_distribution(p);
        // pi_0 * sum k rho^k is exactly sum k pi_k.
        let mean: f64 = pi.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
        Ok(Self {
            empty_probability: pi[0],
            load: rho + mean,
            effective_utilization: rho_e,
            effective_sum: weighted_geometric_sum(rho_e, k),
        })
    }

    /// `[1, pi_0, L, rho_e, S_e]`.
    pub fn to_vector(&self) -> FeatureVector {
        FeatureVector::new(
            FeatureKind::QueueFeatures,
            alloc::vec![
                1.0,
                self.empty_probability,
                self.load,
                self.effective_utilization,
                self.effective_sum,
            ],
        )
    }
}

/// Regression input `[1, pi_0, L, rho_e, S_e]` for the linear queue model.
pub fn compute_features(p: &QueueParams) -> Result<FeatureVector, QueueError> {
    QueueFeatures::from_params(p).map(|f| f.to_vector())
}
