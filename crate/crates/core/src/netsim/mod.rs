//! Ground-truth data generation.
//!
//! [`simulate_link`] is an event-driven M/M/1/K queue. [`Campaign`] draws a
//! random strongly connected topology, one traffic matrix per scenario and a
//! capacity per snapshot, and simulates every link of every snapshot.

use alloc::vec::Vec;
use thiserror::Error;

use crate::queueing::{QueueError, QueueParams};

mod campaign;
mod sim;
mod topology;

pub use campaign::{run_campaign, Campaign, CampaignResult, Job};
pub use sim::{simulate_link, SimOutput};
pub use topology::{Topology, TrafficMatrix};

/// Samples accepted by the simulator below which a sample is low-confidence.
pub const MIN_ACCEPTED: u64 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetsimError {
    #[error("invalid {name}: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("capacity level index must be in 1..=39, got {0}")]
    LevelIndex(u32),
    #[error("buffer of {buffer_bits} bits holds no packet of mean size {mean_bits}")]
    EmptyBuffer { buffer_bits: f64, mean_bits: f64 },
    #[error("topology: {0}")]
    Topology(&'static str),
    #[error("capacity factors: expected {expected}, got {got}")]
    CapacityFactors { expected: usize, got: usize },
    #[error("sample field `{field}` is invalid: {value}")]
    Sample { field: &'static str, value: f64 },
    #[error(transparent)]
    Queue(#[from] QueueError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, NetsimError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(NetsimError::Parameter { name, value })
    }
}

/// Link capacity for one of the 39 jamming levels: `(50 - index)` kbit/s.
pub fn capacity_level(index: u32) -> Result<f64, NetsimError> {
    if !(1..=39).contains(&index) {
        return Err(NetsimError::LevelIndex(index));
    }
    Ok((50 - index) as f64 * 1000.0)
}

/// All 39 levels, from 49 kbit/s down to 11 kbit/s.
pub fn default_capacity_levels() -> Vec<f64> {
    (1..=39).map(|i| (50 - i) as f64 * 1000.0).collect()
}

/// Logistic capacity drop between two plateaus.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JammingProfile {
    pub pre_capacity: f64,
    pub post_capacity: f64,
    /// Snapshot index of the midpoint.
    pub midpoint: f64,
    /// Width of the transition in snapshots.
    pub steepness: f64,
}

impl JammingProfile {
    pub fn validate(&self) -> Result<(), NetsimError> {
        positive("pre capacity", self.pre_capacity)?;
        positive("post capacity", self.post_capacity)?;
        positive("steepness", self.steepness)?;
        if !self.midpoint.is_finite() {
            return Err(NetsimError::Parameter {
                name: "midpoint",
                value: self.midpoint,
            });
        }
        Ok(())
    }
}

/// `pre - (pre - post) * sigma((snapshot - midpoint) / steepness)`.
pub fn sigmoid_capacity(profile: &JammingProfile, snapshot: f64) -> f64 {
    let z = (snapshot - profile.midpoint) / profile.steepness;
    let s = 1.0 / (1.0 + libm::exp(-z));
    profile.pre_capacity - (profile.pre_capacity - profile.post_capacity) * s
}

/// Capacity of every link as a function of the snapshot index.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CapacityProfile {
    Constant { capacity: f64 },
    Sigmoid(JammingProfile),
}

impl CapacityProfile {
    pub fn at(&self, snapshot: u32) -> f64 {
        match self {
            CapacityProfile::Constant { capacity } => *capacity,
            CapacityProfile::Sigmoid(p) => sigmoid_capacity(p, snapshot as f64),
        }
    }

    fn validate(&self) -> Result<(), NetsimError> {
        match self {
            CapacityProfile::Constant { capacity } => positive("capacity", *capacity).map(|_| ()),
            CapacityProfile::Sigmoid(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PacketSizeKind {
    Exponential,
    Constant,
}

/// Packet size distribution in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSizes {
    pub kind: PacketSizeKind,
    pub mean_bits: f64,
}

impl PacketSizes {
    pub fn exponential(mean_bits: f64) -> Self {
        Self {
            kind: PacketSizeKind::Exponential,
            mean_bits,
        }
    }

    pub fn constant(bits: f64) -> Self {
        Self {
            kind: PacketSizeKind::Constant,
            mean_bits: bits,
        }
    }

    /// `K = floor(buffer_bits / mean_bits)`.
    pub fn buffer_slots(&self, buffer_bits: f64) -> Result<u32, NetsimError> {
        positive("buffer bits", buffer_bits)?;
        positive("mean packet bits", self.mean_bits)?;
        let k = libm::floor(buffer_bits / self.mean_bits);
        if k < 1.0 {
            return Err(NetsimError::EmptyBuffer {
                buffer_bits,
                mean_bits: self.mean_bits,
            });
        }
        Ok(k.min(u32::MAX as f64) as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub node_count: u32,
    /// Directed links; each one is an independent queue.
    pub link_count: u32,
    pub buffer_bits: f64,
    /// Upper bound of the uniform per-flow rate in bit/s.
    pub max_flow_rate: f64,
    pub mean_packet_bits: f64,
    pub packet_sizes: PacketSizeKind,
    /// Capacities a link can take; profile values snap to the nearest one.
    pub capacity_levels: Vec<f64>,
    pub capacity: CapacityProfile,
    /// Optional per-link multipliers applied after snapping.
    pub capacity_factors: Option<Vec<f64>>,
    pub traffic_matrix_count: u32,
    pub snapshots: u32,
    pub snapshot_duration: f64,
    /// Discarded start of each snapshot, in seconds.
    pub warmup: f64,
    /// Probability that an ordered node pair carries a flow.
    pub flow_probability: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ScenarioConfig {
    /// 100 traffic matrices x 119 snapshots on a 10-node, 30-link graph with
    /// a 49 -> 11 kbit/s jamming drop.
    pub fn full_scale() -> Self {
        Self {
            node_count: 10,
            link_count: 30,
            buffer_bits: 8000.0,
            max_flow_rate: 4000.0,
            mean_packet_bits: 1000.0,
            packet_sizes: PacketSizeKind::Exponential,
            capacity_levels: default_capacity_levels(),
            capacity: CapacityProfile::Sigmoid(JammingProfile {
                pre_capacity: 49_000.0,
                post_capacity: 11_000.0,
                midpoint: 59.0,
                steepness: 2.0,
            }),
            capacity_factors: None,
            traffic_matrix_count: 100,
            snapshots: 119,
            snapshot_duration: 200.0,
            warmup: 20.0,
            flow_probability: 1.0,
            rng_seed: 1,
        }
    }

    pub fn sizes(&self) -> PacketSizes {
        PacketSizes {
            kind: self.packet_sizes,
            mean_bits: self.mean_packet_bits,
        }
    }

    pub fn buffer_slots(&self) -> Result<u32, NetsimError> {
        self.sizes().buffer_slots(self.buffer_bits)
    }

    pub fn sample_count(&self) -> u64 {
        self.traffic_matrix_count as u64 * self.snapshots as u64 * self.link_count as u64
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        positive("max flow rate", self.max_flow_rate)?;
        positive("snapshot duration", self.snapshot_duration)?;
        self.buffer_slots()?;
        if !(self.warmup.is_finite() && self.warmup >= 0.0 && self.warmup < self.snapshot_duration) {
            return Err(NetsimError::Parameter {
                name: "warmup",
                value: self.warmup,
            });
        }
        if !(self.flow_probability > 0.0 && self.flow_probability <= 1.0) {
            return Err(NetsimError::Parameter {
                name: "flow probability",
                value: self.flow_probability,
            });
        }
        if self.capacity_levels.is_empty() {
            return Err(NetsimError::Parameter {
                name: "capacity level count",
                value: 0.0,
            });
        }
        for &c in &self.capacity_levels {
            positive("capacity level", c)?;
        }
        self.capacity.validate()?;
        if let Some(f) = &self.capacity_factors {
            if f.len() != self.link_count as usize {
                return Err(NetsimError::CapacityFactors {
                    expected: self.link_count as usize,
                    got: f.len(),
                });
            }
            for &v in f {
                positive("capacity factor", v)?;
            }
        }
        for (name, v) in [
            ("traffic matrix count", self.traffic_matrix_count),
            ("snapshot count", self.snapshots),
        ] {
            if v == 0 {
                return Err(NetsimError::Parameter { name, value: 0.0 });
            }
        }
        topology::check_shape(self.node_count, self.link_count)
    }

    /// Profile capacity snapped to the nearest configured level.
    pub fn snapshot_capacity(&self, snapshot: u32) -> f64 {
        let target = self.capacity.at(snapshot);
        let mut best = self.capacity_levels[0];
        for &c in &self.capacity_levels[1..] {
            if (c - target).abs() < (best - target).abs() {
                best = c;
            }
        }
        best
    }

    pub fn link_capacity(&self, snapshot: u32, link: u32) -> f64 {
        let base = self.snapshot_capacity(snapshot);
        match &self.capacity_factors {
            Some(f) => base * f[link as usize],
            None => base,
        }
    }
}

/// One simulated link in one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub scenario_id: u32,
    pub snapshot_id: u32,
    pub link_id: u32,
    pub capacity: f64,
    /// Observed mean size of the transmitted packets.
    pub mean_packet_bits: f64,
    /// Observed `lambda`, `lambda_e`, `mu = capacity / mean_packet_bits` and K.
    pub params: QueueParams,
    /// Time-averaged number of packets in the system.
    pub occupancy: f64,
    /// Mean sojourn time of accepted packets in seconds.
    pub delay: f64,
    pub blocked_fraction: f64,
}

impl LinkSample {
    /// Relative tolerance on `mu * mean_packet_bits = capacity`.
    pub const SERVICE_RATE_TOL: f64 = 1e-9;

    /// `occupancy / K`.
    pub fn occupancy_norm(&self) -> f64 {
        self.occupancy / self.params.buffer_slots() as f64
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let bad = |field, value| Err(NetsimError::Sample { field, value });
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return bad("capacity_bps", self.capacity);
        }
        if !(self.mean_packet_bits.is_finite() && self.mean_packet_bits > 0.0) {
            return bad("mean_packet_bits", self.mean_packet_bits);
        }
        let k = self.params.buffer_slots() as f64;
        if !(self.occupancy >= 0.0 && self.occupancy <= k) {
            return bad("occupancy_pkts", self.occupancy);
        }
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return bad("delay_s", self.delay);
        }
        if !(0.0..=1.0).contains(&self.blocked_fraction) {
            return bad("blocked_fraction", self.blocked_fraction);
        }
        let mu = self.params.service_rate();
        if (mu * self.mean_packet_bits - self.capacity).abs() > Self::SERVICE_RATE_TOL * self.capacity {
            return bad("service_rate_pps", mu);
        }
        Ok(())
    }
}

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for a tuple of identifiers.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)))
}
