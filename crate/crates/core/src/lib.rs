//! Link-level occupancy and latency prediction.
//!
//! * [`queueing`]: closed-form M/M/1/K analytics and the queue feature bank.
//! * [`regress`]: batch ridge fits, the Bernstein basis and accuracy metrics.
//! * [`adaptive`]: streaming correlation estimates, LMS, regularized RLS and
//!   residual monitoring.
//! * [`netsim`]: an event-driven M/M/1/K link simulator and the campaign
//!   machinery that turns topologies and traffic matrices into samples.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod features;
pub mod linalg;
pub mod netsim;
pub mod queueing;
pub mod regress;

pub use features::{FeatureKind, FeatureVector};
pub use queueing::QueueParams;
pub use regress::ModelWeights;
