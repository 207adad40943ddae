use alloc::vec::Vec;

use super::{derive_seed, simulate_link, LinkSample, NetsimError, ScenarioConfig, Topology, TrafficMatrix};
use crate::queueing::QueueParams;

const TOPOLOGY_STREAM: u64 = 0;
const TRAFFIC_STREAM: u64 = 1;
const LINK_STREAM: u64 = 2;

/// One `(traffic matrix, snapshot)` pair; simulates every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Job {
    pub scenario: u32,
    pub snapshot: u32,
}

/// A planned campaign: the shared topology and one traffic matrix per
/// scenario. Jobs are independent and may run in any order or in parallel.
#[derive(Debug, Clone)]
pub struct Campaign {
    config: ScenarioConfig,
    topology: Topology,
    traffic: Vec<TrafficMatrix>,
    loads: Vec<Vec<f64>>,
    buffer_slots: u32,
}

impl Campaign {
    pub fn new(config: ScenarioConfig) -> Result<Self, NetsimError> {
        config.validate()?;
        let topology = Topology::random(
            config.node_count,
            config.link_count,
            derive_seed(config.rng_seed, &[TOPOLOGY_STREAM]),
        )?;
        let traffic: Vec<TrafficMatrix> = (0..config.traffic_matrix_count)
            .map(|s| {
                TrafficMatrix::random(
                    config.node_count,
                    config.max_flow_rate,
                    config.flow_probability,
                    derive_seed(config.rng_seed, &[TRAFFIC_STREAM, s as u64]),
                )
            })
            .collect();
        let loads = traffic.iter().map(|m| m.link_loads(&topology)).collect();
        let buffer_slots = config.buffer_slots()?;
        Ok(Self {
            config,
            topology,
            traffic,
            loads,
            buffer_slots,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn traffic(&self, scenario: u32) -> &TrafficMatrix {
        &self.traffic[scenario as usize]
    }

    /// Offered bit rate per link under a scenario's traffic matrix.
    pub fn link_loads(&self, scenario: u32) -> &[f64] {
        &self.loads[scenario as usize]
    }

    pub fn buffer_slots(&self) -> u32 {
        self.buffer_slots
    }

    pub fn job_count(&self) -> usize {
        self.config.traffic_matrix_count as usize * self.config.snapshots as usize
    }

    /// Jobs in output order: scenario-major, then snapshot.
    pub fn jobs(&self) -> impl Iterator<Item = Job> + '_ {
        (0..self.config.traffic_matrix_count)
            .flat_map(move |scenario| (0..self.config.snapshots).map(move |snapshot| Job { scenario, snapshot }))
    }

    /// Simulates one snapshot; returns one `(sample, low_confidence)` per link.
    pub fn simulate(&self, job: Job) -> Result<Vec<(LinkSample, bool)>, NetsimError> {
        let cfg = &self.config;
        let sizes = cfg.sizes();
        let loads = &self.loads[job.scenario as usize];
        (0..cfg.link_count)
            .map(|link| {
                let capacity = cfg.link_capacity(job.snapshot, link);
                let seed = derive_seed(
                    cfg.rng_seed,
                    &[LINK_STREAM, job.scenario as u64, job.snapshot as u64, link as u64],
                );
                let out = simulate_link(
                    loads[link as usize] / cfg.mean_packet_bits,
                    capacity,
                    sizes,
                    cfg.buffer_bits,
                    cfg.snapshot_duration,
                    cfg.warmup,
                    seed,
                )?;
                let params = QueueParams::new(
                    out.arrival_rate,
                    out.effective_arrival_rate,
                    capacity / out.mean_packet_bits,
                    out.buffer_slots,
                )?;
                let sample = LinkSample {
                    scenario_id: job.scenario,
                    snapshot_id: job.snapshot,
                    link_id: link,
                    capacity,
                    mean_packet_bits: out.mean_packet_bits,
                    params,
                    occupancy: out.occupancy,
                    delay: out.delay,
                    blocked_fraction: out.blocked_fraction,
                };
                Ok((sample, out.low_confidence()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignResult {
    pub samples: Vec<LinkSample>,
    /// Indices into `samples` with fewer than the minimum accepted packets.
    pub low_confidence: Vec<usize>,
}

impl CampaignResult {
    /// Concatenates per-job outputs in the given order.
    pub fn collect<I: IntoIterator<Item = Vec<(LinkSample, bool)>>>(jobs: I) -> Self {
        let mut r = Self::default();
        for job in jobs {
            for (s, low) in job {
                if low {
                    r.low_confidence.push(r.samples.len());
                }
                r.samples.push(s);
            }
        }
        r
    }
}

/// Runs every job sequentially.
pub fn run_campaign(config: &ScenarioConfig) -> Result<CampaignResult, NetsimError> {
    let campaign = Campaign::new(config.clone())?;
    let outputs = campaign.jobs().map(|j| campaign.simulate(j)).collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignResult::collect(outputs))
}
