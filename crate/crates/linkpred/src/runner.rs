//! Parallel campaign execution.

use linkpred_core::netsim::{Campaign, CampaignResult, Job, NetsimError, ScenarioConfig};
use rayon::prelude::*;

/// Runs every `(scenario, snapshot)` job on a rayon pool. Each simulation
/// seeds its own stream from its identifiers, so the result equals
/// [`linkpred_core::netsim::run_campaign`] regardless of thread count.
pub fn run_campaign_parallel(config: &ScenarioConfig, threads: Option<usize>) -> Result<CampaignResult, NetsimError> {
    let campaign = Campaign::new(config.clone())?;
    let jobs: Vec<Job> = campaign.jobs().collect();
    let run = || jobs.par_iter().map(|&j| campaign.simulate(j)).collect::<Result<Vec<_>, _>>();
    let outputs = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                run()
            }
        },
        None => run(),
    }?;
    Ok(CampaignResult::collect(outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use linkpred_core::netsim::run_campaign;

    #[test]
    fn parallel_equals_serial() {
        let cfg = ScenarioConfig {
            traffic_matrix_count: 3,
            snapshots: 4,
            snapshot_duration: 40.0,
            warmup: 4.0,
            ..ScenarioConfig::full_scale()
        };
        let serial = run_campaign(&cfg).unwrap();
        for threads in [Some(1), Some(3), None] {
            assert_eq!(run_campaign_parallel(&cfg, threads).unwrap(), serial);
        }
    }
}
