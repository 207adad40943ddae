use linkpred_core::netsim::{self, run_campaign, simulate_link, CapacityProfile, PacketSizes, ScenarioConfig};
use linkpred_core::queueing::{self, QueueParams};

/// Long-run simulation of an M/M/1/K queue with mu = 1 packet/s.
fn simulate(rho: f64, k: u32, arrivals: f64, seed: u64) -> netsim::SimOutput {
    let bits = 1000.0;
    let duration = arrivals / rho;
    simulate_link(
        rho,
        bits,
        PacketSizes::exponential(bits),
        bits * k as f64 + 0.5,
        duration * 1.1,
        duration * 0.1,
        seed,
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn long_run_matches_closed_form() {
    for rho in [0.2, 0.7, 1.0, 1.5] {
        for k in [2, 5, 10] {
            let s = simulate(rho, k, 1e6, 1000 + k as u64);
            let p = QueueParams::lossless(rho, 1.0, k).unwrap();
            let occupancy = queueing::expected_occupancy(&p);
            let blocking = queueing::blocking_probability(&p);
            let delay = queueing::expected_delay(&p);
            assert!(rel(s.occupancy, occupancy) < 0.02, "rho {rho} K {k}: N {} vs {occupancy}", s.occupancy);
            assert!(rel(s.delay, delay) < 0.02, "rho {rho} K {k}: d {} vs {delay}", s.delay);
            if blocking > 0.01 {
                assert!(
                    rel(s.blocked_fraction, blocking) < 0.02,
                    "rho {rho} K {k}: pK {} vs {blocking}",
                    s.blocked_fraction
                );
            }
            assert_eq!(s.arrivals, s.accepted + s.blocked);
        }
    }
}

#[test]
fn constant_sizes_are_not_markovian() {
    // M/D/1/K has a smaller queue than M/M/1/K at the same load.
    let p = QueueParams::lossless(0.8, 1.0, 10).unwrap();
    let d = simulate_link(0.8, 1000.0, PacketSizes::constant(1000.0), 10_000.5, 2e5, 1e4, 5).unwrap();
    assert!(d.occupancy < 0.8 * queueing::expected_occupancy(&p));
}

#[test]
fn sigmoid_campaign_histogram_is_u_shaped() {
    let cfg = ScenarioConfig {
        traffic_matrix_count: 1,
        snapshot_duration: 20.0,
        warmup: 2.0,
        ..ScenarioConfig::full_scale()
    };
    let r = run_campaign(&cfg).unwrap();
    assert_eq!(r.samples.len() as u64, cfg.sample_count());
    let count = |c: f64| r.samples.iter().filter(|s| s.capacity == c).count();
    let (hi, lo) = (count(49_000.0), count(11_000.0));
    let middle = r.samples.len() - hi - lo;
    assert!(hi > 10 * 30 && lo > 10 * 30, "{hi} {lo}");
    // every interior level is rarer than either mode
    for level in netsim::default_capacity_levels() {
        if level != 49_000.0 && level != 11_000.0 {
            assert!(count(level) < hi.min(lo), "level {level}");
        }
    }
    assert!(middle < hi + lo);
    for s in &r.samples {
        s.validate().unwrap();
    }
}

#[test]
fn constant_profile_campaign() {
    let cfg = ScenarioConfig {
        node_count: 4,
        link_count: 6,
        traffic_matrix_count: 2,
        snapshots: 3,
        snapshot_duration: 20.0,
        warmup: 2.0,
        capacity: CapacityProfile::Constant { capacity: 30_000.0 },
        ..ScenarioConfig::full_scale()
    };
    let r = run_campaign(&cfg).unwrap();
    assert_eq!(r.samples.len(), 36);
    assert!(r.samples.iter().all(|s| s.capacity == 30_000.0));
}
