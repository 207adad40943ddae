//! End-to-end acceptance checks. Run with
//! `cargo test -p linkpred --test acceptance -- --nocapture`.
//!
//! Each criterion prints one `PASS`/`FAIL` line followed by its measurements.
//! The process exits non-zero when any criterion fails.

use std::time::Instant;

use linkpred::dataset::{read_dataset, write_dataset};
use linkpred::fit::{self, RIDGE_GRID};
use linkpred::runner::run_campaign_parallel;
use linkpred::stream::{EstimatorSpec, StreamConfig, Streamer, TraceWriter};
use linkpred_core::adaptive::{
    batch_equivalent_ridge, AdaptiveError, Block, ExactRls, MonitorConfig, RlsConfig, RlsState, TaylorOrder,
};
use linkpred_core::netsim::{simulate_link, LinkSample, PacketSizes, ScenarioConfig};
use linkpred_core::queueing::{self, QueueParams};
use linkpred_core::regress::{self, bernstein_basis, fit_ridge};
use linkpred_core::{FeatureKind, FeatureVector};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const BERNSTEIN: FeatureKind = FeatureKind::Bernstein { order: 8 };

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a / b - 1.0).abs()
    }
}

fn rel_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn gaussian_rows(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..dim).map(|i| 1.0 - 0.5 * i as f64).collect();
    (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let e: f64 = rng.sample(StandardNormal);
            let y = u.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + 0.1 * e;
            (u, y)
        })
        .unzip()
}

fn tagged(rows: &[Vec<f64>], kind: FeatureKind) -> Vec<FeatureVector> {
    rows.iter()
        .map(|r| FeatureVector::new(kind, r.clone()))
        .collect()
}

/// Stationary distribution of the birth-death chain by an LU solve of
/// `pi Q = 0` with one balance equation replaced by `sum(pi) = 1`.
fn birth_death_lu(lambda: f64, mu: f64, k: usize) -> DVector<f64> {
    let n = k + 1;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            q[(i, i + 1)] = lambda;
            q[(i, i)] -= lambda;
        }
        if i > 0 {
            q[(i, i - 1)] = mu;
            q[(i, i)] -= mu;
        }
    }
    let mut a = q.transpose();
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("generator with normalization is invertible")
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let lambda = rng.random_range(0.01..10.0);
        let mu = rng.random_range(0.1..10.0);
        let k = rng.random_range(1..=10u32);
        let p = QueueParams::lossless(lambda, mu, k).unwrap();
        let closed = queueing::steady_state_distribution(&p);
        let lu = birth_death_lu(lambda, mu, k as usize);
        for (a, b) in closed.iter().zip(lu.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(worst <= 1e-9, format!("max |pi_closed - pi_lu| = {worst:.3e} (tol 1e-9)"));
    o.check(secs < 1.0, format!("runtime {secs:.3} s (limit 1 s)"));
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let bits = 1000.0;
    let arrivals = 1e6;
    for rho in [0.5, 1.0, 1.5] {
        for k in [4u32, 8, 16] {
            let p = QueueParams::lossless(rho, 1.0, k).unwrap();
            let (n, pk, d) = (
                queueing::expected_occupancy(&p),
                queueing::blocking_probability(&p),
                queueing::expected_delay(&p),
            );
            let mut good = [0usize; 3];
            let mut worst = [0.0f64; 3];
            for seed in 1..=20u64 {
                let duration = arrivals / rho;
                let s = simulate_link(
                    rho,
                    bits,
                    PacketSizes::exponential(bits),
                    bits * k as f64 + 0.5,
                    duration * 1.1,
                    duration * 0.1,
                    seed * 7919 + k as u64,
                )
                .unwrap();
                for (i, e) in [rel(s.occupancy, n), rel(s.blocked_fraction, pk), rel(s.delay, d)]
                    .into_iter()
                    .enumerate()
                {
                    worst[i] = worst[i].max(e);
                    if e <= 0.02 {
                        good[i] += 1;
                    }
                }
            }
            let ok = good.iter().all(|&g| g >= 19);
            o.check(
                ok,
                format!(
                    "rho {rho} K {k:2}: within 2% in occupancy {}/20, blocking {}/20, delay {}/20 \
                     (worst {:.2}% / {:.2}% / {:.2}%, pi_K {pk:.2e})",
                    good[0],
                    good[1],
                    good[2],
                    100.0 * worst[0],
                    100.0 * worst[1],
                    100.0 * worst[2]
                ),
            );
        }
    }
    o.note(format!("runtime {:.1} s", start.elapsed().as_secs_f64()));
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let n = 10_000;
    let (rows, y) = gaussian_rows(n, 5, 33);
    for alpha in [0.0, 0.08] {
        let batch = fit_ridge(&tagged(&rows, FeatureKind::QueueFeatures), &y, alpha).unwrap();
        let stream_alpha = alpha * n as f64;
        let mut exact = ExactRls::new(5, 1.0, stream_alpha).unwrap();
        for (u, t) in rows.chunks(10).zip(y.chunks(10)) {
            match exact.step(&Block::from_rows(u, t).unwrap()) {
                Ok(_) | Err(AdaptiveError::Singular { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let e = rel_vec(exact.theta(), &DVector::from_column_slice(batch.theta()));
        o.check(e <= 1e-6, format!("alpha {alpha}: relative theta error {e:.3e} (tol 1e-6)"));
    }
    o
}

/// Largest relative weight error of a Taylor-corrected RLS against the exact
/// solver over 1000 single-sample steps after a shared exact burn-in.
fn taylor_gap(order: TaylorOrder, forgetting: f64, ridge: f64, seed: u64) -> f64 {
    let dim = 5;
    let burn = dim + 20;
    let (rows, y) = gaussian_rows(burn + 1000, dim, seed);
    let mut exact = ExactRls::new(dim, forgetting, ridge).unwrap();
    for (u, t) in rows[..burn].iter().zip(&y[..burn]) {
        match exact.step(&Block::single(u, *t)) {
            Ok(_) | Err(AdaptiveError::Singular { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    let cfg = RlsConfig::new(forgetting, ridge).with_taylor_order(order);
    let mut rls = RlsState::from_exact(&exact, cfg).unwrap();
    let mut worst = 0.0f64;
    for (u, t) in rows[burn..].iter().zip(&y[burn..]) {
        let b = Block::single(u, *t);
        exact.step(&b).unwrap();
        rls.step(&b).unwrap();
        worst = worst.max(rel_vec(rls.theta(), exact.theta()));
    }
    worst
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let seeds = 1..=5u64;
    let first = seeds.clone().map(|s| taylor_gap(TaylorOrder::First, 0.9, 0.08, s)).fold(0.0, f64::max);
    let second = seeds.clone().map(|s| taylor_gap(TaylorOrder::Second, 0.9, 0.08, s)).fold(0.0, f64::max);
    let zero = seeds.map(|s| taylor_gap(TaylorOrder::First, 0.9, 0.0, s)).fold(0.0, f64::max);
    o.check(first <= 1e-3, format!("order 1: max relative theta error {first:.3e} (tol 1e-3)"));
    o.check(second <= 1e-5, format!("order 2: max relative theta error {second:.3e} (tol 1e-5)"));
    o.check(zero <= 1e-9, format!("delta = 0: max relative theta error {zero:.3e} (tol 1e-9)"));
    o
}

fn criterion_5(samples: &[LinkSample], low_confidence: &[usize]) -> Outcome {
    let mut o = Outcome::new();
    let split = fit::split_by_scenario(samples, 1, 0.2);
    let confident: Vec<LinkSample> = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| low_confidence.binary_search(i).is_err())
        .map(|(_, s)| *s)
        .collect();
    let confident_test = fit::split_by_scenario(&confident, 1, 0.2).test;
    o.note(format!("train {} samples, test {} samples", split.train.len(), split.test.len()));
    let mut mape = Vec::new();
    for kind in [BERNSTEIN, FeatureKind::QueueFeatures] {
        let search = fit::select_ridge(&split.train, kind, &RIDGE_GRID, 1).unwrap();
        let w = fit::fit(&split.train, kind, search.chosen).unwrap();
        let m = fit::evaluate(&w, &split.test).unwrap();
        let c = fit::evaluate(&w, &confident_test).unwrap();
        o.note(format!(
            "{kind}: alpha {} test occupancy MAPE {:.2}% delay MAPE {:.2}% \
             (without {} low-confidence samples: occupancy MAPE {:.2}%)",
            search.chosen,
            m.occupancy_mape,
            m.delay_mape,
            split.test.len() - confident_test.len(),
            c.occupancy_mape
        ));
        mape.push(m.occupancy_mape);
    }
    o.check(mape[0] <= 15.0, format!("Bernstein(8) MAPE {:.2}% <= 15%", mape[0]));
    o.check(
        mape[0] <= mape[1] + 2.0,
        format!("Bernstein(8) MAPE {:.2}% <= linear4 {:.2}% + 2", mape[0], mape[1]),
    );
    o
}

fn rmse(theta: &DVector<f64>, u: &[Vec<f64>], y: &[f64]) -> f64 {
    let s: f64 = u
        .iter()
        .zip(y)
        .map(|(r, t)| {
            let p: f64 = r.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            (p - t) * (p - t)
        })
        .sum();
    (s / y.len() as f64).sqrt()
}

fn criterion_6(samples: &[LinkSample]) -> Outcome {
    let mut o = Outcome::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    let u: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| BERNSTEIN.evaluate(&samples[i].params).unwrap().into_values())
        .collect();
    let y: Vec<f64> = order.iter().map(|&i| samples[i].occupancy).collect();
    let n = y.len();

    let ridge = 0.08;
    let mut rls = RlsState::new(BERNSTEIN.arity(), RlsConfig::new(1.0, ridge)).unwrap();
    let mut checkpoints = vec![rls.theta().clone()];
    let mut theta_100 = None;
    for (i, (bu, by)) in u.chunks(10).zip(y.chunks(10)).enumerate() {
        rls.step(&Block::from_rows(bu, by).unwrap()).unwrap();
        let consumed = (i + 1) * 10;
        if consumed == 100 {
            theta_100 = Some(rls.theta().clone());
        }
        if consumed % 1000 == 0 {
            checkpoints.push(rls.theta().clone());
        }
    }
    let changes: Vec<f64> = checkpoints
        .windows(2)
        .map(|w| if w[0].norm() == 0.0 { f64::INFINITY } else { (&w[1] - &w[0]).norm() / w[0].norm() })
        .collect();
    // changes[j] compares theta(1000 j) with theta(1000 (j + 1)).
    let stable_from = changes.iter().rposition(|&c| c >= 0.01).map_or(0, |j| j + 1);
    let n_stable = stable_from * 1000;
    for j in [1usize, 5, 10, 20, 30, 50, 100] {
        if let Some(c) = changes.get(j) {
            o.note(format!("relative change theta({}k) -> theta({}k): {:.3}%", j, j + 1, 100.0 * c));
        }
    }
    o.check(
        n_stable <= 10_000,
        format!("coefficients stable (< 1% per 1000 samples) from sample {n_stable} (limit 10000)"),
    );

    let batch = fit_ridge(&tagged(&u, BERNSTEIN), &y, batch_equivalent_ridge(ridge, n)).unwrap();
    let floor = rmse(&DVector::from_column_slice(batch.theta()), &u, &y);
    let early = rmse(&theta_100.expect("at least 100 samples"), &u, &y);
    let last = rmse(rls.theta(), &u, &y);
    o.note(format!("RMSE floor {floor:.5}, final streaming RMSE {last:.5}"));
    o.check(
        early <= 1.1 * floor,
        format!("RMSE after 100 samples {early:.5} = {:.3} x floor (limit 1.1)", early / floor),
    );
    o
}

fn jamming_replay(seed: u64) -> (Vec<u64>, Vec<(u64, u32)>) {
    let cfg = ScenarioConfig {
        traffic_matrix_count: 1,
        rng_seed: seed,
        ..ScenarioConfig::full_scale()
    };
    let samples = run_campaign_parallel(&cfg, None).unwrap().samples;
    let mut s = Streamer::new(StreamConfig {
        basis: BERNSTEIN,
        block: 10,
        estimator: EstimatorSpec::Rls {
            forgetting: 0.9,
            ridge: 0.08,
            taylor_order: 1,
        },
        monitor: MonitorConfig::default(),
    })
    .unwrap();
    let mut onsets = Vec::new();
    let mut plateau_onsets = Vec::new();
    s.feed(&samples, |r| {
        if r.onset {
            onsets.push(r.sample);
            if r.snapshot_id <= 51 || r.snapshot_id >= 67 {
                plateau_onsets.push((r.sample, r.snapshot_id));
            }
        }
    })
    .unwrap();
    (onsets, plateau_onsets)
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let midpoint = 59 * 30;
    for seed in 1..=5 {
        let (onsets, plateau) = jamming_replay(seed);
        let hit = onsets.iter().any(|&s| (s as i64 - midpoint as i64).abs() <= 200);
        o.check(
            hit && plateau.is_empty(),
            format!("seed {seed}: onsets {onsets:?}, plateau onsets {plateau:?} (midpoint sample {midpoint})"),
        );
    }
    o
}

fn arbitrary_sample(rng: &mut ChaCha8Rng) -> LinkSample {
    let k = rng.random_range(1..64u32);
    let capacity = rng.random_range(1.0..1e9);
    let bits = rng.random_range(1.0..1e5);
    let lambda = rng.random_range(0.0..1e6);
    let params = QueueParams::new(lambda, lambda * rng.random::<f64>(), capacity / bits, k).unwrap();
    LinkSample {
        scenario_id: rng.random_range(0..1000),
        snapshot_id: rng.random_range(0..1000),
        link_id: rng.random_range(0..100),
        capacity,
        mean_packet_bits: bits,
        params,
        occupancy: rng.random::<f64>() * k as f64,
        delay: rng.random_range(0.0..1e3),
        blocked_fraction: rng.random(),
    }
}

fn replay_digest(samples: &[LinkSample]) -> String {
    let cfg = StreamConfig {
        basis: BERNSTEIN,
        block: 10,
        estimator: EstimatorSpec::Rls {
            forgetting: 0.9,
            ridge: 0.08,
            taylor_order: 1,
        },
        monitor: MonitorConfig::default(),
    };
    let mut s = Streamer::new(cfg).unwrap();
    let mut w = TraceWriter::new(Vec::new(), BERNSTEIN.arity(), &[], true).unwrap();
    s.feed(samples, |r| w.write(r).unwrap()).unwrap();
    linkpred::sha256_hex(&w.finish().unwrap())
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let order = rng.random_range(1..=16u32);
        let x: f64 = rng.random();
        let sum: f64 = bernstein_basis(x, order).unwrap().values().iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    o.check(worst <= 1e-12, format!("Bernstein partition of unity: max |sum - 1| = {worst:.2e}"));

    let mut monotone = true;
    for seed in 0..20 {
        let (rows, y) = gaussian_rows(200, 5, 800 + seed);
        let rows = tagged(&rows, FeatureKind::QueueFeatures);
        let norms: Vec<f64> = [0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&a| DVector::from_column_slice(fit_ridge(&rows, &y, a).unwrap().theta()).norm())
            .collect();
        monotone &= norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    }
    o.check(monotone, "ridge shrinkage: ||theta|| non-increasing in alpha on 20 data sets".into());

    let mut identities = true;
    for _ in 0..200 {
        let truth: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..100.0)).collect();
        let scale = rng.random_range(0.0..2.0);
        let shift = rng.random_range(-5.0..5.0);
        let scaled: Vec<f64> = truth.iter().map(|t| t * (1.0 + scale)).collect();
        let shifted: Vec<f64> = truth.iter().map(|t| t + shift).collect();
        identities &= regress::mape(&truth, &truth).unwrap().percent == 0.0
            && regress::mse(&truth, &truth).unwrap() == 0.0
            && rel(regress::mape(&scaled, &truth).unwrap().percent, 100.0 * scale) < 1e-9
            && rel(regress::mse(&shifted, &truth).unwrap(), shift * shift) < 1e-9;
    }
    o.check(identities, "metric identities: MAPE(y, y) = 0, MAPE((1+s)y, y) = 100s, MSE(y+c, y) = c^2".into());

    let mut roundtrip = true;
    for _ in 0..100 {
        let n = rng.random_range(0..20);
        let samples: Vec<LinkSample> = (0..n).map(|_| arbitrary_sample(&mut rng)).collect();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &samples, &["# acceptance".to_string()]).unwrap();
        roundtrip &= read_dataset(buf.as_slice()).unwrap() == samples;
    }
    o.check(roundtrip, "dataset write/read identity on 100 random data sets".into());

    let cfg = ScenarioConfig {
        node_count: 4,
        link_count: 6,
        traffic_matrix_count: 2,
        snapshots: 20,
        snapshot_duration: 40.0,
        warmup: 4.0,
        ..ScenarioConfig::full_scale()
    };
    let dataset_digest = |threads| {
        let r = run_campaign_parallel(&cfg, threads).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &r.samples, &[]).unwrap();
        (linkpred::sha256_hex(&buf), r.samples)
    };
    let (d1, samples) = dataset_digest(Some(1));
    let (d2, _) = dataset_digest(None);
    let (t1, t2) = (replay_digest(&samples), replay_digest(&samples));
    o.check(d1 == d2, format!("campaign checksum repeatable: {d1}"));
    o.check(t1 == t2, format!("replay trace checksum repeatable: {t1}"));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 120.0, format!("runtime {secs:.2} s (limit 120 s)"));
    o
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "{} {name} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            failures += 1;
        }
    };
    report("1 queueing closed form vs birth-death solve", &criterion_1);
    report("2 simulator fidelity", &criterion_2);
    report("3 batch/iterative equivalence", &criterion_3);
    report("4 Taylor approximation bound", &criterion_4);

    let campaign_start = Instant::now();
    let campaign = run_campaign_parallel(&ScenarioConfig::full_scale(), None).unwrap();
    let full = campaign.samples;
    println!(
        "     full-scale campaign: {} samples in {:.1} s",
        full.len(),
        campaign_start.elapsed().as_secs_f64()
    );
    report("5 Bernstein(8) vs linear4 MAPE", &|| criterion_5(&full, &campaign.low_confidence));
    report("6 convergence speed", &|| criterion_6(&full));
    report("7 change detection on jamming replay", &criterion_7);
    report("8 property suites", &criterion_8);

    println!("{} of 8 criteria failed", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
