use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use linkpred::checkpoint::Checkpoint;
use linkpred::cli::{self, CliError};
use linkpred::dataset::{read_dataset_file, write_dataset_file};
use linkpred::model::ModelFile;
use linkpred_core::netsim::LinkSample;
use linkpred_core::queueing::QueueParams;

fn run(args: &[&str]) -> (Result<(), CliError>, String) {
    let mut out = Vec::new();
    let mut full = vec!["linkpred"];
    full.extend_from_slice(args);
    let r = cli::run(full, &mut out);
    (r, String::from_utf8(out).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (r, out) = run(args);
    if let Err(e) = r {
        panic!("{args:?} failed: {e}\n{out}");
    }
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A 5-matrix, 20-snapshot jamming campaign shared by the tests.
fn campaign() -> &'static Path {
    static DATA: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = DATA.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("small.toml");
        fs::write(
            &cfg,
            "[campaign]\ntraffic_matrix_count = 5\nsnapshots = 20\nsnapshot_duration = 40.0\nwarmup = 4.0\n\
             [campaign.capacity.sigmoid]\npre_capacity = 49000.0\npost_capacity = 11000.0\nmidpoint = 10.0\nsteepness = 0.5\n",
        )
        .unwrap();
        let data = dir.path().join("d.csv");
        ok(&["--config", p(&cfg), "gen", "--out", p(&data)]);
        (dir, data)
    });
    path
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

fn stream_theta(dir: &Path) -> Vec<f64> {
    let c = Checkpoint::load(&dir.join(cli::CHECKPOINT_FILE)).unwrap();
    match c.estimator {
        linkpred::checkpoint::EstimatorSnapshot::Rls(s) => s.theta,
        linkpred::checkpoint::EstimatorSnapshot::ExactRls(s) => s.theta,
        linkpred::checkpoint::EstimatorSnapshot::Lms(s) => s.theta,
    }
}

#[test]
fn gen_tiny_is_counted_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let out = ok(&["gen", "--preset", "tiny", "--out", p(&a)]);
    assert!(out.starts_with("wrote 6 samples"), "{out}");
    assert!(out.contains("capacity_bps samples"));
    ok(&["gen", "--preset", "tiny", "--out", p(&b)]);
    ok(&["gen", "--preset", "tiny", "--seed", "9", "--out", p(&c)]);
    assert_eq!(read_dataset_file(&a).unwrap().len(), 6);
    assert_eq!(linkpred::sha256_hex(&fs::read(&a).unwrap()), linkpred::sha256_hex(&fs::read(&b).unwrap()));
    assert_ne!(data_rows(&a), data_rows(&c));
    let header = fs::read_to_string(&a).unwrap();
    assert!(header.starts_with(&format!("# {} config=", linkpred::TOOL)));
}

#[test]
fn invalid_scenarios_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "node_cont = 3\n").unwrap();
    match run(&["gen", "--scenario", p(&bad), "--out", p(&out)]).0 {
        Err(e @ CliError::Usage(_)) => assert!(e.to_string().contains("node_cont"), "{e}"),
        other => panic!("{other:?}"),
    }
    fs::write(&bad, "mean_packet_bits = -1.0\n").unwrap();
    match run(&["gen", "--scenario", p(&bad), "--out", p(&out)]).0 {
        Err(e @ CliError::Usage(_)) => assert!(e.to_string().contains("mean packet bits"), "{e}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(run(&["gen", "--out", p(&out)]).0, Err(CliError::Usage(_))));
}

#[test]
fn eval_reproduces_fit_training_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let fit_out = ok(&["fit", "--dataset", p(campaign()), "--alpha", "1e-4", "--out", p(&model)]);
    let train = fit_out.lines().find(|l| l.starts_with("train:")).unwrap();
    assert!(fit_out.lines().any(|l| l.starts_with("test:")), "{fit_out}");
    let eval_out = ok(&["eval", "--dataset", p(campaign()), "--model", p(&model), "--split", "train"]);
    assert_eq!(eval_out.lines().next().unwrap(), train);

    let m = ModelFile::load(&model).unwrap();
    assert_eq!(m.dataset_sha256, linkpred::sha256_hex(&fs::read(campaign()).unwrap()));
    assert_eq!((m.basis.as_str(), m.order, m.alpha), ("bernstein", Some(8), 1e-4));
}

#[test]
fn fit_searches_ridge_by_default() {
    let out = ok(&["fit", "--dataset", p(campaign()), "--basis", "linear4"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("ridge search:")).count(), 7);
    assert!(out.contains("basis=linear4"));
}

#[test]
fn unit_forgetting_stream_matches_batch_fit() {
    for basis in ["bernstein:8", "linear4"] {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("m.json");
        let s = dir.path().join("s");
        ok(&[
            "fit", "--dataset", p(campaign()), "--basis", basis, "--alpha", "0", "--holdout", "0", "--out", p(&model),
        ]);
        ok(&[
            "stream", "--dataset", p(campaign()), "--basis", basis, "--lambda", "1", "--alpha", "0", "--out", p(&s),
        ]);
        let batch = ModelFile::load(&model).unwrap().theta;
        let e = rel(&stream_theta(&s), &batch);
        assert!(e < 1e-3, "{basis}: {e}");
    }
}

#[test]
fn resumed_stream_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["stream", "--dataset", p(campaign()), "--out", p(&a)]);
    ok(&["stream", "--dataset", p(campaign()), "--out", p(&b), "--limit", "1234"]);
    let partial = Checkpoint::load(&b.join(cli::CHECKPOINT_FILE)).unwrap();
    assert_eq!(partial.samples, 1230);
    let ck = b.join(cli::CHECKPOINT_FILE);
    ok(&["stream", "--dataset", p(campaign()), "--out", p(&b), "--resume", p(&ck)]);
    assert_eq!(data_rows(&a.join(cli::TRACE_FILE)), data_rows(&b.join(cli::TRACE_FILE)));
    let (x, y) = (
        Checkpoint::load(&a.join(cli::CHECKPOINT_FILE)).unwrap(),
        Checkpoint::load(&b.join(cli::CHECKPOINT_FILE)).unwrap(),
    );
    assert_eq!((x.samples, &x.estimator, &x.monitor), (y.samples, &y.estimator, &y.monitor));
    assert_eq!(x.samples, read_dataset_file(campaign()).unwrap().len() as u64);
}

#[test]
fn jamming_stream_flags_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let r = dir.path().join("r");
    let out = ok(&["stream", "--dataset", p(campaign()), "--out", p(&s)]);
    let samples = read_dataset_file(campaign()).unwrap().len();
    assert!(out.starts_with(&format!("streamed {samples} samples in {} steps;", samples.div_ceil(10))), "{out}");
    let trace = s.join(cli::TRACE_FILE);
    ok(&["report", "--dataset", p(campaign()), "--trace", p(&trace), "--out", p(&r)]);
    let hist = data_rows(&r.join(linkpred::report::HISTOGRAM_FILE));
    assert_eq!(hist[0], "capacity_bps,count");
    let counts: Vec<(f64, usize)> = hist[1..]
        .iter()
        .map(|l| {
            let (c, n) = l.split_once(',').unwrap();
            (c.parse().unwrap(), n.parse().unwrap())
        })
        .collect();
    // U shape: both plateau levels dominate the interior.
    let (lo, hi) = (counts.first().unwrap(), counts.last().unwrap());
    assert_eq!((lo.0, hi.0), (11_000.0, 49_000.0));
    assert!(counts[1..counts.len() - 1].iter().all(|c| c.1 < lo.1.min(hi.1)), "{counts:?}");
    let rmse = data_rows(&r.join(linkpred::report::RMSE_FILE));
    assert_eq!(rmse.len(), 1 + samples - 99);
    let weights = data_rows(&r.join(linkpred::report::WEIGHTS_FILE));
    assert_eq!(weights.len(), 1 + samples / 10);
}

fn idle_sample(i: u32) -> LinkSample {
    LinkSample {
        scenario_id: 0,
        snapshot_id: i,
        link_id: 0,
        capacity: 10_000.0,
        mean_packet_bits: 1000.0,
        params: QueueParams::lossless(5.0, 10.0, 8).unwrap(),
        occupancy: 1.0,
        delay: 0.2,
        blocked_fraction: 0.0,
    }
}

#[test]
fn empty_dataset_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty.csv");
    write_dataset_file(&data, &[], &[]).unwrap();
    assert!(matches!(run(&["fit", "--dataset", p(&data)]).0, Err(CliError::Data(_))));
    let s = dir.path().join("s");
    ok(&["stream", "--dataset", p(&data), "--out", p(&s)]);
    let trace = s.join(cli::TRACE_FILE);
    assert_eq!(data_rows(&trace).len(), 1);
    let c = Checkpoint::load(&s.join(cli::CHECKPOINT_FILE)).unwrap();
    assert_eq!(c.samples, 0);
    let r = dir.path().join("r");
    ok(&["report", "--dataset", p(&data), "--trace", p(&trace), "--out", p(&r)]);
    for f in fs::read_dir(&r).unwrap() {
        assert_eq!(data_rows(&f.unwrap().path()).len(), 1);
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "block = 5\nestimator = \"exact\"\n").unwrap();
    let s = dir.path().join("s");
    ok(&["--config", p(&cfg), "stream", "--dataset", p(campaign()), "--block", "20", "--out", p(&s)]);
    let c = Checkpoint::load(&s.join(cli::CHECKPOINT_FILE)).unwrap();
    assert_eq!(c.block, 5);
    assert!(matches!(c.estimator, linkpred::checkpoint::EstimatorSnapshot::ExactRls(_)));
    let head = fs::read_to_string(s.join(cli::TRACE_FILE)).unwrap();
    assert!(head.lines().next().unwrap().contains("\"block\":5"));
}

#[test]
fn eval_reports_paths_and_floor() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let paths = dir.path().join("paths.txt");
    fs::write(&paths, "# two paths\n0,1,2\n5 7\n").unwrap();
    ok(&["fit", "--dataset", p(campaign()), "--alpha", "1e-3", "--out", p(&model)]);
    let out = ok(&["eval", "--dataset", p(campaign()), "--model", p(&model), "--paths", p(&paths)]);
    assert!(out.contains("ground-truth occupancy delay_mape="), "{out}");
    assert!(out.contains("path 0,1,2: snapshots=100 delay_mape="), "{out}");
    assert!(out.contains("path 5,7: snapshots=100"), "{out}");
    let err = run(&["eval", "--dataset", p(campaign()), "--model", p(&model), "--basis", "linear4"]).0;
    assert!(matches!(err, Err(CliError::Usage(_))));
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_linkpred");
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();

    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["fit", "--no-such-flag"]), 2);
    assert_eq!(code(&["fit", "--dataset", p(&dir.path().join("missing.csv"))]), 3);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "scenario_id,oops\n").unwrap();
    assert_eq!(code(&["fit", "--dataset", p(&bad)]), 3);

    // Every sample has the same utilization: Bernstein(8) normal equations are singular.
    let flat = dir.path().join("flat.csv");
    write_dataset_file(&flat, &(0..50).map(idle_sample).collect::<Vec<_>>(), &[]).unwrap();
    assert_eq!(code(&["fit", "--dataset", p(&flat), "--alpha", "0"]), 4);
    let s = dir.path().join("s");
    assert_eq!(
        code(&["stream", "--dataset", p(&flat), "--estimator", "lms", "--mu-step", "1e100", "--out", p(&s)]),
        4
    );
}
