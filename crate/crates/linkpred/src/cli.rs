//! The `linkpred` command line: `gen`, `fit`, `stream`, `eval`, `report`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 unreadable or
//! invalid data, 4 numerical failure (singular fit, diverged estimator).

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use linkpred_core::adaptive::{AdaptiveError, MonitorConfig};
use linkpred_core::netsim::{LinkSample, NetsimError, ScenarioConfig};
use linkpred_core::regress::RegressError;
use linkpred_core::FeatureKind;
use serde_json::json;
use thiserror::Error;

use crate::checkpoint::Checkpoint;
use crate::config::Settings;
use crate::dataset::{self, DatasetError};
use crate::fit::{self, Metrics};
use crate::model::ModelFile;
use crate::report;
use crate::runner;
use crate::stream::{EstimatorSpec, StreamConfig, StreamError, Streamer, TraceWriter};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Parser)]
#[command(name = "linkpred", version, about = "Link occupancy and delay prediction toolkit")]
pub struct Cli {
    /// TOML file whose settings override the command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a campaign and write its dataset.
    Gen(Settings),
    /// Fit a batch ridge model and report held-out metrics.
    Fit(Settings),
    /// Replay a dataset through a streaming estimator.
    Stream(Settings),
    /// Score a model on a dataset.
    Eval(Settings),
    /// Export plot data from a dataset and/or a stream trace.
    Report(Settings),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn data(m: impl std::fmt::Display) -> CliError {
    CliError::Data(m.to_string())
}

fn regress_err(e: RegressError) -> CliError {
    match e {
        RegressError::Singular { .. } | RegressError::Solve(_) | RegressError::NonFinite => {
            CliError::Numerical(e.to_string())
        }
        RegressError::BasisMismatch { .. } => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    data(format!("{}: {e}", path.display()))
}

fn print(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| data(format!("stdout: {e}")))
}

/// Parses and runs a command line, writing reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = write!(out, "{e}");
            CliError::Usage(String::new())
        }
        _ => CliError::Usage(e.to_string()),
    })?;
    let file = match &cli.config {
        Some(p) => Some(Settings::load(p).map_err(usage)?),
        None => None,
    };
    let (name, flags) = match cli.command {
        Command::Gen(s) => ("gen", s),
        Command::Fit(s) => ("fit", s),
        Command::Stream(s) => ("stream", s),
        Command::Eval(s) => ("eval", s),
        Command::Report(s) => ("report", s),
    };
    let merged = match &file {
        Some(f) => flags.overlaid(f),
        None => flags,
    };
    let s = merged.with_defaults(name);
    match name {
        "gen" => cmd_gen(&s, out),
        "fit" => cmd_fit(&s, out),
        "stream" => cmd_stream(&s, out),
        "eval" => cmd_eval(&s, out),
        _ => cmd_report(&s, out),
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(args, &mut out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) if m.is_empty() => 0,
        Err(e) => {
            eprintln!("linkpred: {e}");
            e.exit_code()
        }
    }
}

fn resolved(command: &str, s: &Settings) -> serde_json::Value {
    // Output location does not affect content.
    let s = Settings { out: None, ..s.clone() };
    json!({ "command": command, "settings": s })
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, CliError> {
    v.as_ref().ok_or_else(|| usage(format!("--{flag} is required")))
}

fn basis(s: &Settings) -> Result<FeatureKind, CliError> {
    s.basis
        .as_deref()
        .unwrap_or("bernstein:8")
        .parse()
        .map_err(|e| usage(format!("--basis: {e}")))
}

fn read_samples(path: &Path) -> Result<Vec<LinkSample>, CliError> {
    dataset::read_dataset_file(path).map_err(|e| match e {
        DatasetError::Io(e) => io_err(path, e),
        other => io_err(path, other),
    })
}

fn file_sha(path: &Path) -> Result<String, CliError> {
    Ok(crate::sha256_hex(&fs::read(path).map_err(|e| io_err(path, e))?))
}

fn scenario(s: &Settings) -> Result<ScenarioConfig, CliError> {
    let mut cfg = if let Some(c) = &s.campaign {
        c.clone()
    } else if let Some(p) = &s.scenario {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
    } else if let Some(p) = s.preset {
        p.scenario()
    } else {
        return Err(usage("gen needs --scenario, --preset or a [campaign] table"));
    };
    if let Some(seed) = s.seed.filter(|_| s.campaign.is_none() && s.scenario.is_none()) {
        cfg.rng_seed = seed;
    }
    cfg.validate().map_err(|e| usage(format!("invalid scenario: {e}")))?;
    Ok(cfg)
}

fn cmd_gen(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = scenario(s)?;
    let path = required(&s.out, "out")?;
    let result = runner::run_campaign_parallel(&cfg, s.threads).map_err(|e| match e {
        NetsimError::Parameter { .. } | NetsimError::Topology(_) | NetsimError::CapacityFactors { .. } => {
            usage(format!("invalid scenario: {e}"))
        }
        other => CliError::Numerical(other.to_string()),
    })?;
    let mut meta = resolved("gen", s);
    meta["scenario"] = json!(cfg);
    dataset::write_dataset_file(path, &result.samples, &[crate::header_comment(&meta)])
        .map_err(|e| io_err(path, e))?;
    if !result.low_confidence.is_empty() {
        log::warn!(
            "{} samples saw fewer than {} accepted packets",
            result.low_confidence.len(),
            linkpred_core::netsim::MIN_ACCEPTED
        );
    }
    print(
        out,
        format!(
            "wrote {} samples ({} low-confidence) to {}",
            result.samples.len(),
            result.low_confidence.len(),
            path.display()
        ),
    )?;
    let mut hist: Vec<(f64, usize)> = Vec::new();
    for x in &result.samples {
        match hist.iter_mut().find(|(c, _)| *c == x.capacity) {
            Some(e) => e.1 += 1,
            None => hist.push((x.capacity, 1)),
        }
    }
    hist.sort_by(|a, b| a.0.total_cmp(&b.0));
    print(out, "capacity_bps samples")?;
    for (c, n) in hist {
        print(out, format!("{c} {n}"))?;
    }
    Ok(())
}

fn number(name: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite() && *x >= 0.0)
        .ok_or_else(|| usage(format!("--{name}: expected a number >= 0, got `{v}`")))
}

/// `label: samples=.. occupancy_mse=.. ...`, shared by `fit` and `eval`.
pub fn metrics_line(label: &str, m: &Metrics) -> String {
    format!(
        "{label}: samples={} occupancy_mse={:e} occupancy_mape={:.4}% (excluded {}) delay_mse={:e} delay_mape={:.4}% (excluded {})",
        m.samples,
        m.occupancy_mse,
        m.occupancy_mape,
        m.occupancy_mape_excluded,
        m.delay_mse,
        m.delay_mape,
        m.delay_mape_excluded
    )
}

fn cmd_fit(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let path = required(&s.dataset, "dataset")?;
    let kind = basis(s)?;
    let samples = read_samples(path)?;
    if samples.is_empty() {
        return Err(data(format!("{}: dataset is empty", path.display())));
    }
    let (seed, holdout) = (s.seed.unwrap_or(1), s.holdout.unwrap_or(0.2));
    if !(0.0..1.0).contains(&holdout) {
        return Err(usage(format!("--holdout must be in [0, 1), got {holdout}")));
    }
    let split = fit::split_by_scenario(&samples, seed, holdout);
    if split.train.is_empty() {
        return Err(data("every scenario was held out; lower --holdout"));
    }
    let alpha_arg = s.alpha.as_deref().unwrap_or("auto");
    let alpha = if alpha_arg == "auto" {
        let search = fit::select_ridge(&split.train, kind, &fit::RIDGE_GRID, seed).map_err(regress_err)?;
        for (a, score) in &search.scores {
            match score {
                Some(m) => print(out, format!("ridge search: alpha={a:e} validation_mape={m:.4}%"))?,
                None => print(out, format!("ridge search: alpha={a:e} failed"))?,
            }
        }
        search.chosen
    } else {
        number("alpha", alpha_arg)?
    };
    let w = fit::fit(&split.train, kind, alpha).map_err(regress_err)?;
    print(out, format!("basis={kind} alpha={alpha:e} trained_on={}", w.trained_on()))?;
    print(out, metrics_line("train", &fit::evaluate(&w, &split.train).map_err(regress_err)?))?;
    if split.test.is_empty() {
        log::warn!("no scenario was held out; reporting training metrics only");
    } else {
        print(out, metrics_line("test", &fit::evaluate(&w, &split.test).map_err(regress_err)?))?;
    }
    print(out, format!("theta={:?}", w.theta()))?;
    if let Some(model_path) = &s.out {
        let mut cfg = resolved("fit", s);
        cfg["chosen_alpha"] = json!(alpha);
        ModelFile::new(&w, file_sha(path)?, cfg)
            .save(model_path)
            .map_err(|e| io_err(model_path, e))?;
        print(out, format!("model written to {}", model_path.display()))?;
    }
    Ok(())
}

fn estimator_spec(s: &Settings) -> Result<EstimatorSpec, CliError> {
    let alpha = number("alpha", s.alpha.as_deref().unwrap_or("0.08"))?;
    let lambda = s.lambda.unwrap_or(0.9);
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(usage(format!("--lambda must be in (0, 1], got {lambda}")));
    }
    match s.estimator.as_deref().unwrap_or("rls") {
        "rls" => Ok(EstimatorSpec::Rls {
            forgetting: lambda,
            ridge: alpha,
            taylor_order: s.taylor_order.unwrap_or(1),
        }),
        "exact" => Ok(EstimatorSpec::ExactRls {
            forgetting: lambda,
            ridge: alpha,
        }),
        "lms" => Ok(EstimatorSpec::Lms {
            step_size: s.mu_step.unwrap_or(0.05),
            ridge: alpha,
        }),
        other => Err(usage(format!("--estimator: expected rls, exact or lms, got `{other}`"))),
    }
}

fn stream_err(e: StreamError) -> CliError {
    match e {
        StreamError::Config(m) => usage(m),
        StreamError::Checkpoint(m) => data(format!("checkpoint: {m}")),
        StreamError::Features { .. } => data(e.to_string()),
        StreamError::Estimator { sample, source } => match source {
            AdaptiveError::Dimension { .. } | AdaptiveError::BlockShape { .. } => data(source.to_string()),
            _ => CliError::Numerical(format!("sample {sample}: {source}")),
        },
    }
}

fn cmd_stream(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let path = required(&s.dataset, "dataset")?;
    let dir = required(&s.out, "out")?;
    let samples = read_samples(path)?;
    if !dataset::is_replay_ordered(&samples) {
        return Err(data(format!(
            "{}: samples must be ordered by (scenario_id, snapshot_id)",
            path.display()
        )));
    }
    let sha = file_sha(path)?;
    let mut streamer = match &s.resume {
        Some(ck) => {
            let c = Checkpoint::load(ck).map_err(|e| io_err(ck, e))?;
            if c.dataset_sha256.as_deref().is_some_and(|h| h != sha) {
                return Err(data(format!("{}: checkpoint was taken on a different dataset", ck.display())));
            }
            Streamer::from_checkpoint(&c).map_err(stream_err)?
        }
        None => {
            let monitor = MonitorConfig {
                window: s.window.unwrap_or(100),
                ..MonitorConfig::default()
            };
            Streamer::new(StreamConfig {
                basis: basis(s)?,
                block: s.block.unwrap_or(10),
                estimator: estimator_spec(s)?,
                monitor,
            })
            .map_err(stream_err)?
        }
    };
    let start = streamer.samples() as usize;
    if start > samples.len() {
        return Err(data(format!(
            "checkpoint consumed {start} samples but the dataset has {}",
            samples.len()
        )));
    }
    let mut end = samples.len();
    if let Some(limit) = s.limit {
        let block = streamer.config().block as u64;
        let take = (limit / block * block) as usize;
        end = end.min(start + take);
    }

    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let trace_path = dir.join(TRACE_FILE);
    let appending = s.resume.is_some() && trace_path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(appending)
        .truncate(!appending)
        .open(&trace_path)
        .map_err(|e| io_err(&trace_path, e))?;
    let cfg = resolved("stream", s);
    let arity = streamer.config().basis.arity();
    let mut trace = TraceWriter::new(BufWriter::new(file), arity, &[crate::header_comment(&cfg)], !appending)
        .map_err(|e| io_err(&trace_path, e))?;
    let mut write_err = None;
    let fed = streamer.feed(&samples[start..end], |row| {
        if write_err.is_none() {
            if let Err(e) = trace.write(row) {
                write_err = Some(e);
            }
        }
    });
    trace.finish().map_err(|e| io_err(&trace_path, e))?;
    if let Some(e) = write_err {
        return Err(io_err(&trace_path, e));
    }
    let ck_path = dir.join(CHECKPOINT_FILE);
    // Keep the state up to the failure for inspection.
    streamer
        .checkpoint(Some(sha), cfg)
        .save(&ck_path)
        .map_err(|e| io_err(&ck_path, e))?;
    fed.map_err(stream_err)?;

    print(
        out,
        format!(
            "streamed {} samples in {} steps; {} change onsets; {} gain resets",
            streamer.samples(),
            streamer.estimator().steps(),
            streamer.monitor().onsets(),
            streamer.breakdowns()
        ),
    )?;
    print(out, format!("theta={:?}", streamer.theta()))?;
    print(out, format!("trace written to {}", trace_path.display()))?;
    print(out, format!("checkpoint written to {}", ck_path.display()))?;
    Ok(())
}

/// Reads declared paths: one per line, link ids separated by commas or
/// whitespace, `#` starts a comment.
pub fn parse_paths(text: &str) -> Result<Vec<Vec<u32>>, String> {
    let mut paths = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let path = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<u32>().map_err(|_| format!("line {}: `{t}` is not a link id", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        paths.push(path);
    }
    Ok(paths)
}

fn cmd_eval(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let model_path = required(&s.model, "model")?;
    let path = required(&s.dataset, "dataset")?;
    let model = ModelFile::load(model_path).map_err(|e| io_err(model_path, e))?;
    let w = model.weights().map_err(|e| io_err(model_path, e))?;
    if let Some(b) = &s.basis {
        let requested: FeatureKind = b.parse().map_err(|e| usage(format!("--basis: {e}")))?;
        if requested != w.kind() {
            return Err(usage(format!("basis mismatch: model is {}, requested {requested}", w.kind())));
        }
    }
    let samples = read_samples(path)?;
    let (seed, holdout) = (s.seed.unwrap_or(1), s.holdout.unwrap_or(0.2));
    let split = s.split.as_deref().unwrap_or("all");
    let scored = match split {
        "all" => samples,
        "train" => fit::split_by_scenario(&samples, seed, holdout).train,
        "test" => fit::split_by_scenario(&samples, seed, holdout).test,
        other => return Err(usage(format!("--split: expected all, train or test, got `{other}`"))),
    };
    if scored.is_empty() {
        return Err(data(format!("no samples in the `{split}` split")));
    }
    print(out, metrics_line(split, &fit::evaluate(&w, &scored).map_err(regress_err)?))?;
    let floor = fit::ground_truth_delay_mape(&scored).map_err(regress_err)?;
    print(
        out,
        format!(
            "ground-truth occupancy delay_mape={:.4}% (excluded {})",
            floor.percent, floor.excluded
        ),
    )?;
    if let Some(pp) = &s.paths {
        let text = fs::read_to_string(pp).map_err(|e| io_err(pp, e))?;
        let paths = parse_paths(&text).map_err(|e| io_err(pp, e))?;
        for m in fit::path_delay_metrics(&w, &scored, &paths).map_err(regress_err)? {
            let ids: Vec<String> = m.path.iter().map(|l| l.to_string()).collect();
            match m.delay_mape {
                Some(p) => print(
                    out,
                    format!(
                        "path {}: snapshots={} delay_mape={p:.4}% (excluded {})",
                        ids.join(","),
                        m.snapshots,
                        m.delay_mape_excluded
                    ),
                )?,
                None => print(out, format!("path {}: no snapshot covers every link", ids.join(",")))?,
            }
        }
    }
    Ok(())
}

fn cmd_report(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let dir = required(&s.out, "out")?;
    if s.dataset.is_none() && s.trace.is_none() {
        return Err(usage("report needs --dataset and/or --trace"));
    }
    let window = s.window.unwrap_or(100);
    if window == 0 {
        return Err(usage("--window must be >= 1"));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let comments = [crate::header_comment(&resolved("report", s))];
    let mut files = Vec::new();
    if let Some(path) = &s.dataset {
        let samples = read_samples(path)?;
        files.extend(report::dataset_report(&samples, dir, &comments).map_err(|e| io_err(dir, e))?);
    }
    if let Some(path) = &s.trace {
        let trace = report::read_trace_file(path).map_err(|e| io_err(path, e))?;
        files.extend(report::trace_report(&trace, window, dir, &comments).map_err(|e| io_err(dir, e))?);
    }
    for f in files {
        print(out, format!("wrote {}", f.display()))?;
    }
    Ok(())
}
