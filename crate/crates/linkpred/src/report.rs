//! Plot-ready CSV exports from datasets and stream traces.
//!
//! | file | columns |
//! |---|---|
//! | `occupancy_scatter.csv` | `scenario_id,snapshot_id,link_id,effective_utilization,occupancy_pkts,occupancy_norm` |
//! | `capacity_by_snapshot.csv` | `snapshot_id,capacity_bps` (mean over links and scenarios) |
//! | `capacity_histogram.csv` | `capacity_bps,count` |
//! | `weights_trace.csv` | `sample,step,theta_0,...` (one row per estimator step) |
//! | `rmse_trace.csv` | `sample,rmse_smoothed,flagged` |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use linkpred_core::netsim::LinkSample;
use thiserror::Error;

pub const SCATTER_FILE: &str = "occupancy_scatter.csv";
pub const CAPACITY_FILE: &str = "capacity_by_snapshot.csv";
pub const HISTOGRAM_FILE: &str = "capacity_histogram.csv";
pub const WEIGHTS_FILE: &str = "weights_trace.csv";
pub const RMSE_FILE: &str = "rmse_trace.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace is missing column `{0}`")]
    MissingColumn(String),
    #[error("trace line {line}, column `{column}`: `{value}` is not a number")]
    Value { line: u64, column: String, value: String },
    #[error("smoothing window must be >= 1")]
    Window,
}

/// The trace columns a report needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub arity: usize,
    pub sample: Vec<u64>,
    pub step: Vec<u64>,
    pub residual: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Row-major, `arity` entries per row.
    pub theta: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }
}

pub fn read_trace<R: Read>(input: R) -> Result<Trace, ReportError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::MissingColumn(name.into()))
    };
    let (c_sample, c_step, c_res, c_flag) = (col("sample")?, col("step")?, col("residual")?, col("flagged")?);
    let mut thetas = Vec::new();
    while let Ok(c) = col(&format!("theta_{}", thetas.len())) {
        thetas.push(c);
    }
    if thetas.is_empty() {
        return Err(ReportError::MissingColumn("theta_0".into()));
    }
    let mut t = Trace {
        arity: thetas.len(),
        ..Trace::default()
    };
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| ReportError::Value {
            line,
            column: headers[i].to_string(),
            value: field(i).into(),
        };
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        t.sample.push(int(c_sample)?);
        t.step.push(int(c_step)?);
        t.residual.push(float(c_res)?);
        t.flagged.push(int(c_flag)? != 0);
        for &c in &thetas {
            t.theta.push(float(c)?);
        }
    }
    Ok(t)
}

pub fn read_trace_file(path: &Path) -> Result<Trace, ReportError> {
    read_trace(BufReader::new(File::open(path)?))
}

/// Trailing-window RMSE; the first value is emitted once `window` residuals
/// are available.
pub fn smoothed_rmse(residuals: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || residuals.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(residuals.len() + 1 - window);
    let mut sum: f64 = residuals[..window].iter().map(|r| r * r).sum();
    out.push((sum / window as f64).max(0.0).sqrt());
    for i in window..residuals.len() {
        sum += residuals[i] * residuals[i] - residuals[i - window] * residuals[i - window];
        out.push((sum / window as f64).max(0.0).sqrt());
    }
    out
}

fn csv_out(dir: &Path, name: &str, comments: &[String], header: &[String]) -> Result<csv::Writer<BufWriter<File>>, ReportError> {
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    for c in comments {
        writeln!(f, "{c}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(header)?;
    Ok(w)
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Writes the three dataset figures and returns their paths.
pub fn dataset_report(samples: &[LinkSample], dir: &Path, comments: &[String]) -> Result<Vec<PathBuf>, ReportError> {
    let mut w = csv_out(
        dir,
        SCATTER_FILE,
        comments,
        &strings(&[
            "scenario_id",
            "snapshot_id",
            "link_id",
            "effective_utilization",
            "occupancy_pkts",
            "occupancy_norm",
        ]),
    )?;
    for s in samples {
        w.write_record([
            s.scenario_id.to_string(),
            s.snapshot_id.to_string(),
            s.link_id.to_string(),
            s.params.effective_utilization().to_string(),
            s.occupancy.to_string(),
            s.occupancy_norm().to_string(),
        ])?;
    }
    w.flush()?;

    let mut by_snapshot: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    let mut histogram: BTreeMap<u64, usize> = BTreeMap::new();
    for s in samples {
        let e = by_snapshot.entry(s.snapshot_id).or_default();
        e.0 += s.capacity;
        e.1 += 1;
        *histogram.entry(s.capacity.to_bits()).or_default() += 1;
    }
    let mut w = csv_out(dir, CAPACITY_FILE, comments, &strings(&["snapshot_id", "capacity_bps"]))?;
    for (snap, (sum, n)) in &by_snapshot {
        w.write_record([snap.to_string(), (sum / *n as f64).to_string()])?;
    }
    w.flush()?;

    let mut counts: Vec<(f64, usize)> = histogram.into_iter().map(|(b, n)| (f64::from_bits(b), n)).collect();
    counts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = csv_out(dir, HISTOGRAM_FILE, comments, &strings(&["capacity_bps", "count"]))?;
    for (c, n) in counts {
        w.write_record([c.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok([SCATTER_FILE, CAPACITY_FILE, HISTOGRAM_FILE].iter().map(|f| dir.join(f)).collect())
}

/// Writes the weight and smoothed-RMSE trajectories and returns their paths.
pub fn trace_report(trace: &Trace, window: usize, dir: &Path, comments: &[String]) -> Result<Vec<PathBuf>, ReportError> {
    if window == 0 {
        return Err(ReportError::Window);
    }
    let mut header = strings(&["sample", "step"]);
    header.extend((0..trace.arity).map(|i| format!("theta_{i}")));
    let mut w = csv_out(dir, WEIGHTS_FILE, comments, &header)?;
    for i in 0..trace.len() {
        let last_of_step = i + 1 == trace.len() || trace.step[i + 1] != trace.step[i];
        if last_of_step {
            let mut rec = vec![trace.sample[i].to_string(), trace.step[i].to_string()];
            rec.extend(trace.theta[i * trace.arity..(i + 1) * trace.arity].iter().map(|t| t.to_string()));
            w.write_record(rec)?;
        }
    }
    w.flush()?;

    let mut w = csv_out(dir, RMSE_FILE, comments, &strings(&["sample", "rmse_smoothed", "flagged"]))?;
    for (j, rmse) in smoothed_rmse(&trace.residual, window).into_iter().enumerate() {
        let i = j + window - 1;
        w.write_record([
            trace.sample[i].to_string(),
            rmse.to_string(),
            u8::from(trace.flagged[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok([WEIGHTS_FILE, RMSE_FILE].iter().map(|f| dir.join(f)).collect())
}
