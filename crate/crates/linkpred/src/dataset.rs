//! Link-sample datasets as CSV.
//!
//! Optional leading `#` comment lines are followed by a header naming
//! [`COLUMNS`] exactly, then one record per [`LinkSample`]. Floats are written
//! in shortest round-trip form so `read(write(d)) == d` field for field.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use linkpred_core::netsim::{LinkSample, NetsimError};
use linkpred_core::queueing::{QueueError, QueueParams};
use thiserror::Error;

pub const COLUMNS: [&str; 13] = [
    "scenario_id",
    "snapshot_id",
    "link_id",
    "capacity_bps",
    "mean_packet_bits",
    "arrival_rate_pps",
    "effective_arrival_rate_pps",
    "service_rate_pps",
    "buffer_slots",
    "occupancy_pkts",
    "occupancy_norm",
    "delay_s",
    "blocked_fraction",
];

/// Relative tolerance on `occupancy_norm = occupancy_pkts / buffer_slots`.
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: header column {index} is `{found}`, expected `{expected}`")]
    Header {
        line: u64,
        index: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}, field `{field}`: {message}")]
    Field {
        line: u64,
        field: &'static str,
        message: String,
    },
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => DatasetError::Io(io),
            other => DatasetError::Csv {
                line,
                message: format!("{other:?}"),
            },
        }
    }
}

fn record(s: &LinkSample) -> [String; 13] {
    let p = &s.params;
    [
        s.scenario_id.to_string(),
        s.snapshot_id.to_string(),
        s.link_id.to_string(),
        s.capacity.to_string(),
        s.mean_packet_bits.to_string(),
        p.arrival_rate().to_string(),
        p.effective_arrival_rate().to_string(),
        p.service_rate().to_string(),
        p.buffer_slots().to_string(),
        s.occupancy.to_string(),
        s.occupancy_norm().to_string(),
        s.delay.to_string(),
        s.blocked_fraction.to_string(),
    ]
}

/// Writes `comments` as `#` lines (each must already start with `#`), the
/// header and every sample.
pub fn write_dataset<W: Write>(out: W, samples: &[LinkSample], comments: &[String]) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(out);
    for c in comments {
        debug_assert!(c.starts_with('#'));
        writeln!(out, "{c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for s in samples {
        w.write_record(record(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(path: &Path, samples: &[LinkSample], comments: &[String]) -> Result<(), DatasetError> {
    write_dataset(File::create(path)?, samples, comments)
}

struct Row<'a> {
    line: u64,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, field: &'static str, message: impl Into<String>) -> DatasetError {
        DatasetError::Field {
            line: self.line,
            field,
            message: message.into(),
        }
    }

    fn raw(&self, i: usize) -> &str {
        self.rec.get(i).unwrap_or("").trim()
    }

    fn uint(&self, i: usize) -> Result<u32, DatasetError> {
        self.raw(i)
            .parse()
            .map_err(|_| self.err(COLUMNS[i], format!("`{}` is not a non-negative integer", self.raw(i))))
    }

    fn float(&self, i: usize) -> Result<f64, DatasetError> {
        let v: f64 = self
            .raw(i)
            .parse()
            .map_err(|_| self.err(COLUMNS[i], format!("`{}` is not a number", self.raw(i))))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(COLUMNS[i], "must be finite"))
        }
    }

    fn sample(&self) -> Result<LinkSample, DatasetError> {
        if self.rec.len() != COLUMNS.len() {
            return Err(DatasetError::Csv {
                line: self.line,
                message: format!("expected {} fields, found {}", COLUMNS.len(), self.rec.len()),
            });
        }
        let capacity = self.float(3)?;
        if capacity <= 0.0 {
            return Err(self.err("capacity_bps", format!("must be > 0, got {capacity}")));
        }
        let params = QueueParams::new(self.float(5)?, self.float(6)?, self.float(7)?, self.uint(8)?).map_err(|e| {
            let field = match e {
                QueueError::ArrivalRate(_) => "arrival_rate_pps",
                QueueError::EffectiveArrivalRate { .. } => "effective_arrival_rate_pps",
                QueueError::ServiceRate(_) => "service_rate_pps",
                QueueError::BufferSlots(_) => "buffer_slots",
                QueueError::Utilization(_) => "arrival_rate_pps",
            };
            self.err(field, e.to_string())
        })?;
        let sample = LinkSample {
            scenario_id: self.uint(0)?,
            snapshot_id: self.uint(1)?,
            link_id: self.uint(2)?,
            capacity,
            mean_packet_bits: self.float(4)?,
            params,
            occupancy: self.float(9)?,
            delay: self.float(11)?,
            blocked_fraction: self.float(12)?,
        };
        sample.validate().map_err(|e| match e {
            NetsimError::Sample { field, value } => self.err(field, format!("invalid value {value}")),
            other => self.err("capacity_bps", other.to_string()),
        })?;
        let norm = self.float(10)?;
        if (norm - sample.occupancy_norm()).abs() > NORM_TOL * norm.abs().max(1.0) {
            return Err(self.err(
                "occupancy_norm",
                format!("{norm} != occupancy_pkts / buffer_slots = {}", sample.occupancy_norm()),
            ));
        }
        Ok(sample)
    }
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<LinkSample>, DatasetError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rec = csv::StringRecord::new();
    if !r.read_record(&mut rec)? {
        return Err(DatasetError::Header {
            line: 1,
            index: 0,
            expected: COLUMNS[0],
            found: String::new(),
        });
    }
    let line = rec.position().map_or(1, |p| p.line());
    for (index, expected) in COLUMNS.iter().enumerate() {
        let found = rec.get(index).unwrap_or("").trim();
        if found != *expected {
            return Err(DatasetError::Header {
                line,
                index,
                expected,
                found: found.into(),
            });
        }
    }
    if rec.len() != COLUMNS.len() {
        return Err(DatasetError::Csv {
            line,
            message: format!("header has {} columns, expected {}", rec.len(), COLUMNS.len()),
        });
    }
    let mut out = Vec::new();
    while r.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        out.push(Row { line, rec: &rec }.sample()?);
    }
    Ok(out)
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<LinkSample>, DatasetError> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Whether samples are ordered by `(scenario_id, snapshot_id)`.
pub fn is_replay_ordered(samples: &[LinkSample]) -> bool {
    samples
        .windows(2)
        .all(|w| (w[0].scenario_id, w[0].snapshot_id) <= (w[1].scenario_id, w[1].snapshot_id))
}
