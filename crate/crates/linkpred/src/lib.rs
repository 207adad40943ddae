//! Files, campaigns and command-line tooling around [`linkpred_core`].
//!
//! * [`dataset`]: the link-sample CSV schema.
//! * [`model`] and [`checkpoint`]: JSON model files and resumable stream state.
//! * [`runner`]: parallel campaign execution, bit-identical to the serial run.
//! * [`fit`], [`stream`], [`report`]: batch fitting, streaming replay and
//!   plot-data export, shared by the `linkpred` binary and the tests.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod fit;
pub mod model;
pub mod report;
pub mod runner;
pub mod stream;

pub use linkpred_core as core;

/// Tool name and version written into every output file.
pub const TOOL: &str = concat!("linkpred ", env!("CARGO_PKG_VERSION"));

/// `# linkpred <version> config=<json>` comment line for CSV outputs.
pub fn header_comment(config: &serde_json::Value) -> String {
    format!("# {TOOL} config={config}")
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
