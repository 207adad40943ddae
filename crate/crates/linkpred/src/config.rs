//! Run settings shared by the command line and TOML config files.
//!
//! Every setting is a flag (`--mu-step`) and a config key (`mu-step`). A
//! `--config` file overrides flags; anything still unset takes its default.
//! A config file may also carry a full `[campaign]` table for `gen`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use linkpred_core::netsim::ScenarioConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 100 matrices x 119 snapshots on a 10-node, 30-link graph.
    Full,
    /// 1 matrix x 2 snapshots on a 3-node ring.
    Tiny,
}

impl Preset {
    pub fn scenario(self) -> ScenarioConfig {
        match self {
            Preset::Full => ScenarioConfig::full_scale(),
            Preset::Tiny => ScenarioConfig {
                node_count: 3,
                link_count: 3,
                traffic_matrix_count: 1,
                snapshots: 2,
                snapshot_duration: 50.0,
                warmup: 5.0,
                ..ScenarioConfig::full_scale()
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Scenario file (TOML) for `gen`.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario for `gen`.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Dataset CSV to read.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Model JSON file to read (`eval`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stream trace CSV to read (`report`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Declared paths for `eval`: one path per line, link ids separated by
    /// commas or spaces.
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Checkpoint to resume a stream from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Output file (`gen`, `fit`) or directory (`stream`, `report`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `linear4` or `bernstein:<order>`.
    #[arg(long)]
    pub basis: Option<String>,
    /// `rls`, `exact` or `lms`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Ridge penalty; `fit` also accepts `auto` (validation search).
    #[arg(long)]
    pub alpha: Option<String>,
    /// Forgetting factor in (0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// LMS step size.
    #[arg(long = "mu-step")]
    pub mu_step: Option<f64>,
    /// Taylor order of the RLS regularization correction (1 or 2).
    #[arg(long = "taylor-order")]
    pub taylor_order: Option<u8>,
    /// Samples per estimator step.
    #[arg(long)]
    pub block: Option<usize>,
    /// Residual smoothing window in samples.
    #[arg(long)]
    pub window: Option<usize>,
    /// Campaign seed for presets; scenario split seed for `fit` and `eval`
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of scenarios held out by `fit`.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Samples `eval` scores: `all`, `train` or `test`.
    #[arg(long)]
    pub split: Option<String>,
    /// Worker threads for `gen` (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Stop a stream after this many samples (rounded down to whole blocks).
    #[arg(long)]
    pub limit: Option<u64>,
    /// Inline scenario; config files only.
    #[arg(skip)]
    pub campaign: Option<ScenarioConfig>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// `self` with every setting present in `top` replaced.
    pub fn overlaid(mut self, top: &Settings) -> Self {
        overlay!(
            self, top, scenario, preset, dataset, model, trace, paths, resume, out, basis, estimator, alpha, lambda,
            mu_step, taylor_order, block, window, seed, holdout, split, threads, limit, campaign
        );
        self
    }

    /// Fills unset hyperparameters with their defaults.
    pub fn with_defaults(self, command: &str) -> Self {
        let defaults = Settings {
            basis: Some("bernstein:8".into()),
            estimator: Some("rls".into()),
            alpha: Some(if command == "fit" { "auto" } else { "0.08" }.into()),
            lambda: Some(0.9),
            mu_step: Some(0.05),
            taylor_order: Some(1),
            block: Some(10),
            window: Some(100),
            seed: Some(1),
            holdout: Some(0.2),
            split: Some("all".into()),
            ..Settings::default()
        };
        defaults.overlaid(&self)
    }
}
