use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{check_finite_param, AdaptiveError};

/// Residual drift detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonitorConfig {
    /// Samples in the smoothed RMSE window.
    pub window: usize,
    /// Flag when the smoothed RMSE exceeds `threshold * baseline`.
    pub threshold: f64,
    /// A raised flag clears once the RMSE drops below `release * baseline`.
    pub release: f64,
    /// Exponential factor for the baseline RMSE. Until that many updates
    /// have been averaged the baseline is the plain running mean.
    pub baseline_forgetting: f64,
    /// Leading residuals excluded from the baseline (estimator start-up).
    pub warmup: usize,
    /// After this many consecutive flagged samples the current level becomes
    /// the new baseline. `None` keeps the flag until the RMSE recovers.
    pub hold: Option<usize>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            window: 100,
            threshold: 3.0,
            release: 2.0,
            baseline_forgetting: 0.999,
            warmup: 200,
            hold: Some(500),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorStatus {
    /// RMSE over the last `window` residuals, once the window is full.
    pub rmse: Option<f64>,
    pub baseline: Option<f64>,
    pub flagged: bool,
    /// True only on the sample where the flag is raised.
    pub onset: bool,
}

/// Tracks a smoothed RMSE against a slowly adapting baseline.
/// The baseline is frozen while flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMonitor {
    cfg: MonitorConfig,
    squares: VecDeque<f64>,
    baseline: Option<f64>,
    /// Updates averaged into the baseline since it was (re)started.
    averaged: u64,
    flagged: bool,
    flagged_for: usize,
    onsets: u64,
    samples: u64,
}

impl ResidualMonitor {
    pub fn new(cfg: MonitorConfig) -> Result<Self, AdaptiveError> {
        check_finite_param("monitor window", cfg.window as f64, cfg.window > 0)?;
        check_finite_param("monitor threshold", cfg.threshold, cfg.threshold > 1.0)?;
        check_finite_param(
            "monitor release",
            cfg.release,
            cfg.release >= 1.0 && cfg.release <= cfg.threshold,
        )?;
        check_finite_param(
            "baseline forgetting",
            cfg.baseline_forgetting,
            (0.0..1.0).contains(&cfg.baseline_forgetting),
        )?;
        Ok(Self {
            cfg,
            squares: VecDeque::with_capacity(cfg.window),
            baseline: None,
            averaged: 0,
            flagged: false,
            flagged_for: 0,
            onsets: 0,
            samples: 0,
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn flagged(&self) -> bool {
        self.flagged
    }

    /// Number of times the flag has been raised.
    pub fn onsets(&self) -> u64 {
        self.onsets
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn rmse(&self) -> Option<f64> {
        if self.squares.len() < self.cfg.window {
            return None;
        }
        let sum: f64 = self.squares.iter().sum();
        Some(libm::sqrt(sum / self.cfg.window as f64))
    }

    pub fn update(&mut self, residual: f64) -> MonitorStatus {
        self.samples += 1;
        if self.squares.len() == self.cfg.window {
            self.squares.pop_front();
        }
        self.squares.push_back(residual * residual);
        let Some(rmse) = self.rmse() else {
            return self.status(None, false);
        };
        if self.samples <= self.cfg.warmup as u64 {
            return self.status(Some(rmse), false);
        }
        let Some(base) = self.baseline else {
            self.baseline = Some(rmse);
            self.averaged = 1;
            return self.status(Some(rmse), false);
        };
        let was = self.flagged;
        let level = if was { self.cfg.release } else { self.cfg.threshold };
        self.flagged = rmse > level * base;
        if self.flagged {
            self.flagged_for += 1;
            if self.cfg.hold.is_some_and(|h| self.flagged_for > h) {
                self.baseline = Some(rmse);
                self.averaged = 1;
                self.flagged = false;
                self.flagged_for = 0;
            }
        } else {
            self.flagged_for = 0;
            self.averaged += 1;
            let a = self.cfg.baseline_forgetting.min(1.0 - 1.0 / self.averaged as f64);
            self.baseline = Some(a * base + (1.0 - a) * rmse);
        }
        let onset = self.flagged && !was;
        if onset {
            self.onsets += 1;
        }
        self.status(Some(rmse), onset)
    }

    /// Feeds residuals in order and returns the status after the last one,
    /// with `onset` set if any of them raised the flag.
    pub fn update_all<I: IntoIterator<Item = f64>>(&mut self, residuals: I) -> MonitorStatus {
        let mut last = self.status(self.rmse(), false);
        let mut any_onset = false;
        for r in residuals {
            last = self.update(r);
            any_onset |= last.onset;
        }
        last.onset = any_onset;
        last
    }

    fn status(&self, rmse: Option<f64>, onset: bool) -> MonitorStatus {
        MonitorStatus {
            rmse,
            baseline: self.baseline,
            flagged: self.flagged,
            onset,
        }
    }

    pub fn snapshot(&self) -> MonitorSnapshot {
        MonitorSnapshot {
            window: self.cfg.window,
            threshold: self.cfg.threshold,
            release: self.cfg.release,
            baseline_forgetting: self.cfg.baseline_forgetting,
            warmup: self.cfg.warmup,
            hold: self.cfg.hold,
            squares: self.squares.iter().copied().collect(),
            baseline: self.baseline,
            averaged: self.averaged,
            flagged: self.flagged,
            flagged_for: self.flagged_for,
            onsets: self.onsets,
            samples: self.samples,
        }
    }

    pub fn from_snapshot(s: &MonitorSnapshot) -> Result<Self, AdaptiveError> {
        let mut m = Self::new(MonitorConfig {
            window: s.window,
            threshold: s.threshold,
            release: s.release,
            baseline_forgetting: s.baseline_forgetting,
            warmup: s.warmup,
            hold: s.hold,
        })?;
        if s.squares.len() > s.window {
            return Err(AdaptiveError::Snapshot("monitor holds more residuals than its window"));
        }
        m.squares = s.squares.iter().copied().collect();
        m.baseline = s.baseline;
        m.averaged = s.averaged;
        m.flagged = s.flagged;
        m.flagged_for = s.flagged_for;
        m.onsets = s.onsets;
        m.samples = s.samples;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonitorSnapshot {
    pub window: usize,
    pub threshold: f64,
    pub release: f64,
    pub baseline_forgetting: f64,
    pub warmup: usize,
    pub hold: Option<usize>,
    pub squares: Vec<f64>,
    pub baseline: Option<f64>,
    pub averaged: u64,
    pub flagged: bool,
    pub flagged_for: usize,
    pub onsets: u64,
    pub samples: u64,
}
