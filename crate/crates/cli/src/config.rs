//! Experiment file for `wasslab rates`.
//!
//! ```toml
//! gamma = 0.25          # map exponent; omit for iid processes
//! b = 0.3               # observable exponent (0 means the identity)
//! side = "zero"         # singular endpoint of the observable: zero | one
//! statistic = "mean_w1" # mean_w1 | l2_w1 | lp_w1:P | rosenthal:P
//! n_grid = [1024, 2048, 4096, 8192, 16384]
//! replicas = 100
//! tol = 0.05
//! log_correction = "none" # none | fit
//! seed = 1
//! # process = "iid:uniform"   # iid reference process instead of a map
//! # reference_bins = 16384     # Ulam bins for the map reference law
//! ```

use std::path::Path;

use serde::Deserialize;
use wasslab_core::bounds::{Side, Statistic};
use wasslab_core::distributions::ObservableKind;
use wasslab_core::dynamics::{ProcessKind, ProcessSpec};
use wasslab_core::montecarlo::LogCorrection;
use wasslab_core::Observable;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default)]
    pub process: Option<String>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_side")]
    pub side: String,
    #[serde(default = "default_statistic")]
    pub statistic: String,
    pub n_grid: Vec<usize>,
    pub replicas: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_correction")]
    pub log_correction: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference_bins: Option<usize>,
}

fn default_side() -> String {
    "zero".into()
}

fn default_statistic() -> String {
    "mean_w1".into()
}

fn default_tol() -> f64 {
    0.05
}

fn default_correction() -> String {
    "none".into()
}

/// What the experiment measures, after validation.
#[derive(Debug, Clone)]
pub enum Target {
    Iid(ProcessSpec),
    Map { gamma: f64, b: f64, side: Side },
}

#[derive(Debug, Clone)]
pub struct Validated {
    pub target: Target,
    pub statistic: Statistic,
    pub correction: LogCorrection,
}

impl RatesConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not depend on the rate tables.
    pub fn validate(&self) -> Result<Validated, CliError> {
        if self.n_grid.len() < 4 {
            return Err(CliError::input("n_grid needs at least 4 sample sizes"));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::input("n_grid must be positive and strictly increasing"));
        }
        if self.replicas == 0 {
            return Err(CliError::input("replicas must be positive"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::input("tol must be positive"));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(CliError::input("b must be nonnegative"));
        }
        let statistic: Statistic = self.statistic.parse()?;
        let side: Side = self.side.parse()?;
        let correction = match self.log_correction.as_str() {
            "none" => LogCorrection::None,
            "fit" => LogCorrection::Fit,
            other => return Err(CliError::input(format!("log_correction must be none or fit, got `{other}`"))),
        };
        let target = match (&self.process, self.gamma) {
            (Some(_), Some(_)) => return Err(CliError::input("give either process (iid) or gamma (map), not both")),
            (None, None) => return Err(CliError::input("config needs gamma or an iid process")),
            (Some(p), None) => {
                let spec: ProcessSpec = p.parse()?;
                if !matches!(spec.kind, ProcessKind::Iid { .. }) {
                    return Err(CliError::input("process must be iid:LAW; maps are described by gamma, b and side"));
                }
                Target::Iid(spec)
            }
            (None, Some(gamma)) => Target::Map {
                gamma,
                b: self.b,
                side,
            },
        };
        if self.reference_bins.is_some() && matches!(target, Target::Iid(_)) {
            return Err(CliError::input("reference_bins applies to map processes only"));
        }
        Ok(Validated {
            target,
            statistic,
            correction,
        })
    }
}

/// Observable `x^{-b}` or `(1-x)^{-b}`; the identity when `b = 0`.
pub fn observable(b: f64, side: Side) -> Result<Observable, CliError> {
    if b == 0.0 {
        return Ok(Observable::identity());
    }
    let kind = match side {
        Side::Zero => ObservableKind::SingularAtZero,
        Side::One => ObservableKind::SingularAtOne,
    };
    Ok(Observable::singular(kind, b, 1.0, None)?)
}
