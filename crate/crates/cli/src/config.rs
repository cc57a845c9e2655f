//! Experiment configuration files.
//!
//! ```json
//! {
//!   "ensemble": { "inline": { "N": 4, "J": 2, "signals": [[3,1,0,0],[1,1,0,0]] } },
//!   "model": { "N": 4, "J": 2, "family": { "kind": "general" }, "caps": { "common": 4, "innovation": 2 } },
//!   "allocations": [[1,2],[2,1]],
//!   "trials": 200,
//!   "base_seed": 0,
//!   "mode": "known"
//! }
//! ```
//!
//! `allocations` may instead be `{ "sweep": { "min": 0, "max": 3 } }`, covering every
//! allocation with entries in `min..=max`. A generated ensemble is written as
//! `{ "generator": { "seed": 7 } }`.

use std::path::Path;

use dcs_core::ensemble::{EnsembleModel, LocationMatrix, SignalEnsemble};
use dcs_core::recovery::DEFAULT_RECOVERY_TOL;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Known,
    Unknown,
    BoundsOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Known => "known",
            Self::Unknown => "unknown",
            Self::BoundsOnly => "bounds-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "known" => Some(Self::Known),
            "unknown" => Some(Self::Unknown),
            "bounds-only" => Some(Self::BoundsOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSource {
    Inline(SignalEnsemble),
    /// A fresh `X` per trial: a location matrix drawn uniformly from the model, then
    /// standard normal values.
    Generator {
        seed: u64,
        /// Restrict the draw to matrices whose widths equal the caps.
        #[serde(default)]
        at_caps: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AllocationSpec {
    List(Vec<Vec<usize>>),
    Sweep { sweep: SweepRange },
}

impl AllocationSpec {
    /// Explicit list order, or lexicographic order for a sweep.
    pub fn expand(&self, sensors: usize) -> Vec<Vec<usize>> {
        match self {
            Self::List(list) => list.clone(),
            Self::Sweep { sweep } => {
                let mut out = vec![Vec::new()];
                for _ in 0..sensors {
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<usize>| {
                            (sweep.min..=sweep.max).map(move |m| {
                                let mut next = prefix.clone();
                                next.push(m);
                                next
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }
}

fn one() -> usize {
    1
}

fn default_tol() -> f64 {
    DEFAULT_RECOVERY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSource,
    pub model: EnsembleModel,
    pub allocations: AllocationSpec,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub mode: Mode,
    /// Location matrix handed to known-P recovery and the bound checks. Defaults to
    /// the sparsest feasible matrix for an inline ensemble, or the generated one.
    #[serde(default)]
    pub location: Option<LocationMatrix>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Record wall time per trial. Off by default so output is byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn sensors(&self) -> usize {
        self.model.sensors
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        let (n, sensors) = (self.model.n, self.model.sensors);
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive and finite, got {}", self.tol));
        }
        let allocations = self.allocations.expand(sensors);
        if allocations.is_empty() {
            return bad("allocations must not be empty".into());
        }
        if let AllocationSpec::Sweep { sweep } = &self.allocations {
            if sweep.min > sweep.max {
                return bad(format!("sweep min {} exceeds max {}", sweep.min, sweep.max));
            }
        }
        if let Some((i, a)) = allocations.iter().enumerate().find(|(_, a)| a.len() != sensors) {
            return bad(format!("allocation {i} has {} entries, model has J = {sensors}", a.len()));
        }
        if let EnsembleSource::Inline(x) = &self.ensemble {
            if x.n() != n || x.sensors() != sensors {
                return bad(format!(
                    "inline ensemble has N = {}, J = {} but model has N = {n}, J = {sensors}",
                    x.n(),
                    x.sensors()
                ));
            }
        }
        if let Some(p) = &self.location {
            if p.n() != n || p.sensors() != sensors {
                return bad(format!(
                    "location has N = {}, J = {} but model has N = {n}, J = {sensors}",
                    p.n(),
                    p.sensors()
                ));
            }
            if !p.is_full_rank() {
                return bad(format!("location {p} is not full rank"));
            }
        }
        Ok(())
    }
}
