//! JSON reports for the single-instance subcommands.

use dcs_core::bounds::{check_converse, check_known_p, check_unknown_p, minimal_allocations, BoundMode, BoundReport};
use dcs_core::ensemble::{EnsembleModel, LocationMatrix, SignalEnsemble, ValueVector};
use dcs_core::matching::{build_graph, find_matching, BipartiteGraph, MatchingResult};
use dcs_core::measurement::{sample_sensing, SENSING_GENERATOR};
use dcs_core::recovery::{recover_known_p, recover_unknown_p, DEFAULT_RECOVERY_TOL};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub known: Vec<Vec<usize>>,
    pub unknown: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub allocation: Vec<usize>,
    pub known: BoundReport,
    pub unknown: BoundReport,
    pub converse: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub location: LocationMatrix,
    pub allocation: Option<AllocationReport>,
    /// Pareto-minimal allocations.
    pub frontier: Frontier,
}

pub fn analyze(p: &LocationMatrix, allocation: Option<&[usize]>) -> Result<AnalyzeReport, CliError> {
    let allocation = allocation
        .map(|a| {
            Ok::<_, CliError>(AllocationReport {
                allocation: a.to_vec(),
                known: check_known_p(a, p)?,
                unknown: check_unknown_p(a, p)?,
                converse: check_converse(a, p)?,
            })
        })
        .transpose()?;
    Ok(AnalyzeReport {
        location: p.clone(),
        allocation,
        frontier: Frontier {
            known: minimal_allocations(p, BoundMode::Known)?,
            unknown: minimal_allocations(p, BoundMode::Unknown)?,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub graph: BipartiteGraph,
    pub edges: Vec<(usize, usize)>,
    pub matching: MatchingResult,
}

pub fn matching(p: &LocationMatrix, allocation: &[usize]) -> Result<MatchingReport, CliError> {
    let graph = build_graph(p, allocation)?;
    let matching = find_matching(&graph);
    Ok(MatchingReport { edges: graph.edges().collect(), graph, matching })
}

fn default_tol() -> f64 {
    DEFAULT_RECOVERY_TOL
}

/// Input of `recover`: exactly one of `location` (known `P`) or `model` (unknown `P`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    pub ensemble: SignalEnsemble,
    pub seed: u64,
    pub allocation: Vec<usize>,
    #[serde(default)]
    pub location: Option<LocationMatrix>,
    #[serde(default)]
    pub model: Option<EnsembleModel>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl RecoverConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.location.is_some() == cfg.model.is_some() {
            return Err(CliError::Config("give exactly one of \"location\" or \"model\"".into()));
        }
        if cfg.allocation.len() != cfg.ensemble.sensors() {
            return Err(CliError::Config(format!(
                "allocation has {} entries, ensemble has J = {}",
                cfg.allocation.len(),
                cfg.ensemble.sensors()
            )));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub fit: f64,
    pub cross_validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensing {
    pub generator: String,
    pub seed: u64,
    pub allocation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverReport {
    pub status: String,
    #[serde(rename = "chosen_P")]
    pub chosen_p: Option<LocationMatrix>,
    pub x_hat: Option<SignalEnsemble>,
    pub theta: Option<ValueVector>,
    pub certificate: Option<ValueVector>,
    pub residuals: Residuals,
    pub candidates_examined: usize,
    pub max_abs_err: Option<f64>,
    pub sensing: Sensing,
}

pub fn recover(cfg: &RecoverConfig) -> Result<RecoverReport, CliError> {
    let x = &cfg.ensemble;
    let s = sample_sensing(x.n(), &cfg.allocation, cfg.seed);
    let y = s.measure(x)?;
    let out = match (&cfg.location, &cfg.model) {
        (Some(p), _) => recover_known_p(&y, &s, p, cfg.tol)?,
        (None, Some(model)) => recover_unknown_p(&y, &s, model, cfg.tol)?,
        (None, None) => unreachable!("validated on load"),
    };
    Ok(RecoverReport {
        status: out.status.as_str().to_string(),
        max_abs_err: out.x_hat.as_ref().map(|xh| xh.max_abs_diff(x)),
        chosen_p: out.chosen_p,
        x_hat: out.x_hat,
        theta: out.theta,
        certificate: out.certificate,
        residuals: Residuals { fit: out.residual, cross_validation: out.cross_validation_residual },
        candidates_examined: out.candidates_examined,
        sensing: Sensing {
            generator: SENSING_GENERATOR.to_string(),
            seed: cfg.seed,
            allocation: cfg.allocation.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> LocationMatrix {
        LocationMatrix::new(4, vec![0, 1], vec![vec![0], vec![]]).unwrap()
    }

    #[test]
    fn analyze_example() {
        let report = analyze(&p1(), Some(&[1, 1])).unwrap();
        let a = report.allocation.unwrap();
        assert!(!a.known.satisfied);
        assert!(!a.converse.satisfied);
        let mut known = report.frontier.known.clone();
        known.sort();
        assert_eq!(known, vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn matching_example() {
        let report = matching(&p1(), &[3, 2]).unwrap();
        assert!(report.matching.complete);
        assert_eq!(report.edges.len(), 2 + 5 + 3);
    }

    #[test]
    fn recover_requires_one_of_location_or_model() {
        let text = r#"{"ensemble":{"N":4,"J":2,"signals":[[3,1,0,0],[1,1,0,0]]},"seed":1,"allocation":[2,1]}"#;
        assert!(matches!(RecoverConfig::from_json(text), Err(CliError::Config(_))));
        let with_p =
            text.replace("\"seed\"", "\"location\":{\"N\":4,\"common\":[0,1],\"innovations\":[[0],[]]},\"seed\"");
        let report = recover(&RecoverConfig::from_json(&with_p).unwrap()).unwrap();
        assert_eq!(report.status, "unique");
        assert!(report.max_abs_err.unwrap() < 1e-8);
    }
}
