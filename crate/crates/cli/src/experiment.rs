//! Monte Carlo runs over allocations and seeds.
//!
//! Trial `t` measures with seed `base_seed + t` (wrapping), so every allocation sees the
//! same sequence of sensing seeds. A generated ensemble for trial `t` comes from
//! ChaCha20 keyed by the generator seed on stream `t`, independent of the allocation.

use std::time::Instant;

use dcs_core::bounds::{check_known_p, check_unknown_p, BoundReport};
use dcs_core::ensemble::{ensemble_sparsity, is_feasible, synthesize, LocationMatrix, SignalEnsemble, ValueVector};
use dcs_core::measurement::sample_sensing;
use dcs_core::recovery::{recover_known_p, recover_unknown_p, RecoveryOutcome, RecoveryStatus};
use dcs_core::DcsError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EnsembleSource, ExperimentConfig, Mode};
use crate::CliError;

/// Tolerance on `||X̂ - X||_∞ / (1 + ||X||_∞)` for a trial to count as exact.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Unique,
    Ambiguous,
    Infeasible,
    /// Unknown-P recovery needs one measurement at every sensor.
    Refused,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unique => "unique",
            Self::Ambiguous => "ambiguous",
            Self::Infeasible => "infeasible",
            Self::Refused => "refused",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Unique, Self::Ambiguous, Self::Infeasible, Self::Refused].into_iter().find(|v| v.as_str() == s)
    }
}

impl From<RecoveryStatus> for TrialStatus {
    fn from(s: RecoveryStatus) -> Self {
        match s {
            RecoveryStatus::Unique => Self::Unique,
            RecoveryStatus::Ambiguous => Self::Ambiguous,
            RecoveryStatus::Infeasible => Self::Infeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub allocation: Vec<usize>,
    pub mode: Mode,
    pub status: TrialStatus,
    /// `||X̂ - X||_∞`; absent when nothing was reconstructed.
    pub max_abs_err: Option<f64>,
    pub candidates: usize,
    /// Wall time in milliseconds, zero unless timing is enabled.
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub allocation: Vec<usize>,
    pub trials: usize,
    pub unique: usize,
    pub ambiguous: usize,
    pub infeasible: usize,
    pub refused: usize,
    /// Fraction of trials with status `unique`.
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationBounds {
    pub allocation: Vec<usize>,
    pub known: BoundReport,
    pub unknown: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<AllocationSummary>,
    /// Bound reports against the reference location matrix (bounds-only mode).
    pub bounds: Vec<AllocationBounds>,
    /// Trials where a guaranteed outcome did not happen.
    pub violations: Vec<String>,
}

/// The ensemble of one trial and the location matrix it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEnsemble {
    pub x: SignalEnsemble,
    pub p: LocationMatrix,
}

enum Source {
    Inline(TrialEnsemble),
    Generated { seed: u64, pool: Vec<LocationMatrix> },
}

impl Source {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        match &cfg.ensemble {
            EnsembleSource::Inline(x) => {
                let p = match &cfg.location {
                    Some(p) => p.clone(),
                    None => {
                        ensemble_sparsity(x, &cfg.model)
                            .map_err(|e| CliError::Config(format!("inline ensemble: {e}")))?
                            .1
                    }
                };
                Ok(Self::Inline(TrialEnsemble { x: x.clone(), p }))
            }
            &EnsembleSource::Generator { seed, at_caps } => {
                let pool: Vec<LocationMatrix> = if at_caps {
                    cfg.model.matrices_with_columns(cfg.model.max_columns())
                } else {
                    cfg.model.enumerate().collect()
                };
                if pool.is_empty() {
                    return Err(CliError::Config("the model admits no location matrix to draw from".into()));
                }
                Ok(Self::Generated { seed, pool })
            }
        }
    }

    fn trial(&self, t: usize) -> TrialEnsemble {
        match self {
            Self::Inline(e) => e.clone(),
            Self::Generated { seed, pool } => generate(*seed, t, pool),
        }
    }
}

/// Draws `P` uniformly from `pool` and `Θ` i.i.d. standard normal.
pub fn generate(seed: u64, trial: usize, pool: &[LocationMatrix]) -> TrialEnsemble {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let p = pool[rng.random_range(0..pool.len())].clone();
    let theta: Vec<f64> = (0..p.num_columns()).map(|_| rng.sample(StandardNormal)).collect();
    let values = ValueVector::from_flat(&p, &theta).expect("length matches");
    let (x, _) = synthesize(&p, &values).expect("compatible by construction");
    TrialEnsemble { x, p }
}

/// Generated ensembles for `trials` trials, as `run_experiment` sees them.
pub fn trial_ensembles(cfg: &ExperimentConfig) -> Result<Vec<TrialEnsemble>, CliError> {
    let source = Source::new(cfg)?;
    Ok((0..cfg.trials).map(|t| source.trial(t)).collect())
}

pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

struct TrialOutcome {
    record: TrialRecord,
    violation: Option<String>,
}

fn run_trial(
    cfg: &ExperimentConfig,
    ensemble: &TrialEnsemble,
    allocation: &[usize],
    trial: usize,
) -> Result<TrialOutcome, CliError> {
    let start = Instant::now();
    let seed = trial_seed(cfg.base_seed, trial);
    let s = sample_sensing(cfg.model.n, allocation, seed);
    let y = s.measure(&ensemble.x)?;
    let known_p = cfg.location.as_ref().unwrap_or(&ensemble.p);
    let outcome = match cfg.mode {
        Mode::Known => Some(recover_known_p(&y, &s, known_p, cfg.tol)?),
        Mode::Unknown => match recover_unknown_p(&y, &s, &cfg.model, cfg.tol) {
            Ok(out) => Some(out),
            Err(DcsError::EmptySensor { .. }) => None,
            Err(e) => return Err(e.into()),
        },
        Mode::BoundsOnly => unreachable!("bounds-only runs no trials"),
    };
    let ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let (status, err, candidates) = match &outcome {
        None => (TrialStatus::Refused, None, 0),
        Some(out) => {
            (out.status.into(), out.x_hat.as_ref().map(|x| x.max_abs_diff(&ensemble.x)), out.candidates_examined)
        }
    };
    let record = TrialRecord {
        trial,
        seed,
        allocation: allocation.to_vec(),
        mode: cfg.mode,
        status,
        max_abs_err: err,
        candidates,
        ms,
    };
    let violation = guarantee_violation(cfg, ensemble, known_p, &record, outcome.as_ref())?;
    Ok(TrialOutcome { record, violation })
}

/// Checks the outcomes the bounds promise: exact unique recovery with known `P` when
/// the known-P bound holds and `P` is feasible, a non-unique result when it fails, and
/// exact reconstruction with unknown `P` when the generating matrix is in the model
/// and satisfies the unknown-P bound.
fn guarantee_violation(
    cfg: &ExperimentConfig,
    ensemble: &TrialEnsemble,
    known_p: &LocationMatrix,
    record: &TrialRecord,
    outcome: Option<&RecoveryOutcome>,
) -> Result<Option<String>, CliError> {
    let exact = record.max_abs_err.is_some_and(|e| e <= EXACT_TOL * (1.0 + ensemble.x.max_abs()));
    let alloc = &record.allocation;
    let label = format!("trial {} allocation {alloc:?}", record.trial);
    Ok(match cfg.mode {
        Mode::Known => {
            let satisfied = check_known_p(alloc, known_p)?.satisfied;
            if satisfied && is_feasible(known_p, &ensemble.x, dcs_core::ensemble::DEFAULT_FEASIBILITY_TOL)? {
                (!(record.status == TrialStatus::Unique && exact))
                    .then(|| format!("{label}: bound holds but status {} exact {exact}", record.status.as_str()))
            } else if !satisfied {
                (record.status == TrialStatus::Unique)
                    .then(|| format!("{label}: bound violated but recovery reported unique"))
            } else {
                None
            }
        }
        Mode::Unknown => {
            let covered = cfg.model.contains(&ensemble.p) && check_unknown_p(alloc, &ensemble.p)?.satisfied;
            (covered && !exact).then(|| {
                format!(
                    "{label}: unknown-P bound holds but reconstruction failed (status {}, chosen {:?})",
                    record.status.as_str(),
                    outcome.and_then(|o| o.chosen_p.as_ref()).map(ToString::to_string)
                )
            })
        }
        Mode::BoundsOnly => None,
    })
}

fn summarize(allocations: &[Vec<usize>], records: &[TrialRecord]) -> Vec<AllocationSummary> {
    allocations
        .iter()
        .map(|alloc| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| &r.allocation == alloc).collect();
            let count = |s: TrialStatus| rows.iter().filter(|r| r.status == s).count();
            let unique = count(TrialStatus::Unique);
            AllocationSummary {
                allocation: alloc.clone(),
                trials: rows.len(),
                unique,
                ambiguous: count(TrialStatus::Ambiguous),
                infeasible: count(TrialStatus::Infeasible),
                refused: count(TrialStatus::Refused),
                success_rate: if rows.is_empty() { 0.0 } else { unique as f64 / rows.len() as f64 },
            }
        })
        .collect()
}

/// Runs every (allocation, trial) pair. Records come back allocation-major, in trial order,
/// whatever the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    cfg.validate()?;
    let source = Source::new(cfg)?;
    let allocations = cfg.allocations.expand(cfg.sensors());

    if cfg.mode == Mode::BoundsOnly {
        let reference = cfg.location.clone().unwrap_or_else(|| source.trial(0).p);
        let bounds = allocations
            .iter()
            .map(|a| {
                Ok(AllocationBounds {
                    allocation: a.clone(),
                    known: check_known_p(a, &reference)?,
                    unknown: check_unknown_p(a, &reference)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        return Ok(ExperimentResult { records: Vec::new(), summary: Vec::new(), bounds, violations: Vec::new() });
    }

    let ensembles: Vec<TrialEnsemble> = (0..cfg.trials).map(|t| source.trial(t)).collect();
    let jobs: Vec<(usize, usize)> = (0..allocations.len()).flat_map(|a| (0..cfg.trials).map(move |t| (a, t))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(a, t)| run_trial(cfg, &ensembles[t], &allocations[a], t))
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut records = Vec::with_capacity(outcomes.len());
    let mut violations = Vec::new();
    for o in outcomes {
        records.push(o.record);
        violations.extend(o.violation);
    }
    let summary = summarize(&allocations, &records);
    Ok(ExperimentResult { records, summary, bounds: Vec::new(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AllocationSpec;
    use dcs_core::ensemble::{Caps, EnsembleModel, Family};

    fn example_config(mode: Mode, allocations: Vec<Vec<usize>>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            ensemble: EnsembleSource::Inline(
                SignalEnsemble::new(vec![vec![3.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]]).unwrap(),
            ),
            model: EnsembleModel::new(4, 2, Family::General, Caps { common: 4, innovation: 2 }).unwrap(),
            allocations: AllocationSpec::List(allocations),
            trials,
            base_seed: 0,
            mode,
            location: Some(LocationMatrix::new(4, vec![0, 1], vec![vec![0], vec![]]).unwrap()),
            tol: 1e-8,
            timing: false,
        }
    }

    #[test]
    fn known_mode_success_rates() {
        let cfg = example_config(Mode::Known, vec![vec![1, 2], vec![2, 1], vec![2, 2], vec![1, 1]], 20);
        let result = run_experiment(&cfg).unwrap();
        let rates: Vec<f64> = result.summary.iter().map(|s| s.success_rate).collect();
        assert_eq!(rates, vec![1.0, 1.0, 1.0, 0.0]);
        assert_eq!(result.summary[3].ambiguous, 20);
        assert!(result.violations.is_empty(), "{:?}", result.violations);
        assert_eq!(result.records.len(), 80);
        assert_eq!(result.records[21].trial, 1);
        assert_eq!(result.records[21].seed, 1);
        assert_eq!(result.records[21].allocation, vec![2, 1]);
    }

    #[test]
    fn bounds_only_emits_reports() {
        let cfg = example_config(Mode::BoundsOnly, vec![vec![1, 1]], 1);
        let result = run_experiment(&cfg).unwrap();
        assert!(result.records.is_empty());
        assert_eq!(result.bounds.len(), 1);
        assert!(!result.bounds[0].known.satisfied);
    }

    #[test]
    fn unknown_mode_refuses_empty_sensor() {
        let cfg = example_config(Mode::Unknown, vec![vec![0, 3], vec![3, 2]], 3);
        let result = run_experiment(&cfg).unwrap();
        assert!(result.records[..3].iter().all(|r| r.status == TrialStatus::Refused));
        assert!(result.records[3..].iter().all(|r| r.status == TrialStatus::Unique));
        assert!(result.violations.is_empty());
    }

    #[test]
    fn generated_ensembles_are_reproducible() {
        let model = EnsembleModel::new(5, 2, Family::General, Caps { common: 1, innovation: 1 }).unwrap();
        let pool = model.matrices_with_columns(model.max_columns());
        let a = generate(3, 4, &pool);
        assert_eq!(a, generate(3, 4, &pool));
        assert_ne!(a.x, generate(3, 5, &pool).x);
        assert_eq!(a.p.num_columns(), 3);
        assert!(is_feasible(&a.p, &a.x, 1e-12).unwrap());
    }
}
