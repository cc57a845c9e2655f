//! Joint reconstruction of an ensemble from its distributed measurements.
//!
//! - [`recover_known_p`]: solve `Y = Υ Θ` for a known location matrix.
//! - [`converse_witness`]: for an allocation violating the per-subset bound, exhibit the
//!   rank deficiency of `Υ` through the subset-restricted block of `Υ₀` and return a
//!   null-space vector.
//! - [`recover_unknown_p`]: hold out one measurement per sensor, then walk the model's
//!   location matrices in enumeration order and accept the first candidate whose
//!   minimum-norm fit of the remaining measurements also predicts the held-out sum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::SensorSubset;
use crate::ensemble::{check_subset, synthesize, EnsembleModel, LocationMatrix, SignalEnsemble, ValueVector};
use crate::linalg;
use crate::matching::partially_zero;
use crate::measurement::{MeasurementSet, MeasurementVector};
use crate::{DcsError, Result};

pub const DEFAULT_RECOVERY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Unique,
    Ambiguous,
    Infeasible,
}

impl RecoveryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unique => "unique",
            Self::Ambiguous => "ambiguous",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub status: RecoveryStatus,
    /// Minimum-norm value vector; absent when infeasible.
    pub theta: Option<ValueVector>,
    pub x_hat: Option<SignalEnsemble>,
    pub chosen_p: Option<LocationMatrix>,
    /// When ambiguous, a second value vector `Θ + v` with `Υ v ≈ 0` and `||v|| = 1`.
    pub certificate: Option<ValueVector>,
    /// `||Υ Θ - Y||_2` (for unknown `P`: on the measurements left after the split).
    pub residual: f64,
    /// `|ȳ - φ̄ᵀ P Θ_P|` of the accepted candidate (unknown `P` only).
    pub cross_validation_residual: Option<f64>,
    pub candidates_examined: usize,
}

fn check_measurements(y: &MeasurementVector, s: &MeasurementSet) -> Result<()> {
    let lens: Vec<usize> = y.per_sensor.iter().map(Vec::len).collect();
    if lens != s.allocation() {
        return Err(DcsError::DimensionMismatch(format!(
            "measurement lengths {lens:?} do not match allocation {:?}",
            s.allocation()
        )));
    }
    Ok(())
}

fn require_full_rank(p: &LocationMatrix) -> Result<()> {
    if p.is_full_rank() {
        Ok(())
    } else {
        Err(DcsError::Precondition(format!("location matrix {p} is not full rank")))
    }
}

fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Classifies `Y = Υ Θ`: infeasible when the least-squares residual exceeds
/// `tol * (1 + ||Y||)`, unique when `Υ` has full column rank, ambiguous otherwise.
fn classify(upsilon: &DMatrix<f64>, target: &DVector<f64>, p: &LocationMatrix, tol: f64) -> Result<RecoveryOutcome> {
    let theta = linalg::min_norm_solve(upsilon, target);
    let residual = (upsilon * &theta - target).norm();
    let mut outcome = RecoveryOutcome {
        status: RecoveryStatus::Infeasible,
        theta: None,
        x_hat: None,
        chosen_p: None,
        certificate: None,
        residual,
        cross_validation_residual: None,
        candidates_examined: 1,
    };
    if residual > tol * (1.0 + target.norm()) {
        return Ok(outcome);
    }
    let values = ValueVector::from_flat(p, theta.as_slice())?;
    outcome.x_hat = Some(synthesize(p, &values)?.0);
    match linalg::null_vector(upsilon) {
        None => outcome.status = RecoveryStatus::Unique,
        Some(v) => {
            outcome.status = RecoveryStatus::Ambiguous;
            outcome.certificate = Some(ValueVector::from_flat(p, (&theta + v).as_slice())?);
        }
    }
    outcome.theta = Some(values);
    Ok(outcome)
}

/// Recovers `Θ` (and `X̂ = P Θ`) from `Y` given the location matrix.
pub fn recover_known_p(
    y: &MeasurementVector,
    s: &MeasurementSet,
    p: &LocationMatrix,
    tol: f64,
) -> Result<RecoveryOutcome> {
    check_measurements(y, s)?;
    require_full_rank(p)?;
    let upsilon = s.compose(p)?;
    let mut outcome = classify(&upsilon, &y.concatenated(), p, tol)?;
    outcome.chosen_p = Some(p.clone());
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseWitness {
    pub subset: SensorSubset,
    /// Columns of `Υ₀` kept in the subset-restricted block `Υ₃`.
    pub columns: Vec<usize>,
    pub rank: usize,
    /// `columns.len() - rank`, always at least one.
    pub deficit: usize,
    /// Unit vector `v` with `Υ v ≈ 0`.
    pub certificate: DVector<f64>,
}

/// Builds the rank-deficiency certificate for a subset `Γ` with
/// `Σ_{j∈Γ} M_j < Σ_{j∈Γ} K_j + K_C(Γ, P)`.
///
/// `Υ₃` keeps the common columns whose index every sensor outside `Γ` repeats as an
/// innovation, plus the innovation columns of `Γ`. Its rows outside `Γ` vanish in
/// `Υ₀`, so its rank is at most `Σ_{j∈Γ} M_j`. A null vector of `Υ₃` is mapped back
/// through the column operations that produced `Υ₀`.
pub fn converse_witness(s: &MeasurementSet, p: &LocationMatrix, subset: SensorSubset) -> Result<ConverseWitness> {
    check_subset(subset, p.sensors())?;
    require_full_rank(p)?;
    let allocation = s.allocation();
    let have: usize = subset.members().map(|j| allocation[j]).sum();
    let innov: usize = subset.members().map(|j| p.k_innovation(j)).sum();
    let need = innov + p.overlap_size(subset)?;
    if subset.is_empty() || have >= need {
        return Err(DcsError::Precondition(format!(
            "subset {subset} does not violate the bound ({have} >= {need} or empty)"
        )));
    }

    let upsilon = s.compose(p)?;
    let zeroed = partially_zero(&upsilon, p)?;
    let outside = subset.complement(p.sensors());
    let mut columns: Vec<usize> = (0..p.k_common())
        .filter(|&k| {
            let row = p.common().columns()[k];
            outside.members().all(|j| p.innovation(j).contains(row))
        })
        .collect();
    for j in subset.members() {
        let offset = p.innovation_offset(j);
        columns.extend(offset..offset + p.k_innovation(j));
    }
    debug_assert_eq!(columns.len(), need);
    let block = zeroed.select_columns(&columns);

    let inside_rows: Vec<usize> = subset
        .members()
        .flat_map(|j| {
            let start = s.row_offset(j);
            start..start + allocation[j]
        })
        .collect();
    for j in outside.members() {
        let start = s.row_offset(j);
        for r in start..start + allocation[j] {
            assert!(block.row(r).iter().all(|&v| v == 0.0), "row {r} of sensor {j} outside the subset should vanish");
        }
    }
    let rank = linalg::numerical_rank(&block);
    let restricted = block.select_rows(&inside_rows);
    let null = linalg::null_vector(&restricted).expect("fewer rows than columns");

    let mut v = DVector::zeros(p.num_columns());
    for (&c, &u) in columns.iter().zip(null.iter()) {
        v[c] = u;
    }
    for (&c, &u) in columns.iter().zip(null.iter()) {
        if c < p.k_common() {
            for (j, local) in p.overlaps_of_common(c) {
                v[p.innovation_offset(j) + local] -= u;
            }
        }
    }
    let norm = v.norm();
    Ok(ConverseWitness { subset, deficit: columns.len() - rank, columns, rank, certificate: v / norm })
}

/// One held-out measurement per sensor, summed, and the rest of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMeasurements {
    /// `ȳ = Σ_j y_j(M_j)`.
    pub held_out_scalar: f64,
    /// `φ̄`: the final row of each `Φ_j`, placed in sensor `j`'s column block.
    pub held_out_row: DVector<f64>,
    /// `Ȳ`.
    pub remaining: MeasurementVector,
    /// `Φ̄`, per sensor, with allocation `(M_1 - 1, ..., M_J - 1)`.
    pub remaining_rows: MeasurementSet,
}

pub fn split_for_cross_validation(y: &MeasurementVector, s: &MeasurementSet) -> Result<SplitMeasurements> {
    check_measurements(y, s)?;
    if let Some(sensor) = s.allocation().iter().position(|&m| m == 0) {
        return Err(DcsError::EmptySensor { sensor });
    }
    let n = s.n();
    let mut held_out_scalar = 0.0;
    let mut held_out_row = DVector::zeros(s.sensors() * n);
    let mut remaining = Vec::with_capacity(s.sensors());
    let mut rows = Vec::with_capacity(s.sensors());
    for (j, (phi, yj)) in s.matrices().iter().zip(&y.per_sensor).enumerate() {
        let last = phi.nrows() - 1;
        held_out_scalar += yj[last];
        held_out_row.rows_mut(j * n, n).copy_from(&phi.row(last).transpose());
        remaining.push(yj[..last].to_vec());
        rows.push(phi.rows(0, last).clone_owned());
    }
    Ok(SplitMeasurements {
        held_out_scalar,
        held_out_row,
        remaining: MeasurementVector { per_sensor: remaining },
        remaining_rows: MeasurementSet::from_matrices(n, rows)?,
    })
}

/// Recovers `X` without knowing `P`, searching `model` in enumeration order.
///
/// A candidate is consistent when `Ȳ` lies in the column span of `Φ̄ P` (relative
/// residual at most `tol`); its minimum-norm `Θ_P` is accepted when
/// `|ȳ - φ̄ᵀ P Θ_P| <= tol * (1 + |ȳ| + ||φ̄|| ||P Θ_P||)`. When no candidate
/// passes, the outcome is `Infeasible`.
pub fn recover_unknown_p(
    y: &MeasurementVector,
    s: &MeasurementSet,
    model: &EnsembleModel,
    tol: f64,
) -> Result<RecoveryOutcome> {
    if model.n != s.n() || model.sensors != s.sensors() {
        return Err(DcsError::DimensionMismatch(format!(
            "model is for N = {}, J = {} but measurements are for N = {}, J = {}",
            model.n,
            model.sensors,
            s.n(),
            s.sensors()
        )));
    }
    let split = split_for_cross_validation(y, s)?;
    let target = split.remaining.concatenated();
    let consistent_scale = tol * (1.0 + target.norm());
    let row_norm = split.held_out_row.norm();

    let mut examined = 0;
    for p in model.enumerate() {
        examined += 1;
        let reduced = split.remaining_rows.compose(&p)?;
        let theta = linalg::min_norm_solve(&reduced, &target);
        let residual = (&reduced * &theta - &target).norm();
        if residual > consistent_scale {
            continue;
        }
        let values = ValueVector::from_flat(&p, theta.as_slice())?;
        let (x_hat, _) = synthesize(&p, &values)?;
        let x_vec = x_hat.concatenated();
        let cross = (split.held_out_scalar - split.held_out_row.dot(&x_vec)).abs();
        let cross_scale = tol * (1.0 + split.held_out_scalar.abs() + row_norm * x_vec.norm());
        if cross > cross_scale {
            continue;
        }
        assert!(residual <= consistent_scale && cross <= cross_scale);

        let full = s.compose(&p)?;
        let (status, certificate) = match linalg::null_vector(&full) {
            None => (RecoveryStatus::Unique, None),
            Some(v) => (RecoveryStatus::Ambiguous, Some(ValueVector::from_flat(&p, (&theta + v).as_slice())?)),
        };
        return Ok(RecoveryOutcome {
            status,
            theta: Some(values),
            x_hat: Some(x_hat),
            chosen_p: Some(p),
            certificate,
            residual,
            cross_validation_residual: Some(cross),
            candidates_examined: examined,
        });
    }
    Ok(RecoveryOutcome {
        status: RecoveryStatus::Infeasible,
        theta: None,
        x_hat: None,
        chosen_p: None,
        certificate: None,
        residual: f64::NAN,
        cross_validation_residual: None,
        candidates_examined: examined,
    })
}

/// Residual of `Υ Θ = Y` for an arbitrary candidate, used when checking certificates.
pub fn system_residual(
    s: &MeasurementSet,
    p: &LocationMatrix,
    theta: &ValueVector,
    y: &MeasurementVector,
) -> Result<f64> {
    theta.check_compatible(p)?;
    let upsilon = s.compose(p)?;
    Ok((upsilon * to_dvector(&theta.to_flat()) - y.concatenated()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Caps, Family};
    use crate::measurement::sample_sensing;

    fn p1() -> LocationMatrix {
        LocationMatrix::new(4, vec![0, 1], vec![vec![0], vec![]]).unwrap()
    }

    fn example_x() -> SignalEnsemble {
        SignalEnsemble::new(vec![vec![3.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn known_p_unique() {
        let s = sample_sensing(4, &[2, 1], 1);
        let y = s.measure(&example_x()).unwrap();
        let out = recover_known_p(&y, &s, &p1(), DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(out.status, RecoveryStatus::Unique);
        assert!(out.x_hat.unwrap().max_abs_diff(&example_x()) < 1e-8);
        let theta = out.theta.unwrap().to_flat();
        for (a, b) in theta.iter().zip([1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn known_p_ambiguous_certificate() {
        let s = sample_sensing(4, &[1, 1], 1);
        let y = s.measure(&example_x()).unwrap();
        let out = recover_known_p(&y, &s, &p1(), DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(out.status, RecoveryStatus::Ambiguous);
        let cert = out.certificate.unwrap();
        assert!(system_residual(&s, &p1(), &cert, &y).unwrap() < 1e-8);
        let (x_cert, _) = synthesize(&p1(), &cert).unwrap();
        assert!(x_cert.max_abs_diff(&out.x_hat.unwrap()) > 1e-6);
    }

    #[test]
    fn known_p_infeasible() {
        let s = sample_sensing(4, &[2, 2], 4);
        let mut y = s.measure(&example_x()).unwrap();
        y.per_sensor[1][0] += 1.0;
        let out = recover_known_p(&y, &s, &p1(), DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(out.status, RecoveryStatus::Infeasible);
        assert!(out.theta.is_none());
    }

    #[test]
    fn known_p_rejects_rank_deficient_location() {
        let bad = LocationMatrix::new(4, vec![0], vec![vec![0], vec![0]]).unwrap();
        let s = sample_sensing(4, &[2, 2], 4);
        let y = s.measure(&example_x()).unwrap();
        assert!(matches!(recover_known_p(&y, &s, &bad, 1e-8), Err(DcsError::Precondition(_))));
    }

    #[test]
    fn converse_examples() {
        for (alloc, members) in [(vec![1, 1], vec![0, 1]), (vec![0, 2], vec![0]), (vec![2, 0], vec![1])] {
            let s = sample_sensing(4, &alloc, 7);
            let w = converse_witness(&s, &p1(), SensorSubset::from_members(&members)).unwrap();
            assert!(w.deficit >= 1, "{alloc:?}");
            let upsilon = s.compose(&p1()).unwrap();
            assert!((&upsilon * &w.certificate).norm() <= 1e-8 * linalg::spectral_norm(&upsilon).max(1.0));
            assert!((w.certificate.norm() - 1.0).abs() < 1e-12);
        }
        let s = sample_sensing(4, &[2, 1], 7);
        assert!(matches!(
            converse_witness(&s, &p1(), SensorSubset::from_members(&[0, 1])),
            Err(DcsError::Precondition(_))
        ));
    }

    #[test]
    fn split_example() {
        let s = sample_sensing(4, &[3, 2], 5);
        let x = example_x();
        let y = s.measure(&x).unwrap();
        let split = split_for_cross_validation(&y, &s).unwrap();
        assert_eq!(split.held_out_scalar, y.per_sensor[0][2] + y.per_sensor[1][1]);
        assert_eq!(split.remaining.len(), 3);
        assert_eq!(split.remaining_rows.allocation(), vec![2, 1]);
        let predicted = split.held_out_row.dot(&x.concatenated());
        assert!((predicted - split.held_out_scalar).abs() < 1e-12);
        assert_eq!(split.remaining_rows.measure(&x).unwrap(), split.remaining);
    }

    #[test]
    fn split_boundaries() {
        let s = sample_sensing(4, &[1, 1], 5);
        let y = s.measure(&example_x()).unwrap();
        assert!(split_for_cross_validation(&y, &s).unwrap().remaining.is_empty());
        let s = sample_sensing(4, &[0, 3], 5);
        let y = s.measure(&example_x()).unwrap();
        assert_eq!(split_for_cross_validation(&y, &s), Err(DcsError::EmptySensor { sensor: 0 }));
    }

    #[test]
    fn unknown_p_recovers_two_sensor_ensemble() {
        let model = EnsembleModel::new(4, 2, Family::General, Caps { common: 4, innovation: 2 }).unwrap();
        let s = sample_sensing(4, &[3, 2], 12);
        let y = s.measure(&example_x()).unwrap();
        let out = recover_unknown_p(&y, &s, &model, DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(out.status, RecoveryStatus::Unique);
        assert!(out.x_hat.unwrap().max_abs_diff(&example_x()) < 1e-8);
        assert_eq!(out.chosen_p.unwrap().num_columns(), 3);
    }

    #[test]
    fn unknown_p_zero_ensemble() {
        let model = EnsembleModel::new(4, 2, Family::General, Caps { common: 4, innovation: 2 }).unwrap();
        let s = sample_sensing(4, &[1, 1], 3);
        let y = s.measure(&SignalEnsemble::zeros(2, 4)).unwrap();
        let out = recover_unknown_p(&y, &s, &model, DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(out.status, RecoveryStatus::Unique);
        assert_eq!(out.candidates_examined, 1);
        assert_eq!(out.chosen_p.unwrap(), LocationMatrix::empty(4, 2));
    }

    #[test]
    fn unknown_p_refuses_empty_sensor() {
        let model = EnsembleModel::new(4, 2, Family::General, Caps { common: 4, innovation: 2 }).unwrap();
        let s = sample_sensing(4, &[3, 0], 3);
        let y = s.measure(&example_x()).unwrap();
        assert_eq!(recover_unknown_p(&y, &s, &model, 1e-8), Err(DcsError::EmptySensor { sensor: 1 }));
    }
}
