//! Signal ensembles, common/innovation location matrices and ensemble sparsity models.
//!
//! A location matrix `P` of shape `JN x D'` is stored compactly as its common
//! identity submatrix `P_C` and the `J` innovation submatrices `P_j`; [`LocationMatrix::expand`]
//! materialises the block layout
//!
//! ```text
//! [ P_C  P_1   0  ...  0  ]
//! [ P_C   0   P_2 ...  0  ]
//! [ ...                   ]
//! [ P_C   0    0  ... P_J ]
//! ```

use std::collections::VecDeque;
use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::SensorSubset;
use crate::linalg;
use crate::{DcsError, Result};

/// Default relative residual threshold for floating-point feasibility tests.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Largest sensor count a [`SensorSubset`] bitmask can address.
pub const MAX_SENSORS: usize = 63;

/// An `N x K` matrix made of `K` distinct columns of the `N x N` identity, kept in
/// increasing order. Stored as the sorted list of selected (0-based) row indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdentitySubmatrix {
    n_rows: usize,
    columns: Vec<usize>,
}

impl IdentitySubmatrix {
    pub fn new(n_rows: usize, columns: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= n_rows) {
            return Err(DcsError::InvalidSubmatrix(format!("index {bad} out of range for {n_rows} rows")));
        }
        if columns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DcsError::InvalidSubmatrix(format!("indices must be strictly increasing, got {columns:?}")));
        }
        Ok(Self { n_rows, columns })
    }

    pub fn empty(n_rows: usize) -> Self {
        Self { n_rows, columns: Vec::new() }
    }

    pub fn identity(n_rows: usize) -> Self {
        Self { n_rows, columns: (0..n_rows).collect() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn contains(&self, row: usize) -> bool {
        self.columns.binary_search(&row).is_ok()
    }

    /// Local column position holding row `row`, if selected.
    pub fn position(&self, row: usize) -> Option<usize> {
        self.columns.binary_search(&row).ok()
    }

    /// Embeds `values` (one per selected column) into a length-`N` vector.
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.width());
        let mut out = vec![0.0; self.n_rows];
        for (&row, &v) in self.columns.iter().zip(values) {
            out[row] = v;
        }
        out
    }
}

/// `J` real signals of common length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleJson", into = "EnsembleJson")]
pub struct SignalEnsemble {
    n: usize,
    signals: Vec<Vec<f64>>,
}

impl SignalEnsemble {
    pub fn new(signals: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = signals.first() else {
            return Err(DcsError::InvalidEnsemble("at least one signal is required".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(DcsError::InvalidEnsemble("signal length must be positive".into()));
        }
        if let Some((j, s)) = signals.iter().enumerate().find(|(_, s)| s.len() != n) {
            return Err(DcsError::InvalidEnsemble(format!("signal {j} has length {}, expected {n}", s.len())));
        }
        if signals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DcsError::InvalidEnsemble("entries must be finite".into()));
        }
        Ok(Self { n, signals })
    }

    pub fn zeros(sensors: usize, n: usize) -> Self {
        assert!(sensors >= 1 && n >= 1, "ensemble dimensions must be positive");
        Self { n, signals: vec![vec![0.0; n]; sensors] }
    }

    /// Splits a length-`J N` concatenation back into `J` signals.
    pub fn from_concatenated(sensors: usize, n: usize, x: &[f64]) -> Result<Self> {
        if x.len() != sensors * n {
            return Err(DcsError::DimensionMismatch(format!(
                "concatenation has length {}, expected {}",
                x.len(),
                sensors * n
            )));
        }
        Self::new(x.chunks(n).map(<[f64]>::to_vec).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sensors(&self) -> usize {
        self.signals.len()
    }

    pub fn signals(&self) -> &[Vec<f64>] {
        &self.signals
    }

    pub fn signal(&self, j: usize) -> &[f64] {
        &self.signals[j]
    }

    pub fn concatenated(&self) -> DVector<f64> {
        DVector::from_iterator(self.sensors() * self.n, self.signals.iter().flatten().copied())
    }

    pub fn is_zero(&self) -> bool {
        self.signals.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.signals.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|` over all entries.
    pub fn max_abs_diff(&self, other: &SignalEnsemble) -> f64 {
        self.signals.iter().flatten().zip(other.signals.iter().flatten()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Total number of nonzero entries, `Σ_j ||x_j||_0`.
    pub fn nonzeros(&self) -> usize {
        self.signals.iter().flatten().filter(|&&v| v != 0.0).count()
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "J")]
    sensors: usize,
    signals: Vec<Vec<f64>>,
}

impl TryFrom<EnsembleJson> for SignalEnsemble {
    type Error = DcsError;

    fn try_from(raw: EnsembleJson) -> Result<Self> {
        if raw.signals.len() != raw.sensors {
            return Err(DcsError::InvalidEnsemble(format!(
                "J = {} but {} signals given",
                raw.sensors,
                raw.signals.len()
            )));
        }
        let ens = SignalEnsemble::new(raw.signals)?;
        if ens.n != raw.n {
            return Err(DcsError::InvalidEnsemble(format!("N = {} but signals have length {}", raw.n, ens.n)));
        }
        Ok(ens)
    }
}

impl From<SignalEnsemble> for EnsembleJson {
    fn from(e: SignalEnsemble) -> Self {
        Self { n: e.n, sensors: e.signals.len(), signals: e.signals }
    }
}

/// A common/innovation location matrix: `P_C` plus one innovation submatrix per sensor.
///
/// Construction only checks shapes. Whether the expansion has full column rank is
/// reported by [`LocationMatrix::is_full_rank`]; enumeration and recovery work with
/// full-rank matrices only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LocationJson", into = "LocationJson")]
pub struct LocationMatrix {
    n: usize,
    common: IdentitySubmatrix,
    innovations: Vec<IdentitySubmatrix>,
}

impl LocationMatrix {
    pub fn new(n: usize, common: Vec<usize>, innovations: Vec<Vec<usize>>) -> Result<Self> {
        let common = IdentitySubmatrix::new(n, common)?;
        let innovations =
            innovations.into_iter().map(|cols| IdentitySubmatrix::new(n, cols)).collect::<Result<Vec<_>>>()?;
        Self::from_parts(common, innovations)
    }

    pub fn from_parts(common: IdentitySubmatrix, innovations: Vec<IdentitySubmatrix>) -> Result<Self> {
        let n = common.n_rows();
        if n == 0 {
            return Err(DcsError::InvalidLocation("N must be positive".into()));
        }
        if innovations.is_empty() || innovations.len() > MAX_SENSORS {
            return Err(DcsError::InvalidLocation(format!(
                "J must be in 1..={MAX_SENSORS}, got {}",
                innovations.len()
            )));
        }
        if let Some(bad) = innovations.iter().find(|p| p.n_rows() != n) {
            return Err(DcsError::InvalidLocation(format!(
                "innovation submatrix has {} rows, expected {n}",
                bad.n_rows()
            )));
        }
        Ok(Self { n, common, innovations })
    }

    /// The location matrix with no columns.
    pub fn empty(n: usize, sensors: usize) -> Self {
        Self { n, common: IdentitySubmatrix::empty(n), innovations: vec![IdentitySubmatrix::empty(n); sensors] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sensors(&self) -> usize {
        self.innovations.len()
    }

    pub fn common(&self) -> &IdentitySubmatrix {
        &self.common
    }

    pub fn innovation(&self, j: usize) -> &IdentitySubmatrix {
        &self.innovations[j]
    }

    pub fn innovations(&self) -> &[IdentitySubmatrix] {
        &self.innovations
    }

    /// `K_C(P)`.
    pub fn k_common(&self) -> usize {
        self.common.width()
    }

    /// `K_j(P)`.
    pub fn k_innovation(&self, j: usize) -> usize {
        self.innovations[j].width()
    }

    /// `D' = K_C + Σ_j K_j`.
    pub fn num_columns(&self) -> usize {
        self.k_common() + self.innovations.iter().map(IdentitySubmatrix::width).sum::<usize>()
    }

    /// Global column index of the first innovation column of sensor `j`.
    pub fn innovation_offset(&self, j: usize) -> usize {
        self.k_common() + self.innovations[..j].iter().map(IdentitySubmatrix::width).sum::<usize>()
    }

    /// `false` iff some index is selected by `P_C` and by every `P_j`.
    pub fn is_full_rank(&self) -> bool {
        !self.common.columns().iter().any(|&row| self.innovations.iter().all(|p| p.contains(row)))
    }

    /// Materialises the `JN x D'` 0/1 matrix, columns ordered `[P_C | P_1 | ... | P_J]`.
    pub fn expand(&self) -> DMatrix<f64> {
        let (n, sensors) = (self.n, self.sensors());
        let mut p = DMatrix::zeros(sensors * n, self.num_columns());
        for (k, &row) in self.common.columns().iter().enumerate() {
            for j in 0..sensors {
                p[(j * n + row, k)] = 1.0;
            }
        }
        for j in 0..sensors {
            let offset = self.innovation_offset(j);
            for (l, &row) in self.innovations[j].columns().iter().enumerate() {
                p[(j * n + row, offset + l)] = 1.0;
            }
        }
        p
    }

    /// `K_C(Γ, P)`: common indices that every sensor outside `Γ` also carries as an innovation.
    pub fn overlap_size(&self, subset: SensorSubset) -> Result<usize> {
        check_subset(subset, self.sensors())?;
        let outside = subset.complement(self.sensors());
        Ok(self
            .common
            .columns()
            .iter()
            .filter(|&&row| outside.members().all(|j| self.innovations[j].contains(row)))
            .count())
    }

    /// `(sensor, local position)` of every innovation column duplicating common column `k`.
    pub fn overlaps_of_common(&self, k: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let row = self.common.columns()[k];
        self.innovations.iter().enumerate().filter_map(move |(j, p)| p.position(row).map(|l| (j, l)))
    }

    /// Tie-break key of the enumeration order: the tagged columns
    /// `(0, c)` for common columns then `(j + 1, c)` for sensor `j`.
    pub fn enumeration_key(&self) -> Vec<(usize, usize)> {
        let common = self.common.columns().iter().map(|&c| (0, c));
        let innov = self.innovations.iter().enumerate().flat_map(|(j, p)| p.columns().iter().map(move |&c| (j + 1, c)));
        common.chain(innov).collect()
    }

    fn check_ensemble(&self, x: &SignalEnsemble) -> Result<()> {
        if x.n() != self.n || x.sensors() != self.sensors() {
            return Err(DcsError::DimensionMismatch(format!(
                "location matrix is for N = {}, J = {} but ensemble has N = {}, J = {}",
                self.n,
                self.sensors(),
                x.n(),
                x.sensors()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for LocationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{:?}", self.common.columns())?;
        for (j, p) in self.innovations.iter().enumerate() {
            write!(f, " I{j}{:?}", p.columns())?;
        }
        Ok(())
    }
}

pub(crate) fn check_subset(subset: SensorSubset, sensors: usize) -> Result<()> {
    match subset.members().find(|&j| j >= sensors) {
        Some(index) => Err(DcsError::InvalidSensor { index, sensors }),
        None => Ok(()),
    }
}

#[derive(Serialize, Deserialize)]
struct LocationJson {
    #[serde(rename = "N")]
    n: usize,
    common: Vec<usize>,
    innovations: Vec<Vec<usize>>,
}

impl TryFrom<LocationJson> for LocationMatrix {
    type Error = DcsError;

    fn try_from(raw: LocationJson) -> Result<Self> {
        LocationMatrix::new(raw.n, raw.common, raw.innovations)
    }
}

impl From<LocationMatrix> for LocationJson {
    fn from(p: LocationMatrix) -> Self {
        Self { n: p.n, common: p.common.columns, innovations: p.innovations.into_iter().map(|s| s.columns).collect() }
    }
}

/// `Θ = [θ_C; θ_1; ...; θ_J]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector {
    pub common: Vec<f64>,
    pub innovations: Vec<Vec<f64>>,
}

impl ValueVector {
    /// Partitions a flat length-`D'` vector according to the widths of `p`.
    pub fn from_flat(p: &LocationMatrix, theta: &[f64]) -> Result<Self> {
        if theta.len() != p.num_columns() {
            return Err(DcsError::DimensionMismatch(format!(
                "value vector has length {}, location matrix has {} columns",
                theta.len(),
                p.num_columns()
            )));
        }
        let (common, mut rest) = theta.split_at(p.k_common());
        let mut innovations = Vec::with_capacity(p.sensors());
        for j in 0..p.sensors() {
            let (head, tail) = rest.split_at(p.k_innovation(j));
            innovations.push(head.to_vec());
            rest = tail;
        }
        Ok(Self { common: common.to_vec(), innovations })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.common.iter().chain(self.innovations.iter().flatten()).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.common.len() + self.innovations.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_compatible(&self, p: &LocationMatrix) -> Result<()> {
        let ok = self.common.len() == p.k_common()
            && self.innovations.len() == p.sensors()
            && self.innovations.iter().enumerate().all(|(j, t)| t.len() == p.k_innovation(j));
        if ok {
            Ok(())
        } else {
            Err(DcsError::DimensionMismatch("value vector partition does not match the location matrix widths".into()))
        }
    }
}

/// Common component `z_C = P_C θ_C` and innovations `z_j = P_j θ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub common: Vec<f64>,
    pub innovations: Vec<Vec<f64>>,
}

/// Builds `X = P Θ` together with its common/innovation decomposition.
pub fn synthesize(p: &LocationMatrix, theta: &ValueVector) -> Result<(SignalEnsemble, Decomposition)> {
    theta.check_compatible(p)?;
    let common = p.common().scatter(&theta.common);
    let innovations: Vec<Vec<f64>> =
        p.innovations().iter().zip(&theta.innovations).map(|(pj, tj)| pj.scatter(tj)).collect();
    let signals = innovations.iter().map(|z| z.iter().zip(&common).map(|(a, b)| a + b).collect()).collect();
    let x = SignalEnsemble { n: p.n(), signals };
    Ok((x, Decomposition { common, innovations }))
}

/// Minimum-norm least-squares value vector for `expand(P) Θ ≈ X`.
pub fn solve_values(p: &LocationMatrix, x: &SignalEnsemble) -> Result<ValueVector> {
    p.check_ensemble(x)?;
    let theta = linalg::min_norm_solve(&p.expand(), &x.concatenated());
    ValueVector::from_flat(p, theta.as_slice())
}

/// Membership of `P` in the feasible set of `X`: the least-squares residual of
/// `expand(P) Θ ≈ X` is at most `tol * ||X||_2`.
pub fn is_feasible(p: &LocationMatrix, x: &SignalEnsemble, tol: f64) -> Result<bool> {
    p.check_ensemble(x)?;
    if x.is_zero() {
        return Ok(true);
    }
    let a = p.expand();
    let b = x.concatenated();
    let theta = linalg::min_norm_solve(&a, &b);
    let residual = (&a * theta - &b).norm();
    Ok(residual <= tol * b.norm())
}

/// Exact feasibility test. Index by index, every sensor lacking an innovation at `n`
/// must show the same value, and that value must be zero when `P_C` skips `n`.
/// Only equality comparisons are used, so the answer is exact for any finite input.
pub fn is_feasible_exact(p: &LocationMatrix, x: &SignalEnsemble) -> Result<bool> {
    p.check_ensemble(x)?;
    for row in 0..p.n() {
        let mut uncovered = (0..p.sensors()).filter(|&j| !p.innovation(j).contains(row)).map(|j| x.signal(j)[row]);
        let Some(first) = uncovered.next() else {
            continue;
        };
        if uncovered.any(|v| v != first) {
            return Ok(false);
        }
        if first != 0.0 && !p.common().contains(row) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Which location matrices a common/innovation ensemble sparsity model admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// Every full-rank common/innovation matrix.
    General,
    /// `P_C = I`: the common component is not assumed sparse.
    FullCommon,
    /// `P_C` empty and `P_1 = ... = P_J`.
    NoCommonSharedSupport,
    /// `P_C` empty and all `P_j` share at least `min_overlap` columns.
    NoCommonMinOverlap { min_overlap: usize },
}

/// Upper bounds on `K_C` and on each `K_j`. There are no defaults: enumeration must be finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub common: usize,
    pub innovation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleModel {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J")]
    pub sensors: usize,
    pub family: Family,
    pub caps: Caps,
}

impl EnsembleModel {
    pub fn new(n: usize, sensors: usize, family: Family, caps: Caps) -> Result<Self> {
        let model = Self { n, sensors, family, caps };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(DcsError::InvalidModel("N must be positive".into()));
        }
        if self.sensors == 0 || self.sensors > MAX_SENSORS {
            return Err(DcsError::InvalidModel(format!("J must be in 1..={MAX_SENSORS}")));
        }
        if let Family::NoCommonMinOverlap { min_overlap } = self.family {
            if min_overlap > self.n {
                return Err(DcsError::InvalidModel(format!("min_overlap {min_overlap} exceeds N = {}", self.n)));
            }
        }
        Ok(())
    }

    fn common_cap(&self) -> usize {
        self.caps.common.min(self.n)
    }

    fn innovation_cap(&self) -> usize {
        self.caps.innovation.min(self.n)
    }

    /// Whether `p` belongs to the model: shape, caps, family structure and full rank.
    pub fn contains(&self, p: &LocationMatrix) -> bool {
        if p.n() != self.n || p.sensors() != self.sensors || !p.is_full_rank() {
            return false;
        }
        if p.k_common() > self.caps.common || p.innovations().iter().any(|s| s.width() > self.caps.innovation) {
            return false;
        }
        match self.family {
            Family::General => true,
            Family::FullCommon => p.k_common() == self.n,
            Family::NoCommonSharedSupport => p.k_common() == 0 && p.innovations().iter().all_equal(),
            Family::NoCommonMinOverlap { min_overlap } => {
                p.k_common() == 0 && shared_columns(p.innovations()) >= min_overlap
            }
        }
    }

    /// Largest `D'` any admitted matrix can have.
    pub fn max_columns(&self) -> usize {
        let innov = self.sensors * self.innovation_cap();
        match self.family {
            Family::General => self.common_cap() + innov,
            Family::FullCommon => self.n + innov,
            Family::NoCommonSharedSupport | Family::NoCommonMinOverlap { .. } => innov,
        }
    }

    /// Every admitted matrix, in non-decreasing `D'` with ties broken by
    /// [`LocationMatrix::enumeration_key`].
    pub fn enumerate(&self) -> LocationMatrices {
        LocationMatrices { model: self.clone(), next_width: 0, batch: VecDeque::new() }
    }

    /// All admitted matrices with exactly `d` columns, in enumeration order.
    pub fn matrices_with_columns(&self, d: usize) -> Vec<LocationMatrix> {
        let n = self.n;
        let mut out = Vec::new();
        match self.family {
            Family::NoCommonSharedSupport => {
                if d.is_multiple_of(self.sensors) && d / self.sensors <= self.innovation_cap() {
                    for cols in (0..n).combinations(d / self.sensors) {
                        let support = IdentitySubmatrix { n_rows: n, columns: cols };
                        out.push(LocationMatrix {
                            n,
                            common: IdentitySubmatrix::empty(n),
                            innovations: vec![support; self.sensors],
                        });
                    }
                }
            }
            Family::FullCommon => {
                if self.caps.common >= n && d >= n {
                    self.push_with_common(IdentitySubmatrix::identity(n), d - n, &mut out);
                }
            }
            Family::General => {
                for kc in 0..=self.common_cap().min(d) {
                    for cols in (0..n).combinations(kc) {
                        let common = IdentitySubmatrix { n_rows: n, columns: cols };
                        self.push_with_common(common, d - kc, &mut out);
                    }
                }
            }
            Family::NoCommonMinOverlap { .. } => {
                self.push_with_common(IdentitySubmatrix::empty(n), d, &mut out);
            }
        }
        out.retain(|p| self.contains(p));
        out.sort_by_cached_key(LocationMatrix::enumeration_key);
        out
    }

    fn push_with_common(&self, common: IdentitySubmatrix, remaining: usize, out: &mut Vec<LocationMatrix>) {
        let cap = self.innovation_cap();
        for widths in bounded_compositions(remaining, self.sensors, cap) {
            let choices: Vec<Vec<Vec<usize>>> = widths.iter().map(|&w| (0..self.n).combinations(w).collect()).collect();
            for picks in choices.iter().map(|c| c.iter()).multi_cartesian_product() {
                let innovations =
                    picks.into_iter().map(|cols| IdentitySubmatrix { n_rows: self.n, columns: cols.clone() }).collect();
                out.push(LocationMatrix { n: self.n, common: common.clone(), innovations });
            }
        }
    }
}

/// Number of row indices shared by every submatrix in `parts`.
fn shared_columns(parts: &[IdentitySubmatrix]) -> usize {
    match parts.split_first() {
        None => 0,
        Some((first, rest)) => first.columns().iter().filter(|&&c| rest.iter().all(|p| p.contains(c))).count(),
    }
}

/// All `parts`-tuples of integers in `0..=cap` summing to `total`.
fn bounded_compositions(total: usize, parts: usize, cap: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, cap: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if total > parts * cap {
            return;
        }
        for w in 0..=cap.min(total) {
            prefix.push(w);
            go(total - w, parts - 1, cap, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, cap, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Restartable stream over the matrices of an [`EnsembleModel`], generated one `D'` at a time.
#[derive(Debug, Clone)]
pub struct LocationMatrices {
    model: EnsembleModel,
    next_width: usize,
    batch: VecDeque<LocationMatrix>,
}

impl Iterator for LocationMatrices {
    type Item = LocationMatrix;

    fn next(&mut self) -> Option<LocationMatrix> {
        loop {
            if let Some(p) = self.batch.pop_front() {
                return Some(p);
            }
            if self.next_width > self.model.max_columns() {
                return None;
            }
            self.batch = self.model.matrices_with_columns(self.next_width).into();
            self.next_width += 1;
        }
    }
}

/// Ensemble sparsity level `D` of `x` under `model` together with a witness of `D` columns.
///
/// Exhaustive: the first feasible matrix in enumeration order has the fewest columns.
pub fn ensemble_sparsity(x: &SignalEnsemble, model: &EnsembleModel) -> Result<(usize, LocationMatrix)> {
    if x.n() != model.n || x.sensors() != model.sensors {
        return Err(DcsError::DimensionMismatch(format!(
            "model is for N = {}, J = {} but ensemble has N = {}, J = {}",
            model.n,
            model.sensors,
            x.n(),
            x.sensors()
        )));
    }
    for p in model.enumerate() {
        if is_feasible(&p, x, DEFAULT_FEASIBILITY_TOL)? {
            return Ok((p.num_columns(), p));
        }
    }
    Err(DcsError::InfeasibleModel)
}
