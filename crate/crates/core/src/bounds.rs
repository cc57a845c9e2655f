//! Per-subset measurement conditions.
//!
//! For a location matrix `P` and allocation `(M_1, ..., M_J)`, every sensor subset `Γ`
//! must satisfy `Σ_{j∈Γ} M_j >= Σ_{j∈Γ} K_j(P) + K_C(Γ, P)` for known-`P` recovery
//! (one extra measurement per member of `Γ` when `P` is unknown). A strict violation
//! on a nonempty subset rules out unique recovery with that `P`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ensemble::{check_subset, LocationMatrix, MAX_SENSORS};
use crate::{DcsError, Result};

/// Largest `J` accepted by [`minimal_allocations`].
pub const ALLOCATION_SEARCH_MAX_SENSORS: usize = 12;

/// A subset `Γ` of the sensors `{0, ..., J-1}`, as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SensorSubset(u64);

impl SensorSubset {
    pub fn empty() -> Self {
        Self(0)
    }

    /// `Λ = {0, ..., sensors-1}`.
    pub fn full(sensors: usize) -> Self {
        assert!(sensors <= MAX_SENSORS, "at most {MAX_SENSORS} sensors");
        Self((1u64 << sensors) - 1)
    }

    pub fn from_members(members: &[usize]) -> Self {
        Self(members.iter().fold(0, |bits, &j| {
            assert!(j < 64, "sensor index {j} too large for a bitmask");
            bits | (1 << j)
        }))
    }

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        j < 64 && self.0 & (1 << j) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// `Γ^C = Λ \ Γ` for `Λ` of size `sensors`.
    pub fn complement(self, sensors: usize) -> Self {
        Self(Self::full(sensors).0 & !self.0)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&j| self.0 & (1 << j) != 0)
    }

    /// All `2^sensors` subsets, in increasing bitmask order.
    pub fn all(sensors: usize) -> impl Iterator<Item = SensorSubset> {
        (0..=Self::full(sensors).0).map(Self)
    }

    /// Smallest cardinality first, then lexicographic on the sorted member lists.
    pub fn cmp_minimal(self, other: Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.members().cmp(other.members()))
    }
}

impl fmt::Display for SensorSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for SensorSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.members())
    }
}

impl<'de> Deserialize<'de> for SensorSubset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = members.iter().find(|&&j| j >= 64) {
            return Err(serde::de::Error::custom(format!("sensor index {bad} too large")));
        }
        Ok(Self::from_members(&members))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Known,
    Unknown,
}

/// One row of the slack table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSlack {
    pub subset: SensorSubset,
    /// `Σ_{j∈Γ} M_j`.
    pub measurements: usize,
    /// Right-hand side of the condition for `Γ`.
    pub required: usize,
    pub slack: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub satisfied: bool,
    /// The minimal violated subset (by [`SensorSubset::cmp_minimal`]), if any.
    pub worst_subset: Option<SensorSubset>,
    pub slacks: Vec<SubsetSlack>,
}

impl BoundReport {
    fn from_slacks(slacks: Vec<SubsetSlack>) -> Self {
        let worst_subset = slacks.iter().filter(|s| s.slack < 0).map(|s| s.subset).min_by(|a, b| a.cmp_minimal(*b));
        Self { satisfied: worst_subset.is_none(), worst_subset, slacks }
    }

    pub fn min_slack(&self) -> Option<i64> {
        self.slacks.iter().map(|s| s.slack).min()
    }
}

fn check_allocation(allocation: &[usize], p: &LocationMatrix) -> Result<()> {
    if allocation.len() != p.sensors() {
        return Err(DcsError::DimensionMismatch(format!(
            "allocation has {} entries, location matrix has J = {}",
            allocation.len(),
            p.sensors()
        )));
    }
    Ok(())
}

fn measurements_in(allocation: &[usize], subset: SensorSubset) -> usize {
    subset.members().map(|j| allocation[j]).sum()
}

/// `Σ_{j∈Γ} K_j(P) + K_C(Γ, P)`, plus `|Γ|` in unknown mode.
pub fn required_measurements(p: &LocationMatrix, subset: SensorSubset, mode: BoundMode) -> Result<usize> {
    check_subset(subset, p.sensors())?;
    let innov: usize = subset.members().map(|j| p.k_innovation(j)).sum();
    let extra = match mode {
        BoundMode::Known => 0,
        BoundMode::Unknown => subset.len(),
    };
    Ok(innov + p.overlap_size(subset)? + extra)
}

fn evaluate(allocation: &[usize], p: &LocationMatrix, mode: BoundMode) -> Result<BoundReport> {
    check_allocation(allocation, p)?;
    let slacks = SensorSubset::all(p.sensors())
        .map(|subset| {
            let measurements = measurements_in(allocation, subset);
            let required = required_measurements(p, subset, mode)?;
            Ok(SubsetSlack { subset, measurements, required, slack: measurements as i64 - required as i64 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_slacks(slacks))
}

/// Sufficient condition for unique recovery when `P` is known, over all `2^J` subsets.
pub fn check_known_p(allocation: &[usize], p: &LocationMatrix) -> Result<BoundReport> {
    evaluate(allocation, p, BoundMode::Known)
}

/// Sufficient condition for recovery when `P` is unknown and `p` is a feasible witness.
pub fn check_unknown_p(allocation: &[usize], p: &LocationMatrix) -> Result<BoundReport> {
    evaluate(allocation, p, BoundMode::Unknown)
}

/// Searches the nonempty subsets for a strict violation
/// `Σ_{j∈Γ} M_j < Σ_{j∈Γ} K_j + K_C(Γ, P)`. The witness is reported as
/// `worst_subset`, and `satisfied` is `true` exactly when no witness exists.
pub fn check_converse(allocation: &[usize], p: &LocationMatrix) -> Result<BoundReport> {
    check_allocation(allocation, p)?;
    let mut slacks = Vec::new();
    for subset in SensorSubset::all(p.sensors()).filter(|s| !s.is_empty()) {
        let measurements = measurements_in(allocation, subset);
        let innov: usize = subset.members().map(|j| p.k_innovation(j)).sum();
        let required = innov + p.overlap_size(subset)?;
        slacks.push(SubsetSlack { subset, measurements, required, slack: measurements as i64 - required as i64 });
    }
    let worst_subset =
        slacks.iter().filter(|s| s.measurements < s.required).map(|s| s.subset).min_by(|a, b| a.cmp_minimal(*b));
    Ok(BoundReport { satisfied: worst_subset.is_none(), worst_subset, slacks })
}

/// Every allocation satisfying the selected bound such that lowering any single
/// coordinate breaks it, in lexicographic order.
///
/// The right-hand side is supermodular in `Γ`, so minimal allocations all spend exactly
/// the requirement of the full set; the search walks those compositions with prefix
/// pruning and then re-checks minimality directly.
pub fn minimal_allocations(p: &LocationMatrix, mode: BoundMode) -> Result<Vec<Vec<usize>>> {
    let sensors = p.sensors();
    if sensors > ALLOCATION_SEARCH_MAX_SENSORS {
        return Err(DcsError::GuardExceeded { sensors, limit: ALLOCATION_SEARCH_MAX_SENSORS });
    }
    let required: Vec<usize> =
        SensorSubset::all(sensors).map(|s| required_measurements(p, s, mode)).collect::<Result<_>>()?;
    let full = SensorSubset::full(sensors);
    let total = required[full.bits() as usize];

    let mut search = FrontierSearch { sensors, total, required: &required, prefix: Vec::new(), out: Vec::new() };
    search.descend(0);
    let candidates = search.out;

    let satisfies =
        |alloc: &[usize]| SensorSubset::all(sensors).all(|s| measurements_in(alloc, s) >= required[s.bits() as usize]);
    Ok(candidates
        .into_iter()
        .filter(|alloc| {
            satisfies(alloc)
                && (0..sensors).all(|j| {
                    alloc[j] == 0 || {
                        let mut lower = alloc.clone();
                        lower[j] -= 1;
                        !satisfies(&lower)
                    }
                })
        })
        .collect())
}

struct FrontierSearch<'a> {
    sensors: usize,
    total: usize,
    required: &'a [usize],
    prefix: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl FrontierSearch<'_> {
    fn descend(&mut self, used: usize) {
        let depth = self.prefix.len();
        if depth == self.sensors {
            if used == self.total {
                self.out.push(self.prefix.clone());
            }
            return;
        }
        let full = SensorSubset::full(self.sensors);
        let newest = 1u64 << depth;
        for value in 0..=self.total - used {
            self.prefix.push(value);
            // Subsets of the assigned prefix that include the newest sensor.
            let prefix_mask = (newest << 1) - 1;
            let ok = (0..=prefix_mask).filter(|m| m & newest != 0).all(|mask| {
                let subset = SensorSubset::from_bits(mask);
                let have = measurements_in(&self.prefix, subset);
                let rest = full.bits() & !mask;
                have >= self.required[mask as usize] && have + self.required[rest as usize] <= self.total
            });
            if ok {
                self.descend(used + value);
            }
            self.prefix.pop();
        }
    }
}
