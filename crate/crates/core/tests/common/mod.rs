#![allow(dead_code)]

use dcs_core::ensemble::LocationMatrix;
use num_rational::Ratio;

pub fn bits_to_columns(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Every location matrix (full rank or not) with `K_C <= kc_max` and `K_j <= kj_max`,
/// generated from bitmasks without going through the library's enumeration.
pub fn all_location_matrices(n: usize, sensors: usize, kc_max: usize, kj_max: usize) -> Vec<LocationMatrix> {
    let masks = |cap: usize| -> Vec<u32> { (0..1u32 << n).filter(|m| m.count_ones() as usize <= cap).collect() };
    let common_masks = masks(kc_max);
    let innov_masks = masks(kj_max);
    let mut out = Vec::new();
    let mut tuple = vec![0usize; sensors];
    for &c in &common_masks {
        loop {
            let innovations = tuple.iter().map(|&t| bits_to_columns(innov_masks[t], n)).collect();
            out.push(LocationMatrix::new(n, bits_to_columns(c, n), innovations).unwrap());
            let mut j = 0;
            while j < sensors {
                tuple[j] += 1;
                if tuple[j] < innov_masks.len() {
                    break;
                }
                tuple[j] = 0;
                j += 1;
            }
            if j == sensors {
                break;
            }
        }
    }
    out
}

/// `K_C(Γ, P)` straight from its definition, with `Γ` as a bitmask over sensors.
pub fn overlap_oracle(p: &LocationMatrix, gamma: u64) -> usize {
    p.common()
        .columns()
        .iter()
        .filter(|&&c| (0..p.sensors()).filter(|j| gamma >> j & 1 == 0).all(|j| p.innovation(j).columns().contains(&c)))
        .count()
}

/// Required measurements for `Γ`: `Σ K_j + K_C(Γ)`, plus `|Γ|` when `P` is unknown.
pub fn required_oracle(p: &LocationMatrix, gamma: u64, unknown: bool) -> usize {
    let members = (0..p.sensors()).filter(|j| gamma >> j & 1 == 1);
    let innov: usize = members.clone().map(|j| p.innovation(j).columns().len()).sum();
    innov + overlap_oracle(p, gamma) + if unknown { members.count() } else { 0 }
}

pub fn bound_holds_oracle(p: &LocationMatrix, alloc: &[usize], unknown: bool) -> bool {
    (1..1u64 << p.sensors()).all(|g| {
        let have: usize = (0..p.sensors()).filter(|j| g >> j & 1 == 1).map(|j| alloc[j]).sum();
        have >= required_oracle(p, g, unknown)
    })
}

pub type Q = Ratio<i64>;

/// Rank by fraction-exact Gaussian elimination.
pub fn exact_rank(rows: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| m[r][c] != Q::from_integer(0)) else {
            continue;
        };
        m.swap(rank, pivot);
        let pivot_row = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && row[c] != Q::from_integer(0) {
                let factor = row[c] / pivot_row[c];
                for (entry, &p) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                    *entry -= factor * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `P` as a dense 0/1 matrix over the rationals, built directly from the column lists.
pub fn expand_exact(p: &LocationMatrix) -> Vec<Vec<Q>> {
    let n = p.n();
    let d = p.num_columns();
    let mut rows = vec![vec![Q::from_integer(0); d]; n * p.sensors()];
    for j in 0..p.sensors() {
        for (k, &c) in p.common().columns().iter().enumerate() {
            rows[j * n + c][k] = Q::from_integer(1);
        }
        let offset = p.k_common() + (0..j).map(|i| p.innovation(i).columns().len()).sum::<usize>();
        for (l, &c) in p.innovation(j).columns().iter().enumerate() {
            rows[j * n + c][offset + l] = Q::from_integer(1);
        }
    }
    rows
}

/// Whether `x` lies exactly in the column span of `P`, by comparing ranks of `P` and `[P | x]`.
pub fn feasible_exact_oracle(p: &LocationMatrix, x: &[Q]) -> bool {
    let a = expand_exact(p);
    let augmented: Vec<Vec<Q>> = a
        .iter()
        .zip(x)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    exact_rank(&a) == exact_rank(&augmented)
}

/// All allocations `(M_1, ..., M_J)` with every entry at most `cap`.
pub fn allocations_up_to(sensors: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..sensors {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..=cap).map(move |m| {
                    let mut next = prefix.clone();
                    next.push(m);
                    next
                })
            })
            .collect();
    }
    out
}

/// All allocations with `Σ M_j <= total`.
pub fn allocations_with_total_at_most(sensors: usize, total: usize) -> Vec<Vec<usize>> {
    allocations_up_to(sensors, total).into_iter().filter(|a| a.iter().sum::<usize>() <= total).collect()
}
