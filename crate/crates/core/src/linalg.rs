//! Dense linear algebra helpers built on `nalgebra`'s SVD.
//!
//! Every rank decision uses the same threshold: singular values at or below
//! `max(rows, cols) * f64::EPSILON * sigma_max` count as zero.

use nalgebra::{DMatrix, DVector};

/// Singular value cut-off for a `rows x cols` matrix whose largest singular value is `sigma_max`.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Singular values in no particular order. Empty for matrices with a zero dimension.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(0);
    }
    a.clone().svd(false, false).singular_values
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().copied().fold(0.0, f64::max)
}

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = singular_values(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cut = rank_threshold(a.nrows(), a.ncols(), smax);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Minimum-Euclidean-norm least-squares solution of `a * x = b`.
///
/// The result depends only on `(a, b)`; repeated calls are bit-identical.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.nrows(), b.len(), "min_norm_solve: row count mismatch");
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    let cut = rank_threshold(a.nrows(), a.ncols(), smax);
    svd.solve(b, cut).expect("U and V^T were computed")
}

/// A unit vector `v` with `a * v ≈ 0`, or `None` when `a` has full column rank.
///
/// Wide matrices are padded with zero rows so the SVD yields a complete right basis.
pub fn null_vector(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    if n == 0 {
        return None;
    }
    if a.nrows() == 0 {
        let mut v = DVector::zeros(n);
        v[0] = 1.0;
        return Some(v);
    }
    if numerical_rank(a) == n {
        return None;
    }
    let square = if a.nrows() < n {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("V^T was computed");
    let (idx, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    let v: DVector<f64> = v_t.row(idx).transpose();
    let norm = v.norm();
    Some(v / norm)
}
