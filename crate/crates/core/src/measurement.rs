//! Per-sensor measurement matrices `Φ_j`, the block-diagonal ensemble operator and
//! the composed system `Υ = Φ P`.
//!
//! Gaussian matrices come from ChaCha20 keyed by the 64-bit seed, with the sensor
//! index selecting the stream, so each `Φ_j` is reproducible on its own. Entries are
//! drawn row-major; growing `M_j` appends rows to `Φ_j` and leaves every other
//! sensor untouched.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{LocationMatrix, SignalEnsemble};
use crate::{DcsError, Result};

/// Identifies the sampling scheme; bump when the draw order or generator changes.
pub const SENSING_GENERATOR: &str = "chacha20-stream-per-sensor-v1";

/// Reproducible description of a Gaussian measurement set. Matrices are regenerated
/// from it on load, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub allocation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    n: usize,
    seed: Option<u64>,
    matrices: Vec<DMatrix<f64>>,
}

/// Draws `Φ_j ∈ R^{M_j x N}` with i.i.d. standard normal entries for every sensor.
pub fn sample_sensing(n: usize, allocation: &[usize], seed: u64) -> MeasurementSet {
    assert!(n >= 1, "signal length must be positive");
    let matrices = allocation
        .iter()
        .enumerate()
        .map(|(j, &rows)| {
            let mut rng = sensor_rng(seed, j);
            // from_fn visits column-major; fill row-major so extra rows only append.
            let entries: Vec<f64> = (0..rows * n).map(|_| rng.sample(StandardNormal)).collect();
            DMatrix::from_row_slice(rows, n, &entries)
        })
        .collect();
    MeasurementSet { n, seed: Some(seed), matrices }
}

fn sensor_rng(seed: u64, sensor: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(sensor as u64);
    rng
}

impl MeasurementSet {
    /// Hand-specified matrices, used as test fixtures and for non-Gaussian experiments.
    pub fn from_matrices(n: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if n == 0 || matrices.is_empty() {
            return Err(DcsError::DimensionMismatch("need N >= 1 and at least one sensor".into()));
        }
        if let Some((j, m)) = matrices.iter().enumerate().find(|(_, m)| m.ncols() != n) {
            return Err(DcsError::DimensionMismatch(format!(
                "sensor {j} matrix has {} columns, expected N = {n}",
                m.ncols()
            )));
        }
        Ok(Self { n, seed: None, matrices })
    }

    pub fn from_spec(spec: &SensingSpec) -> Self {
        sample_sensing(spec.n, &spec.allocation, spec.seed)
    }

    /// The regeneration recipe; `None` for fixture matrices.
    pub fn spec(&self) -> Option<SensingSpec> {
        self.seed.map(|seed| SensingSpec { seed, n: self.n, allocation: self.allocation() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sensors(&self) -> usize {
        self.matrices.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn allocation(&self) -> Vec<usize> {
        self.matrices.iter().map(DMatrix::nrows).collect()
    }

    pub fn total_measurements(&self) -> usize {
        self.matrices.iter().map(DMatrix::nrows).sum()
    }

    pub fn matrix(&self, j: usize) -> &DMatrix<f64> {
        &self.matrices[j]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `Φ = diag(Φ_1, ..., Φ_J)` of shape `(Σ M_j) x JN`.
    pub fn block_diagonal(&self) -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(self.total_measurements(), self.sensors() * self.n);
        let mut row = 0;
        for (j, m) in self.matrices.iter().enumerate() {
            phi.view_mut((row, j * self.n), m.shape()).copy_from(m);
            row += m.nrows();
        }
        phi
    }

    /// `y_j = Φ_j x_j` for every sensor.
    pub fn measure(&self, x: &SignalEnsemble) -> Result<MeasurementVector> {
        if x.n() != self.n || x.sensors() != self.sensors() {
            return Err(DcsError::DimensionMismatch(format!(
                "measurement set is for N = {}, J = {} but ensemble has N = {}, J = {}",
                self.n,
                self.sensors(),
                x.n(),
                x.sensors()
            )));
        }
        let per_sensor = self
            .matrices
            .iter()
            .enumerate()
            .map(|(j, m)| (m * DVector::from_column_slice(x.signal(j))).as_slice().to_vec())
            .collect();
        Ok(MeasurementVector { per_sensor })
    }

    /// `Υ = Φ P`: the common block stacks `Φ_j P_C`, innovation block `j` holds
    /// `Φ_j P_j` in sensor `j`'s rows.
    pub fn compose(&self, p: &LocationMatrix) -> Result<DMatrix<f64>> {
        if p.n() != self.n || p.sensors() != self.sensors() {
            return Err(DcsError::DimensionMismatch(format!(
                "measurement set is for N = {}, J = {} but location matrix has N = {}, J = {}",
                self.n,
                self.sensors(),
                p.n(),
                p.sensors()
            )));
        }
        let mut upsilon = DMatrix::zeros(self.total_measurements(), p.num_columns());
        let mut row = 0;
        for (j, m) in self.matrices.iter().enumerate() {
            for (k, &c) in p.common().columns().iter().enumerate() {
                upsilon.view_mut((row, k), (m.nrows(), 1)).copy_from(&m.column(c));
            }
            let offset = p.innovation_offset(j);
            for (l, &c) in p.innovation(j).columns().iter().enumerate() {
                upsilon.view_mut((row, offset + l), (m.nrows(), 1)).copy_from(&m.column(c));
            }
            row += m.nrows();
        }
        Ok(upsilon)
    }

    /// First row index of sensor `j` within `Y` and `Υ`.
    pub fn row_offset(&self, j: usize) -> usize {
        self.matrices[..j].iter().map(DMatrix::nrows).sum()
    }
}

/// `Y = [y_1; ...; y_J]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub per_sensor: Vec<Vec<f64>>,
}

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.per_sensor.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn concatenated(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.per_sensor.iter().flatten().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_x() -> SignalEnsemble {
        SignalEnsemble::new(vec![vec![3.0, 1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_sensing(5, &[2, 3], 42);
        let b = sample_sensing(5, &[2, 3], 42);
        assert_eq!(a, b);
        assert_ne!(a, sample_sensing(5, &[2, 3], 43));
        assert_eq!(a.spec().unwrap(), SensingSpec { seed: 42, n: 5, allocation: vec![2, 3] });
        assert_eq!(MeasurementSet::from_spec(&a.spec().unwrap()), a);
    }

    #[test]
    fn sensors_use_independent_streams() {
        let small = sample_sensing(4, &[1, 3, 2], 9);
        let big = sample_sensing(4, &[5, 3, 2], 9);
        assert_eq!(small.matrix(1), big.matrix(1));
        assert_eq!(small.matrix(2), big.matrix(2));
        // Extra rows are appended after the existing ones.
        assert_eq!(small.matrix(0).row(0), big.matrix(0).row(0));
        assert_ne!(small.matrix(0).row(0), small.matrix(1).row(0));
    }

    #[test]
    fn zero_rows_allowed() {
        let s = sample_sensing(4, &[0, 3], 1);
        assert_eq!(s.matrix(0).shape(), (0, 4));
        assert_eq!(s.block_diagonal().shape(), (3, 8));
    }

    #[test]
    fn standard_normal_moments() {
        let s = sample_sensing(1000, &[50, 50], 2024);
        let values: Vec<f64> = s.matrices().iter().flat_map(|m| m.iter().copied()).collect();
        assert_eq!(values.len(), 100_000);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn block_diagonal_layout() {
        let s = sample_sensing(3, &[2], 5);
        assert_eq!(s.block_diagonal(), *s.matrix(0));
        let s = sample_sensing(2, &[1, 1], 5);
        let phi = s.block_diagonal();
        assert_eq!(phi.shape(), (2, 4));
        assert_eq!((phi[(0, 2)], phi[(0, 3)], phi[(1, 0)], phi[(1, 1)]), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(phi[(0, 0)], s.matrix(0)[(0, 0)]);
        assert_eq!(phi[(1, 3)], s.matrix(1)[(0, 1)]);
    }

    #[test]
    fn measure_fixture() {
        let ones = DMatrix::from_element(1, 4, 1.0);
        let s = MeasurementSet::from_matrices(4, vec![ones, DMatrix::zeros(0, 4)]).unwrap();
        let y = s.measure(&example_x()).unwrap();
        assert_eq!(y.per_sensor, vec![vec![4.0], vec![]]);
        assert!(s.spec().is_none());
        let zero = sample_sensing(4, &[3, 2], 3).measure(&SignalEnsemble::zeros(2, 4)).unwrap();
        assert!(zero.concatenated().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn measure_checks_dimensions() {
        let s = sample_sensing(3, &[1, 1], 0);
        assert!(matches!(s.measure(&example_x()), Err(DcsError::DimensionMismatch(_))));
    }

    #[test]
    fn compose_example_layout() {
        let p = LocationMatrix::new(4, vec![0, 1], vec![vec![0], vec![]]).unwrap();
        let s = sample_sensing(4, &[2, 1], 11);
        let u = s.compose(&p).unwrap();
        assert_eq!(u.shape(), (3, 3));
        let (f1, f2) = (s.matrix(0), s.matrix(1));
        for r in 0..2 {
            assert_eq!(u[(r, 0)], f1[(r, 0)]);
            assert_eq!(u[(r, 1)], f1[(r, 1)]);
            assert_eq!(u[(r, 2)], f1[(r, 0)]);
        }
        assert_eq!((u[(2, 0)], u[(2, 1)], u[(2, 2)]), (f2[(0, 0)], f2[(0, 1)], 0.0));
        assert_eq!(s.compose(&LocationMatrix::empty(4, 2)).unwrap().shape(), (3, 0));
    }
}
