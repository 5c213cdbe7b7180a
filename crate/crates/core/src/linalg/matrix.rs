use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix with finite entries.
///
/// Zero-sized dimensions are allowed so that empty modal blocks (no marginal
/// or no Hurwitz part) can be represented without special cases.
#[derive(Clone, PartialEq)]
pub struct RealMatrix(DMatrix<f64>);

impl RealMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, row_major: Vec<f64>) -> Result<Self> {
        if row_major.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                row_major.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &row_major))
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().all(|v| v.is_finite()) {
            Ok(RealMatrix(m))
        } else {
            Err(Error::NonFinite("matrix"))
        }
    }

    /// Column vector (k x 1).
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        RealMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.0.is_square()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        RealMatrix(self.0.transpose())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn scale(&self, factor: f64) -> Self {
        RealMatrix(&self.0 * factor)
    }

    /// Checked product.
    pub fn dot(&self, rhs: &RealMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Self::from_dmatrix(&self.0 * &rhs.0)
    }

    pub fn kron(&self, rhs: &RealMatrix) -> Self {
        RealMatrix(self.0.kronecker(&rhs.0))
    }

    pub(crate) fn ensure_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} must be square, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }
}

impl fmt::Debug for RealMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealMatrix{:?}", self.to_rows())
    }
}

impl From<RealMatrix> for DMatrix<f64> {
    fn from(m: RealMatrix) -> Self {
        m.0
    }
}

impl AsRef<DMatrix<f64>> for RealMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

// Operator impls panic on shape mismatch, like the underlying nalgebra ones.
impl Mul for &RealMatrix {
    type Output = RealMatrix;
    fn mul(self, rhs: &RealMatrix) -> RealMatrix {
        RealMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &RealMatrix {
    type Output = RealMatrix;
    fn add(self, rhs: &RealMatrix) -> RealMatrix {
        RealMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &RealMatrix {
    type Output = RealMatrix;
    fn sub(self, rhs: &RealMatrix) -> RealMatrix {
        RealMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &RealMatrix {
    type Output = RealMatrix;
    fn neg(self) -> RealMatrix {
        RealMatrix(-&self.0)
    }
}
