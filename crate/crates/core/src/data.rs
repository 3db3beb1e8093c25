use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};

/// Training inputs (one row per point) and their noisy targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(GpError::InvalidInput("dataset must contain at least one point".into()));
        }
        if x.ncols() == 0 {
            return Err(GpError::InvalidInput("inputs must have at least one dimension".into()));
        }
        if x.nrows() != y.len() {
            return Err(GpError::shape("dataset targets", x.nrows(), y.len()));
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(GpError::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Dataset { x, y })
    }

    /// One-dimensional convenience constructor.
    pub fn from_1d(x: &[f64], y: &[f64]) -> Result<Self> {
        Dataset::new(
            DMatrix::from_column_slice(x.len(), 1, x),
            DVector::from_column_slice(y),
        )
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Per-dimension `(min, max)` of the inputs.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        column_bounds(&self.x)
    }
}

pub(crate) fn column_bounds(x: &DMatrix<f64>) -> Vec<(f64, f64)> {
    x.column_iter()
        .map(|c| {
            c.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

/// Marginal predictive distribution at a set of test points.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

impl Prediction {
    /// `mean ± 1.96·sd`, the pointwise 95% band.
    pub fn band95(&self) -> (DVector<f64>, DVector<f64>) {
        let half = self.variance.map(|v| 1.96 * v.max(0.0).sqrt());
        (&self.mean - &half, &self.mean + &half)
    }
}
