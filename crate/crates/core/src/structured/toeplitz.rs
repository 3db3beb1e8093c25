use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{GpError, Result};

/// Symmetric Toeplitz matrix `T_ij = c_|i−j|`, multiplied through a circulant
/// embedding of size `2m` and FFT-based cyclic convolution.
#[derive(Clone)]
pub struct ToeplitzOp {
    first_column: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ToeplitzOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzOp")
            .field("first_column", &self.first_column)
            .finish_non_exhaustive()
    }
}

impl ToeplitzOp {
    pub fn new(first_column: Vec<f64>) -> Result<Self> {
        if first_column.is_empty() {
            return Err(GpError::InvalidInput("Toeplitz column must be non-empty".into()));
        }
        let m = first_column.len();
        let size = 2 * m;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        // [c_0 … c_{m−1}, 0, c_{m−1} … c_1]
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        for (j, &c) in first_column.iter().enumerate() {
            spectrum[j].re = c;
            if j > 0 {
                spectrum[size - j].re = c;
            }
        }
        forward.process(&mut spectrum);
        Ok(ToeplitzOp {
            first_column,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.first_column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_column.is_empty()
    }

    pub fn first_column(&self) -> &[f64] {
        &self.first_column
    }

    pub fn mvm(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.len();
        if v.len() != m {
            return Err(GpError::shape("Toeplitz MVM", m, v.len()));
        }
        let size = 2 * m;
        let mut buf: Vec<Complex<f64>> = v
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)).take(m))
            .collect();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        Ok(DVector::from_iterator(m, buf[..m].iter().map(|c| c.re * scale)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| self.first_column[i.abs_diff(j)])
    }
}
