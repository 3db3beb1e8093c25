use nalgebra::{DMatrix, DVector};

use crate::data::column_bounds;
use crate::error::{GpError, Result};

/// Cartesian product of equispaced axes. Flattened grid indices put the first
/// axis slowest, matching [`KronOp`](super::KronOp).
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGrid {
    axes: Vec<Vec<f64>>,
}

impl RegularGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(GpError::InvalidInput("grid needs at least one axis".into()));
        }
        for (d, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(GpError::InvalidInput(format!("grid axis {d} needs at least 2 points")));
            }
            let m = axis.len();
            let (lo, hi) = (axis[0], axis[m - 1]);
            let h = (hi - lo) / (m - 1) as f64;
            if !(h > 0.0) || !h.is_finite() {
                return Err(GpError::InvalidInput(format!("grid axis {d} must be strictly increasing")));
            }
            let scale = lo.abs().max(hi.abs()).max(h);
            for (i, &z) in axis.iter().enumerate() {
                if (z - (lo + h * i as f64)).abs() > 1e-12 * scale {
                    return Err(GpError::InvalidInput(format!("grid axis {d} is not equispaced")));
                }
            }
        }
        Ok(RegularGrid { axes })
    }

    pub fn linspace(bounds: &[(f64, f64)], sizes: &[usize]) -> Result<Self> {
        if bounds.len() != sizes.len() {
            return Err(GpError::shape("grid sizes", bounds.len(), sizes.len()));
        }
        let axes = bounds
            .iter()
            .zip(sizes)
            .map(|(&(lo, hi), &m)| {
                let h = (hi - lo) / (m.max(2) - 1) as f64;
                (0..m).map(|i| if i + 1 == m { hi } else { lo + h * i as f64 }).collect()
            })
            .collect();
        RegularGrid::new(axes)
    }

    /// Grid with `m` points per dimension over the input range, widened by 2%
    /// of the span (1% on each side).
    pub fn covering(x: &DMatrix<f64>, m: usize) -> Result<Self> {
        let bounds: Vec<(f64, f64)> = column_bounds(x)
            .into_iter()
            .map(|(lo, hi)| {
                let span = if hi > lo { hi - lo } else { 1.0 };
                (lo - 0.01 * span, hi + 0.01 * span)
            })
            .collect();
        RegularGrid::linspace(&bounds, &vec![m; bounds.len()])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, d: usize) -> &[f64] {
        &self.axes[d]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All grid points as rows, in flattened order.
    pub fn points(&self) -> DMatrix<f64> {
        let sizes = self.sizes();
        let n = self.len();
        let mut out = DMatrix::zeros(n, self.dim());
        for flat in 0..n {
            let mut rem = flat;
            for d in (0..self.dim()).rev() {
                out[(flat, d)] = self.axes[d][rem % sizes[d]];
                rem /= sizes[d];
            }
        }
        out
    }

    fn strides(&self) -> Vec<usize> {
        let sizes = self.sizes();
        let mut strides = vec![1; sizes.len()];
        for d in (0..sizes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * sizes[d + 1];
        }
        strides
    }
}

/// Sparse `n×m` interpolation matrix in compressed-row form. Every row holds
/// exactly `2^D` stored entries: the tensor product of the two bracketing
/// grid points in each dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpWeights {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    ncols: usize,
}

/// Bracketing index `a` (so the pair is `a, a+1`) and weight on `z_a`.
fn bracket(axis: &[f64], x: f64, dim: usize) -> Result<(usize, f64)> {
    let m = axis.len();
    let (lo, hi) = (axis[0], axis[m - 1]);
    let tol = 1e-12 * (hi - lo);
    if !(x >= lo - tol && x <= hi + tol) {
        return Err(GpError::Extrapolation { dim, value: x, lo, hi });
    }
    let h = (hi - lo) / (m - 1) as f64;
    let mut a = (((x - lo) / h).floor().max(0.0) as usize).min(m - 2);
    if x < axis[a] && a > 0 {
        a -= 1;
    } else if x > axis[a + 1] && a + 2 < m {
        a += 1;
    }
    let t = ((x - axis[a]) / (axis[a + 1] - axis[a])).clamp(0.0, 1.0);
    // weight on z_a is the normalised distance from x to z_b
    Ok((a, 1.0 - t))
}

/// Local linear interpolation weights of `x` onto `grid`.
pub fn ski_weights(x: &DMatrix<f64>, grid: &RegularGrid) -> Result<InterpWeights> {
    let dim = grid.dim();
    if x.ncols() != dim {
        return Err(GpError::shape("interpolation input columns", dim, x.ncols()));
    }
    let strides = grid.strides();
    let per_row = 1usize << dim;
    let mut row_ptr = Vec::with_capacity(x.nrows() + 1);
    let mut col_idx = Vec::with_capacity(x.nrows() * per_row);
    let mut values = Vec::with_capacity(x.nrows() * per_row);
    row_ptr.push(0);
    let mut brackets = vec![(0usize, 0.0f64); dim];
    for i in 0..x.nrows() {
        for (d, b) in brackets.iter_mut().enumerate() {
            *b = bracket(grid.axis(d), x[(i, d)], d)?;
        }
        for corner in 0..per_row {
            let mut col = 0;
            let mut w = 1.0;
            for (d, &(a, wa)) in brackets.iter().enumerate() {
                if corner >> (dim - 1 - d) & 1 == 0 {
                    col += a * strides[d];
                    w *= wa;
                } else {
                    col += (a + 1) * strides[d];
                    w *= 1.0 - wa;
                }
            }
            col_idx.push(col);
            values.push(w);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(InterpWeights {
        row_ptr,
        col_idx,
        values,
        ncols: grid.len(),
    })
}

impl InterpWeights {
    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// `W v` for a grid vector `v`.
    pub fn matvec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ncols {
            return Err(GpError::shape("interpolation W·v", self.ncols, v.len()));
        }
        Ok(DVector::from_iterator(
            self.nrows(),
            (0..self.nrows()).map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &w)| w * v[c]).sum::<f64>()
            }),
        ))
    }

    /// `Wᵀ v` for a data vector `v`.
    pub fn t_matvec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.nrows() {
            return Err(GpError::shape("interpolation Wᵀ·v", self.nrows(), v.len()));
        }
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                out[c] += w * v[i];
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                out[(i, c)] += w;
            }
        }
        out
    }
}
