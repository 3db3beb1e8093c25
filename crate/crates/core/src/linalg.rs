//! Dense factorizations on nalgebra storage, delegated to faer's blocked
//! kernels. nalgebra matrices are contiguous column-major, so faer views are
//! taken without copying.

use faer::linalg::solvers::Llt;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{MatMut, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};

fn view(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn view_slice_mut(data: &mut [f64], nrows: usize) -> MatMut<'_, f64> {
    let ncols = if nrows == 0 { 0 } else { data.len() / nrows };
    MatMut::from_column_major_slice_mut(data, nrows, ncols)
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a non-positive pivot is met. Only the lower triangle of `a` is read.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    assert!(a.is_square());
    let n = a.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let llt = Llt::new(view(a), Side::Lower).ok()?;
    let l = llt.L();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            out[(i, j)] = l[(i, j)];
        }
    }
    Some(out)
}

/// Solves `L X = B` in place.
pub fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    debug_assert_eq!(l.nrows(), b.nrows());
    let nrows = b.nrows();
    solve_lower_triangular_in_place(view(l), view_slice_mut(b.as_mut_slice(), nrows), Par::Seq);
}

/// Solves `Lᵀ X = B` in place.
pub fn solve_lower_transpose_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    debug_assert_eq!(l.nrows(), b.nrows());
    let nrows = b.nrows();
    solve_upper_triangular_in_place(
        view(l).transpose(),
        view_slice_mut(b.as_mut_slice(), nrows),
        Par::Seq,
    );
}

pub fn solve_lower_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = b.clone();
    let n = out.len();
    solve_lower_triangular_in_place(view(l), view_slice_mut(out.as_mut_slice(), n), Par::Seq);
    out
}

pub fn solve_lower_transpose_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = b.clone();
    let n = out.len();
    solve_upper_triangular_in_place(
        view(l).transpose(),
        view_slice_mut(out.as_mut_slice(), n),
        Par::Seq,
    );
    out
}

/// `(L Lᵀ)⁻¹ b`.
pub fn cholesky_solve_vec(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_lower_transpose_vec(l, &solve_lower_vec(l, b))
}

/// `(L Lᵀ)⁻¹ B`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    solve_lower_in_place(l, &mut out);
    solve_lower_transpose_in_place(l, &mut out);
    out
}

/// `(L Lᵀ)⁻¹` as a dense matrix.
pub fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    cholesky_solve(l, &DMatrix::identity(l.nrows(), l.nrows()))
}

/// `log |L Lᵀ|`.
pub fn cholesky_log_det(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
