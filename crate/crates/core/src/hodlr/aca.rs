//! Partially pivoted adaptive cross approximation.

use nalgebra::{DMatrix, DVector};

/// Rank-`r` factorization `U Vᵀ` of a `p×q` block.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// The rank cap was hit before the tolerance was met.
    pub truncated: bool,
}

impl LowRank {
    pub fn zeros(p: usize, q: usize) -> Self {
        LowRank {
            u: DMatrix::zeros(p, 0),
            v: DMatrix::zeros(q, 0),
            truncated: false,
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    /// Re-truncates `U Vᵀ` to the smallest rank whose discarded singular
    /// values have relative Frobenius norm at most `tol`, capped at `max_rank`.
    pub fn recompress(&mut self, tol: f64, max_rank: usize) {
        let k = self.rank();
        if k == 0 {
            return;
        }
        let qr_u = self.u.clone().qr();
        let qr_v = self.v.clone().qr();
        let core = qr_u.r() * qr_v.r().transpose();
        let svd = core.svd(true, true);
        let (us, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return,
        };
        let s = &svd.singular_values;
        let total: f64 = s.iter().map(|x| x * x).sum();
        let mut keep = s.len();
        let mut tail = 0.0;
        while keep > 0 {
            let next = tail + s[keep - 1] * s[keep - 1];
            if next > tol * tol * total {
                break;
            }
            tail = next;
            keep -= 1;
        }
        if keep > max_rank {
            keep = max_rank;
            self.truncated = true;
        }
        let qu = qr_u.q();
        let qv = qr_v.q();
        let mut u = &qu * us.columns(0, keep);
        for (j, mut col) in u.column_iter_mut().enumerate() {
            col *= s[j];
        }
        self.u = u;
        self.v = &qv * vt.rows(0, keep).transpose();
    }
}

/// After this many consecutive pivot rows with an all-zero residual the
/// block is treated as fully captured.
const ZERO_ROW_RETRIES: usize = 16;

/// Compresses the block `A_ij = entry(rows[i], cols[j])` by greedy crosses
/// with partial pivoting. Stops when the newest cross has relative Frobenius
/// size below `tol` (that cross is discarded), when the block is exhausted,
/// or at `max_rank` (flagged as truncated). Only `O(r (p + q))` entries are
/// evaluated.
pub fn aca_compress<F>(entry: F, rows: &[usize], cols: &[usize], tol: f64, max_rank: usize) -> LowRank
where
    F: Fn(usize, usize) -> f64,
{
    let p = rows.len();
    let q = cols.len();
    let limit = max_rank.min(p).min(q);
    let mut us: Vec<DVector<f64>> = Vec::new();
    let mut vs: Vec<DVector<f64>> = Vec::new();
    let mut used_rows = vec![false; p];
    let mut used_cols = vec![false; q];
    let mut norm2 = 0.0;
    let mut converged = p == 0 || q == 0;
    let mut pivot_row = 0;
    let mut zero_rows = 0;
    // golden-ratio stride spreads retries over the block
    let stride = ((p as f64 * 0.618_033_988_75) as usize).max(1);

    while !converged && us.len() < limit {
        used_rows[pivot_row] = true;
        let mut row = DVector::from_iterator(q, cols.iter().map(|&c| entry(rows[pivot_row], c)));
        for (u, v) in us.iter().zip(&vs) {
            row.axpy(-u[pivot_row], v, 1.0);
        }
        let pivot_col = (0..q)
            .filter(|&j| !used_cols[j])
            .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
        let pivot_col = match pivot_col {
            Some(j) if row[j] != 0.0 => j,
            _ => {
                zero_rows += 1;
                match next_unused(&used_rows, pivot_row, stride) {
                    Some(i) if zero_rows < ZERO_ROW_RETRIES => {
                        pivot_row = i;
                        continue;
                    }
                    _ => {
                        converged = true;
                        break;
                    }
                }
            }
        };
        zero_rows = 0;
        let pivot = row[pivot_col];
        let v = row / pivot;
        let mut u = DVector::from_iterator(p, rows.iter().map(|&r| entry(r, cols[pivot_col])));
        for (uk, vk) in us.iter().zip(&vs) {
            u.axpy(-vk[pivot_col], uk, 1.0);
        }
        used_cols[pivot_col] = true;

        let term2 = u.norm_squared() * v.norm_squared();
        let cross: f64 = us.iter().zip(&vs).map(|(uk, vk)| uk.dot(&u) * vk.dot(&v)).sum();
        let new_norm2 = (norm2 + 2.0 * cross + term2).max(term2);
        if term2.sqrt() <= tol * new_norm2.sqrt() {
            converged = true;
            break;
        }
        norm2 = new_norm2;
        let next = (0..p)
            .filter(|&i| !used_rows[i])
            .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()));
        us.push(u);
        vs.push(v);
        match next {
            Some(i) => pivot_row = i,
            None => {
                converged = true;
                break;
            }
        }
    }
    if us.len() == p.min(q) {
        // every row or column has been used as a pivot: the cross is exact
        converged = true;
    }

    let r = us.len();
    let mut u = DMatrix::zeros(p, r);
    let mut v = DMatrix::zeros(q, r);
    for k in 0..r {
        u.set_column(k, &us[k]);
        v.set_column(k, &vs[k]);
    }
    LowRank {
        u,
        v,
        truncated: !converged,
    }
}

fn next_unused(used: &[bool], from: usize, stride: usize) -> Option<usize> {
    let p = used.len();
    let mut i = from;
    for _ in 0..p {
        i = (i + stride) % p;
        if !used[i] {
            return Some(i);
        }
    }
    used.iter().position(|u| !u)
}
