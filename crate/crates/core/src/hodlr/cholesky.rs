//! Lower-triangular hierarchical Cholesky factor `K = L Lᵀ` of a HODLR
//! matrix, with low-rank Schur-complement updates recompressed as they go.

use nalgebra::{DMatrix, DVector};

use super::aca::LowRank;
use super::matrix::{HodlrBlock, HodlrMatrix};
use super::partition::ClusterTree;
use crate::error::{GpError, Result};

#[derive(Debug, Clone)]
pub struct HodlrCholesky {
    tree: ClusterTree,
    /// Dense lower factors at leaves.
    leaves: Vec<Option<DMatrix<f64>>>,
    /// `L21 = u vᵀ` at internal nodes (`u` over the right child's rows).
    coupling: Vec<Option<LowRank>>,
    tol: f64,
    max_rank: usize,
}

impl HodlrCholesky {
    /// `tol`/`max_rank` govern recompression of the updated off-diagonal
    /// blocks.
    pub fn new(m: &HodlrMatrix, tol: f64, max_rank: usize) -> Result<Self> {
        let count = m.tree().nodes().len();
        let mut chol = HodlrCholesky {
            tree: m.tree().clone(),
            leaves: vec![None; count],
            coupling: vec![None; count],
            tol,
            max_rank,
        };
        let mut work = m.blocks().to_vec();
        chol.factor(&mut work, 0)?;
        Ok(chol)
    }

    fn factor(&mut self, work: &mut [HodlrBlock], id: usize) -> Result<()> {
        let Some((a, b)) = self.tree.node(id).children else {
            let HodlrBlock::Leaf(d) = &work[id] else { unreachable!() };
            let l = d.clone().cholesky().ok_or(GpError::Indefinite { block: id })?.unpack();
            self.leaves[id] = Some(l);
            return Ok(());
        };
        self.factor(work, a)?;
        let HodlrBlock::Split(lr) = &work[id] else { unreachable!() };
        let mut w = lr.u.clone();
        let v = lr.v.clone();
        self.solve_lower_rows(a, &mut w, 0);
        let g = -w.tr_mul(&w);
        self.sym_update(work, b, &v, &g);
        self.factor(work, b)?;
        self.coupling[id] = Some(LowRank {
            u: v,
            v: w,
            truncated: false,
        });
        Ok(())
    }

    /// `A_node ← A_node + X G Xᵀ` on the working blocks.
    fn sym_update(&self, work: &mut [HodlrBlock], id: usize, x: &DMatrix<f64>, g: &DMatrix<f64>) {
        if x.ncols() == 0 {
            return;
        }
        let xg = x * g;
        match self.tree.node(id).children {
            None => {
                let HodlrBlock::Leaf(d) = &mut work[id] else { unreachable!() };
                d.gemm(1.0, &xg, &x.transpose(), 1.0);
            }
            Some((a, b)) => {
                let na = self.tree.node(a).len();
                let nb = self.tree.node(b).len();
                let xa = x.rows(0, na).into_owned();
                let xb = x.rows(na, nb).into_owned();
                if let HodlrBlock::Split(lr) = &mut work[id] {
                    lr.u = hcat(&lr.u, &xg.rows(0, na).into_owned());
                    lr.v = hcat(&lr.v, &xb);
                    lr.recompress(self.tol, self.max_rank);
                }
                self.sym_update(work, a, &xa, g);
                self.sym_update(work, b, &xb, g);
            }
        }
    }

    /// `b[offset..offset+len] ← L_node⁻¹ b[..]`.
    fn solve_lower_rows(&self, id: usize, b: &mut DMatrix<f64>, offset: usize) {
        let node = self.tree.node(id);
        match node.children {
            None => {
                let l = self.leaves[id].as_ref().expect("leaf factored");
                l.solve_lower_triangular_mut(&mut b.rows_mut(offset, node.len()));
            }
            Some((a, c)) => {
                let na = self.tree.node(a).len();
                self.solve_lower_rows(a, b, offset);
                if let Some(l21) = &self.coupling[id] {
                    let t = l21.v.tr_mul(&b.rows(offset, na));
                    b.rows_mut(offset + na, self.tree.node(c).len()).gemm(-1.0, &l21.u, &t, 1.0);
                }
                self.solve_lower_rows(c, b, offset + na);
            }
        }
    }

    /// `b[offset..offset+len] ← L_node⁻ᵀ b[..]`.
    fn solve_upper_rows(&self, id: usize, b: &mut DMatrix<f64>, offset: usize) {
        let node = self.tree.node(id);
        match node.children {
            None => {
                let l = self.leaves[id].as_ref().expect("leaf factored");
                l.tr_solve_lower_triangular_mut(&mut b.rows_mut(offset, node.len()));
            }
            Some((a, c)) => {
                let na = self.tree.node(a).len();
                let nc = self.tree.node(c).len();
                self.solve_upper_rows(c, b, offset + na);
                if let Some(l21) = &self.coupling[id] {
                    let t = l21.u.tr_mul(&b.rows(offset + na, nc));
                    b.rows_mut(offset, na).gemm(-1.0, &l21.v, &t, 1.0);
                }
                self.solve_upper_rows(a, b, offset);
            }
        }
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .leaves
            .iter()
            .flatten()
            .map(|l| l.diagonal().iter().map(|x| x.ln()).sum::<f64>())
            .sum::<f64>()
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.size() {
            return Err(GpError::shape("HODLR Cholesky right-hand side", self.size(), b.nrows()));
        }
        let mut x = b.clone();
        self.solve_lower_rows(0, &mut x, 0);
        self.solve_upper_rows(0, &mut x, 0);
        Ok(x)
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.solve_matrix(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(x.column(0).into_owned())
    }

    /// Dense lower-triangular factor.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut l = DMatrix::zeros(n, n);
        for (id, node) in self.tree.nodes().iter().enumerate() {
            if let Some(leaf) = &self.leaves[id] {
                l.view_mut((node.start, node.start), leaf.shape()).copy_from(leaf);
            }
            if let Some(c) = &self.coupling[id] {
                let na = c.v.nrows();
                l.view_mut((node.start + na, node.start), (c.u.nrows(), na))
                    .copy_from(&(&c.u * c.v.transpose()));
            }
        }
        l
    }

    /// Dense `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = self.to_dense();
        &l * l.transpose()
    }
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn hodlr_cholesky(m: &HodlrMatrix, tol: f64, max_rank: usize) -> Result<HodlrCholesky> {
    HodlrCholesky::new(m, tol, max_rank)
}
