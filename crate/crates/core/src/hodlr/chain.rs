//! Multiplicative factorization `K = K_l K_{l-1} ⋯ K_0` of a HODLR matrix,
//! inverted factor by factor with Sherman–Morrison–Woodbury.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::matrix::{HodlrBlock, HodlrMatrix};
use super::partition::ClusterTree;
use crate::error::{GpError, Result};

/// One non-leaf factor `I + W Yᵀ` on a node's rows, with
/// `W = diag(Ũ, Ṽ)` (bases after the inverses of all deeper factors) and
/// `Y = [[0, U], [V, 0]]` (original bases).
#[derive(Debug, Clone)]
struct SmwFactor {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    u_t: DMatrix<f64>,
    v_t: DMatrix<f64>,
    /// `I + YᵀW`, `2r × 2r`.
    core: LU<f64, Dyn, Dyn>,
}

impl SmwFactor {
    fn split(&self) -> usize {
        self.u.nrows()
    }

    /// `b[offset..] ← (I + W Yᵀ)⁻¹ b[offset..]`.
    fn apply_inverse(&self, b: &mut DMatrix<f64>, offset: usize) {
        let (na, nb) = (self.u.nrows(), self.v.nrows());
        let r = self.u.ncols();
        let k = b.ncols();
        let mut rhs = DMatrix::zeros(2 * r, k);
        rhs.rows_mut(0, r).copy_from(&self.v.tr_mul(&b.rows(offset + na, nb)));
        rhs.rows_mut(r, r).copy_from(&self.u.tr_mul(&b.rows(offset, na)));
        let s = self.core.solve(&rhs).expect("core checked nonsingular");
        b.rows_mut(offset, na).gemm(-1.0, &self.u_t, &s.rows(0, r), 1.0);
        b.rows_mut(offset + na, nb).gemm(-1.0, &self.v_t, &s.rows(r, r), 1.0);
    }

    /// `b[offset..] ← (I + W Yᵀ) b[offset..]`.
    fn apply(&self, b: &mut DMatrix<f64>, offset: usize) {
        let (na, nb) = (self.u.nrows(), self.v.nrows());
        let ta = self.v.tr_mul(&b.rows(offset + na, nb));
        let tb = self.u.tr_mul(&b.rows(offset, na));
        b.rows_mut(offset, na).gemm(1.0, &self.u_t, &ta, 1.0);
        b.rows_mut(offset + na, nb).gemm(1.0, &self.v_t, &tb, 1.0);
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.split() + self.v.nrows();
        let mut f = DMatrix::identity(n, n);
        self.apply(&mut f, 0);
        f
    }
}

#[derive(Debug, Clone)]
pub struct HodlrFactorChain {
    tree: ClusterTree,
    leaves: Vec<Option<Cholesky<f64, Dyn>>>,
    updates: Vec<Option<SmwFactor>>,
    log_det: f64,
}

impl HodlrFactorChain {
    pub fn new(m: &HodlrMatrix) -> Result<Self> {
        let tree = m.tree().clone();
        let count = tree.nodes().len();
        // transformed bases Ũ, Ṽ per internal node, updated in place
        let mut bases: Vec<Option<(DMatrix<f64>, DMatrix<f64>)>> = m
            .blocks()
            .iter()
            .map(|b| match b {
                HodlrBlock::Split(lr) if lr.rank() > 0 => Some((lr.u.clone(), lr.v.clone())),
                _ => None,
            })
            .collect();
        let mut leaves: Vec<Option<Cholesky<f64, Dyn>>> = vec![None; count];
        let mut log_det = 0.0;

        for id in tree.leaves() {
            let HodlrBlock::Leaf(d) = &m.blocks()[id] else { unreachable!() };
            let chol = d.clone().cholesky().ok_or(GpError::Indefinite { block: id })?;
            log_det += 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            for_ancestor_slices(&tree, id, &mut bases, |b, offset, len| {
                chol.solve_mut(&mut b.rows_mut(offset, len));
            });
            leaves[id] = Some(chol);
        }

        let mut updates: Vec<Option<SmwFactor>> = vec![None; count];
        for level in (0..tree.depth()).rev() {
            let ids: Vec<usize> = tree.at_level(level).collect();
            for id in ids {
                let Some((u_t, v_t)) = bases[id].take() else { continue };
                let HodlrBlock::Split(lr) = &m.blocks()[id] else { unreachable!() };
                let r = lr.rank();
                let mut core = DMatrix::identity(2 * r, 2 * r);
                core.view_mut((0, r), (r, r)).copy_from(&lr.v.tr_mul(&v_t));
                core.view_mut((r, 0), (r, r)).copy_from(&lr.u.tr_mul(&u_t));
                let core = core.lu();
                let det = core.determinant();
                if !det.is_finite() || det <= 0.0 {
                    return Err(GpError::NearSingularUpdate { level });
                }
                log_det += det.ln();
                let factor = SmwFactor {
                    u: lr.u.clone(),
                    v: lr.v.clone(),
                    u_t,
                    v_t,
                    core,
                };
                for_ancestor_slices(&tree, id, &mut bases, |b, offset, _| factor.apply_inverse(b, offset));
                updates[id] = Some(factor);
            }
        }
        Ok(HodlrFactorChain {
            tree,
            leaves,
            updates,
            log_det,
        })
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `K X = B` for a block of right-hand sides (partition order).
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.size() {
            return Err(GpError::shape("HODLR solve right-hand side", self.size(), b.nrows()));
        }
        let mut x = b.clone();
        for id in self.tree.leaves() {
            let node = self.tree.node(id);
            if let Some(chol) = &self.leaves[id] {
                chol.solve_mut(&mut x.rows_mut(node.start, node.len()));
            }
        }
        for level in (0..self.tree.depth()).rev() {
            for id in self.tree.at_level(level) {
                if let Some(f) = &self.updates[id] {
                    f.apply_inverse(&mut x, self.tree.node(id).start);
                }
            }
        }
        Ok(x)
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.solve_matrix(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(x.column(0).into_owned())
    }

    /// Applies `K_l ⋯ K_0` to `v`.
    pub fn mvm(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.size() {
            return Err(GpError::shape("HODLR chain mvm vector", self.size(), v.len()));
        }
        let mut x = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        for level in 0..self.tree.depth() {
            for id in self.tree.at_level(level) {
                if let Some(f) = &self.updates[id] {
                    f.apply(&mut x, self.tree.node(id).start);
                }
            }
        }
        for id in self.tree.leaves() {
            let node = self.tree.node(id);
            if let Some(chol) = &self.leaves[id] {
                let l = chol.l();
                let mut seg = x.rows_mut(node.start, node.len());
                let t = l.tr_mul(&seg);
                seg.copy_from(&(&l * t));
            }
        }
        Ok(x.column(0).into_owned())
    }

    /// Dense factors `[K_l, K_{l-1}, …, K_0]`; their product is the matrix.
    pub fn dense_factors(&self) -> Vec<DMatrix<f64>> {
        let n = self.size();
        let mut out = Vec::with_capacity(self.tree.depth() + 1);
        let mut leaf = DMatrix::zeros(n, n);
        for id in self.tree.leaves() {
            let node = self.tree.node(id);
            if let Some(chol) = &self.leaves[id] {
                let l = chol.l();
                leaf.view_mut((node.start, node.start), (node.len(), node.len()))
                    .copy_from(&(&l * l.transpose()));
            }
        }
        out.push(leaf);
        for level in (0..self.tree.depth()).rev() {
            let mut k = DMatrix::identity(n, n);
            for id in self.tree.at_level(level) {
                if let Some(f) = &self.updates[id] {
                    let node = self.tree.node(id);
                    k.view_mut((node.start, node.start), (node.len(), node.len()))
                        .copy_from(&f.to_dense());
                }
            }
            out.push(k);
        }
        out
    }
}

/// Calls `f(basis, offset, len)` for every ancestor basis slice covering the
/// rows of node `id`.
fn for_ancestor_slices<F>(
    tree: &ClusterTree,
    id: usize,
    bases: &mut [Option<(DMatrix<f64>, DMatrix<f64>)>],
    mut f: F,
) where
    F: FnMut(&mut DMatrix<f64>, usize, usize),
{
    let node = tree.node(id);
    for g in tree.ancestors(id) {
        let Some((u_t, v_t)) = bases[g].as_mut() else { continue };
        let (a, b) = tree.node(g).children.expect("ancestor is internal");
        let (basis, child) = if node.start < tree.node(a).end {
            (u_t, tree.node(a))
        } else {
            (v_t, tree.node(b))
        };
        f(basis, node.start - child.start, node.len());
    }
}

pub fn hodlr_factorize(m: &HodlrMatrix) -> Result<HodlrFactorChain> {
    HodlrFactorChain::new(m)
}

pub fn hodlr_solve(chain: &HodlrFactorChain, b: &DVector<f64>) -> Result<DVector<f64>> {
    chain.solve(b)
}

pub fn hodlr_logdet(chain: &HodlrFactorChain) -> f64 {
    chain.log_det()
}
