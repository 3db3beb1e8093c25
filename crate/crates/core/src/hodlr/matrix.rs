use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::aca::{aca_compress, LowRank};
use super::partition::{partition_points, ClusterTree, PermutationRecord};
use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum HodlrBlock {
    /// Dense diagonal block of a leaf.
    Leaf(DMatrix<f64>),
    /// Off-diagonal coupling `A_ab ≈ U Vᵀ` between the two children
    /// (rows of `U` index the left child, rows of `V` the right).
    Split(LowRank),
}

/// Symmetric HODLR matrix in partition order. `blocks[k]` belongs to tree
/// node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodlrMatrix {
    tree: ClusterTree,
    blocks: Vec<HodlrBlock>,
}

impl HodlrMatrix {
    /// Builds the representation from an entry oracle over partition-order
    /// indices. Off-diagonal blocks are compressed by ACA.
    pub fn from_entries<F>(tree: ClusterTree, entry: F, tol: f64, max_rank: usize) -> Self
    where
        F: Fn(usize, usize) -> f64,
    {
        let blocks = tree
            .nodes()
            .iter()
            .map(|node| match node.children {
                None => HodlrBlock::Leaf(DMatrix::from_fn(node.len(), node.len(), |i, j| {
                    entry(node.start + i, node.start + j)
                })),
                Some((a, b)) => {
                    let (a, b) = (tree.node(a), tree.node(b));
                    let rows: Vec<usize> = (a.start..a.end).collect();
                    let cols: Vec<usize> = (b.start..b.end).collect();
                    HodlrBlock::Split(aca_compress(&entry, &rows, &cols, tol, max_rank))
                }
            })
            .collect();
        HodlrMatrix { tree, blocks }
    }

    /// Compresses an explicit symmetric matrix (already in partition order).
    pub fn from_dense(a: &DMatrix<f64>, tree: ClusterTree, tol: f64, max_rank: usize) -> Result<Self> {
        if a.nrows() != tree.size() || a.ncols() != tree.size() {
            return Err(GpError::shape("HODLR dense source", tree.size(), a.nrows()));
        }
        Ok(Self::from_entries(tree, |i, j| a[(i, j)], tol, max_rank))
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn blocks(&self) -> &[HodlrBlock] {
        &self.blocks
    }

    pub fn size(&self) -> usize {
        self.tree.size()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn truncated_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, HodlrBlock::Split(lr) if lr.truncated))
            .count()
    }

    pub fn mvm(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.size();
        if v.len() != n {
            return Err(GpError::shape("HODLR mvm vector", n, v.len()));
        }
        let mut out = DVector::zeros(n);
        for (node, block) in self.tree.nodes().iter().zip(&self.blocks) {
            match block {
                HodlrBlock::Leaf(d) => {
                    let mut seg = out.rows_mut(node.start, node.len());
                    seg.gemv(1.0, d, &v.rows(node.start, node.len()), 1.0);
                }
                HodlrBlock::Split(lr) => {
                    if lr.rank() == 0 {
                        continue;
                    }
                    let (na, nb) = (lr.nrows(), lr.ncols());
                    let mid = node.start + na;
                    let t = lr.v.tr_mul(&v.rows(mid, nb));
                    out.rows_mut(node.start, na).gemv(1.0, &lr.u, &t, 1.0);
                    let t = lr.u.tr_mul(&v.rows(node.start, na));
                    out.rows_mut(mid, nb).gemv(1.0, &lr.v, &t, 1.0);
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut out = DMatrix::zeros(n, n);
        for (node, block) in self.tree.nodes().iter().zip(&self.blocks) {
            match block {
                HodlrBlock::Leaf(d) => out.view_mut((node.start, node.start), d.shape()).copy_from(d),
                HodlrBlock::Split(lr) => {
                    let ab = lr.to_dense();
                    let mid = node.start + lr.nrows();
                    out.view_mut((node.start, mid), ab.shape()).copy_from(&ab);
                    out.view_mut((mid, node.start), (ab.ncols(), ab.nrows()))
                        .copy_from(&ab.transpose());
                }
            }
        }
        out
    }

    pub fn diagnostics(&self) -> HodlrDiagnostics {
        let n = self.size();
        let mut levels = Vec::new();
        let mut stored = 0usize;
        for level in 0..=self.depth() {
            let mut stats = LevelStats {
                level,
                blocks: 0,
                min_rank: usize::MAX,
                max_rank: 0,
                mean_rank: 0.0,
                compression_ratio: 0.0,
                truncated: 0,
            };
            let (mut dense_entries, mut kept_entries) = (0usize, 0usize);
            for id in self.tree.at_level(level) {
                if let HodlrBlock::Split(lr) = &self.blocks[id] {
                    stats.blocks += 1;
                    stats.min_rank = stats.min_rank.min(lr.rank());
                    stats.max_rank = stats.max_rank.max(lr.rank());
                    stats.mean_rank += lr.rank() as f64;
                    stats.truncated += usize::from(lr.truncated);
                    dense_entries += 2 * lr.nrows() * lr.ncols();
                    kept_entries += 2 * lr.rank() * (lr.nrows() + lr.ncols());
                }
            }
            for id in self.tree.at_level(level) {
                if let HodlrBlock::Leaf(d) = &self.blocks[id] {
                    stored += d.len();
                }
            }
            stored += kept_entries;
            if stats.blocks > 0 {
                stats.mean_rank /= stats.blocks as f64;
                stats.compression_ratio = kept_entries as f64 / dense_entries as f64;
                levels.push(stats);
            }
        }
        HodlrDiagnostics {
            n,
            depth: self.depth(),
            leaf_count: self.tree.leaves().count(),
            max_leaf_size: self.tree.leaves().map(|id| self.tree.node(id).len()).max().unwrap_or(0),
            levels,
            truncated_blocks: self.truncated_blocks(),
            stored_entries: stored,
            overall_compression_ratio: stored as f64 / (n * n) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub blocks: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    pub mean_rank: f64,
    /// Stored low-rank entries over dense entries for this level's
    /// off-diagonal blocks.
    pub compression_ratio: f64,
    pub truncated: usize,
}

/// Per-level rank and compression summary, serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HodlrDiagnostics {
    pub n: usize,
    pub depth: usize,
    pub leaf_count: usize,
    pub max_leaf_size: usize,
    pub levels: Vec<LevelStats>,
    pub truncated_blocks: usize,
    pub stored_entries: usize,
    pub overall_compression_ratio: f64,
}

impl HodlrDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

/// `K + σ²I` over `x`, in the partition order given by `permutation`.
#[derive(Debug, Clone)]
pub struct HodlrAssembly {
    pub matrix: HodlrMatrix,
    pub permutation: PermutationRecord,
}

/// Partitions `x` and assembles `K(x, x) + sigma2·I` in HODLR form. The
/// noise only touches leaf diagonals.
pub fn hodlr_assemble(
    x: &DMatrix<f64>,
    spec: &KernelSpec,
    sigma2: f64,
    tol: f64,
    leaf_size: usize,
    max_rank: usize,
) -> Result<HodlrAssembly> {
    if x.ncols() != spec.dim() {
        return Err(GpError::shape("HODLR input dimension", spec.dim(), x.ncols()));
    }
    if !(tol > 0.0) {
        return Err(GpError::InvalidInput(format!("ACA tolerance must be positive, got {tol}")));
    }
    if max_rank == 0 {
        return Err(GpError::InvalidInput("max_rank must be positive".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(GpError::InvalidInput(format!("noise variance must be non-negative, got {sigma2}")));
    }
    let (permutation, tree) = partition_points(x, leaf_size)?;
    let order = permutation.order();
    let entry = |i: usize, j: usize| {
        let k = spec.eval_rows(x, order[i], x, order[j]);
        if i == j {
            k + sigma2
        } else {
            k
        }
    };
    let matrix = HodlrMatrix::from_entries(tree, entry, tol, max_rank);
    Ok(HodlrAssembly { matrix, permutation })
}

pub fn hodlr_mvm(m: &HodlrMatrix, v: &DVector<f64>) -> Result<DVector<f64>> {
    m.mvm(v)
}
