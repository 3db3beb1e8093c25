use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};

/// Reordering of data indices induced by the spatial partition.
/// `order[k]` is the original index of the point stored at position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationRecord {
    order: Vec<usize>,
}

impl PermutationRecord {
    pub fn identity(n: usize) -> Self {
        PermutationRecord {
            order: (0..n).collect(),
        }
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(GpError::InvalidInput("permutation is not a bijection".into()));
            }
        }
        Ok(PermutationRecord { order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(k, &i)| k == i)
    }

    /// `inverse()[i]` is the position of original index `i`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.order.len()];
        for (k, &i) in self.order.iter().enumerate() {
            inv[i] = k;
        }
        inv
    }

    /// Original ordering → partition ordering.
    pub fn to_permuted(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), self.order.iter().map(|&i| v[i]))
    }

    /// Partition ordering → original ordering.
    pub fn to_original(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    pub fn permute_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |k, j| m[(self.order[k], j)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterNode {
    /// Half-open range of positions in partition order.
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Balanced binary cluster tree; every leaf sits at depth `depth()`. Node 0
/// is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    depth: usize,
}

impl ClusterTree {
    /// Tree over `n` points already in partition order, halving until blocks
    /// hold at most `leaf_size` points.
    pub fn balanced(n: usize, leaf_size: usize) -> Self {
        let depth = tree_depth(n, leaf_size);
        let mut nodes = vec![ClusterNode {
            start: 0,
            end: n,
            level: 0,
            parent: None,
            children: None,
        }];
        let mut k = 0;
        while k < nodes.len() {
            let node = nodes[k].clone();
            if node.level < depth {
                let mid = node.start + node.len() / 2;
                let left = nodes.len();
                for (start, end) in [(node.start, mid), (mid, node.end)] {
                    nodes.push(ClusterNode {
                        start,
                        end,
                        level: node.level + 1,
                        parent: Some(k),
                        children: None,
                    });
                }
                nodes[k].children = Some((left, left + 1));
            }
            k += 1;
        }
        ClusterTree { nodes, depth }
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    /// Number of levels below the root; leaves live at this level.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        self.nodes[0].end
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn at_level(&self, level: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].level == level)
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&p| self.nodes[p].parent)
    }
}

fn tree_depth(n: usize, leaf_size: usize) -> usize {
    let mut depth = 0;
    while n.div_ceil(1 << depth) > leaf_size {
        depth += 1;
    }
    depth
}

/// k-d partition: recursive median split along the dimension of largest
/// extent, ties broken by original index. Returns the resulting ordering and
/// the balanced cluster tree over it.
pub fn partition_points(x: &DMatrix<f64>, leaf_size: usize) -> Result<(PermutationRecord, ClusterTree)> {
    let n = x.nrows();
    if n == 0 {
        return Err(GpError::InvalidInput("cannot partition an empty point set".into()));
    }
    if leaf_size < 8 {
        return Err(GpError::InvalidInput(format!("leaf_size must be at least 8, got {leaf_size}")));
    }
    let tree = ClusterTree::balanced(n, leaf_size);
    let mut order: Vec<usize> = (0..n).collect();
    for node in tree.nodes() {
        if node.is_leaf() {
            continue;
        }
        let slice = &mut order[node.start..node.end];
        let dim = widest_dimension(x, slice);
        slice.sort_by(|&a, &b| x[(a, dim)].total_cmp(&x[(b, dim)]).then(a.cmp(&b)));
    }
    Ok((PermutationRecord { order }, tree))
}

fn widest_dimension(x: &DMatrix<f64>, idx: &[usize]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for d in 0..x.ncols() {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(x[(i, d)]), hi.max(x[(i, d)]))
        });
        if hi - lo > best.1 {
            best = (d, hi - lo);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sets_are_a_single_leaf() {
        let x = DMatrix::from_column_slice(5, 1, &[3.0, 1.0, 2.0, 0.0, 4.0]);
        let (perm, tree) = partition_points(&x, 8).unwrap();
        assert!(perm.is_identity());
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn sorted_input_keeps_identity_order() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let x = DMatrix::from_column_slice(100, 1, &xs);
        let (perm, tree) = partition_points(&x, 8).unwrap();
        assert!(perm.is_identity());
        assert_eq!(tree.depth(), 4);
    }

    #[test]
    fn leaf_size_precondition() {
        let x = DMatrix::zeros(4, 1);
        assert!(partition_points(&x, 4).is_err());
        assert!(partition_points(&DMatrix::zeros(0, 1), 16).is_err());
    }

    #[test]
    fn duplicates_break_ties_by_index() {
        let x = DMatrix::from_column_slice(20, 1, &[1.0; 20]);
        let (perm, _) = partition_points(&x, 8).unwrap();
        assert!(perm.is_identity());
    }

    #[test]
    fn splits_the_widest_dimension() {
        // second coordinate spans far more than the first
        let x = DMatrix::from_fn(16, 2, |i, d| if d == 0 { (i % 2) as f64 } else { -(i as f64) * 10.0 });
        let (perm, tree) = partition_points(&x, 8).unwrap();
        let left = tree.node(1);
        let max_left = perm.order()[left.start..left.end]
            .iter()
            .map(|&i| x[(i, 1)])
            .fold(f64::NEG_INFINITY, f64::max);
        let right = tree.node(2);
        let min_right = perm.order()[right.start..right.end]
            .iter()
            .map(|&i| x[(i, 1)])
            .fold(f64::INFINITY, f64::min);
        assert!(max_left <= min_right);
    }

    #[test]
    fn permutation_round_trip() {
        let perm = PermutationRecord::new(vec![2, 0, 3, 1]).unwrap();
        let v = DVector::from_column_slice(&[10.0, 11.0, 12.0, 13.0]);
        let p = perm.to_permuted(&v);
        assert_eq!(p.as_slice(), &[12.0, 10.0, 13.0, 11.0]);
        assert_eq!(perm.to_original(&p), v);
        assert!(PermutationRecord::new(vec![0, 0, 1]).is_err());
    }
}
