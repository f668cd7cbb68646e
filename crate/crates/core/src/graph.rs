//! Graph and label data model.
//!
//! Edges are stored once as `(i, j)` with `i < j`; adjacency matrices are
//! materialized densely on demand. Self-loops are never stored, operations
//! that need `Ã = A + I` add them explicitly.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected, unweighted attributed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    attributes: DMatrix<f64>,
}

impl Graph {
    /// Builds a validated graph. Edge endpoints may be given in either
    /// order; they are stored as `(min, max)` in input order.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        attributes: DMatrix<f64>,
    ) -> Result<Self> {
        if attributes.nrows() != n_nodes {
            return Err(Error::InvalidGraph(format!(
                "attribute matrix has {} rows for {} nodes",
                attributes.nrows(),
                n_nodes
            )));
        }
        let mut seen = HashSet::new();
        let mut stored = Vec::new();
        for (a, b) in edges {
            let (i, j) = (a.min(b), a.max(b));
            if j >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "node index out of range: edge ({a}, {b}) on {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            stored.push((i, j));
        }
        Ok(Self {
            n_nodes,
            edges: stored,
            attributes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_features(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn attributes(&self) -> &DMatrix<f64> {
        &self.attributes
    }

    /// Returns a copy of the graph with replaced attributes.
    pub fn with_attributes(&self, attributes: DMatrix<f64>) -> Result<Self> {
        Self::new(self.n_nodes, self.edges.iter().copied(), attributes)
    }

    /// Dense adjacency matrix, optionally with unit self-loops (`Ã`).
    pub fn adjacency(&self, self_loops: bool) -> DMatrix<f64> {
        let mut a = if self_loops {
            DMatrix::identity(self.n_nodes, self.n_nodes)
        } else {
            DMatrix::zeros(self.n_nodes, self.n_nodes)
        };
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    pub fn degrees(&self, self_loops: bool) -> DegreeInfo {
        let base = if self_loops { 1.0 } else { 0.0 };
        let mut degrees = vec![base; self.n_nodes];
        for &(i, j) in &self.edges {
            degrees[i] += 1.0;
            degrees[j] += 1.0;
        }
        DegreeInfo::from_degrees(degrees)
    }

    /// Index of the first node without any incident edge.
    pub fn first_isolated_node(&self) -> Option<usize> {
        let deg = self.degrees(false);
        deg.degrees.iter().position(|&d| d == 0.0)
    }

    /// `I − D^{-1/2} A D^{-1/2}`, or `I − D̃^{-1/2} Ã D̃^{-1/2}` with self-loops.
    pub fn normalized_laplacian(&self, with_self_loops: bool) -> Result<DMatrix<f64>> {
        let s = self.normalized_adjacency(with_self_loops)?;
        Ok(DMatrix::identity(self.n_nodes, self.n_nodes) - s)
    }

    /// `D^{-1/2} A D^{-1/2}` (or the `Ã` variant).
    pub fn normalized_adjacency(&self, with_self_loops: bool) -> Result<DMatrix<f64>> {
        let deg = self.degrees(with_self_loops);
        if let Some(node) = deg.degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::ZeroDegree { node });
        }
        let inv_sqrt: Vec<f64> = deg.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut s = self.adjacency(with_self_loops);
        for j in 0..self.n_nodes {
            for i in 0..self.n_nodes {
                s[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        Ok(s)
    }

    /// Fraction of edges joining nodes with the same known label.
    pub fn edge_homophily(&self, labels: &[Option<usize>]) -> f64 {
        let mut same = 0usize;
        let mut total = 0usize;
        for &(i, j) in &self.edges {
            if let (Some(a), Some(b)) = (labels[i], labels[j]) {
                total += 1;
                if a == b {
                    same += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            same as f64 / total as f64
        }
    }
}

/// Node degrees and their arithmetic mean `p̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeInfo {
    pub degrees: Vec<f64>,
    pub avg_degree: f64,
}

impl DegreeInfo {
    fn from_degrees(degrees: Vec<f64>) -> Self {
        let avg_degree = if degrees.is_empty() {
            0.0
        } else {
            degrees.iter().sum::<f64>() / degrees.len() as f64
        };
        Self { degrees, avg_degree }
    }
}

/// One-hot labels with a mask of labeled rows. Unlabeled rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    onehot: DMatrix<f64>,
    labeled_mask: Vec<bool>,
}

impl LabelMatrix {
    /// Builds the matrix from per-node classes (`None` = unknown).
    pub fn from_classes(classes: &[Option<usize>], n_classes: usize) -> Result<Self> {
        let mut onehot = DMatrix::zeros(classes.len(), n_classes);
        let mut labeled_mask = vec![false; classes.len()];
        for (i, c) in classes.iter().enumerate() {
            if let Some(c) = *c {
                if c >= n_classes {
                    return Err(Error::InvalidLabels(format!(
                        "class {c} of node {i} is outside [0, {n_classes})"
                    )));
                }
                onehot[(i, c)] = 1.0;
                labeled_mask[i] = true;
            }
        }
        Ok(Self { onehot, labeled_mask })
    }

    pub fn onehot(&self) -> &DMatrix<f64> {
        &self.onehot
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled_mask
    }

    pub fn n_nodes(&self) -> usize {
        self.onehot.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.onehot.ncols()
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        if !self.labeled_mask[node] {
            return None;
        }
        self.onehot.row(node).iter().position(|&v| v == 1.0)
    }

    pub fn classes(&self) -> Vec<Option<usize>> {
        (0..self.n_nodes()).map(|i| self.class_of(i)).collect()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.labeled_mask[i]).collect()
    }

    /// Keeps only the labels of `keep`; every other row becomes zero (`Y₀`).
    pub fn masked(&self, keep: &[usize]) -> Self {
        let mut onehot = DMatrix::zeros(self.n_nodes(), self.n_classes());
        let mut labeled_mask = vec![false; self.n_nodes()];
        for &i in keep {
            if self.labeled_mask[i] {
                onehot.row_mut(i).copy_from(&self.onehot.row(i));
                labeled_mask[i] = true;
            }
        }
        Self { onehot, labeled_mask }
    }
}

/// Train/validation/test node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Checks ranges, disjointness and that training nodes are labeled.
    pub fn validate(&self, labels: &LabelMatrix) -> Result<()> {
        let n = labels.n_nodes();
        let mut seen = HashSet::new();
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in part.iter() {
                if i >= n {
                    return Err(Error::InvalidLabels(format!(
                        "node index out of range: {name} index {i} on {n} nodes"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidLabels(format!("node {i} appears in more than one split")));
                }
            }
        }
        if let Some(&i) = self.train.iter().find(|&&i| !labels.labeled_mask()[i]) {
            return Err(Error::InvalidLabels(format!("training node {i} has no label")));
        }
        Ok(())
    }

    /// Random per-class split of the labeled nodes. Each class contributes
    /// `round(train_frac·n_c)` training and `round(val_frac·n_c)` validation
    /// nodes; the rest go to test. Index lists are sorted.
    pub fn random(labels: &LabelMatrix, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        if !(0.0..=1.0).contains(&train_frac) || !(0.0..=1.0).contains(&val_frac) || train_frac + val_frac > 1.0 + 1e-12
        {
            return Err(Error::Parameter(format!(
                "split fractions must be in [0, 1] and sum to at most 1, got {train_frac} and {val_frac}"
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut split = Self {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for c in 0..labels.n_classes() {
            let mut members: Vec<usize> = (0..labels.n_nodes())
                .filter(|&i| labels.class_of(i) == Some(c))
                .collect();
            members.shuffle(&mut rng);
            let n_c = members.len();
            let n_train = ((train_frac * n_c as f64).round() as usize).min(n_c);
            let n_val = ((val_frac * n_c as f64).round() as usize).min(n_c - n_train);
            split.train.extend_from_slice(&members[..n_train]);
            split.val.extend_from_slice(&members[n_train..n_train + n_val]);
            split.test.extend_from_slice(&members[n_train + n_val..]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        Ok(split)
    }
}

/// Mean pairwise Euclidean distance between L2-normalized rows of `h`.
///
/// Zero rows stay zero vectors. Collapsed (over-smoothed) representations
/// score near zero; the measure is invariant to row scaling.
pub fn representation_diversity(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut rows = h.clone();
    for mut r in rows.row_iter_mut() {
        let norm = r.norm();
        if norm > 0.0 {
            r /= norm;
        }
    }
    // ‖a − b‖² = ‖a‖² + ‖b‖² − 2a·b via a single Gram product.
    let gram = &rows * rows.transpose();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)];
            total += d2.max(0.0).sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}
