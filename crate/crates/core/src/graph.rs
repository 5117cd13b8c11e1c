//! Undirected graphs, the self-looped symmetric normalization and the two
//! sparse products the kernel needs: `Â X` and `Â K Âᵀ`.

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::par;

/// Unweighted undirected graph without self-loops, stored as a symmetric
/// adjacency list in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicates (in either orientation)
    /// collapse to one edge; self-loops and out-of-range indices are errors.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Graph("graph must have at least one node".into()));
        }
        let mut pairs = Vec::new();
        for (i, j) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Graph(format!(
                    "edge ({i}, {j}) references a node outside 0..{n_nodes}"
                )));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop on node {i}")));
            }
            pairs.push((i.min(j), i.max(j)));
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut degree = vec![0usize; n_nodes];
        for &(i, j) in &pairs {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n_nodes].to_vec();
        let mut neighbors = vec![0; offsets[n_nodes]];
        for &(i, j) in &pairs {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for i in 0..n_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(Self {
            n_nodes,
            offsets,
            neighbors,
        })
    }

    pub fn empty(n_nodes: usize) -> Result<Self> {
        Self::new(n_nodes, std::iter::empty())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` in compressed-row form with sorted columns.
/// Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    max_degree: usize,
}

impl NormalizedAdjacency {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Largest row length, self-loop included.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and weights of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_nodes;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * n + j] = v;
            }
        }
        out
    }
}

/// Adds self-loops and applies the symmetric degree normalization.
pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.n_nodes();
    let looped_degree: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(g.neighbors.len() + n);
    let mut values = Vec::with_capacity(g.neighbors.len() + n);
    row_ptr.push(0);
    let mut max_degree = 0;
    for i in 0..n {
        let nbrs = g.neighbors(i);
        let split = nbrs.partition_point(|&j| j < i);
        let cols = nbrs[..split]
            .iter()
            .copied()
            .chain(std::iter::once(i))
            .chain(nbrs[split..].iter().copied());
        for j in cols {
            col_idx.push(j);
            // d_i * d_j commutes, so (i, j) and (j, i) get identical bits.
            values.push(1.0 / (looped_degree[i] * looped_degree[j]).sqrt());
        }
        row_ptr.push(col_idx.len());
        max_degree = max_degree.max(nbrs.len() + 1);
    }
    NormalizedAdjacency {
        n_nodes: n,
        row_ptr,
        col_idx,
        values,
        max_degree,
    }
}

/// `Â X`, one sparse row combination per output row.
pub fn propagate(a_hat: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if a_hat.n_nodes() != x.rows() {
        return Err(Error::shape(
            "propagate",
            format!("{} feature rows", a_hat.n_nodes()),
            x.rows(),
        ));
    }
    let cols = x.cols();
    let mut out = vec![0.0; x.rows() * cols];
    par::for_each_row(&mut out, cols, |i, row| {
        let (idx, vals) = a_hat.row(i);
        for (&k, &w) in idx.iter().zip(vals) {
            for (o, &v) in row.iter_mut().zip(x.row(k)) {
                *o += w * v;
            }
        }
    });
    Ok(FeatureMatrix::from_raw(x.rows(), cols, out))
}

/// `Â K Âᵀ` for symmetric `K`.
///
/// Row `m` first accumulates `r = Σ_i Â_mi K_i·` (cost `deg(m)·N`), then each
/// upper-triangle entry is `M_mn = Σ_j Â_nj r_j` (cost `deg(n)`). The lower
/// triangle is mirrored, so the output is exactly symmetric.
pub fn sandwich(a_hat: &NormalizedAdjacency, k: &KernelMatrix) -> Result<KernelMatrix> {
    let n = a_hat.n_nodes();
    if k.n() != n {
        return Err(Error::shape("sandwich", format!("{n}x{n} kernel"), {
            let kn = k.n();
            format!("{kn}x{kn}")
        }));
    }
    let data = par::symmetric_fill(n, |m, tail| {
        let mut acc = vec![0.0; n];
        let (idx, vals) = a_hat.row(m);
        for (&i, &w) in idx.iter().zip(vals) {
            for (a, &kv) in acc.iter_mut().zip(k.row(i)) {
                *a += w * kv;
            }
        }
        for (offset, out) in tail.iter_mut().enumerate() {
            let (jdx, wv) = a_hat.row(m + offset);
            *out = jdx.iter().zip(wv).map(|(&j, &w)| w * acc[j]).sum();
        }
    });
    Ok(KernelMatrix::from_raw(n, data))
}
