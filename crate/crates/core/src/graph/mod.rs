//! Dense graph representation, community partitions and layer configurations.

mod datasets;
mod generate;
mod io;

pub use datasets::{karate, Dataset};
pub use generate::{generate_ba, generate_er, generate_ws};
pub use io::{
    load_edge_list, load_edge_list_remapped, load_labels, load_matrix_csv, parse_edge_list,
    parse_labels, parse_matrix_csv, save_edge_list, save_id_map, save_labels, save_matrix_csv,
    IdMap,
};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A graph held as a dense nonnegative adjacency matrix.
///
/// `binary` graphs are simple: entries are exactly 0 or 1 and the diagonal is
/// zero. Weighted graphs (e.g. mixed-noise reconstructions) carry `binary = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
    symmetric: bool,
    binary: bool,
}

impl Graph {
    /// Builds a simple undirected graph from an edge list. Duplicate edges
    /// collapse; self-loops and out-of-range ids are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        let mut adjacency = Array2::zeros((n, n));
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::validation(format!("self-loop on node {u}")));
            }
            adjacency[[u, v]] = 1.0;
            adjacency[[v, u]] = 1.0;
        }
        Ok(Graph {
            adjacency,
            symmetric: true,
            binary: true,
        })
    }

    /// An edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edges(n, &[])
    }

    /// Wraps an arbitrary nonnegative square matrix as a weighted graph.
    ///
    /// The result is flagged non-binary; `symmetric` is set when the matrix
    /// equals its transpose exactly.
    pub fn from_weighted(adjacency: Array2<f64>) -> Result<Self> {
        let (rows, cols) = adjacency.dim();
        if rows != cols || rows == 0 {
            return Err(Error::validation(format!(
                "adjacency must be square and non-empty, got {rows}x{cols}"
            )));
        }
        if let Some(bad) = adjacency.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::validation(format!(
                "adjacency entries must be finite and nonnegative, found {bad}"
            )));
        }
        let symmetric = adjacency == adjacency.t();
        Ok(Graph {
            adjacency,
            symmetric,
            binary: false,
        })
    }

    /// Like [`Graph::from_weighted`], but recognises 0/1 symmetric matrices
    /// with an empty diagonal as simple graphs.
    pub fn from_dense(adjacency: Array2<f64>) -> Result<Self> {
        let mut g = Self::from_weighted(adjacency)?;
        let zero_diag = g.adjacency.diag().iter().all(|&x| x == 0.0);
        g.binary = g.symmetric && zero_diag && g.adjacency.iter().all(|&x| x == 0.0 || x == 1.0);
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn into_adjacency(self) -> Array2<f64> {
        self.adjacency
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// True for binary, symmetric graphs (the only kind the noise protocols accept).
    pub fn is_simple(&self) -> bool {
        self.binary && self.symmetric
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[[u, v]] != 0.0
    }

    /// Undirected edges `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if self.adjacency[[u, v]] != 0.0 {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Number of undirected edges (upper-triangle nonzeros).
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|u| {
                self.adjacency
                    .row(u)
                    .iter()
                    .skip(u + 1)
                    .filter(|&&x| x != 0.0)
                    .count()
            })
            .sum()
    }

    /// Row sums of the adjacency matrix.
    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Hex SHA-256 of the adjacency matrix bytes (row-major, little endian).
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        for x in self.adjacency.iter() {
            hasher.update(x.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Degree matrix `D` and Laplacian `L = D - A` of a graph.
pub fn laplacian(g: &Graph) -> (Array2<f64>, Array2<f64>) {
    let degree = Array2::from_diag(&ndarray::Array1::from(g.degrees()));
    let lap = &degree - g.adjacency();
    (degree, lap)
}

/// Non-overlapping community assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::validation("partition needs at least one community"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::validation(format!("label {bad} out of range for k={k}")));
        }
        Ok(Partition { labels, k })
    }

    /// Re-indexes arbitrary labels densely in order of first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(raw: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|x| {
                let next = ids.len();
                *ids.entry(*x).or_insert(next)
            })
            .collect();
        Partition {
            labels,
            k: ids.len().max(1),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Layer sizes `r_0 >= r_1 >= ... >= r_p` of a deep factorization, with
/// `r_0 = n` and `r_p = k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LayerConfig {
    sizes: Vec<usize>,
}

impl LayerConfig {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::validation(
                "layer config needs at least an input and an output size",
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::validation("layer sizes must be positive"));
        }
        if sizes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::validation(format!(
                "layer sizes must be non-increasing, got {sizes:?}"
            )));
        }
        Ok(LayerConfig { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of factor matrices `p`.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    /// Community count `k = r_p`.
    pub fn k(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn check_nodes(&self, n: usize) -> Result<()> {
        if self.sizes[0] != n {
            return Err(Error::validation(format!(
                "layer config starts at {} but the graph has {n} nodes",
                self.sizes[0]
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for LayerConfig {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        LayerConfig::new(sizes)
    }
}

impl From<LayerConfig> for Vec<usize> {
    fn from(cfg: LayerConfig) -> Self {
        cfg.sizes
    }
}

impl FromStr for LayerConfig {
    type Err = Error;

    /// Parses the dash-separated form, e.g. `"34-16-2"`.
    fn from_str(s: &str) -> Result<Self> {
        let sizes = s
            .split('-')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::validation(format!("bad layer size {tok:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LayerConfig::new(sizes)
    }
}

impl fmt::Display for LayerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}
