//! Greedy agglomerative modularity maximisation.

use std::collections::BTreeMap;

use super::require_simple;
use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::metrics;

/// Starts from singletons and repeatedly merges the pair of communities with
/// the largest modularity gain until no merge gains. Gains are compared in
/// exact integer arithmetic; ties go to the pair with the smallest ids
/// `(i, j)`, and `j` is merged into `i`.
///
/// Returns the partition and its modularity.
pub fn greedy_modularity_partition(g: &Graph) -> Result<(Partition, f64)> {
    require_simple(g)?;
    let edges = g.edges();
    if edges.is_empty() {
        return Err(Error::validation("modularity is undefined on an edgeless graph"));
    }
    let labels = greedy_labels(g.n(), &edges);
    let part = Partition::from_labels(&labels);
    let q = metrics::modularity(g, &part)?;
    Ok((part, q))
}

/// Community id per node (ids are the surviving representative nodes).
pub(crate) fn greedy_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let m = edges.len() as i128;
    let mut adj: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    let mut deg = vec![0i128; n];
    for &(u, v) in edges {
        *adj[u].entry(v).or_insert(0) += 1;
        *adj[v].entry(u).or_insert(0) += 1;
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut label: Vec<usize> = (0..n).collect();

    loop {
        // scaled gain 2m·e_ij − a_i·a_j (true gain times 2m²)
        let mut best: Option<(i128, usize, usize)> = None;
        for (i, nbrs) in adj.iter().enumerate() {
            for (&j, &e) in nbrs.range(i + 1..) {
                let s = 2 * m * e - deg[i] * deg[j];
                if s > 0 && best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };

        let moved = std::mem::take(&mut adj[j]);
        for (l, e) in moved {
            if l == i {
                continue;
            }
            *adj[i].entry(l).or_insert(0) += e;
            adj[l].remove(&j);
            *adj[l].entry(i).or_insert(0) += e;
        }
        adj[i].remove(&j);
        deg[i] += deg[j];
        deg[j] = 0;
        let moved = std::mem::take(&mut members[j]);
        for &node in &moved {
            label[node] = i;
        }
        members[i].extend(moved);
    }
    label
}

/// Modularity of `labels` on an unweighted edge list.
pub(crate) fn edge_list_modularity(n: usize, edges: &[(usize, usize)], labels: &[usize]) -> f64 {
    let m = edges.len() as f64;
    let mut internal = vec![0.0; n];
    let mut degree = vec![0.0; n];
    for &(u, v) in edges {
        degree[labels[u]] += 1.0;
        degree[labels[v]] += 1.0;
        if labels[u] == labels[v] {
            internal[labels[u]] += 1.0;
        }
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e / m - (d / (2.0 * m)).powi(2))
        .sum()
}
