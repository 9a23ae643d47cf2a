//! Partition quality scores: NMI, ARI, pair-counting F1 and modularity.
//!
//! The supervised scores all go through a [`ContingencyTable`]. Entropies use
//! the natural logarithm.

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};

/// Cross-tabulation of two partitions over the same node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(x: &Partition, y: &Partition) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::validation(format!(
                "partition lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        let mut counts = vec![vec![0u64; y.k()]; x.k()];
        for (&a, &b) in x.labels().iter().zip(y.labels()) {
            counts[a][b] += 1;
        }
        Ok(ContingencyTable {
            counts,
            n: x.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flatten().copied()
    }
}

fn entropy(sizes: &[u64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Normalized mutual information `2 I(X;Y) / (H(X) + H(Y))`.
///
/// Two single-cluster partitions score 1.
pub fn nmi(x: &Partition, y: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(x, y)?;
    if table.total() == 0 {
        return Ok(1.0);
    }
    let n = table.total() as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hx = entropy(&rows, n);
    let hy = entropy(&cols, n);
    if hx + hy == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((2.0 * mi / (hx + hy)).clamp(0.0, 1.0))
}

/// Adjusted Rand index (Hubert–Arabie). Degenerate tables where the index is
/// undefined (maximum equals expectation) score 1.
pub fn ari(x: &Partition, y: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(x, y)?;
    let total = pairs(table.total());
    if total == 0.0 {
        return Ok(1.0);
    }
    let index: f64 = table.cells().map(pairs).sum();
    let sum_rows: f64 = table.row_sums().into_iter().map(pairs).sum();
    let sum_cols: f64 = table.col_sums().into_iter().map(pairs).sum();
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Pair-counting F1: a pair is positive when both nodes share a community.
/// `pred` supplies predicted positives, `truth` the actual ones. Scores 0
/// when either side has no positive pairs.
pub fn pairwise_f1(pred: &Partition, truth: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let tp: f64 = table.cells().map(pairs).sum();
    let pred_pos: f64 = table.row_sums().into_iter().map(pairs).sum();
    let true_pos: f64 = table.col_sums().into_iter().map(pairs).sum();
    if pred_pos == 0.0 || true_pos == 0.0 || tp == 0.0 {
        return Ok(0.0);
    }
    let precision = tp / pred_pos;
    let recall = tp / true_pos;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Newman modularity `Q = (1/2m) Σ_ij (A_ij - k_i k_j / 2m) δ(c_i, c_j)`.
pub fn modularity(g: &Graph, part: &Partition) -> Result<f64> {
    if part.len() != g.n() {
        return Err(Error::validation(format!(
            "partition covers {} nodes, graph has {}",
            part.len(),
            g.n()
        )));
    }
    let a = g.adjacency();
    let two_m = a.sum();
    if two_m <= 0.0 {
        return Err(Error::validation("modularity is undefined on an edgeless graph"));
    }
    let labels = part.labels();
    let k = part.k();
    let mut internal = vec![0.0; k];
    let mut degree = vec![0.0; k];
    for (i, row) in a.rows().into_iter().enumerate() {
        let ci = labels[i];
        degree[ci] += row.sum();
        internal[ci] += row
            .iter()
            .zip(labels)
            .filter(|(_, &cj)| cj == ci)
            .map(|(&w, _)| w)
            .sum::<f64>();
    }
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e / two_m - (d / two_m).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_labels(labels)
    }

    /// Brute-force pair enumeration: (both co-clustered, x-only, y-only, neither).
    fn pair_counts(x: &[usize], y: &[usize]) -> (f64, f64, f64, f64) {
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                match (x[i] == x[j], y[i] == y[j]) {
                    (true, true) => a += 1.0,
                    (true, false) => b += 1.0,
                    (false, true) => c += 1.0,
                    (false, false) => d += 1.0,
                }
            }
        }
        (a, b, c, d)
    }

    #[test]
    fn nmi_examples() {
        let x = part(&[0, 0, 1, 1]);
        assert_eq!(nmi(&x, &x).unwrap(), 1.0);
        assert!((nmi(&x, &part(&[1, 1, 0, 0])).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmi(&x, &part(&[0, 1, 0, 1])).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&part(&[0, 0, 0]), &part(&[5, 5, 5])).unwrap(), 1.0);
        assert_eq!(nmi(&part(&[0, 0, 0]), &part(&[0, 1, 2])).unwrap(), 0.0);
    }

    #[test]
    fn ari_matches_pair_enumeration() {
        let x = [0, 0, 1, 1];
        let y = [0, 0, 0, 1];
        // RI over the 6 pairs, E[RI] and max(RI) from the pair-count marginals
        let (a, b, c, _) = pair_counts(&x, &y);
        let total = 6.0;
        let expected = (a + b) * (a + c) / total;
        let max = 0.5 * ((a + b) + (a + c));
        let oracle = (a - expected) / (max - expected);
        let got = ari(&part(&x), &part(&y)).unwrap();
        assert!((got - oracle).abs() < 1e-15, "{got} vs {oracle}");
        assert_eq!(ari(&part(&x), &part(&x)).unwrap(), 1.0);
    }

    #[test]
    fn f1_matches_pair_enumeration() {
        let pred = [0, 0, 1, 1];
        let truth = [0, 0, 0, 1];
        let (tp, fp, fn_, _) = pair_counts(&pred, &truth);
        let p = tp / (tp + fp);
        let r = tp / (tp + fn_);
        let oracle = 2.0 * p * r / (p + r);
        let got = pairwise_f1(&part(&pred), &part(&truth)).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert_eq!(pairwise_f1(&part(&truth), &part(&truth)).unwrap(), 1.0);
    }

    #[test]
    fn f1_singletons_is_zero() {
        let pred = part(&[0, 1, 2, 3]);
        let truth = part(&[0, 0, 1, 1]);
        assert_eq!(pairwise_f1(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(nmi(&part(&[0, 1]), &part(&[0])).is_err());
        assert!(ari(&part(&[0, 1]), &part(&[0])).is_err());
    }

    #[test]
    fn modularity_two_components() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let q = modularity(&g, &part(&[0, 0, 1, 1])).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn modularity_complete_graph_single_community() {
        // Σ_ij A_ij = 2m and Σ_ij k_i k_j / 2m = 2m, so Q is exactly zero
        let n = 6;
        let edges: Vec<_> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        let q = modularity(&g, &part(&[0; 6])).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn modularity_rejects_edgeless() {
        let g = Graph::empty(3).unwrap();
        assert!(modularity(&g, &part(&[0, 0, 1])).is_err());
    }

    fn labels_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..5, n),
                proptest::collection::vec(0usize..5, n),
            )
        })
    }

    proptest! {
        #[test]
        fn metrics_symmetric_and_relabel_invariant((x, y) in labels_strategy(), shift in 1usize..7) {
            let px = part(&x);
            let py = part(&y);
            let relabeled: Vec<usize> = x.iter().map(|l| (l * 7 + shift) % 11 + 100).collect();
            let pr = part(&relabeled);
            prop_assert!((nmi(&px, &py).unwrap() - nmi(&py, &px).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&px, &py).unwrap() - ari(&py, &px).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&px, &py).unwrap() - nmi(&pr, &py).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&px, &py).unwrap() - ari(&pr, &py).unwrap()).abs() < 1e-12);
            prop_assert!((pairwise_f1(&px, &py).unwrap() - pairwise_f1(&pr, &py).unwrap()).abs() < 1e-12);
            let v = nmi(&px, &py).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(ari(&px, &py).unwrap() <= 1.0 + 1e-12);
        }
    }
}
