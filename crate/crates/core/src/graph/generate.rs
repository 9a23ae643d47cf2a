//! Seeded random graph models: Erdős–Rényi, Watts–Strogatz and Barabási–Albert.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// G(n, p): every unordered pair is an edge independently with probability `p_conn`.
pub fn generate_er(n: usize, p_conn: f64, seed: u64) -> Result<Graph> {
    check_probability("connection probability", p_conn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p_conn {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Small-world model: a ring lattice where each node links to its
/// `k_neighbors / 2` nearest neighbours on each side, after which every
/// lattice edge `(u, u + j)` is rewired to a uniformly chosen new endpoint
/// with probability `p_rewire`. The edge count `n * k_neighbors / 2` is kept.
pub fn generate_ws(n: usize, k_neighbors: usize, p_rewire: f64, seed: u64) -> Result<Graph> {
    check_probability("rewiring probability", p_rewire)?;
    if !k_neighbors.is_multiple_of(2) || k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::validation(format!(
            "k_neighbors must be a positive even integer below n={n}, got {k_neighbors}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let half = k_neighbors / 2;
    for u in 0..n {
        for j in 1..=half {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=half {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= p_rewire || !adj[u].contains(&v) {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
        .collect();
    Graph::from_edges(n, &edges)
}

/// Preferential attachment. The seed core is a star on `m_edges + 1` nodes
/// (`m_edges` edges); every later node attaches to `m_edges` distinct existing
/// nodes chosen proportionally to degree, giving
/// `m_edges + m_edges * (n - m_edges - 1)` edges in total.
pub fn generate_ba(n: usize, m_edges: usize, seed: u64) -> Result<Graph> {
    if m_edges == 0 || m_edges >= n {
        return Err(Error::validation(format!(
            "m_edges must lie in [1, n), got {m_edges} with n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..=m_edges).map(|v| (0, v)).collect();
    // Each node appears once per incident edge.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m_edges * n);
    for &(u, v) in &edges {
        repeated.push(u);
        repeated.push(v);
    }
    for source in (m_edges + 1)..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m_edges {
            targets.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        for &t in &targets {
            edges.push((t, source));
            repeated.push(t);
            repeated.push(source);
        }
    }
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_mean_edge_count_matches_binomial() {
        let n = 1000;
        let p = 0.1;
        let pairs = (n * (n - 1) / 2) as f64;
        let seeds = 20;
        let mean: f64 = (0..seeds)
            .map(|s| generate_er(n, p, s).unwrap().edge_count() as f64)
            .sum::<f64>()
            / seeds as f64;
        let expected = p * pairs;
        assert_eq!(expected.round(), 49_950.0);
        // standard error of the mean of `seeds` binomial draws
        let sigma = (pairs * p * (1.0 - p) / seeds as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn ws_without_rewiring_is_ring_lattice() {
        let g = generate_ws(20, 4, 0.0, 3).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 4.0));
        assert!(g.has_edge(0, 19) && g.has_edge(0, 18) && !g.has_edge(0, 3));
    }

    #[test]
    fn ws_rewiring_preserves_edge_count() {
        for seed in 0..5 {
            let g = generate_ws(200, 10, 0.5, seed).unwrap();
            assert_eq!(g.edge_count(), 200 * 10 / 2);
            assert!(g.is_simple());
        }
    }

    #[test]
    fn ba_edge_accounting_and_connectivity() {
        let (n, m) = (1000, 2);
        let g = generate_ba(n, m, 9).unwrap();
        // star core: n0 = m + 1 nodes, e0 = m edges
        assert_eq!(g.edge_count(), m * (n - (m + 1)) + m);
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if g.has_edge(u, v) && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(generate_er(60, 0.1, 5).unwrap(), generate_er(60, 0.1, 5).unwrap());
        assert_eq!(generate_ws(60, 6, 0.5, 5).unwrap(), generate_ws(60, 6, 0.5, 5).unwrap());
        assert_eq!(generate_ba(60, 2, 5).unwrap(), generate_ba(60, 2, 5).unwrap());
        assert_ne!(generate_er(60, 0.1, 5).unwrap(), generate_er(60, 0.1, 6).unwrap());
    }

    #[test]
    fn invalid_parameters() {
        assert!(generate_er(10, 1.5, 0).is_err());
        assert!(generate_ws(10, 3, 0.5, 0).is_err());
        assert!(generate_ws(10, 10, 0.5, 0).is_err());
        assert!(generate_ba(10, 0, 0).is_err());
        assert!(generate_ba(10, 10, 0).is_err());
    }
}
