use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{require_simple, Perturbation};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Flips every unordered pair independently: a uniform draw `q ∈ (0, 1]` is
/// taken per pair in row-major upper-triangle order and the pair toggles iff
/// `q <= p`.
pub fn perturb_random(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    Ok(perturb_random_traced(g, p, seed)?.graph)
}

/// [`perturb_random`] together with the list of removed and added pairs.
pub fn perturb_random_traced(g: &Graph, p: f64, seed: u64) -> Result<Perturbation> {
    require_simple(g)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("flip probability must lie in [0, 1], got {p}")));
    }
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = g.adjacency().clone();
    let mut removed = Vec::new();
    let mut added = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let q = 1.0 - rng.random::<f64>();
            if q <= p {
                if adj[[u, v]] != 0.0 {
                    adj[[u, v]] = 0.0;
                    adj[[v, u]] = 0.0;
                    removed.push((u, v));
                } else {
                    adj[[u, v]] = 1.0;
                    adj[[v, u]] = 1.0;
                    added.push((u, v));
                }
            }
        }
    }
    Ok(Perturbation {
        graph: Graph::from_dense(adj)?,
        removed,
        added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_er, karate};

    #[test]
    fn zero_probability_is_identity() {
        let g = karate().graph;
        let out = perturb_random_traced(&g, 0.0, 3).unwrap();
        assert_eq!(out.graph, g);
        assert!(out.removed.is_empty() && out.added.is_empty());
    }

    #[test]
    fn unit_probability_is_complement() {
        let g = generate_er(20, 0.3, 1).unwrap();
        let out = perturb_random(&g, 1.0, 9).unwrap();
        for u in 0..20 {
            for v in 0..20 {
                let want = u != v && !g.has_edge(u, v);
                assert_eq!(out.has_edge(u, v), want);
            }
        }
    }

    #[test]
    fn output_stays_simple_and_diff_matches_trace() {
        let g = karate().graph;
        let out = perturb_random_traced(&g, 0.1, 42).unwrap();
        assert!(out.graph.is_simple());
        let mut diff = 0;
        for u in 0..34 {
            assert_eq!(out.graph.adjacency()[[u, u]], 0.0);
            for v in (u + 1)..34 {
                if out.graph.has_edge(u, v) != g.has_edge(u, v) {
                    diff += 1;
                }
            }
        }
        assert_eq!(diff, out.removed.len() + out.added.len());
        assert!(diff > 0);
        assert_eq!(perturb_random(&g, 0.1, 42).unwrap(), out.graph);
    }

    #[test]
    fn rejects_bad_probability_and_weighted_input() {
        let g = karate().graph;
        assert!(perturb_random(&g, 1.5, 0).is_err());
        let w = Graph::from_weighted(g.adjacency() * 0.5).unwrap();
        assert!(perturb_random(&w, 0.1, 0).is_err());
    }
}
