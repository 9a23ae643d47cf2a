//! Network corruption: random pair flips, modularity attacks and mixed
//! (factorization-smoothed) noise.

mod greedy;
mod qattack;
mod random;

pub use greedy::greedy_modularity_partition;
pub use qattack::{qattack, qattack_traced, GaParams};
pub use random::{perturb_random, perturb_random_traced};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{nmf_fit, SolverOptions};
use crate::graph::Graph;

/// A perturbed graph with the pairs that changed relative to its input.
/// For mixed noise the pairs describe the binary base step.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub graph: Graph,
    pub removed: Vec<(usize, usize)>,
    pub added: Vec<(usize, usize)>,
}

/// JSON record describing how a perturbed graph was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub noise: NoiseSpec,
    pub seed: u64,
    pub removed: Vec<(usize, usize)>,
    pub added: Vec<(usize, usize)>,
    pub input_fingerprint: String,
    pub output_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// Flip every node pair with probability `p`.
    Random { p: f64 },
    /// Genetic-algorithm rewiring of `budget_fraction` of the edges.
    Qattack {
        budget_fraction: f64,
        #[serde(default)]
        ga: GaParams,
    },
    /// Optional binary base noise followed by a rank-`rank` NMF reconstruction.
    Mixed {
        #[serde(default)]
        base: Option<Box<NoiseSpec>>,
        rank: usize,
    },
}

/// A noise protocol. With `seed` set the draw is frozen; otherwise the caller
/// supplies a seed (e.g. one per experiment repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl NoiseSpec {
    pub fn random(p: f64) -> Self {
        NoiseSpec { kind: NoiseKind::Random { p }, seed: None }
    }

    pub fn qattack(budget_fraction: f64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Qattack { budget_fraction, ga: GaParams::default() },
            seed: None,
        }
    }

    pub fn mixed(base: Option<NoiseSpec>, rank: usize) -> Self {
        NoiseSpec {
            kind: NoiseKind::Mixed { base: base.map(Box::new), rank },
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            NoiseKind::Random { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::validation(format!("flip probability must lie in [0, 1], got {p}")));
                }
            }
            NoiseKind::Qattack { budget_fraction, ga } => {
                if !(*budget_fraction > 0.0 && *budget_fraction <= 1.0) {
                    return Err(Error::validation(format!(
                        "budget fraction must lie in (0, 1], got {budget_fraction}"
                    )));
                }
                ga.validate()?;
            }
            NoiseKind::Mixed { base, rank } => {
                if *rank == 0 {
                    return Err(Error::validation("mixed-noise rank must be at least 1"));
                }
                if let Some(b) = base {
                    if matches!(b.kind, NoiseKind::Mixed { .. }) {
                        return Err(Error::validation("mixed-noise base must be random or qattack"));
                    }
                    b.validate()?;
                }
            }
        }
        Ok(())
    }

    /// The seed actually used: the frozen one if present, else `fallback`.
    pub fn effective_seed(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }

    pub fn apply(&self, g: &Graph, fallback_seed: u64) -> Result<Perturbation> {
        self.validate()?;
        let seed = self.effective_seed(fallback_seed);
        match &self.kind {
            NoiseKind::Random { p } => perturb_random_traced(g, *p, seed),
            NoiseKind::Qattack { budget_fraction, ga } => qattack_traced(g, *budget_fraction, ga, seed),
            NoiseKind::Mixed { base, rank } => perturb_mixed_traced(g, base.as_deref(), *rank, seed),
        }
    }

    pub fn provenance(&self, input: &Graph, out: &Perturbation, fallback_seed: u64) -> Provenance {
        Provenance {
            noise: self.clone(),
            seed: self.effective_seed(fallback_seed),
            removed: out.removed.clone(),
            added: out.added.clone(),
            input_fingerprint: input.fingerprint(),
            output_fingerprint: out.graph.fingerprint(),
        }
    }
}

/// Applies `base` (if any), then replaces the adjacency by the rank-`rank`
/// NMF reconstruction `UV` (`λ = 0`). The result is a weighted, generally
/// asymmetric graph.
pub fn perturb_mixed(g: &Graph, base: Option<&NoiseSpec>, rank: usize, seed: u64) -> Result<Graph> {
    Ok(perturb_mixed_traced(g, base, rank, seed)?.graph)
}

pub fn perturb_mixed_traced(
    g: &Graph,
    base: Option<&NoiseSpec>,
    rank: usize,
    seed: u64,
) -> Result<Perturbation> {
    let opts = SolverOptions { lambda: 0.0, seed, ..Default::default() };
    perturb_mixed_with(g, base, rank, &opts)
}

/// [`perturb_mixed`] with explicit solver options for the NMF step.
pub fn perturb_mixed_with(
    g: &Graph,
    base: Option<&NoiseSpec>,
    rank: usize,
    opts: &SolverOptions,
) -> Result<Perturbation> {
    if rank == 0 || rank > g.n() {
        return Err(Error::validation(format!("rank {rank} must lie in [1, n={}]", g.n())));
    }
    let (noisy, removed, added) = match base {
        Some(spec) => {
            if matches!(spec.kind, NoiseKind::Mixed { .. }) {
                return Err(Error::validation("mixed-noise base must be random or qattack"));
            }
            let p = spec.apply(g, opts.seed)?;
            (p.graph, p.removed, p.added)
        }
        None => (g.clone(), Vec::new(), Vec::new()),
    };
    let (pair, _) = nmf_fit(&noisy, rank, opts)?;
    Ok(Perturbation {
        graph: Graph::from_weighted(pair.reconstruction())?,
        removed,
        added,
    })
}

fn require_simple(g: &Graph) -> Result<()> {
    if !g.is_simple() {
        return Err(Error::validation(
            "this perturbation needs a binary symmetric graph without self-loops",
        ));
    }
    Ok(())
}
