//! Modularity-minimising rewiring attack driven by a genetic algorithm.
//!
//! A chromosome is a rewiring plan of `b` distinct deletions (indices into
//! the edge list) and `b` distinct additions (indices into the non-edge
//! list). Fitness is the modularity reached by greedy agglomeration on the
//! rewired graph, which the search minimises.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::greedy::{edge_list_modularity, greedy_labels};
use super::{require_simple, Perturbation};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_count: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 100,
            generations: 200,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            elite_count: 2,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::validation("population_size must be at least 2"));
        }
        if self.elite_count >= self.population_size {
            return Err(Error::validation("elite_count must be below population_size"));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::validation(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Plan {
    dels: Vec<usize>,
    adds: Vec<usize>,
}

fn fresh_gene(rng: &mut ChaCha8Rng, pool: usize, taken: &[usize]) -> usize {
    loop {
        let g = rng.random_range(0..pool);
        if !taken.contains(&g) {
            return g;
        }
    }
}

fn random_genes(rng: &mut ChaCha8Rng, pool: usize, b: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(b);
    for _ in 0..b {
        let g = fresh_gene(rng, pool, &out);
        out.push(g);
    }
    out
}

/// Replaces repeated genes (after their first occurrence) with fresh ones.
fn repair(rng: &mut ChaCha8Rng, genes: &mut [usize], pool: usize) {
    for i in 1..genes.len() {
        if genes[..i].contains(&genes[i]) {
            let (head, tail) = genes.split_at_mut(i);
            tail[0] = fresh_gene_excluding(rng, pool, head, &tail[1..]);
        }
    }
}

fn fresh_gene_excluding(rng: &mut ChaCha8Rng, pool: usize, a: &[usize], b: &[usize]) -> usize {
    loop {
        let g = rng.random_range(0..pool);
        if !a.contains(&g) && !b.contains(&g) {
            return g;
        }
    }
}

fn mutate(rng: &mut ChaCha8Rng, genes: &mut [usize], pool: usize, rate: f64) {
    for i in 0..genes.len() {
        if rng.random::<f64>() < rate {
            let (head, tail) = genes.split_at_mut(i);
            tail[0] = fresh_gene_excluding(rng, pool, head, &tail[1..]);
        }
    }
}

fn uniform_crossover(rng: &mut ChaCha8Rng, x: &[usize], y: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut c1 = Vec::with_capacity(x.len());
    let mut c2 = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(y) {
        if rng.random::<bool>() {
            c1.push(a);
            c2.push(b);
        } else {
            c1.push(b);
            c2.push(a);
        }
    }
    (c1, c2)
}

fn track(pop: &[Plan], fit: &[f64], best: &mut (f64, Plan)) {
    for (p, &f) in pop.iter().zip(fit) {
        if f < best.0 {
            *best = (f, p.clone());
        }
    }
}

struct Problem {
    n: usize,
    edges: Vec<(usize, usize)>,
    non_edges: Vec<(usize, usize)>,
}

impl Problem {
    fn rewired(&self, plan: &Plan) -> Vec<(usize, usize)> {
        let mut drop = vec![false; self.edges.len()];
        for &d in &plan.dels {
            drop[d] = true;
        }
        let mut out: Vec<(usize, usize)> = self
            .edges
            .iter()
            .zip(&drop)
            .filter(|(_, &x)| !x)
            .map(|(&e, _)| e)
            .collect();
        out.extend(plan.adds.iter().map(|&a| self.non_edges[a]));
        out
    }

    fn fitness(&self, plan: &Plan) -> f64 {
        let edges = self.rewired(plan);
        let labels = greedy_labels(self.n, &edges);
        edge_list_modularity(self.n, &edges, &labels)
    }
}

/// Rewires `round(budget_fraction · |E|)` edges to minimise greedy modularity.
pub fn qattack(g: &Graph, budget_fraction: f64, ga: &GaParams, seed: u64) -> Result<Graph> {
    Ok(qattack_traced(g, budget_fraction, ga, seed)?.graph)
}

/// [`qattack`] together with the deleted and added pairs of the best plan.
pub fn qattack_traced(
    g: &Graph,
    budget_fraction: f64,
    ga: &GaParams,
    seed: u64,
) -> Result<Perturbation> {
    require_simple(g)?;
    ga.validate()?;
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::validation(format!(
            "budget fraction must lie in (0, 1], got {budget_fraction}"
        )));
    }
    let edges = g.edges();
    let b = (budget_fraction * edges.len() as f64).round() as usize;
    if b == 0 {
        return Err(Error::validation(format!(
            "budget fraction {budget_fraction} of {} edges rounds to zero rewirings",
            edges.len()
        )));
    }
    let n = g.n();
    let mut non_edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if !g.has_edge(u, v) {
                non_edges.push((u, v));
            }
        }
    }
    if non_edges.len() < b {
        return Err(Error::validation(format!(
            "{b} additions requested but only {} non-edges exist",
            non_edges.len()
        )));
    }
    let problem = Problem { n, edges, non_edges };
    let (ne, nn) = (problem.edges.len(), problem.non_edges.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop: Vec<Plan> = (0..ga.population_size)
        .map(|_| Plan {
            dels: random_genes(&mut rng, ne, b),
            adds: random_genes(&mut rng, nn, b),
        })
        .collect();
    let evaluate = |pop: &[Plan]| -> Vec<f64> { pop.par_iter().map(|p| problem.fitness(p)).collect() };
    let mut fit = evaluate(&pop);
    let mut best = (fit[0], pop[0].clone());
    track(&pop, &fit, &mut best);

    for _ in 0..ga.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&i, &j| fit[i].total_cmp(&fit[j]).then(i.cmp(&j)));
        let mut next: Vec<Plan> = order[..ga.elite_count].iter().map(|&i| pop[i].clone()).collect();
        let tournament = |rng: &mut ChaCha8Rng| {
            let i = rng.random_range(0..pop.len());
            let j = rng.random_range(0..pop.len());
            if fit[j] < fit[i] { j } else { i }
        };
        while next.len() < ga.population_size {
            let (x, y) = (tournament(&mut rng), tournament(&mut rng));
            let (mut c1, mut c2) = if rng.random::<f64>() < ga.crossover_rate {
                let (d1, d2) = uniform_crossover(&mut rng, &pop[x].dels, &pop[y].dels);
                let (a1, a2) = uniform_crossover(&mut rng, &pop[x].adds, &pop[y].adds);
                (Plan { dels: d1, adds: a1 }, Plan { dels: d2, adds: a2 })
            } else {
                (pop[x].clone(), pop[y].clone())
            };
            for c in [&mut c1, &mut c2] {
                repair(&mut rng, &mut c.dels, ne);
                repair(&mut rng, &mut c.adds, nn);
                mutate(&mut rng, &mut c.dels, ne, ga.mutation_rate);
                mutate(&mut rng, &mut c.adds, nn, ga.mutation_rate);
            }
            next.push(c1);
            if next.len() < ga.population_size {
                next.push(c2);
            }
        }
        pop = next;
        fit = evaluate(&pop);
        track(&pop, &fit, &mut best);
    }

    let plan = best.1;
    let mut removed: Vec<(usize, usize)> = plan.dels.iter().map(|&d| problem.edges[d]).collect();
    let mut added: Vec<(usize, usize)> = plan.adds.iter().map(|&a| problem.non_edges[a]).collect();
    removed.sort_unstable();
    added.sort_unstable();
    let graph = Graph::from_edges(n, &problem.rewired(&plan))?;
    Ok(Perturbation { graph, removed, added })
}
