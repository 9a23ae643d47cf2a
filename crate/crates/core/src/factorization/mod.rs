//! Multiplicative-update solvers.
//!
//! Shallow solvers factor `A ≈ U V` (`U: n×k`, `V: k×n`); deep solvers factor
//! `A ≈ U_1 ⋯ U_p V_p` with an autoencoder-style encoder term
//! `V_p ≈ U_pᵀ ⋯ U_1ᵀ A`. The self-paced variants reweight pixel losses
//! between rounds with [`crate::selfpace`].

mod deep;
mod shallow;

pub use deep::{
    danmf_fit, dnmf_fit, pretrain, silencer_danmf_fit, DeepState, Encoder,
};
pub use shallow::{nmf_fit, silencer_nmf_fit, weighted_nmf_fit, NmfState};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LayerConfig, Partition};

/// Knobs shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Graph-regularisation weight on `tr(V L Vᵀ)`.
    pub lambda: f64,
    /// Iteration cap for each fine-tuning (or shallow) inner loop.
    pub max_inner_iters: usize,
    /// Iteration cap for each layer of deep pre-training.
    pub pretrain_iters: usize,
    /// Stop when the relative change of the objective falls below this.
    pub tol: f64,
    /// Added to every multiplicative-update denominator.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            lambda: 0.01,
            max_inner_iters: 100,
            pretrain_iters: 100,
            tol: 1e-4,
            epsilon: 1e-10,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::validation(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::validation(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::validation("max_inner_iters must be at least 1"));
        }
        Ok(())
    }

    fn converged(&self, prev: f64, cur: f64) -> bool {
        (prev - cur).abs() / prev.max(1e-12) < self.tol
    }
}

/// Shallow factors `A ≈ U V`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl FactorPair {
    pub fn reconstruction(&self) -> Array2<f64> {
        self.u.dot(&self.v)
    }

    pub fn communities(&self) -> Partition {
        assign_communities(&self.v)
    }
}

/// Deep factors `U_1 … U_p` and the membership matrix `V_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorStack {
    layers: Vec<Array2<f64>>,
    vp: Array2<f64>,
}

impl FactorStack {
    /// Checks the shape chain `U_i: r_{i-1}×r_i`, `V_p: r_p×n` and nonnegativity.
    pub fn new(layers: Vec<Array2<f64>>, vp: Array2<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("factor stack needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::validation(format!(
                    "layer shapes {:?} and {:?} do not chain",
                    pair[0].dim(),
                    pair[1].dim()
                )));
            }
        }
        let last = layers.last().unwrap();
        if last.ncols() != vp.nrows() || layers[0].nrows() != vp.ncols() {
            return Err(Error::validation(format!(
                "V_p shape {:?} inconsistent with layers",
                vp.dim()
            )));
        }
        if layers.iter().chain([&vp]).any(|m| m.iter().any(|&x| !(x >= 0.0))) {
            return Err(Error::validation("factor entries must be nonnegative"));
        }
        Ok(FactorStack { layers, vp })
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn vp(&self) -> &Array2<f64> {
        &self.vp
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_config(&self) -> LayerConfig {
        let mut sizes: Vec<usize> = self.layers.iter().map(|u| u.nrows()).collect();
        sizes.push(self.vp.nrows());
        LayerConfig::new(sizes).expect("stack shapes form a valid chain")
    }

    /// `Ψ_p = U_1 U_2 ⋯ U_p` (n×k).
    pub fn psi(&self) -> Array2<f64> {
        chain_product(&self.layers)
    }

    pub fn communities(&self) -> Partition {
        assign_communities(&self.vp)
    }

    pub(crate) fn into_parts(self) -> (Vec<Array2<f64>>, Array2<f64>) {
        (self.layers, self.vp)
    }
}

pub(crate) fn chain_product(mats: &[Array2<f64>]) -> Array2<f64> {
    let mut it = mats.iter();
    let first = it.next().expect("non-empty chain").clone();
    it.fold(first, |acc, m| acc.dot(m))
}

/// Per-fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations_used: usize,
    /// Objective before the first update, then after every inner iteration.
    pub loss_trace: Vec<f64>,
    /// Objective at the end of each outer (self-paced) round.
    pub outer_trace: Vec<f64>,
}

/// Node `d` joins the community with the largest `V[b, d]`; ties go to the
/// lowest index.
pub fn assign_communities(membership: &Array2<f64>) -> Partition {
    let k = membership.nrows().max(1);
    let labels = membership
        .columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (b, &x) in col.iter().enumerate() {
                if x > col[best] {
                    best = b;
                }
            }
            best
        })
        .collect();
    Partition::new(labels, k).expect("argmax labels are below k")
}

/// Per-node decoder and encoder errors `(1/n)‖A − Ψ_p V_p‖_F` and
/// `(1/n)‖V_p − Ψ_pᵀ A‖_F`.
pub fn reconstruction_errors(a: &Graph, stack: &FactorStack) -> Result<(f64, f64)> {
    let n = a.n();
    if stack.vp().ncols() != n || stack.layers()[0].nrows() != n {
        return Err(Error::validation(format!(
            "stack built for {} nodes, graph has {n}",
            stack.vp().ncols()
        )));
    }
    let psi = stack.psi();
    let dec = frobenius(&(a.adjacency() - &psi.dot(stack.vp())));
    let enc = frobenius(&(stack.vp() - &psi.t().dot(a.adjacency())));
    Ok((dec / n as f64, enc / n as f64))
}

pub(crate) fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniform draws in `(0, 1]`, row-major.
pub(crate) fn random_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || 1.0 - rng.random::<f64>())
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn ensure_finite(what: &str, mats: &[&Array2<f64>]) -> Result<()> {
    for m in mats {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite entry in {what}")));
        }
    }
    Ok(())
}

/// `tr(V L Vᵀ)` with `L = D − A`, computed as `Σ_j d_j ‖v_j‖² − ⟨V A, V⟩`.
pub(crate) fn laplacian_trace(v: &Array2<f64>, va: &Array2<f64>, degree: &[f64]) -> f64 {
    let mut diag = 0.0;
    for (col, &d) in v.columns().into_iter().zip(degree) {
        diag += d * col.iter().map(|x| x * x).sum::<f64>();
    }
    let cross: f64 = va.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    diag - cross
}

/// `V D` for diagonal `D` given by `degree`.
pub(crate) fn scale_columns(v: &Array2<f64>, degree: &[f64]) -> Array2<f64> {
    let mut out = v.clone();
    for (mut col, &d) in out.columns_mut().into_iter().zip(degree) {
        col.mapv_inplace(|x| x * d);
    }
    out
}

/// `x ← x ⊙ num / (den + ε)`.
pub(crate) fn multiplicative_update(
    x: &mut Array2<f64>,
    num: &Array2<f64>,
    den: &Array2<f64>,
    eps: f64,
) {
    ndarray::Zip::from(x)
        .and(num)
        .and(den)
        .for_each(|x, &n, &d| *x *= n / (d + eps));
}
