//! Shallow NMF with optional pixel weights and graph regularisation.
//!
//! Updates, with `W` the pixel weights (all ones for plain NMF):
//!
//! ```text
//! U ← U ⊙ (W⊙A) Vᵀ / (W⊙(UV)) Vᵀ
//! V ← V ⊙ (Uᵀ(W⊙A) + λ V A) / (Uᵀ(W⊙(UV)) + λ V D)
//! ```

use ndarray::Array2;

use super::{
    ensure_finite, laplacian_trace, multiplicative_update, random_factor, scale_columns,
    seeded_rng, FactorPair, FitReport, SolverOptions,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::selfpace::{self, PaceSchedule, WeightMatrix};

/// Mutable solver state for one shallow factorization.
#[derive(Debug, Clone)]
pub struct NmfState<'a> {
    a: &'a Array2<f64>,
    degree: Vec<f64>,
    lambda: f64,
    eps: f64,
    u: Array2<f64>,
    v: Array2<f64>,
    weights: Option<WeightMatrix>,
    weighted_a: Option<Array2<f64>>,
}

impl<'a> NmfState<'a> {
    pub fn new(
        a: &'a Graph,
        u: Array2<f64>,
        v: Array2<f64>,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let n = a.n();
        if u.nrows() != n || v.ncols() != n || u.ncols() != v.nrows() {
            return Err(Error::validation(format!(
                "factor shapes {:?} and {:?} do not fit a {n}-node graph",
                u.dim(),
                v.dim()
            )));
        }
        Ok(NmfState {
            a: a.adjacency(),
            degree: a.degrees(),
            lambda: opts.lambda,
            eps: opts.epsilon,
            u,
            v,
            weights: None,
            weighted_a: None,
        })
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn weights(&self) -> Option<&WeightMatrix> {
        self.weights.as_ref()
    }

    /// Fixes the pixel weights (`None` means unweighted).
    pub fn set_weights(&mut self, weights: Option<WeightMatrix>) -> Result<()> {
        if let Some(w) = &weights {
            if w.dim() != self.a.dim() {
                return Err(Error::validation(format!(
                    "weight matrix {:?} does not match adjacency {:?}",
                    w.dim(),
                    self.a.dim()
                )));
            }
        }
        self.weighted_a = weights.as_ref().map(|w| w.values() * self.a);
        self.weights = weights;
        Ok(())
    }

    /// `l_bd = (A_bd − [UV]_bd)²`.
    pub fn pixel_losses(&self) -> Array2<f64> {
        let mut r = self.u.dot(&self.v);
        ndarray::Zip::from(&mut r)
            .and(self.a)
            .for_each(|r, &a| *r = (a - *r) * (a - *r));
        r
    }

    /// Closed-form weight step for age `gamma`.
    pub fn update_weights(&mut self, gamma: f64) -> Result<()> {
        let w = selfpace::update_weights(&self.pixel_losses(), gamma)?;
        self.set_weights(Some(w))
    }

    /// One multiplicative update of `U`, then of `V`.
    pub fn step(&mut self) -> Result<()> {
        let wa = self.weighted_a.as_ref().unwrap_or(self.a);

        let uv = self.weigh(self.u.dot(&self.v));
        let vt = self.v.t();
        let num = wa.dot(&vt);
        let den = uv.dot(&vt);
        multiplicative_update(&mut self.u, &num, &den, self.eps);

        let uv = self.weigh(self.u.dot(&self.v));
        let ut = self.u.t();
        let mut num = ut.dot(wa);
        let mut den = ut.dot(&uv);
        if self.lambda != 0.0 {
            num.scaled_add(self.lambda, &self.v.dot(self.a));
            den.scaled_add(self.lambda, &scale_columns(&self.v, &self.degree));
        }
        multiplicative_update(&mut self.v, &num, &den, self.eps);
        ensure_finite("shallow factors", &[&self.u, &self.v])
    }

    fn weigh(&self, mut m: Array2<f64>) -> Array2<f64> {
        if let Some(w) = &self.weights {
            m *= w.values();
        }
        m
    }

    /// `Σ W_bd (A − UV)²_bd + λ tr(V L Vᵀ)`.
    pub fn objective(&self) -> f64 {
        let losses = self.pixel_losses();
        let fit: f64 = match &self.weights {
            Some(w) => losses.iter().zip(w.values().iter()).map(|(l, w)| w * l).sum(),
            None => losses.iter().sum(),
        };
        if self.lambda == 0.0 {
            return fit;
        }
        let va = self.v.dot(self.a);
        fit + self.lambda * laplacian_trace(&self.v, &va, &self.degree)
    }

    /// [`NmfState::objective`] plus the soft-weight regulariser at age `gamma`.
    pub fn self_paced_objective(&self, gamma: f64) -> f64 {
        let reg = self
            .weights
            .as_ref()
            .map_or(0.0, |w| selfpace::regularizer_value(w, gamma));
        self.objective() + reg
    }

    pub fn into_pair(self) -> FactorPair {
        FactorPair {
            u: self.u,
            v: self.v,
        }
    }

    /// Runs updates until the relative objective change drops below `tol`.
    /// Returns `(converged, iterations)`.
    fn run(&mut self, opts: &SolverOptions, trace: &mut Vec<f64>) -> Result<(bool, usize)> {
        let mut prev = self.objective();
        if trace.is_empty() {
            trace.push(prev);
        }
        for it in 1..=opts.max_inner_iters {
            self.step()?;
            let cur = self.objective();
            trace.push(cur);
            if opts.converged(prev, cur) {
                return Ok((true, it));
            }
            prev = cur;
        }
        Ok((false, opts.max_inner_iters))
    }
}

fn init_state<'a>(a: &'a Graph, k: usize, opts: &SolverOptions) -> Result<NmfState<'a>> {
    opts.validate()?;
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::validation(format!("rank k={k} must lie in [1, n={n}]")));
    }
    let mut rng = seeded_rng(opts.seed);
    let u = random_factor(&mut rng, n, k);
    let v = random_factor(&mut rng, k, n);
    NmfState::new(a, u, v, opts)
}

/// Graph-regularised NMF (`λ = 0` gives plain Frobenius NMF).
pub fn nmf_fit(a: &Graph, k: usize, opts: &SolverOptions) -> Result<(FactorPair, FitReport)> {
    let mut state = init_state(a, k, opts)?;
    let mut trace = Vec::new();
    let (converged, iterations_used) = state.run(opts, &mut trace)?;
    let last = *trace.last().unwrap();
    Ok((
        state.into_pair(),
        FitReport {
            converged,
            iterations_used,
            loss_trace: trace,
            outer_trace: vec![last],
        },
    ))
}

/// NMF with frozen pixel weights.
pub fn weighted_nmf_fit(
    a: &Graph,
    k: usize,
    weights: &WeightMatrix,
    opts: &SolverOptions,
) -> Result<(FactorPair, FitReport)> {
    let mut state = init_state(a, k, opts)?;
    state.set_weights(Some(weights.clone()))?;
    let mut trace = Vec::new();
    let (converged, iterations_used) = state.run(opts, &mut trace)?;
    let last = *trace.last().unwrap();
    Ok((
        state.into_pair(),
        FitReport {
            converged,
            iterations_used,
            loss_trace: trace,
            outer_trace: vec![last],
        },
    ))
}

/// Self-paced NMF: each round recomputes pixel losses, sets the weights by
/// the soft-weight rule at the current age, runs the weighted updates to
/// convergence, then ages the schedule.
pub fn silencer_nmf_fit(
    a: &Graph,
    k: usize,
    sched: &PaceSchedule,
    opts: &SolverOptions,
) -> Result<(FactorPair, WeightMatrix, FitReport)> {
    sched.validate()?;
    let mut state = init_state(a, k, opts)?;
    let gamma0 = sched.resolve_gamma0(&state.pixel_losses());
    let mut trace = Vec::new();
    let mut outer = Vec::with_capacity(sched.outer_iters);
    let mut total_iters = 0;
    let mut converged = false;
    for t in 0..sched.outer_iters {
        state.update_weights(sched.advance(gamma0, t))?;
        let (c, it) = state.run(opts, &mut trace)?;
        converged = c;
        total_iters += it;
        outer.push(state.objective());
    }
    let weights = state.weights.clone().expect("weights set in every round");
    Ok((
        state.into_pair(),
        weights,
        FitReport {
            converged,
            iterations_used: total_iters,
            loss_trace: trace,
            outer_trace: outer,
        },
    ))
}
