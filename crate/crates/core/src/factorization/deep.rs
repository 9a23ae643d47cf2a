//! Deep autoencoder-like factorization `A ≈ U_1 ⋯ U_p V_p`.
//!
//! Notation: `Ψ_i = U_1 ⋯ U_i` (with `Ψ_0 = I`), `Φ_i = U_i ⋯ U_p` (with
//! `Φ_{p+1} = I`), `P = Ψ_pᵀ A`. The fine-tuning objective is
//!
//! ```text
//! ‖A − Ψ_p V_p‖² + Σ W_bd (V_p − P)²_bd + λ tr(V_p L V_p^T)
//! ```
//!
//! with `W ≡ 1` for plain deep fitting and the middle term removed when the
//! encoder is off. Products are associated so every step costs `O(n²k)`.

use ndarray::Array2;

use super::{
    ensure_finite, laplacian_trace, multiplicative_update, random_factor, scale_columns,
    seeded_rng, FactorStack, FitReport, SolverOptions,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, LayerConfig};
use crate::selfpace::{self, PaceSchedule, WeightMatrix};

/// Whether the encoder term `‖V_p − Ψ_pᵀA‖²` takes part in fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoder {
    Off,
    On,
}

/// Layer-wise pre-training. Layer `i` factorizes `X ≈ U_i V_i` (with `X = A`
/// for the first layer and `X = V_{i−1}` after) by minimising
/// `‖X − UV‖² + ‖V − UᵀX‖²`. Only the `U_i` and the last `V` are kept.
pub fn pretrain(a: &Graph, layers: &LayerConfig, opts: &SolverOptions) -> Result<FactorStack> {
    opts.validate()?;
    layers.check_nodes(a.n())?;
    let n = a.n();
    let sizes = layers.sizes();
    let mut rng = seeded_rng(opts.seed);
    let mut us = Vec::with_capacity(layers.depth());
    let mut x: Option<Array2<f64>> = None;
    for w in sizes.windows(2) {
        let mut u = random_factor(&mut rng, w[0], w[1]);
        let mut v = random_factor(&mut rng, w[1], n);
        let input = x.as_ref().unwrap_or(a.adjacency());
        autoencoder_layer(input, &mut u, &mut v, opts)?;
        us.push(u);
        x = Some(v);
    }
    FactorStack::new(us, x.expect("at least one layer"))
}

fn autoencoder_layer(
    x: &Array2<f64>,
    u: &mut Array2<f64>,
    v: &mut Array2<f64>,
    opts: &SolverOptions,
) -> Result<()> {
    if opts.pretrain_iters == 0 {
        return Ok(());
    }
    let xxt = x.dot(&x.t());
    let x_sq: f64 = x.iter().map(|e| e * e).sum();
    let loss = |u: &Array2<f64>, v: &Array2<f64>, utx: &Array2<f64>| {
        let gram_u = u.t().dot(u);
        let gram_v = v.dot(&v.t());
        let cross: f64 = utx.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let quad: f64 = gram_u.iter().zip(gram_v.iter()).map(|(a, b)| a * b).sum();
        let dec = (x_sq - 2.0 * cross + quad).max(0.0);
        let enc: f64 = v.iter().zip(utx.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        dec + enc
    };
    let mut prev = loss(u, v, &u.t().dot(x));
    for _ in 0..opts.pretrain_iters {
        let vt = v.t();
        let num = x.dot(&vt) * 2.0;
        let den = u.dot(&v.dot(&vt)) + xxt.dot(&*u);
        multiplicative_update(u, &num, &den, opts.epsilon);

        let utx = u.t().dot(x);
        let num = &utx * 2.0;
        let den = u.t().dot(&*u).dot(&*v) + &*v;
        multiplicative_update(v, &num, &den, opts.epsilon);
        ensure_finite("pre-training factors", &[u, v])?;

        let cur = loss(u, v, &utx);
        if opts.converged(prev, cur) {
            break;
        }
        prev = cur;
    }
    Ok(())
}

/// Mutable fine-tuning state for a deep factorization.
#[derive(Debug, Clone)]
pub struct DeepState<'a> {
    a: &'a Array2<f64>,
    a_sq: f64,
    degree: Vec<f64>,
    lambda: f64,
    eps: f64,
    encoder: Encoder,
    layers: Vec<Array2<f64>>,
    vp: Array2<f64>,
    weights: Option<WeightMatrix>,
    /// `Ψ_pᵀ A` for the current layers.
    proj: Array2<f64>,
}

impl<'a> DeepState<'a> {
    pub fn new(
        a: &'a Graph,
        stack: FactorStack,
        encoder: Encoder,
        opts: &SolverOptions,
    ) -> Result<Self> {
        if stack.vp().ncols() != a.n() || stack.layers()[0].nrows() != a.n() {
            return Err(Error::validation(format!(
                "stack built for {} nodes, graph has {}",
                stack.vp().ncols(),
                a.n()
            )));
        }
        let (layers, vp) = stack.into_parts();
        let adj = a.adjacency();
        let proj = super::chain_product(&layers).t().dot(adj);
        Ok(DeepState {
            a: adj,
            a_sq: adj.iter().map(|x| x * x).sum(),
            degree: a.degrees(),
            lambda: opts.lambda,
            eps: opts.epsilon,
            encoder,
            layers,
            vp,
            weights: None,
            proj,
        })
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn vp(&self) -> &Array2<f64> {
        &self.vp
    }

    pub fn weights(&self) -> Option<&WeightMatrix> {
        self.weights.as_ref()
    }

    /// Fixes the encoder weights (`None` means all ones).
    pub fn set_weights(&mut self, weights: Option<WeightMatrix>) -> Result<()> {
        if let Some(w) = &weights {
            if w.dim() != self.vp.dim() {
                return Err(Error::validation(format!(
                    "weight matrix {:?} does not match V_p {:?}",
                    w.dim(),
                    self.vp.dim()
                )));
            }
        }
        self.weights = weights;
        Ok(())
    }

    /// Encoder pixel losses `(V_p − Ψ_pᵀA)²`.
    pub fn encoder_losses(&self) -> Array2<f64> {
        let mut l = &self.vp - &self.proj;
        l.mapv_inplace(|x| x * x);
        l
    }

    pub fn update_weights(&mut self, gamma: f64) -> Result<()> {
        let w = selfpace::update_weights(&self.encoder_losses(), gamma)?;
        self.set_weights(Some(w))
    }

    /// One sweep over `U_1 … U_p` followed by a `V_p` update.
    pub fn step(&mut self) -> Result<()> {
        let p = self.layers.len();
        let a = self.a;
        let w = self.weights.as_ref().map(WeightMatrix::values);
        let encoder = self.encoder == Encoder::On;

        // S = V_p + W⊙V_p with the encoder, V_p without.
        let mut s = self.vp.clone();
        if encoder {
            match w {
                Some(w) => s += &(w * &self.vp),
                None => s += &self.vp,
            }
        }
        let a_st = a.dot(&s.t());
        let vvt = self.vp.dot(&self.vp.t());

        let mut phis: Vec<Option<Array2<f64>>> = vec![None; p + 1];
        for i in (0..p).rev() {
            phis[i] = Some(match &phis[i + 1] {
                None => self.layers[i].clone(),
                Some(ph) => self.layers[i].dot(ph),
            });
        }

        let mut psi: Option<Array2<f64>> = None;
        for i in 0..p {
            let phi = phis[i + 1].as_ref();
            let mut num = match &psi {
                None => a_st.clone(),
                Some(ps) => ps.t().dot(&a_st),
            };
            let ui_phi = match phi {
                None => self.layers[i].clone(),
                Some(ph) => self.layers[i].dot(ph),
            };
            let mut den = match &psi {
                None => ui_phi.dot(&vvt),
                Some(ps) => ps.t().dot(ps).dot(&ui_phi).dot(&vvt),
            };
            if encoder {
                let mut e = match &psi {
                    None => self.proj.clone(),
                    Some(ps) => ps.dot(&ui_phi).t().dot(a),
                };
                if let Some(w) = w {
                    e *= w;
                }
                let ae = a.dot(&e.t());
                match &psi {
                    None => den += &ae,
                    Some(ps) => den += &ps.t().dot(&ae),
                }
            }
            if let Some(ph) = phi {
                num = num.dot(&ph.t());
                den = den.dot(&ph.t());
            }
            multiplicative_update(&mut self.layers[i], &num, &den, self.eps);
            psi = Some(match psi {
                None => self.layers[i].clone(),
                Some(ps) => ps.dot(&self.layers[i]),
            });
        }

        let psi = psi.expect("at least one layer");
        self.proj = psi.t().dot(a);
        let mut num = self.proj.clone();
        let mut den = psi.t().dot(&psi).dot(&self.vp);
        if encoder {
            match w {
                Some(w) => {
                    num += &(w * &self.proj);
                    den += &(w * &self.vp);
                }
                None => {
                    num += &self.proj;
                    den += &self.vp;
                }
            }
        }
        if self.lambda != 0.0 {
            num.scaled_add(self.lambda, &self.vp.dot(a));
            den.scaled_add(self.lambda, &scale_columns(&self.vp, &self.degree));
        }
        multiplicative_update(&mut self.vp, &num, &den, self.eps);

        let mut all: Vec<&Array2<f64>> = self.layers.iter().collect();
        all.push(&self.vp);
        ensure_finite("deep factors", &all)
    }

    /// Decoder loss `‖A − Ψ_p V_p‖²`.
    pub fn decoder_loss(&self) -> f64 {
        let psi = super::chain_product(&self.layers);
        let gram = psi.t().dot(&psi);
        let vvt = self.vp.dot(&self.vp.t());
        let cross: f64 = self.proj.iter().zip(self.vp.iter()).map(|(a, b)| a * b).sum();
        let quad: f64 = gram.iter().zip(vvt.iter()).map(|(a, b)| a * b).sum();
        (self.a_sq - 2.0 * cross + quad).max(0.0)
    }

    /// Weighted encoder loss `Σ W (V_p − Ψ_pᵀA)²`; zero with the encoder off.
    pub fn encoder_loss(&self) -> f64 {
        if self.encoder == Encoder::Off {
            return 0.0;
        }
        let l = self.encoder_losses();
        match &self.weights {
            Some(w) => l.iter().zip(w.values().iter()).map(|(l, w)| l * w).sum(),
            None => l.iter().sum(),
        }
    }

    pub fn objective(&self) -> f64 {
        let mut total = self.decoder_loss() + self.encoder_loss();
        if self.lambda != 0.0 {
            let va = self.vp.dot(self.a);
            total += self.lambda * laplacian_trace(&self.vp, &va, &self.degree);
        }
        total
    }

    /// [`DeepState::objective`] plus the soft-weight regulariser at age `gamma`.
    pub fn self_paced_objective(&self, gamma: f64) -> f64 {
        let reg = self
            .weights
            .as_ref()
            .map_or(0.0, |w| selfpace::regularizer_value(w, gamma));
        self.objective() + reg
    }

    pub fn into_stack(self) -> FactorStack {
        FactorStack::new(self.layers, self.vp).expect("updates preserve shapes and signs")
    }

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

fn plain_fit(
    a: &Graph,
    layers: &LayerConfig,
    encoder: Encoder,
    opts: &SolverOptions,
) -> Result<(FactorStack, FitReport)> {
    let stack = pretrain(a, layers, opts)?;
    let mut state = DeepState::new(a, stack, encoder, opts)?;
    let mut trace = Vec::new();
    let (converged, iterations_used) = state.run(opts, &mut trace)?;
    let last = *trace.last().unwrap();
    Ok((
        state.into_stack(),
        FitReport {
            converged,
            iterations_used,
            loss_trace: trace,
            outer_trace: vec![last],
        },
    ))
}

/// Deep autoencoder-like NMF: pre-training, then fine-tuning with unit
/// encoder weights.
pub fn danmf_fit(
    a: &Graph,
    layers: &LayerConfig,
    opts: &SolverOptions,
) -> Result<(FactorStack, FitReport)> {
    plain_fit(a, layers, Encoder::On, opts)
}

/// Deep NMF without the encoder term.
pub fn dnmf_fit(
    a: &Graph,
    layers: &LayerConfig,
    opts: &SolverOptions,
) -> Result<(FactorStack, FitReport)> {
    plain_fit(a, layers, Encoder::Off, opts)
}

/// Self-paced deep factorization. After pre-training, each outer round sets
/// the encoder weights from the current encoder pixel losses at age `γ_t`,
/// then fine-tunes to convergence.
pub fn silencer_danmf_fit(
    a: &Graph,
    layers: &LayerConfig,
    sched: &PaceSchedule,
    opts: &SolverOptions,
) -> Result<(FactorStack, WeightMatrix, FitReport)> {
    sched.validate()?;
    let stack = pretrain(a, layers, opts)?;
    let mut state = DeepState::new(a, stack, Encoder::On, opts)?;
    let gamma0 = sched.resolve_gamma0(&state.encoder_losses());
    let mut trace = Vec::new();
    let mut outer = Vec::with_capacity(sched.outer_iters);
    let mut total = 0;
    let mut converged = false;
    for t in 0..sched.outer_iters {
        state.update_weights(sched.advance(gamma0, t))?;
        let (c, it) = state.run(opts, &mut trace)?;
        converged = c;
        total += it;
        outer.push(state.objective());
    }
    let weights = state.weights.clone().expect("weights set in every round");
    Ok((
        state.into_stack(),
        weights,
        FitReport {
            converged,
            iterations_used: total,
            loss_trace: trace,
            outer_trace: outer,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::NmfState;
    use super::*;
    use crate::graph::{generate_er, karate};
    use crate::selfpace::InitialAge;

    fn mm(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(a.ncols(), b.nrows());
        Array2::from_shape_fn((a.nrows(), b.ncols()), |(i, j)| {
            (0..a.ncols()).map(|t| a[[i, t]] * b[[t, j]]).sum()
        })
    }

    fn tr(a: &Array2<f64>) -> Array2<f64> {
        a.t().to_owned()
    }

    fn had(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(a.dim(), |ix| a[ix] * b[ix])
    }

    fn chain(ms: &[Array2<f64>], n: usize) -> Array2<f64> {
        ms.iter().fold(Array2::eye(n), |acc, m| mm(&acc, m))
    }

    fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn pretrain_shapes() {
        let g = karate().graph;
        let cfg: LayerConfig = "34-16-2".parse().unwrap();
        let s = pretrain(&g, &cfg, &SolverOptions::default()).unwrap();
        let dims: Vec<_> = s.layers().iter().map(|u| u.dim()).collect();
        assert_eq!(dims, vec![(34, 16), (16, 2)]);
        assert_eq!(s.vp().dim(), (2, 34));

        let single: LayerConfig = "34-3".parse().unwrap();
        assert_eq!(pretrain(&g, &single, &SolverOptions::default()).unwrap().depth(), 1);

        let big = generate_er(1005, 0.01, 1).unwrap();
        let cfg: LayerConfig = "1005-256-128-42".parse().unwrap();
        let opts = SolverOptions { pretrain_iters: 1, ..Default::default() };
        let s = pretrain(&big, &cfg, &opts).unwrap();
        let dims: Vec<_> = s.layers().iter().map(|u| u.dim()).collect();
        assert_eq!(dims, vec![(1005, 256), (256, 128), (128, 42)]);
        assert_eq!(s.vp().dim(), (42, 1005));
    }

    #[test]
    fn pretrain_rejects_mismatched_layers() {
        let g = karate().graph;
        let cfg: LayerConfig = "30-4".parse().unwrap();
        assert!(matches!(
            pretrain(&g, &cfg, &SolverOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn single_step_matches_scripted_oracle() {
        let g = karate().graph;
        let n = g.n();
        let cfg: LayerConfig = "34-16-2".parse().unwrap();
        let opts = SolverOptions { seed: 4, pretrain_iters: 20, lambda: 0.05, ..Default::default() };
        let stack = pretrain(&g, &cfg, &opts).unwrap();
        let mut rng = seeded_rng(99);
        let w = random_factor(&mut rng, 2, n).mapv(|x| x.min(1.0));

        let mut state = DeepState::new(&g, stack.clone(), Encoder::On, &opts).unwrap();
        state.set_weights(Some(WeightMatrix::new(w.clone()).unwrap())).unwrap();
        state.step().unwrap();

        // scripted: explicit Ψ/Φ products with identities, naive matmul
        let a = g.adjacency().clone();
        let d = Array2::from_diag(&ndarray::Array1::from(g.degrees()));
        let mut us: Vec<Array2<f64>> = stack.layers().to_vec();
        let v = stack.vp().clone();
        let p = us.len();
        let k = v.nrows();
        for i in 0..p {
            let psi = chain(&us[..i], n);
            let phi = chain(&us[i + 1..], us[i].ncols());
            let psi_p = mm(&mm(&psi, &us[i]), &phi);
            let num = mm(&mm(&tr(&psi), &(mm(&a, &tr(&v)) + mm(&a, &tr(&had(&w, &v))))), &tr(&phi));
            let dec = mm(
                &mm(&mm(&mm(&mm(&tr(&psi), &psi), &us[i]), &phi), &mm(&v, &tr(&v))),
                &tr(&phi),
            );
            let enc = mm(
                &mm(&mm(&tr(&psi), &a), &tr(&had(&w, &mm(&tr(&psi_p), &a)))),
                &tr(&phi),
            );
            let den = dec + enc;
            let ui = &us[i];
            us[i] = Array2::from_shape_fn(ui.dim(), |ix| ui[ix] * num[ix] / (den[ix] + opts.epsilon));
        }
        let psi_p = chain(&us, n);
        assert_eq!(psi_p.ncols(), k);
        let proj = mm(&tr(&psi_p), &a);
        let num = &proj + &had(&w, &proj) + mm(&v, &a) * opts.lambda;
        let den = mm(&mm(&tr(&psi_p), &psi_p), &v) + had(&w, &v) + mm(&v, &d) * opts.lambda;
        let v1 = Array2::from_shape_fn(v.dim(), |ix| v[ix] * num[ix] / (den[ix] + opts.epsilon));

        for (got, want) in state.layers().iter().zip(&us) {
            assert!(max_diff(got, want) < 1e-9, "{}", max_diff(got, want));
        }
        assert!(max_diff(state.vp(), &v1) < 1e-9);

        // objective pieces against direct norms
        let direct_dec: f64 = (&a - &mm(&psi_p, &v1)).iter().map(|x| x * x).sum();
        assert!((state.decoder_loss() - direct_dec).abs() < 1e-9 * direct_dec.max(1.0));
    }

    #[test]
    fn unit_weights_match_plain_encoder_bitwise() {
        let g = karate().graph;
        let cfg: LayerConfig = "34-8-2".parse().unwrap();
        let opts = SolverOptions { seed: 3, ..Default::default() };
        let stack = pretrain(&g, &cfg, &opts).unwrap();
        let mut plain = DeepState::new(&g, stack.clone(), Encoder::On, &opts).unwrap();
        let mut ones = DeepState::new(&g, stack, Encoder::On, &opts).unwrap();
        ones.set_weights(Some(WeightMatrix::ones(2, 34))).unwrap();
        for _ in 0..10 {
            plain.step().unwrap();
            ones.step().unwrap();
            assert_eq!(plain.layers(), ones.layers());
            assert_eq!(plain.vp(), ones.vp());
            assert_eq!(plain.objective(), ones.objective());
        }
    }

    #[test]
    fn shallow_dnmf_tracks_nmf() {
        let g = generate_er(40, 0.15, 9).unwrap();
        let opts = SolverOptions { lambda: 0.0, seed: 9, ..Default::default() };
        let mut rng = seeded_rng(9);
        let u = random_factor(&mut rng, 40, 4);
        let v = random_factor(&mut rng, 4, 40);
        let mut shallow = NmfState::new(&g, u.clone(), v.clone(), &opts).unwrap();
        let stack = FactorStack::new(vec![u], v).unwrap();
        let mut deep = DeepState::new(&g, stack, Encoder::Off, &opts).unwrap();
        for _ in 0..50 {
            shallow.step().unwrap();
            deep.step().unwrap();
            let (a, b) = (shallow.objective(), deep.objective());
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(max_diff(shallow.v(), deep.vp()) < 1e-8);
    }

    #[test]
    fn fits_are_nonnegative_and_deterministic() {
        let g = karate().graph;
        let cfg: LayerConfig = "34-16-2".parse().unwrap();
        let opts = SolverOptions { seed: 1, ..Default::default() };
        let (s1, r1) = danmf_fit(&g, &cfg, &opts).unwrap();
        let (s2, r2) = danmf_fit(&g, &cfg, &opts).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(r1, r2);
        assert!(s1.layers().iter().chain([s1.vp()]).all(|m| m.iter().all(|&x| x >= 0.0)));

        let (d, _) = dnmf_fit(&g, &cfg, &opts).unwrap();
        assert_eq!(d.vp().dim(), (2, 34));

        let sched = PaceSchedule::new(InitialAge::MedianLoss, 1.5, 5).unwrap();
        let (s, w, rep) = silencer_danmf_fit(&g, &cfg, &sched, &opts).unwrap();
        assert_eq!(w.dim(), (2, 34));
        assert_eq!(rep.outer_trace.len(), 5);
        assert!(rep.loss_trace.iter().all(|x| x.is_finite()));
        assert!(s.vp().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn danmf_trace_is_monotone() {
        let g = karate().graph;
        let cfg: LayerConfig = "34-16-2".parse().unwrap();
        let opts = SolverOptions { seed: 5, tol: 1e-9, max_inner_iters: 200, ..Default::default() };
        let (_, rep) = danmf_fit(&g, &cfg, &opts).unwrap();
        for w in rep.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
        }
    }
}
