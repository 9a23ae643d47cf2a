//! Config-driven repeated experiments.
//!
//! For repetition `r` the seed is `base_seed + r`. Noise (unless frozen by its
//! own seed) is drawn once per repetition from that seed, and every method in
//! the repetition factorizes the same perturbed graph starting from the same
//! solver seed.

mod stats;

pub use stats::{improvement_ratio, mean, ranksum_test, std_dev};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factorization::{
    danmf_fit, dnmf_fit, nmf_fit, reconstruction_errors, silencer_danmf_fit, silencer_nmf_fit,
    FactorStack, FitReport, SolverOptions,
};
use crate::graph::{self, Dataset, Graph, LayerConfig, Partition};
use crate::metrics;
use crate::noise::NoiseSpec;
use crate::selfpace::{InitialAge, PaceSchedule, WeightMatrix};

/// Directory searched for named datasets: `$SILENCER_DATA_DIR`, else `data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os("SILENCER_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn default_ws_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    Files {
        edges: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    /// `karate`, or `<dir>/<name>.edges` (+ `.labels`) under [`data_dir`].
    Named {
        name: String,
        #[serde(default)]
        dir: Option<PathBuf>,
    },
    Er {
        n: usize,
        p: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Ws {
        n: usize,
        #[serde(default = "default_ws_k")]
        k: usize,
        p: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Ba {
        n: usize,
        m: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DatasetSource {
    /// Generated graphs use their own seed if given, else `base_seed`.
    pub fn load(&self, base_seed: u64) -> Result<Dataset> {
        let generated = |name: &str, g: Graph| Dataset { name: name.into(), graph: g, truth: None };
        match self {
            DatasetSource::Files { edges, labels } => {
                let name = edges.file_stem().map_or("graph".into(), |s| s.to_string_lossy().into_owned());
                Dataset::from_files(&name, edges, labels.as_deref())
            }
            DatasetSource::Named { name, dir } => {
                Dataset::named(name, dir.clone().unwrap_or_else(data_dir).as_path())
            }
            DatasetSource::Er { n, p, seed } => {
                Ok(generated("er", graph::generate_er(*n, *p, seed.unwrap_or(base_seed))?))
            }
            DatasetSource::Ws { n, k, p, seed } => {
                Ok(generated("ws", graph::generate_ws(*n, *k, *p, seed.unwrap_or(base_seed))?))
            }
            DatasetSource::Ba { n, m, seed } => {
                Ok(generated("ba", graph::generate_ba(*n, *m, seed.unwrap_or(base_seed))?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Nmf,
    Dnmf,
    Danmf,
    SilencerNmf,
    SilencerDanmf,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::Nmf,
        MethodName::Dnmf,
        MethodName::Danmf,
        MethodName::SilencerNmf,
        MethodName::SilencerDanmf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Nmf => "nmf",
            MethodName::Dnmf => "dnmf",
            MethodName::Danmf => "danmf",
            MethodName::SilencerNmf => "silencer-nmf",
            MethodName::SilencerDanmf => "silencer-danmf",
        }
    }

    pub fn is_self_paced(self) -> bool {
        matches!(self, MethodName::SilencerNmf | MethodName::SilencerDanmf)
    }

    /// The unweighted method a self-paced method is compared against.
    pub fn baseline(self) -> Option<MethodName> {
        match self {
            MethodName::SilencerNmf => Some(MethodName::Nmf),
            MethodName::SilencerDanmf => Some(MethodName::Danmf),
            _ => None,
        }
    }
}

impl std::str::FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One method to run. Shallow methods use `k` = the last layer size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub name: MethodName,
    pub layers: LayerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Fixed initial age; when absent the median-loss rule is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl MethodConfig {
    pub fn new(name: MethodName, layers: LayerConfig) -> Self {
        MethodConfig {
            name,
            layers,
            lambda: None,
            eta: None,
            m: None,
            gamma0: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            lambda: self.lambda.unwrap_or(self.solver.lambda),
            seed,
            ..self.solver
        }
    }

    pub fn schedule(&self) -> PaceSchedule {
        let d = PaceSchedule::default();
        PaceSchedule {
            gamma0: self.gamma0.map_or(d.gamma0, InitialAge::Fixed),
            eta: self.eta.unwrap_or(d.eta),
            outer_iters: self.m.unwrap_or(d.outer_iters),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver_options(0).validate()?;
        if self.name.is_self_paced() {
            self.schedule().validate()?;
        }
        Ok(())
    }
}

/// Result of running one method on one graph.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub partition: Partition,
    pub stack: FactorStack,
    pub weights: Option<WeightMatrix>,
    pub report: FitReport,
}

/// Runs `method` on `g` with solver seed `seed`.
pub fn run_method(g: &Graph, method: &MethodConfig, seed: u64) -> Result<MethodOutcome> {
    method.layers.check_nodes(g.n())?;
    let opts = method.solver_options(seed);
    let sched = method.schedule();
    let k = method.layers.k();
    let shallow = |pair: crate::factorization::FactorPair| FactorStack::new(vec![pair.u], pair.v);
    let (stack, weights, report) = match method.name {
        MethodName::Nmf => {
            let (pair, rep) = nmf_fit(g, k, &opts)?;
            (shallow(pair)?, None, rep)
        }
        MethodName::SilencerNmf => {
            let (pair, w, rep) = silencer_nmf_fit(g, k, &sched, &opts)?;
            (shallow(pair)?, Some(w), rep)
        }
        MethodName::Dnmf => {
            let (s, rep) = dnmf_fit(g, &method.layers, &opts)?;
            (s, None, rep)
        }
        MethodName::Danmf => {
            let (s, rep) = danmf_fit(g, &method.layers, &opts)?;
            (s, None, rep)
        }
        MethodName::SilencerDanmf => {
            let (s, w, rep) = silencer_danmf_fit(g, &method.layers, &sched, &opts)?;
            (s, Some(w), rep)
        }
    };
    Ok(MethodOutcome {
        partition: stack.communities(),
        stack,
        weights,
        report,
    })
}

fn default_repetitions() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub methods: Vec<MethodConfig>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dump_weights: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::validation("repetitions must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::validation("at least one method is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m.name) {
                return Err(Error::validation(format!("method {} listed twice", m.name)));
            }
            m.validate()?;
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: MethodName,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub outer_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
    /// Fingerprint of the graph every method in this repetition factorized.
    pub graph_fingerprint: String,
    pub pairs_removed: usize,
    pub pairs_added: usize,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub method: MethodName,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Per-repetition values of successful runs, in repetition order.
    pub values: Vec<f64>,
    pub failed: usize,
}

/// A self-paced method against its unweighted baseline on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: MethodName,
    pub baseline: MethodName,
    pub metric: String,
    pub method_mean: f64,
    pub baseline_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_ratio: Option<f64>,
    pub ranksum_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub dataset: String,
    pub nodes: usize,
    pub seeds: Vec<u64>,
    pub failed_runs: usize,
    pub summary: Vec<MetricSummary>,
    pub comparisons: Vec<Comparison>,
    pub repetitions: Vec<RepRecord>,
}

impl ResultsTable {
    pub fn summary_for(&self, method: MethodName, metric: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|s| s.method == method && s.metric == metric)
    }

    /// `method,metric,mean,std,runs,failed` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,mean,std,runs,failed\n");
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.method,
                s.metric,
                s.mean,
                s.std,
                s.values.len(),
                s.failed
            ));
        }
        out
    }
}

/// Wall-clock timings, kept apart from the reproducible results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub rep_seconds: Vec<f64>,
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn score(
    outcome: &MethodOutcome,
    clean: &Graph,
    input: &Graph,
    truth: Option<&Partition>,
) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    if let Some(t) = truth {
        m.insert("nmi".into(), metrics::nmi(&outcome.partition, t)?);
        m.insert("ari".into(), metrics::ari(&outcome.partition, t)?);
        m.insert("f1".into(), metrics::pairwise_f1(&outcome.partition, t)?);
    }
    if clean.edge_count() > 0 {
        m.insert("modularity".into(), metrics::modularity(clean, &outcome.partition)?);
    }
    let (dec, enc) = reconstruction_errors(input, &outcome.stack)?;
    m.insert("decoder_err".into(), dec);
    m.insert("encoder_err".into(), enc);
    Ok(m)
}

fn run_rep(
    cfg: &ExperimentConfig,
    data: &Dataset,
    rep: usize,
    out_dir: Option<&Path>,
) -> Result<(RepRecord, f64)> {
    let start = Instant::now();
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    let (input, removed, added, noise_seed) = match &cfg.noise {
        Some(spec) => {
            let p = spec.apply(&data.graph, seed)?;
            if let Some(dir) = out_dir {
                if p.graph.is_simple() {
                    graph::save_edge_list(&p.graph, dir.join(format!("perturbed_{rep}.edges")))?;
                } else {
                    graph::save_matrix_csv(p.graph.adjacency(), dir.join(format!("perturbed_{rep}.csv")))?;
                }
                let prov = spec.provenance(&data.graph, &p, seed);
                write_text(
                    &dir.join(format!("perturbed_{rep}.json")),
                    &serde_json::to_string_pretty(&prov)?,
                )?;
            }
            (p.graph, p.removed.len(), p.added.len(), Some(spec.effective_seed(seed)))
        }
        None => (data.graph.clone(), 0, 0, None),
    };
    let mut runs = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let record = match run_method(&input, method, seed) {
            Ok(outcome) => {
                if let (true, Some(dir), Some(w)) = (cfg.dump_weights, out_dir, &outcome.weights) {
                    graph::save_matrix_csv(w.values(), dir.join(format!("weights_{}_{rep}.csv", method.name)))?;
                }
                RunRecord {
                    method: method.name,
                    ok: true,
                    error: None,
                    metrics: score(&outcome, &data.graph, &input, data.truth.as_ref())?,
                    iterations_used: outcome.report.iterations_used,
                    converged: outcome.report.converged,
                    outer_trace: outcome.report.outer_trace,
                }
            }
            Err(Error::Numerical(msg)) => RunRecord {
                method: method.name,
                ok: false,
                error: Some(msg),
                metrics: BTreeMap::new(),
                iterations_used: 0,
                converged: false,
                outer_trace: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        runs.push(record);
    }
    Ok((
        RepRecord {
            rep,
            seed,
            noise_seed,
            graph_fingerprint: input.fingerprint(),
            pairs_removed: removed,
            pairs_added: added,
            runs,
        },
        start.elapsed().as_secs_f64(),
    ))
}

fn summarise(cfg: &ExperimentConfig, reps: &[RepRecord]) -> (Vec<MetricSummary>, Vec<Comparison>) {
    let mut summary = Vec::new();
    for method in &cfg.methods {
        let runs: Vec<&RunRecord> = reps
            .iter()
            .flat_map(|r| r.runs.iter().filter(|x| x.method == method.name))
            .collect();
        let failed = runs.iter().filter(|r| !r.ok).count();
        let names: std::collections::BTreeSet<&String> =
            runs.iter().flat_map(|r| r.metrics.keys()).collect();
        for metric in names {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.metrics.get(metric).copied()).collect();
            summary.push(MetricSummary {
                method: method.name,
                metric: metric.clone(),
                mean: mean(&values),
                std: std_dev(&values),
                values,
                failed,
            });
        }
    }
    let mut comparisons = Vec::new();
    for s in &summary {
        let Some(base) = s.method.baseline() else { continue };
        let Some(b) = summary.iter().find(|x| x.method == base && x.metric == s.metric) else {
            continue;
        };
        if s.values.is_empty() || b.values.is_empty() {
            continue;
        }
        comparisons.push(Comparison {
            method: s.method,
            baseline: base,
            metric: s.metric.clone(),
            method_mean: s.mean,
            baseline_mean: b.mean,
            improvement_ratio: improvement_ratio(s.mean, b.mean).ok(),
            ranksum_p: ranksum_test(&s.values, &b.values).expect("non-empty finite samples"),
        });
    }
    (summary, comparisons)
}

/// Runs every repetition without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<(ResultsTable, Timing)> {
    execute_into(cfg, None)
}

fn execute_into(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<(ResultsTable, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let data = cfg.dataset.load(cfg.base_seed)?;
    for m in &cfg.methods {
        m.layers.check_nodes(data.graph.n())?;
    }
    let results: Vec<(RepRecord, f64)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_rep(cfg, &data, rep, out_dir))
        .collect::<Result<_>>()?;
    let (reps, rep_seconds): (Vec<RepRecord>, Vec<f64>) = results.into_iter().unzip();
    let (summary, comparisons) = summarise(cfg, &reps);
    let table = ResultsTable {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        dataset: data.name.clone(),
        nodes: data.graph.n(),
        seeds: reps.iter().map(|r| r.seed).collect(),
        failed_runs: reps.iter().flat_map(|r| &r.runs).filter(|r| !r.ok).count(),
        summary,
        comparisons,
        repetitions: reps,
    };
    let timing = Timing {
        total_seconds: start.elapsed().as_secs_f64(),
        rep_seconds,
    };
    Ok((table, timing))
}

/// Runs the experiment and writes `results.json`, `results.csv`,
/// `timing.json` and per-repetition artifacts into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (table, timing) = execute_into(cfg, Some(dir))?;
    write_text(&dir.join("results.json"), &serde_json::to_string_pretty(&table)?)?;
    write_text(&dir.join("results.csv"), &table.to_csv())?;
    write_text(&dir.join("timing.json"), &serde_json::to_string_pretty(&timing)?)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn karate_cfg(methods: &[MethodName]) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Named { name: "karate".into(), dir: None },
            noise: None,
            methods: methods
                .iter()
                .map(|&m| MethodConfig {
                    m: Some(3),
                    ..MethodConfig::new(m, "34-8-2".parse().unwrap())
                })
                .collect(),
            repetitions: 2,
            base_seed: 5,
            output_dir: PathBuf::from("unused"),
            dump_weights: false,
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "dataset": {"type": "named", "name": "karate"},
                "noise": {"kind": "random", "p": 0.01},
                "methods": [
                    {"name": "danmf", "layers": [34, 16, 2]},
                    {"name": "silencer-danmf", "layers": [34, 16, 2], "eta": 1.8, "m": 5}
                ],
                "repetitions": 3
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.methods[1].schedule().eta, 1.8);
        assert_eq!(cfg.methods[1].schedule().outer_iters, 5);
        assert_eq!(cfg.methods[0].solver_options(3).lambda, 0.01);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = karate_cfg(&[MethodName::Danmf, MethodName::Danmf]);
        assert!(cfg.validate().is_err());
        cfg.methods.pop();
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
        cfg.repetitions = 1;
        cfg.methods[0].eta = Some(3.0);
        assert!(cfg.validate().is_ok(), "eta only matters for self-paced methods");
        cfg.methods[0].name = MethodName::SilencerDanmf;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layer_mismatch_rejected() {
        let mut cfg = karate_cfg(&[MethodName::Nmf]);
        cfg.methods[0].layers = "30-2".parse().unwrap();
        assert!(matches!(execute(&cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn single_rep_has_zero_std() {
        let mut cfg = karate_cfg(&[MethodName::Danmf]);
        cfg.repetitions = 1;
        let (t, _) = execute(&cfg).unwrap();
        for metric in ["nmi", "ari", "f1", "modularity", "decoder_err", "encoder_err"] {
            let s = t.summary_for(MethodName::Danmf, metric).unwrap();
            assert_eq!(s.values.len(), 1);
            assert_eq!(s.std, 0.0);
        }
    }

    #[test]
    fn zero_noise_matches_clean_run() {
        let clean = karate_cfg(&[MethodName::Nmf, MethodName::SilencerNmf]);
        let noisy = ExperimentConfig { noise: Some(NoiseSpec::random(0.0)), ..clean.clone() };
        let (a, _) = execute(&clean).unwrap();
        let (b, _) = execute(&noisy).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.comparisons, b.comparisons);
    }

    #[test]
    fn methods_share_the_perturbed_graph_and_aggregates_recompute() {
        let mut cfg = karate_cfg(&[MethodName::Danmf, MethodName::SilencerDanmf]);
        cfg.noise = Some(NoiseSpec::random(0.02));
        cfg.repetitions = 3;
        let (t, _) = execute(&cfg).unwrap();
        let fps: Vec<&String> = t.repetitions.iter().map(|r| &r.graph_fingerprint).collect();
        assert_ne!(fps[0], fps[1], "noise is redrawn per repetition");
        for s in &t.summary {
            assert_eq!(s.values.len(), 3);
            assert!((mean(&s.values) - s.mean).abs() < 1e-12);
            assert!((std_dev(&s.values) - s.std).abs() < 1e-12);
        }
        assert!(t.comparisons.iter().any(|c| c.metric == "nmi"));
    }
}
