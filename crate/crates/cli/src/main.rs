use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use silencer::factorization::SolverOptions;
use silencer::graph::{self, Graph, LayerConfig};
use silencer::harness::{self, ExperimentConfig, MethodConfig, MethodName};
use silencer::metrics;
use silencer::noise::{GaParams, NoiseKind, NoiseSpec};
use silencer::{Error, Result};

#[derive(Parser)]
#[command(name = "silencer", version, about = "Community detection on noisy graphs")]
struct Cli {
    /// Random seed (generator, noise draw or solver initialisation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (file, or directory for `experiment`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Er,
    Ws,
    Ba,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Kind {
    Random,
    Qattack,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic graph as an edge list.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        n: usize,
        /// Connection probability (er) or rewiring probability (ws).
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Lattice neighbours (ws).
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Edges per new node (ba).
        #[arg(long, default_value_t = 3)]
        m: usize,
    },
    /// Corrupt a graph and record which pairs changed.
    Perturb {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long = "in")]
        input: PathBuf,
        /// Flip probability (random, or the mixed base).
        #[arg(long)]
        p: Option<f64>,
        /// Rewired fraction of edges (qattack, or the mixed base).
        #[arg(long)]
        budget: Option<f64>,
        /// NMF rank (mixed).
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = GaParams::default().population_size)]
        population: usize,
        #[arg(long, default_value_t = GaParams::default().generations)]
        generations: usize,
        /// Provenance JSON path (default: `<out>.json`).
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Run one method on one graph and write `node label` lines.
    Detect {
        /// Edge list, or a dense `.csv` adjacency matrix.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        method: MethodName,
        /// Layer sizes such as `34-16-2`; shallow methods use the last size as k.
        #[arg(long)]
        layers: LayerConfig,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        gamma0: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        pretrain_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Remap arbitrary node ids densely; labels are written with the original ids.
        #[arg(long)]
        remap: bool,
        /// Write the final pixel weights as CSV (self-paced methods).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Write the fit report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score predicted labels against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also report modularity on this graph.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Run a JSON experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

fn required_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Error::Validation("--out is required for this command".into()))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn load_graph(path: &Path) -> Result<Graph> {
    if path.extension().is_some_and(|e| e == "csv") {
        Graph::from_dense(graph::load_matrix_csv(path)?)
    } else {
        graph::load_edge_list(path, None)
    }
}

fn missing(flag: &str, kind: &str) -> Error {
    Error::Validation(format!("--{flag} is required for --kind {kind}"))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot configure {t} threads: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Generate { model, n, p, k, m } => {
            let g = match model {
                Model::Er => graph::generate_er(n, p, seed)?,
                Model::Ws => graph::generate_ws(n, k, p, seed)?,
                Model::Ba => graph::generate_ba(n, m, seed)?,
            };
            graph::save_edge_list(&g, required_out(&cli.out)?)
        }
        Command::Perturb { kind, input, p, budget, rank, population, generations, provenance } => {
            let out = required_out(&cli.out)?;
            let g = graph::load_edge_list(&input, None)?;
            let ga = GaParams { population_size: population, generations, ..GaParams::default() };
            let binary = |p: Option<f64>, budget: Option<f64>| match (p, budget) {
                (Some(p), _) => Some(NoiseKind::Random { p }),
                (None, Some(b)) => Some(NoiseKind::Qattack { budget_fraction: b, ga }),
                (None, None) => None,
            };
            let kind = match kind {
                Kind::Random => NoiseKind::Random { p: p.ok_or_else(|| missing("p", "random"))? },
                Kind::Qattack => NoiseKind::Qattack {
                    budget_fraction: budget.ok_or_else(|| missing("budget", "qattack"))?,
                    ga,
                },
                Kind::Mixed => NoiseKind::Mixed {
                    base: binary(p, budget).map(|kind| Box::new(NoiseSpec { kind, seed: None })),
                    rank: rank.ok_or_else(|| missing("rank", "mixed"))?,
                },
            };
            let spec = NoiseSpec { kind, seed: Some(seed) };
            let result = spec.apply(&g, seed)?;
            if result.graph.is_simple() {
                graph::save_edge_list(&result.graph, out)?;
            } else {
                graph::save_matrix_csv(result.graph.adjacency(), out)?;
            }
            let prov_path = provenance.unwrap_or_else(|| {
                let mut s = out.as_os_str().to_owned();
                s.push(".json");
                PathBuf::from(s)
            });
            let prov = spec.provenance(&g, &result, seed);
            write(&prov_path, &serde_json::to_string_pretty(&prov)?)
        }
        Command::Detect {
            input,
            method,
            layers,
            lambda,
            eta,
            m,
            gamma0,
            max_iters,
            pretrain_iters,
            tol,
            remap,
            weights,
            report,
        } => {
            let out = required_out(&cli.out)?;
            let (g, ids) = if remap {
                let (g, map) = graph::load_edge_list_remapped(&input)?;
                (g, Some(map))
            } else {
                (load_graph(&input)?, None)
            };
            let d = SolverOptions::default();
            let cfg = MethodConfig {
                lambda,
                eta,
                m,
                gamma0,
                solver: SolverOptions {
                    max_inner_iters: max_iters.unwrap_or(d.max_inner_iters),
                    pretrain_iters: pretrain_iters.unwrap_or(d.pretrain_iters),
                    tol: tol.unwrap_or(d.tol),
                    ..d
                },
                ..MethodConfig::new(method, layers)
            };
            cfg.validate()?;
            let outcome = harness::run_method(&g, &cfg, seed)?;
            let mut body = String::new();
            for (node, label) in outcome.partition.labels().iter().enumerate() {
                let id = ids.as_ref().map_or(node as u64, |m| m.original_id(node));
                body.push_str(&format!("{id} {label}\n"));
            }
            write(out, &body)?;
            if let Some(path) = weights {
                let w = outcome.weights.as_ref().ok_or_else(|| {
                    Error::Validation(format!("method {method} has no pixel weights"))
                })?;
                graph::save_matrix_csv(w.values(), path)?;
            }
            if let Some(path) = report {
                write(&path, &serde_json::to_string_pretty(&outcome.report)?)?;
            }
            Ok(())
        }
        Command::Evaluate { pred, truth, graph: graph_path } => {
            let pred_text = read(&pred)?;
            let n = pred_text
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .count();
            let p = graph::parse_labels(&pred_text, &pred.display().to_string(), n)?;
            let t = graph::load_labels(&truth, n)?;
            let mut scores = json!({
                "nmi": metrics::nmi(&p, &t)?,
                "ari": metrics::ari(&p, &t)?,
                "f1": metrics::pairwise_f1(&p, &t)?,
            });
            if let Some(path) = graph_path {
                let g = graph::load_edge_list(&path, Some(n))?;
                scores["modularity"] = json!(metrics::modularity(&g, &p)?);
            }
            let text = serde_json::to_string_pretty(&scores)?;
            match &cli.out {
                Some(path) => write(path, &text),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            if let Some(dir) = cli.out {
                cfg.output_dir = dir;
            }
            let table = harness::run_experiment(&cfg)?;
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
