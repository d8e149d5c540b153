use std::path::PathBuf;

use anyhow::{ensure, Result};
use mtsf::{sync_error, ComplexSignal, SmoothingProblem};
use serde::Serialize;

use crate::io;
use crate::methods::{synchronize, timed, SyncMethod, SyncOutcome, SyncRun};

#[derive(clap::Args)]
pub struct Args {
    /// Edge list with connection angles.
    #[arg(long)]
    graph: PathBuf,
    /// True node angles as `node,omega` CSV, used for the synchronization error.
    #[arg(long)]
    omega: Option<PathBuf>,
    /// Regularization, 0.01 times the mean degree by default.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_enum, default_value = "mtsf_rb")]
    method: SyncMethod,
    /// Forests for MTSF arms, iterations for CG arms.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Power iterations.
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    importance: bool,
    /// Project every entry to the unit circle after each step.
    #[arg(long)]
    componentwise: bool,
    /// Use `Q = q D`, which targets the normalized Laplacian.
    #[arg(long)]
    normalized: bool,
    /// Reuse the same forests at every iteration.
    #[arg(long)]
    reuse: bool,
    /// Where to write the recovered phases.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Step {
    k: usize,
    wall_ms: f64,
    e_s: Option<f64>,
}

#[derive(Serialize)]
struct Record {
    method: SyncMethod,
    m: Option<usize>,
    k: Option<usize>,
    q: Option<f64>,
    n_nodes: usize,
    wall_ms: f64,
    e_s: Option<f64>,
    history: Vec<Step>,
}

pub fn run(args: Args) -> Result<()> {
    let graph = io::read_graph(&args.graph)?;
    let truth = match &args.omega {
        Some(path) => {
            let omega = io::read_omega(path)?;
            ensure!(
                omega.len() == graph.n_nodes(),
                "omega has {} entries for {} nodes",
                omega.len(),
                graph.n_nodes()
            );
            Some(ComplexSignal::from_phases(&omega))
        }
        None => None,
    };
    let q = args.q.unwrap_or(0.01 * graph.mean_degree());
    let problem = if args.normalized {
        SmoothingProblem::degree_scaled(&graph, q)?
    } else {
        SmoothingProblem::uniform(&graph, q)?
    };
    let run = SyncRun {
        method: args.method,
        m: args.m,
        k: args.k,
        seed: args.seed,
        importance: args.importance,
        componentwise: args.componentwise,
        reuse: args.reuse,
    };
    let (outcome, _) = timed(|| synchronize(&problem, &run, truth.as_ref()))?;
    let f = outcome.signal();
    let e_s = truth.as_ref().map(|x| sync_error(&f, x)).transpose()?.map(|e| e.value);
    let history = match &outcome {
        SyncOutcome::Iterated(r) => r
            .history
            .iter()
            .map(|s| Step {
                k: s.k,
                wall_ms: s.elapsed.as_secs_f64() * 1e3,
                e_s: s.error,
            })
            .collect(),
        SyncOutcome::Baseline(..) => Vec::new(),
    };
    if let Some(path) = &args.out {
        io::write(path, &f.to_csv())?;
    }
    let spectral = args.method.iterative() && args.method != SyncMethod::Adjacency;
    io::emit(&Record {
        method: args.method,
        m: args.method.uses_m().then_some(args.m),
        k: args.method.iterative().then_some(args.k),
        q: spectral.then_some(q),
        n_nodes: graph.n_nodes(),
        wall_ms: outcome.elapsed().as_secs_f64() * 1e3,
        e_s,
        history,
    })
}
