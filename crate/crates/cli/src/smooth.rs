use std::path::PathBuf;

use anyhow::{ensure, Result};
use mtsf::dense::dense_cap;
use mtsf::{solve_exact, SmoothingProblem};
use serde::Serialize;

use crate::io;
use crate::methods::{smooth_once, timed, SmoothMethod};

#[derive(clap::Args)]
pub struct Args {
    /// Edge list with connection angles.
    #[arg(long)]
    graph: PathBuf,
    /// Noisy input signal as `node,re,im` CSV.
    #[arg(long)]
    signal: PathBuf,
    /// Clean signal, used for the reconstruction error.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum, default_value = "mtsf_gs")]
    method: SmoothMethod,
    /// Forests for MTSF arms, iterations for CG arms.
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample with importance weights instead of exact forest sampling.
    #[arg(long)]
    importance: bool,
    /// Where to write the smoothed signal.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Record {
    method: SmoothMethod,
    m: Option<usize>,
    q: f64,
    n_nodes: usize,
    wall_ms: f64,
    e_a: Option<f64>,
    e_r: Option<f64>,
}

pub fn run(args: Args) -> Result<()> {
    ensure!(args.q > 0.0, "--q must be positive");
    let graph = io::read_graph(&args.graph)?;
    let g = io::read_signal(&args.signal)?;
    let truth = args.truth.as_deref().map(io::read_signal).transpose()?;
    let problem = SmoothingProblem::uniform(&graph, args.q)?;
    let n = graph.n_nodes();
    g.check_len(n)?;

    let (f, wall) = timed(|| smooth_once(&problem, &g, args.method, args.m, args.seed, args.importance))?;
    let e_a = if n <= dense_cap() {
        Some(f.distance(&solve_exact(&problem, &g)?) / n as f64)
    } else {
        None
    };
    let e_r = match &truth {
        Some(x) => {
            x.check_len(n)?;
            Some(f.distance(x) / n as f64)
        }
        None => None,
    };
    if let Some(path) = &args.out {
        io::write(path, &f.to_csv())?;
    }
    io::emit(&Record {
        method: args.method,
        m: args.method.uses_m().then_some(args.m),
        q: args.q,
        n_nodes: n,
        wall_ms: wall.as_secs_f64() * 1e3,
        e_a,
        e_r,
    })
}
