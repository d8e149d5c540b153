use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use mtsf::oracle::{
    build_kernel, chi_square_p, dense_solve, dense_system, determinant, enumerate_mtsfs, exact_estimator_moments,
    ground_subset, principal_minor, MtsfCatalog,
};
use mtsf::sampler::MtsfKey;
use mtsf::{Complex64, ComplexSignal, EstimatorKind, MtsfSampler, SmoothingProblem, WalkConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::io;

const TOL: f64 = 1e-9;
const MIN_P_VALUE: f64 = 1e-3;

#[derive(clap::Args)]
pub struct Args {
    /// Edge list of a graph small enough to enumerate.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Signal for the estimator checks. Defaults to `e^{i j}` at node `j`.
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Sampler draws for the goodness-of-fit test, 0 to skip.
    #[arg(long, default_value_t = 20_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct Report {
    n_nodes: usize,
    n_edges: usize,
    n_forests: usize,
    partition_function: f64,
    determinant: f64,
    max_minor_error: f64,
    max_bias: f64,
    rb_variance_error: f64,
    chi_square_p: Option<f64>,
    failures: Vec<String>,
    pass: bool,
}

pub fn run(args: Args) -> Result<()> {
    let graph = io::read_graph(&args.graph)?;
    let n = graph.n_nodes();
    let g = match &args.signal {
        Some(path) => io::read_signal(path)?,
        None => ComplexSignal::from_phases(&(0..n).map(|j| j as f64).collect::<Vec<_>>()),
    };
    g.check_len(n)?;
    let problem = SmoothingProblem::uniform(&graph, args.q)?;
    let catalog = enumerate_mtsfs(&problem)?;
    let mut failures = Vec::new();

    let det = determinant(&dense_system(&problem)?);
    if (catalog.z - det.re).abs() > TOL * det.norm().max(1.0) || det.im.abs() > TOL * det.norm().max(1.0) {
        failures.push(format!(
            "partition function {} differs from determinant {det}",
            catalog.z
        ));
    }

    let kernel = build_kernel(&problem)?;
    let m = graph.n_edges();
    let max_minor_error = catalog
        .entries
        .iter()
        .map(|e| (principal_minor(&kernel, &ground_subset(e, m)) - Complex64::new(e.probability, 0.0)).norm())
        .fold(0.0, f64::max);
    if max_minor_error > TOL {
        failures.push(format!(
            "kernel minors miss forest probabilities by {max_minor_error:e}"
        ));
    }

    let f_star = dense_solve(&problem, &g)?;
    let mut max_bias = 0.0f64;
    for (name, kind) in [
        ("tilde", EstimatorKind::Tilde),
        ("rao-blackwell", EstimatorKind::RaoBlackwell),
        ("gradient step", EstimatorKind::gradient_step()),
    ] {
        let bias = exact_estimator_moments(&problem, &g, kind)?.mean.distance(&f_star);
        if bias > TOL * f_star.norm().max(1.0) {
            failures.push(format!("{name} estimator is biased by {bias:e}"));
        }
        max_bias = max_bias.max(bias);
    }

    let rb_mse = exact_estimator_moments(&problem, &g, EstimatorKind::RaoBlackwell)?.mse();
    // The node block of the kernel is q (L + q I)^{-1}.
    let kg: ComplexSignal = (0..n)
        .map(|i| (0..n).map(|j| kernel[(m + i, m + j)] * g[j]).sum::<Complex64>())
        .collect();
    let predicted = g.dot(&kg).re - kg.norm_sqr();
    let rb_variance_error = (rb_mse - predicted).abs();
    if rb_variance_error > TOL * g.norm_sqr().max(1.0) {
        failures.push(format!("Rao-Blackwell variance {rb_mse} differs from {predicted}"));
    }

    let chi = if args.draws > 0 && !has_negative_cycles(&catalog) {
        let p = sampler_fit(&problem, &catalog, args.draws, args.seed)?;
        if p < MIN_P_VALUE {
            failures.push(format!("sampler frequencies reject the forest law (p = {p:e})"));
        }
        Some(p)
    } else {
        None
    };

    let pass = failures.is_empty();
    io::emit(&Report {
        n_nodes: n,
        n_edges: m,
        n_forests: catalog.entries.len(),
        partition_function: catalog.z,
        determinant: det.re,
        max_minor_error,
        max_bias,
        rb_variance_error,
        chi_square_p: chi,
        failures,
        pass,
    })?;
    if !pass {
        bail!("oracle check failed");
    }
    Ok(())
}

/// Exact sampling is only defined when no cycle has a negative cosine.
fn has_negative_cycles(catalog: &MtsfCatalog) -> bool {
    catalog
        .entries
        .iter()
        .flat_map(|e| &e.cycle_angles)
        .any(|a| a.cos() < 0.0)
}

fn sampler_fit(problem: &SmoothingProblem<'_>, catalog: &MtsfCatalog, draws: u64, seed: u64) -> Result<f64> {
    let graph = problem.graph();
    let index: HashMap<MtsfKey, usize> = catalog
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| (e.key(graph), k))
        .collect();
    let mut counts = vec![0u64; catalog.entries.len()];
    let mut sampler = MtsfSampler::new(problem, &WalkConfig::with_seed(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        match index.get(&sampler.sample(&mut rng)?.key()) {
            Some(&k) => counts[k] += 1,
            None => bail!("sampled a forest that is not in the catalog"),
        }
    }
    let probs: Vec<f64> = catalog.entries.iter().map(|e| e.probability).collect();
    Ok(chi_square_p(&counts, &probs, draws))
}
