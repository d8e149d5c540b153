use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use clap::ValueEnum;
use mtsf::sync::{power_iterate_adjacency, random_start, sync_mst_baseline, sync_ust_baseline};
use mtsf::{
    solve_cg, CgOptions, ComplexSignal, ConnectionGraph, EstimatorKind, MtsfSmoother, Preconditioner, SamplingMode,
    SmootherConfig, SmoothingProblem, SyncOptions, SyncResult, SyncSmoother, WalkConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SmoothMethod {
    Exact,
    Cg,
    CgDiag,
    /// Tilde estimator.
    Mtsf,
    MtsfRb,
    MtsfGs,
}

impl SmoothMethod {
    pub fn uses_m(self) -> bool {
        self != SmoothMethod::Exact
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SyncMethod {
    Exact,
    Cg,
    CgDiag,
    MtsfRb,
    MtsfGs,
    Ust,
    Mst,
    Adjacency,
}

impl SyncMethod {
    pub fn uses_m(self) -> bool {
        matches!(
            self,
            SyncMethod::Cg | SyncMethod::CgDiag | SyncMethod::MtsfRb | SyncMethod::MtsfGs
        )
    }

    pub fn iterative(self) -> bool {
        !matches!(self, SyncMethod::Ust | SyncMethod::Mst)
    }
}

pub fn walk(seed: u64, importance: bool) -> WalkConfig {
    let mode = if importance {
        SamplingMode::Importance
    } else {
        SamplingMode::Exact
    };
    WalkConfig::with_seed(seed).mode(mode)
}

/// One single-threaded smoothing run. CG arms stop after `m` iterations.
pub fn smooth_once(
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    method: SmoothMethod,
    m: usize,
    seed: u64,
    importance: bool,
) -> Result<ComplexSignal> {
    let mtsf = |estimator: EstimatorKind| -> Result<ComplexSignal> {
        let cfg = SmootherConfig::new(m, estimator, walk(seed, importance));
        Ok(MtsfSmoother::new(problem, cfg)?.smooth(g)?.estimate)
    };
    let cg =
        |pre: Preconditioner| -> Result<ComplexSignal> { Ok(solve_cg(problem, g, &CgOptions::new(m, pre))?.solution) };
    match method {
        SmoothMethod::Exact => Ok(mtsf::solve_exact(problem, g)?),
        SmoothMethod::Cg => cg(Preconditioner::None),
        SmoothMethod::CgDiag => cg(Preconditioner::Diagonal),
        SmoothMethod::Mtsf => mtsf(EstimatorKind::Tilde),
        SmoothMethod::MtsfRb => mtsf(EstimatorKind::RaoBlackwell),
        SmoothMethod::MtsfGs => mtsf(EstimatorKind::gradient_step()),
    }
}

/// Runs once to warm up, then times a second identical run.
pub fn timed<T>(mut f: impl FnMut() -> Result<T>) -> Result<(T, Duration)> {
    f()?;
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

pub struct SyncRun {
    pub method: SyncMethod,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub importance: bool,
    pub componentwise: bool,
    pub reuse: bool,
}

pub enum SyncOutcome {
    Iterated(SyncResult),
    Baseline(ComplexSignal, Duration),
}

impl SyncOutcome {
    /// Final phases scaled to entries of unit average modulus.
    pub fn signal(&self) -> ComplexSignal {
        match self {
            SyncOutcome::Iterated(r) => r.scaled(),
            SyncOutcome::Baseline(f, _) => f.clone(),
        }
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            SyncOutcome::Iterated(r) => r.history.last().map_or(Duration::ZERO, |s| s.elapsed),
            SyncOutcome::Baseline(_, d) => *d,
        }
    }
}

pub fn start_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

pub fn synchronize(
    problem: &SmoothingProblem<'_>,
    run: &SyncRun,
    truth: Option<&ComplexSignal>,
) -> Result<SyncOutcome> {
    let graph: &ConnectionGraph = problem.graph();
    let mut rng = start_rng(run.seed);
    let smoother = match run.method {
        SyncMethod::Ust => {
            let start = Instant::now();
            let f = sync_ust_baseline(graph, &mut rng)?;
            return Ok(SyncOutcome::Baseline(f, start.elapsed()));
        }
        SyncMethod::Mst => {
            let start = Instant::now();
            let f = sync_mst_baseline(graph)?;
            return Ok(SyncOutcome::Baseline(f, start.elapsed()));
        }
        SyncMethod::Adjacency => {
            let f0 = random_start(graph.n_nodes(), &mut rng);
            return Ok(SyncOutcome::Iterated(power_iterate_adjacency(
                graph, run.k, &f0, truth,
            )?));
        }
        SyncMethod::Exact => SyncSmoother::Exact,
        SyncMethod::Cg => SyncSmoother::Cg { iters: run.m },
        SyncMethod::CgDiag => SyncSmoother::CgDiag { iters: run.m },
        SyncMethod::MtsfRb => SyncSmoother::MtsfRb { m: run.m },
        SyncMethod::MtsfGs => SyncSmoother::MtsfGs { m: run.m },
    };
    if run.k == 0 {
        bail!("k must be at least 1");
    }
    let mut options = SyncOptions::new(smoother, run.k).seed(run.seed);
    options.walk = walk(run.seed, run.importance);
    options.componentwise = run.componentwise;
    options.reuse_forests = run.reuse;
    let f0 = random_start(graph.n_nodes(), &mut rng);
    Ok(SyncOutcome::Iterated(mtsf::power_iterate(
        problem, &options, &f0, truth,
    )?))
}
