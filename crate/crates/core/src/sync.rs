//! Angular synchronization: regularized inverse power iteration with a
//! pluggable smoother, and spanning-tree propagation baselines.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, MtsfSmoother, SmootherConfig};
use crate::graph::{ConnectionGraph, SmoothingProblem};
use crate::laplacian::SparseHermitianOperator;
use crate::sampler::WalkConfig;
use crate::signal::ComplexSignal;
use crate::solvers::{solve_cg_with, CgOptions, ExactSolver, Preconditioner};

/// How each `(L_theta + Q)^{-1} f` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyncSmoother {
    Exact,
    /// Conjugate gradient with a fixed iteration count.
    Cg {
        iters: usize,
    },
    /// Diagonally preconditioned conjugate gradient.
    CgDiag {
        iters: usize,
    },
    /// Rao-Blackwell average over `m` forests.
    MtsfRb {
        m: usize,
    },
    /// Rao-Blackwell average followed by a gradient step.
    MtsfGs {
        m: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SyncOptions {
    pub smoother: SyncSmoother,
    /// Number of power iterations.
    pub k: usize,
    pub walk: WalkConfig,
    /// Normalize every entry to unit modulus before the global rescaling.
    pub componentwise: bool,
    /// Sample the same forests at every iteration instead of fresh ones.
    pub reuse_forests: bool,
    pub parallel: bool,
}

impl SyncOptions {
    pub fn new(smoother: SyncSmoother, k: usize) -> Self {
        Self {
            smoother,
            k,
            walk: WalkConfig::default(),
            componentwise: false,
            reuse_forests: false,
            parallel: false,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.walk.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncStep {
    pub k: usize,
    /// Time since the start of the iteration, excluding error evaluation.
    pub elapsed: Duration,
    /// `e_s(sqrt(n) f_k)` when a ground truth was supplied.
    pub error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SyncResult {
    /// Final iterate, of unit norm.
    pub f: ComplexSignal,
    pub history: Vec<SyncStep>,
    pub k: usize,
}

impl SyncResult {
    /// The iterate rescaled to norm `sqrt(n)`, comparable with unit-modulus
    /// phase assignments.
    pub fn scaled(&self) -> ComplexSignal {
        self.f.scale_real((self.f.len() as f64).sqrt())
    }
}

/// Synchronization error and whether the optimal phase was undetermined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncError {
    pub value: f64,
    pub degenerate: bool,
}

/// `min_r |f - r x| / n` over unit complex `r`. The minimizer is the phase
/// of `<x, f>`; when that vanishes every phase is optimal and `r = 1` is used.
pub fn sync_error(f: &ComplexSignal, x: &ComplexSignal) -> Result<SyncError> {
    f.check_len(x.len())?;
    let n = f.len() as f64;
    let c = x.dot(f);
    let scale = f.norm() * x.norm();
    let degenerate = c.norm() <= 1e-14 * scale;
    let r = if degenerate {
        Complex64::new(1.0, 0.0)
    } else {
        c / c.norm()
    };
    Ok(SyncError {
        value: f.distance(&x.scale(r)) / n,
        degenerate,
    })
}

/// Unit-modulus entries with uniform phases, scaled to unit norm.
pub fn random_start<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexSignal {
    let phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    ComplexSignal::from_phases(&phases).scale_real(1.0 / (n as f64).sqrt())
}

fn iteration_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

enum Engine<'p, 'g> {
    Exact(ExactSolver),
    Cg(SparseHermitianOperator, CgOptions),
    Mtsf(MtsfSmoother<'p, 'g>),
}

fn normalize(f: &mut ComplexSignal, componentwise: bool, r: usize) -> Result<()> {
    if componentwise {
        for z in f.as_mut_slice() {
            let m = z.norm();
            if m > 0.0 {
                *z /= m;
            }
        }
    }
    let norm = f.norm();
    if !(norm > 1e-300 && norm.is_finite()) {
        return Err(Error::ZeroIterate(r));
    }
    *f = f.scale_real(norm.recip());
    Ok(())
}

/// Runs `f_{r+1} = S f_r / |S f_r|` with `S = (L_theta + Q)^{-1} Q` for
/// `options.k` steps. At uniform `q` this is inverse power iteration on
/// `L_theta`. A problem built with [`SmoothingProblem::degree_scaled`] gives
/// the normalized-Laplacian variant, whose fixed points solve
/// `L_theta f = lambda D f`.
pub fn power_iterate(
    problem: &SmoothingProblem<'_>,
    options: &SyncOptions,
    f0: &ComplexSignal,
    truth: Option<&ComplexSignal>,
) -> Result<SyncResult> {
    let n = problem.n_nodes();
    f0.check_len(n)?;
    if let Some(x) = truth {
        x.check_len(n)?;
    }
    if options.k == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let mtsf = |m: usize, estimator: EstimatorKind| -> Result<Engine<'_, '_>> {
        let mut cfg = SmootherConfig::new(m, estimator, options.walk.clone());
        cfg.parallel = options.parallel;
        Ok(Engine::Mtsf(MtsfSmoother::new(problem, cfg)?))
    };
    let cg = |iters: usize, pre: Preconditioner| {
        Engine::Cg(
            SparseHermitianOperator::regularized(problem),
            CgOptions::new(iters, pre),
        )
    };
    let clock = Instant::now();
    let engine = match options.smoother {
        SyncSmoother::Exact => Engine::Exact(ExactSolver::new(problem)?),
        SyncSmoother::Cg { iters } => cg(iters, Preconditioner::None),
        SyncSmoother::CgDiag { iters } => cg(iters, Preconditioner::Diagonal),
        SyncSmoother::MtsfRb { m } => mtsf(m, EstimatorKind::RaoBlackwell)?,
        SyncSmoother::MtsfGs { m } => mtsf(m, EstimatorKind::gradient_step())?,
    };

    let mut f = f0.clone();
    normalize(&mut f, false, 0)?;
    let mut history = Vec::with_capacity(options.k);
    let mut paused = Duration::ZERO;
    for r in 1..=options.k {
        f = match &engine {
            Engine::Exact(s) => s.smooth(&f)?,
            Engine::Cg(op, opts) => solve_cg_with(op, problem, &f, f.clone(), opts)?.solution,
            Engine::Mtsf(s) => {
                let seed = if options.reuse_forests {
                    options.walk.seed
                } else {
                    iteration_seed(options.walk.seed, r)
                };
                s.smooth_seeded(&f, seed)?.estimate
            }
        };
        normalize(&mut f, options.componentwise, r)?;
        let elapsed = clock.elapsed() - paused;
        let error = match truth {
            Some(x) => {
                let t = Instant::now();
                let e = sync_error(&f.scale_real((n as f64).sqrt()), x)?.value;
                paused += t.elapsed();
                Some(e)
            }
            None => None,
        };
        history.push(SyncStep { k: r, elapsed, error });
    }
    Ok(SyncResult {
        f,
        history,
        k: options.k,
    })
}

/// Power iteration on `A_theta + d_max I`, which converges to the top
/// eigenvector of `A_theta`.
pub fn power_iterate_adjacency(
    graph: &ConnectionGraph,
    k: usize,
    f0: &ComplexSignal,
    truth: Option<&ComplexSignal>,
) -> Result<SyncResult> {
    let n = graph.n_nodes();
    f0.check_len(n)?;
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let op = SparseHermitianOperator::adjacency(graph);
    let shift = graph.max_degree();
    let clock = Instant::now();
    let mut f = f0.clone();
    normalize(&mut f, false, 0)?;
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    let mut history = Vec::with_capacity(k);
    let mut paused = Duration::ZERO;
    for r in 1..=k {
        op.matvec_into(f.as_slice(), &mut next)?;
        for (y, x) in next.iter_mut().zip(f.iter()) {
            *y += shift * x;
        }
        f = ComplexSignal::new(next.clone());
        normalize(&mut f, false, r)?;
        let elapsed = clock.elapsed() - paused;
        let error = match truth {
            Some(x) => {
                let t = Instant::now();
                let e = sync_error(&f.scale_real((n as f64).sqrt()), x)?.value;
                paused += t.elapsed();
                Some(e)
            }
            None => None,
        };
        history.push(SyncStep { k: r, elapsed, error });
    }
    Ok(SyncResult { f, history, k })
}

/// Phases obtained by moving the value 1 at the root outwards along a
/// spanning tree given by parent pointers.
fn propagate(graph: &ConnectionGraph, parent: &[Option<usize>], root: usize) -> ComplexSignal {
    let n = graph.n_nodes();
    let mut children = vec![Vec::new(); n];
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(v);
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[root] = Complex64::new(1.0, 0.0);
    let mut stack = vec![root];
    while let Some(p) = stack.pop() {
        for &c in &children[p] {
            let theta = graph.angle(p, c).expect("tree edge");
            out[c] = out[p] * Complex64::from_polar(1.0, theta);
            stack.push(c);
        }
    }
    ComplexSignal::new(out)
}

/// Propagates phases along a uniform spanning tree drawn with Wilson's
/// algorithm, rooted at node 0.
pub fn sync_ust_baseline<R: Rng + ?Sized>(graph: &ConnectionGraph, rng: &mut R) -> Result<ComplexSignal> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.n_nodes();
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    in_tree[0] = true;
    for start in 1..n {
        let mut u = start;
        while !in_tree[u] {
            let (v, _) = graph.pick_neighbor(u, rng.random::<f64>() * graph.degree(u));
            next[u] = v;
            u = v;
        }
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            parent[u] = Some(next[u]);
            u = next[u];
        }
    }
    Ok(propagate(graph, &parent, 0))
}

/// Propagates phases along a maximum spanning tree for the weights
/// `|cos theta_e|`, rooted at node 0. Ties go to the lower edge index.
pub fn sync_mst_baseline(graph: &ConnectionGraph) -> Result<ComplexSignal> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.n_nodes();
    let edges = graph.edges();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| edges[b].angle.cos().abs().total_cmp(&edges[a].angle.cos().abs()));
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut adj = vec![Vec::new(); n];
    for e in order.into_iter().map(|k| &edges[k]) {
        let (a, b) = (find(&mut uf, e.source), find(&mut uf, e.target));
        if a != b {
            uf[a] = b;
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }
    Ok(propagate(graph, &parent, 0))
}
