//! Multi-type spanning forest sampling by interrupted loop-erased random
//! walks with randomized cycle popping.

mod detector;
mod forest;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use detector::CycleDetection;
pub use forest::{Component, CycleRecord, Mtsf, MtsfKey};

use crate::error::{Error, Result};
use crate::graph::{wrap_angle, ConnectionGraph, SmoothingProblem};
use crate::solvers::ExactSolver;
use detector::Detector;

/// Cycles with `cos(theta_C)` below `-COS_TOLERANCE` are rejected in exact
/// mode.
pub const COS_TOLERANCE: f64 = 1e-9;

/// Default number of multi-counter ids per walk before falling back to a
/// one-counter.
pub const DEFAULT_MAX_COUNTER_IDS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Pop cycles with probability `cos(theta_C)`. Every cycle met must have
    /// a nonnegative cosine.
    #[default]
    Exact,
    /// Pop cycles with probability `max(0, cos(theta_C))` and record the
    /// importance weight of the kept ones.
    Importance,
}

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub mode: SamplingMode,
    pub detection: CycleDetection,
    pub max_counter_ids: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            mode: SamplingMode::Exact,
            detection: CycleDetection::MultiCounter,
            max_counter_ids: DEFAULT_MAX_COUNTER_IDS,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn detection(mut self, detection: CycleDetection) -> Self {
        self.detection = detection;
        self
    }
}

/// Outcome of one step of the killed random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Boundary,
    Neighbor { node: usize, angle: f64 },
}

/// One step from `u`: the boundary with probability `q_u / (d_u + q_u)`,
/// otherwise a neighbor picked proportionally to its edge weight. Consumes
/// exactly one uniform.
#[inline]
pub fn random_successor<R: Rng + ?Sized>(graph: &ConnectionGraph, u: usize, q_u: f64, rng: &mut R) -> Result<Step> {
    let d = graph.degree(u);
    if d == 0.0 && q_u == 0.0 {
        return Err(Error::StalledWalk(u));
    }
    let y = rng.random::<f64>() * (d + q_u);
    if y < q_u {
        return Ok(Step::Boundary);
    }
    let (node, angle) = graph.pick_neighbor(u, y - q_u);
    Ok(Step::Neighbor { node, angle })
}

/// Reusable sampler bound to one problem. Holds the scratch state of the
/// walks; the graph itself is only read.
pub struct MtsfSampler<'p, 'g> {
    problem: &'p SmoothingProblem<'g>,
    mode: SamplingMode,
    spanned: Vec<bool>,
    cum: Vec<f64>,
    pos: Vec<usize>,
    path: Vec<usize>,
    detector: Detector,
}

impl<'p, 'g> MtsfSampler<'p, 'g> {
    pub fn new(problem: &'p SmoothingProblem<'g>, cfg: &WalkConfig) -> Result<Self> {
        check_termination(problem)?;
        let n = problem.n_nodes();
        Ok(Self {
            problem,
            mode: cfg.mode,
            spanned: vec![false; n],
            cum: vec![0.0; n],
            pos: vec![0; n],
            path: Vec::with_capacity(n),
            detector: Detector::new(cfg.detection, n, cfg.max_counter_ids),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Mtsf> {
        let mut out = Mtsf::default();
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }

    /// Samples into `out`, reusing its buffers.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Mtsf) -> Result<()> {
        let graph = self.problem.graph();
        let q = self.problem.q();
        let n = graph.n_nodes();
        out.reset(n);
        self.spanned.fill(false);
        for start in 0..n {
            if self.spanned[start] {
                continue;
            }
            self.path.clear();
            self.path.push(start);
            self.pos[start] = 0;
            self.cum[start] = 0.0;
            self.detector.begin_walk(start);
            loop {
                let u = self.path[self.path.len() - 1];
                out.steps += 1;
                let (v, angle) = match random_successor(graph, u, q[u], rng)? {
                    Step::Boundary => {
                        self.close_at_root(u, out);
                        break;
                    }
                    Step::Neighbor { node, angle } => (node, angle),
                };
                if self.spanned[v] {
                    self.join(u, v, angle, out);
                    break;
                }
                if !self.detector.on_path(v) {
                    self.pos[v] = self.path.len();
                    self.cum[v] = self.cum[u] + angle;
                    self.path.push(v);
                    self.detector.push(v);
                    continue;
                }
                let theta = wrap_angle(self.cum[u] + angle - self.cum[v]);
                let cos = theta.cos();
                if self.mode == SamplingMode::Exact && cos < -COS_TOLERANCE {
                    return Err(Error::IncoherentCycle { angle: theta, cos });
                }
                let x: f64 = rng.random();
                if x < cos {
                    let k = self.pos[v];
                    self.detector.discard_after(&self.path, k);
                    self.path.truncate(k + 1);
                } else {
                    self.keep_cycle(u, v, angle, theta, cos, out);
                    break;
                }
            }
        }
        Ok(())
    }

    fn settle(&mut self, component: Component, end: usize, rotation: impl Fn(usize, f64) -> f64, out: &mut Mtsf) {
        let last = self.path.len() - 1;
        for j in 0..=last {
            let p = self.path[j];
            out.component[p] = component;
            out.rotation[p] = wrap_angle(rotation(j, self.cum[p]));
            out.parent[p] = if j < last {
                Some(self.path[j + 1])
            } else if end == usize::MAX {
                None
            } else {
                Some(end)
            };
            self.spanned[p] = true;
        }
    }

    fn close_at_root(&mut self, u: usize, out: &mut Mtsf) {
        let base = self.cum[u];
        self.settle(Component::Tree { root: u }, usize::MAX, |_, c| c - base, out);
        out.roots.push(u);
    }

    fn join(&mut self, u: usize, v: usize, angle: f64, out: &mut Mtsf) {
        let base = out.rotation[v] - angle - self.cum[u];
        self.settle(out.component[v], v, |_, c| c + base, out);
    }

    fn keep_cycle(&mut self, u: usize, v: usize, angle: f64, theta: f64, cos: f64, out: &mut Mtsf) {
        let m = self.pos[v];
        let (at_anchor, at_end) = (self.cum[v], self.cum[u] + angle);
        self.settle(
            Component::Unicycle { anchor: v },
            v,
            |j, c| if j <= m { c - at_anchor } else { c - at_end },
            out,
        );
        out.cycles.push(CycleRecord {
            anchor: v,
            angle: theta,
        });
        if self.mode == SamplingMode::Importance {
            out.log_weight += (1.0 - cos).max(1.0).ln();
        }
    }
}

/// Draws one forest with a generator seeded from `cfg.seed`.
pub fn sample_mtsf(problem: &SmoothingProblem<'_>, cfg: &WalkConfig) -> Result<Mtsf> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    MtsfSampler::new(problem, cfg)?.sample(&mut rng)
}

/// Rejects problems on which some walk can never stop: an isolated node with
/// `q = 0`, or a connected component with `q = 0` throughout and a
/// consistent connection (every cycle is popped).
fn check_termination(problem: &SmoothingProblem<'_>) -> Result<()> {
    let graph = problem.graph();
    let n = graph.n_nodes();
    let q = problem.q();
    let mut phase: Vec<Option<f64>> = vec![None; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        if phase[s].is_some() {
            continue;
        }
        if graph.degree(s) == 0.0 && q[s] == 0.0 {
            return Err(Error::StalledWalk(s));
        }
        phase[s] = Some(0.0);
        queue.push_back(s);
        let mut any_q = false;
        let mut consistent = true;
        while let Some(u) = queue.pop_front() {
            any_q |= q[u] > 0.0;
            let pu = phase[u].unwrap();
            for nb in graph.neighbors(u) {
                match phase[nb.node] {
                    None => {
                        phase[nb.node] = Some(pu + nb.angle);
                        queue.push_back(nb.node);
                    }
                    Some(pv) => {
                        if wrap_angle(pu + nb.angle - pv).abs() > 1e-9 {
                            consistent = false;
                        }
                    }
                }
            }
        }
        if !any_q && consistent {
            return Err(Error::InvalidRegularization(format!(
                "the component of node {s} has q = 0 everywhere and a consistent connection"
            )));
        }
    }
    Ok(())
}

/// Bound on the expected number of successor calls per forest,
/// `tr((L + Q)^{-1} (D + Q))` with `L` the combinatorial Laplacian.
pub fn expected_steps_bound(problem: &SmoothingProblem<'_>) -> Result<f64> {
    let trivial = problem.graph().trivial_connection();
    let flat = SmoothingProblem::heterogeneous(&trivial, problem.q().to_vec())?;
    let inv = ExactSolver::new(&flat)?.inverse();
    Ok((0..trivial.n_nodes())
        .map(|i| inv[(i, i)].re * (trivial.degree(i) + problem.q_at(i)))
        .sum())
}
