//! Unbiased forest estimators of `f_* = (L_theta + Q)^{-1} Q g`, the
//! importance-sampling combiner, and root counting for the effective degrees
//! of freedom.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{ConnectionGraph, SmoothingProblem};
use crate::laplacian::SparseHermitianOperator;
use crate::sampler::{random_successor, Component, Mtsf, MtsfSampler, Step, WalkConfig};
use crate::signal::ComplexSignal;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Replicates per work unit in [`MtsfSmoother`]. Fixed so that results do
/// not depend on the thread count.
const CHUNK: usize = 16;

/// Which forest estimator to average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Root value propagated to its tree.
    Tilde,
    /// Tree-wise weighted average propagated from the root.
    RaoBlackwell,
    /// Rao-Blackwell mean followed by one preconditioned gradient step.
    GradientStep { alpha: f64 },
}

impl EstimatorKind {
    pub const DEFAULT_ALPHA: f64 = 1.0;

    pub fn gradient_step() -> Self {
        EstimatorKind::GradientStep {
            alpha: Self::DEFAULT_ALPHA,
        }
    }
}

/// Running (optionally weighted) sum of estimates.
///
/// Weights are kept relative to the largest log weight seen, so long runs of
/// importance weights do not overflow.
#[derive(Debug, Clone)]
pub struct EstimateAccumulator {
    sum: Vec<Complex64>,
    weight_sum: f64,
    log_scale: f64,
    m: usize,
}

impl EstimateAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            sum: vec![ZERO; n],
            weight_sum: 0.0,
            log_scale: 0.0,
            m: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn count(&self) -> usize {
        self.m
    }

    /// Total weight, `m` when all log weights are zero.
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum * self.log_scale.exp()
    }

    /// Relative weight to apply to a replicate with log weight `log_w`,
    /// rescaling the running sums if `log_w` is a new maximum.
    fn admit(&mut self, log_w: f64) -> f64 {
        if log_w > self.log_scale {
            let shrink = (self.log_scale - log_w).exp();
            self.sum.iter_mut().for_each(|z| *z *= shrink);
            self.weight_sum *= shrink;
            self.log_scale = log_w;
        }
        (log_w - self.log_scale).exp()
    }

    /// Adds `exp(log_w) * estimate`.
    pub fn add(&mut self, estimate: &ComplexSignal, log_w: f64) -> Result<()> {
        estimate.check_len(self.len())?;
        let w = self.admit(log_w);
        for (s, z) in self.sum.iter_mut().zip(estimate.iter()) {
            *s += w * z;
        }
        self.weight_sum += w;
        self.m += 1;
        Ok(())
    }

    /// Adds a replicate written by `write`, which receives the running sum
    /// and the weight to scale its contribution by.
    pub fn add_with(&mut self, log_w: f64, write: impl FnOnce(&mut [Complex64], f64)) {
        let w = self.admit(log_w);
        write(&mut self.sum, w);
        self.weight_sum += w;
        self.m += 1;
    }

    pub fn merge(&mut self, mut other: EstimateAccumulator) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        if other.m == 0 {
            return Ok(());
        }
        if self.m == 0 {
            *self = other;
            return Ok(());
        }
        if other.log_scale > self.log_scale {
            std::mem::swap(self, &mut other);
        }
        let w = (other.log_scale - self.log_scale).exp();
        for (s, z) in self.sum.iter_mut().zip(&other.sum) {
            *s += w * z;
        }
        self.weight_sum += w * other.weight_sum;
        self.m += other.m;
        Ok(())
    }

    /// `sum / weight_sum`: the plain mean in exact mode, the self-normalized
    /// importance-sampling mean otherwise.
    pub fn combine(&self) -> Result<ComplexSignal> {
        if !(self.weight_sum > 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(self.sum.iter().map(|z| z / self.weight_sum).collect())
    }
}

/// Adds `scale * f_tilde(mtsf, g)` to `out`.
pub fn accumulate_tilde(mtsf: &Mtsf, g: &[Complex64], scale: f64, out: &mut [Complex64]) {
    for (i, o) in out.iter_mut().enumerate() {
        if let Component::Tree { root } = mtsf.component[i] {
            *o += Complex64::from_polar(scale, mtsf.rotation[i]) * g[root];
        }
    }
}

/// Per-root scratch for the Rao-Blackwell estimator.
#[derive(Debug, Clone, Default)]
pub struct RbScratch {
    num: Vec<Complex64>,
    den: Vec<f64>,
}

/// Adds `scale * f_bar(mtsf, g)` to `out`.
pub fn accumulate_rao_blackwell(
    mtsf: &Mtsf,
    g: &[Complex64],
    q: &[f64],
    scratch: &mut RbScratch,
    scale: f64,
    out: &mut [Complex64],
) {
    let n = mtsf.n_nodes();
    scratch.num.clear();
    scratch.num.resize(n, ZERO);
    scratch.den.clear();
    scratch.den.resize(n, 0.0);
    for j in 0..n {
        if let Component::Tree { root } = mtsf.component[j] {
            scratch.num[root] += Complex64::from_polar(q[j], -mtsf.rotation[j]) * g[j];
            scratch.den[root] += q[j];
        }
    }
    for &r in &mtsf.roots {
        scratch.num[r] /= scratch.den[r];
    }
    for (i, o) in out.iter_mut().enumerate() {
        if let Component::Tree { root } = mtsf.component[i] {
            *o += Complex64::from_polar(scale, mtsf.rotation[i]) * scratch.num[root];
        }
    }
}

fn check_forest(mtsf: &Mtsf, g: &ComplexSignal) -> Result<()> {
    g.check_len(mtsf.n_nodes())
}

/// `exp(i rot_i) g(root_i)` on tree nodes, zero on unicycles.
pub fn estimate_tilde(mtsf: &Mtsf, g: &ComplexSignal) -> Result<ComplexSignal> {
    check_forest(mtsf, g)?;
    let mut out = vec![ZERO; g.len()];
    accumulate_tilde(mtsf, g.as_slice(), 1.0, &mut out);
    Ok(out.into())
}

/// Propagates from each root the `q`-weighted average of `g` over its tree,
/// each term rotated to the root. Zero on unicycles.
pub fn estimate_rao_blackwell(mtsf: &Mtsf, g: &ComplexSignal, q: &[f64]) -> Result<ComplexSignal> {
    check_forest(mtsf, g)?;
    if q.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: q.len(),
        });
    }
    let mut out = vec![ZERO; g.len()];
    accumulate_rao_blackwell(mtsf, g.as_slice(), q, &mut RbScratch::default(), 1.0, &mut out);
    Ok(out.into())
}

/// `f_bar - alpha (D + Q)^{-1} ((L_theta + Q) f_bar - Q g)`.
pub fn estimate_gradient_step(
    f_bar: &ComplexSignal,
    g: &ComplexSignal,
    problem: &SmoothingProblem<'_>,
    alpha: f64,
) -> Result<ComplexSignal> {
    let op = SparseHermitianOperator::regularized(problem);
    gradient_step_with(&op, f_bar, g, problem, alpha)
}

pub(crate) fn gradient_step_with(
    op: &SparseHermitianOperator,
    f_bar: &ComplexSignal,
    g: &ComplexSignal,
    problem: &SmoothingProblem<'_>,
    alpha: f64,
) -> Result<ComplexSignal> {
    let n = problem.n_nodes();
    f_bar.check_len(n)?;
    g.check_len(n)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be nonnegative, got {alpha}"
        )));
    }
    if let Some(i) = op.diagonal().iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let lf = op.matvec(f_bar)?;
    Ok((0..n)
        .map(|i| {
            let residual = lf[i] - problem.q_at(i) * g[i];
            f_bar[i] - alpha * residual / op.diagonal()[i]
        })
        .collect())
}

/// Mean over `m` killed walks from `i` of `g` at the last node before the
/// boundary, rotated back along the walk.
pub fn feynman_kac_point<R: Rng + ?Sized>(
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    i: usize,
    m: usize,
    rng: &mut R,
) -> Result<Complex64> {
    let graph = problem.graph();
    g.check_len(graph.n_nodes())?;
    if i >= graph.n_nodes() {
        return Err(Error::NodeOutOfRange {
            node: i,
            n_nodes: graph.n_nodes(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one walk".into()));
    }
    let comps = graph.components();
    if !(0..graph.n_nodes()).any(|v| comps[v] == comps[i] && problem.q_at(v) > 0.0) {
        return Err(Error::StalledWalk(i));
    }
    let mut total = ZERO;
    for _ in 0..m {
        let mut u = i;
        let mut angle = 0.0;
        while let Step::Neighbor { node, angle: theta } = random_successor(graph, u, problem.q_at(u), rng)? {
            angle += theta;
            u = node;
        }
        total += Complex64::from_polar(1.0, -angle) * g[u];
    }
    Ok(total / m as f64)
}

/// Root-count estimate of the effective degrees of freedom
/// `tr((L_theta + Q)^{-1} Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub m: usize,
}

/// Mean number of roots over `m` forests sampled with `cfg`. In importance
/// mode the mean is self-normalized by the forest weights.
pub fn estimate_dof(problem: &SmoothingProblem<'_>, m: usize, cfg: &WalkConfig) -> Result<DofEstimate> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut sampler = MtsfSampler::new(problem, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut forest = Mtsf::default();
    let mut draws = Vec::with_capacity(m);
    for _ in 0..m {
        sampler.sample_into(&mut rng, &mut forest)?;
        draws.push((forest.log_weight, forest.n_roots() as f64));
    }
    let top = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = draws.iter().map(|d| (d.0 - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(&draws).map(|(w, d)| w * d.1).sum::<f64>() / total;
    // Delta-method variance of the ratio estimator; the usual one when all
    // weights are equal.
    let spread: f64 = weights
        .iter()
        .zip(&draws)
        .map(|(w, d)| (w * (d.1 - mean)).powi(2))
        .sum();
    let std_error = if m > 1 {
        (spread / (total * total) * m as f64 / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(DofEstimate { mean, std_error, m })
}

/// Generator for replicate `k` of a run seeded with `seed`. Every replicate
/// has its own stream, so results are the same sequentially or in parallel.
pub fn replicate_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

#[derive(Debug, Clone)]
pub struct SmootherConfig {
    pub m: usize,
    pub estimator: EstimatorKind,
    pub walk: WalkConfig,
    pub parallel: bool,
}

impl SmootherConfig {
    pub fn new(m: usize, estimator: EstimatorKind, walk: WalkConfig) -> Self {
        Self {
            m,
            estimator,
            walk,
            parallel: false,
        }
    }
}

/// Result of a Monte-Carlo smoothing run.
#[derive(Debug, Clone)]
pub struct SmoothingEstimate {
    pub estimate: ComplexSignal,
    pub m: usize,
    pub weight_sum: f64,
    /// Mean root count, an estimate of the degrees of freedom.
    pub mean_roots: f64,
    /// Mean number of successor calls per forest.
    pub mean_steps: f64,
}

struct Partial {
    acc: EstimateAccumulator,
    roots: f64,
    steps: f64,
}

/// Averages forest estimators over `m` sampled forests.
pub struct MtsfSmoother<'p, 'g> {
    problem: &'p SmoothingProblem<'g>,
    op: SparseHermitianOperator,
    config: SmootherConfig,
}

impl<'p, 'g> MtsfSmoother<'p, 'g> {
    pub fn new(problem: &'p SmoothingProblem<'g>, config: SmootherConfig) -> Result<Self> {
        if config.m == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        if let EstimatorKind::GradientStep { alpha } = config.estimator {
            if !(alpha >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "step size must be nonnegative, got {alpha}"
                )));
            }
        }
        // Fail early on problems the sampler rejects.
        MtsfSampler::new(problem, &config.walk)?;
        Ok(Self {
            problem,
            op: SparseHermitianOperator::regularized(problem),
            config,
        })
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.config
    }

    /// Smooths `g` with replicates seeded from `seed`.
    pub fn smooth_seeded(&self, g: &ComplexSignal, seed: u64) -> Result<SmoothingEstimate> {
        let n = self.problem.n_nodes();
        g.check_len(n)?;
        let m = self.config.m;
        let chunks = m.div_ceil(CHUNK);
        let run = |c: usize| self.run_chunk(g, seed, c * CHUNK, ((c + 1) * CHUNK).min(m));
        let partials: Vec<Result<Partial>> = if self.config.parallel {
            (0..chunks).into_par_iter().map(run).collect()
        } else {
            (0..chunks).map(run).collect()
        };
        let mut acc = EstimateAccumulator::new(n);
        let (mut roots, mut steps) = (0.0, 0.0);
        for p in partials {
            let p = p?;
            acc.merge(p.acc)?;
            roots += p.roots;
            steps += p.steps;
        }
        let mut estimate = acc.combine()?;
        if let EstimatorKind::GradientStep { alpha } = self.config.estimator {
            estimate = gradient_step_with(&self.op, &estimate, g, self.problem, alpha)?;
        }
        Ok(SmoothingEstimate {
            estimate,
            m,
            weight_sum: acc.weight_sum(),
            mean_roots: roots / m as f64,
            mean_steps: steps / m as f64,
        })
    }

    /// Smooths `g` with the configured seed.
    pub fn smooth(&self, g: &ComplexSignal) -> Result<SmoothingEstimate> {
        self.smooth_seeded(g, self.config.walk.seed)
    }

    fn run_chunk(&self, g: &ComplexSignal, seed: u64, lo: usize, hi: usize) -> Result<Partial> {
        let mut sampler = MtsfSampler::new(self.problem, &self.config.walk)?;
        let mut acc = EstimateAccumulator::new(g.len());
        let mut forest = Mtsf::default();
        let mut scratch = RbScratch::default();
        let q = self.problem.q();
        let (mut roots, mut steps) = (0.0, 0.0);
        for k in lo..hi {
            let mut rng = replicate_rng(seed, k as u64);
            sampler.sample_into(&mut rng, &mut forest)?;
            roots += forest.n_roots() as f64;
            steps += forest.steps as f64;
            let g = g.as_slice();
            match self.config.estimator {
                EstimatorKind::Tilde => acc.add_with(forest.log_weight, |sum, w| accumulate_tilde(&forest, g, w, sum)),
                EstimatorKind::RaoBlackwell | EstimatorKind::GradientStep { .. } => acc
                    .add_with(forest.log_weight, |sum, w| {
                        accumulate_rao_blackwell(&forest, g, q, &mut scratch, w, sum)
                    }),
            }
        }
        Ok(Partial { acc, roots, steps })
    }
}

/// Signal fed to the degree-scaled problem when smoothing with the
/// normalized Laplacian: `D^{-1/2} g`.
pub fn normalized_input(graph: &ConnectionGraph, g: &ComplexSignal) -> Result<ComplexSignal> {
    g.check_len(graph.n_nodes())?;
    (0..graph.n_nodes())
        .map(|i| match graph.degree(i) {
            d if d > 0.0 => Ok(g[i] / d.sqrt()),
            _ => Err(Error::IsolatedNode(i)),
        })
        .collect()
}

/// Maps a solution of the degree-scaled problem back: `D^{1/2} f`.
pub fn normalized_output(graph: &ConnectionGraph, f: &ComplexSignal) -> Result<ComplexSignal> {
    f.check_len(graph.n_nodes())?;
    Ok((0..graph.n_nodes()).map(|i| f[i] * graph.degree(i).sqrt()).collect())
}

/// Monte-Carlo estimate of `q (L_norm + q I)^{-1} g` through the problem
/// with `Q = q D`.
pub fn smooth_normalized(
    graph: &ConnectionGraph,
    q: f64,
    g: &ComplexSignal,
    config: SmootherConfig,
) -> Result<ComplexSignal> {
    let problem = SmoothingProblem::degree_scaled(graph, q)?;
    let input = normalized_input(graph, g)?;
    let out = MtsfSmoother::new(&problem, config)?.smooth(&input)?;
    normalized_output(graph, &out.estimate)
}

#[cfg(test)]
mod tests;
