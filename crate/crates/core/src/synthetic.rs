//! Random graph models, the noisy connection model, and band-limited test
//! signals.
//!
//! Generators return a [`Skeleton`]: an unweighted simple graph restricted to
//! its largest connected component, with node ids relabeled to `0..n`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::dense::{check_dense_cap, hermitian_eigen};
use crate::error::{Error, Result};
use crate::graph::{wrap_angle, ConnectionGraph, Edge};
use crate::laplacian::SparseHermitianOperator;
use crate::signal::ComplexSignal;

/// Undirected simple graph without a connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub n_nodes: usize,
    /// Edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Block label of each node (all zero for unstructured models).
    pub labels: Vec<usize>,
    /// Node id in the generated graph before cleanup.
    pub original: Vec<usize>,
}

impl Skeleton {
    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n_nodes as f64
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// The skeleton with every angle set to zero.
    pub fn to_graph(&self) -> Result<ConnectionGraph> {
        let edges: Vec<Edge> = self.edges.iter().map(|&(i, j)| Edge::unit(i, j, 0.0)).collect();
        ConnectionGraph::build(self.n_nodes, &edges)
    }

    /// Keeps the largest connected component (smallest first node on ties)
    /// and relabels it. Isolated nodes disappear along the way.
    fn largest_component(n: usize, edges: Vec<(usize, usize)>, labels: Vec<usize>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j) in &edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut size = vec![0usize; n];
        for &r in &roots {
            size[r] += 1;
        }
        let best = (0..n).max_by_key(|&r| (size[r], std::cmp::Reverse(r))).unwrap();
        let mut new_id = vec![usize::MAX; n];
        let mut original = Vec::with_capacity(size[best]);
        for i in 0..n {
            if roots[i] == best {
                new_id[i] = original.len();
                original.push(i);
            }
        }
        let mut kept: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|&(i, _)| roots[i] == best)
            .map(|(i, j)| (new_id[i], new_id[j]))
            .collect();
        kept.sort_unstable();
        Ok(Self {
            n_nodes: original.len(),
            edges: kept,
            labels: original.iter().map(|&i| labels[i]).collect(),
            original,
        })
    }
}

/// Erdős-Rényi graph with edge probability `mean_degree / (n - 1)`.
pub fn gen_er<R: Rng + ?Sized>(n: usize, mean_degree: f64, rng: &mut R) -> Result<Skeleton> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if !(mean_degree > 0.0 && mean_degree <= (n - 1) as f64) {
        return Err(Error::InvalidParameter(format!(
            "mean degree must lie in (0, {}], got {mean_degree}",
            n - 1
        )));
    }
    let p = mean_degree / (n - 1) as f64;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Skeleton::largest_component(n, edges, vec![0; n])
}

/// Normal mixture with components given as `(weight, mean, variance)`,
/// conditioned on positive draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMixture {
    pub components: Vec<(f64, f64, f64)>,
}

impl ConnectivityMixture {
    pub fn new(components: Vec<(f64, f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture has no components".into()));
        }
        for &(w, mean, var) in &components {
            if !(w >= 0.0 && var > 0.0 && mean.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bad mixture component (weight {w}, mean {mean}, variance {var})"
                )));
            }
        }
        if components.iter().all(|c| c.0 == 0.0) {
            return Err(Error::InvalidParameter("mixture weights are all zero".into()));
        }
        Ok(Self { components })
    }

    /// Mean of the mixture restricted to `(0, inf)`.
    pub fn positive_mean(&self) -> f64 {
        let (mut mass, mut first) = (0.0, 0.0);
        for &(w, mean, var) in &self.components {
            let sd = var.sqrt();
            let std = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
            let alpha = -mean / sd;
            let tail = std.sf(alpha);
            mass += w * tail;
            first += w * (mean * tail + sd * std.pdf(alpha));
        }
        first / mass
    }

    /// `count` connectivity parameters with mean one in expectation.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let pick = WeightedIndex::new(self.components.iter().map(|c| c.0)).expect("validated weights");
        let normals: Vec<Normal<f64>> = self
            .components
            .iter()
            .map(|&(_, mean, var)| Normal::new(mean, var.sqrt()).expect("validated variance"))
            .collect();
        let scale = self.positive_mean();
        (0..count)
            .map(|_| loop {
                let x = normals[pick.sample(rng)].sample(rng);
                if x > 0.0 {
                    break x / scale;
                }
            })
            .collect()
    }
}

/// Block model: `p_ij = min(theta_i theta_j c[k][l] / n, 1)` with
/// `theta = 1` unless a connectivity mixture is given.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    pub sizes: Vec<usize>,
    pub c: Vec<Vec<f64>>,
    pub connectivity: Option<ConnectivityMixture>,
}

impl BlockModel {
    fn two_blocks(n: usize, within: f64, between: f64, connectivity: Option<ConnectivityMixture>) -> Self {
        Self {
            sizes: vec![n / 2, n - n / 2],
            c: vec![vec![within, between], vec![between, within]],
            connectivity,
        }
    }

    /// Two-block SBM with mean degree 40.
    pub fn sbm(n: usize) -> Self {
        Self::two_blocks(n, 72.0, 8.0, None)
    }

    /// Sparse degree-corrected model with a heavy-tailed degree distribution.
    pub fn dcsbm1(n: usize) -> Self {
        let mix =
            ConnectivityMixture::new(vec![(0.59, 50.0, 20.0), (0.4, 500.0, 100.0), (0.01, 10000.0, 100.0)]).unwrap();
        Self::two_blocks(n, 72.0, 8.0, Some(mix))
    }

    /// Dense degree-corrected model, about ten times the degree of
    /// [`BlockModel::dcsbm1`].
    pub fn dcsbm2(n: usize) -> Self {
        let mix = ConnectivityMixture::new(vec![
            (0.45, 50.0, 20.0),
            (0.1, 1000.0, 50.0),
            (0.44, 5000.0, 100.0),
            (0.01, 10000.0, 100.0),
        ])
        .unwrap();
        Self::two_blocks(n, 960.0, 40.0, Some(mix))
    }

    /// Multiplies every `c` entry by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for row in &mut self.c {
            for x in row {
                *x *= factor;
            }
        }
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn labels(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    /// Expected mean degree before cleanup, given connectivity parameters
    /// `theta` (all ones for a plain block model).
    pub fn expected_mean_degree(&self, theta: &[f64]) -> Result<f64> {
        self.validate()?;
        let n = self.n_nodes();
        if theta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: theta.len(),
            });
        }
        let labels = self.labels();
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += (theta[i] * theta[j] * self.c[labels[i]][labels[j]] / n as f64).min(1.0);
            }
        }
        Ok(2.0 * total / n as f64)
    }

    fn validate(&self) -> Result<()> {
        let k = self.sizes.len();
        if k == 0 || self.sizes.contains(&0) {
            return Err(Error::InvalidParameter("block sizes must be positive".into()));
        }
        if self.c.len() != k || self.c.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidParameter(format!("c must be {k} x {k}")));
        }
        for a in 0..k {
            for b in 0..k {
                let x = self.c[a][b];
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "c[{a}][{b}] = {x} must be nonnegative"
                    )));
                }
                if x != self.c[b][a] {
                    return Err(Error::InvalidParameter("c must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Skeleton> {
        self.validate()?;
        let n = self.n_nodes();
        let labels = self.labels();
        let theta = match &self.connectivity {
            Some(mix) => mix.sample(n, rng),
            None => vec![1.0; n],
        };
        let nf = n as f64;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = (theta[i] * theta[j] * self.c[labels[i]][labels[j]] / nf).min(1.0);
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Skeleton::largest_component(n, edges, labels)
    }
}

/// Stochastic block model with blocks of the given sizes.
pub fn gen_sbm<R: Rng + ?Sized>(sizes: &[usize], c: &[Vec<f64>], rng: &mut R) -> Result<Skeleton> {
    BlockModel {
        sizes: sizes.to_vec(),
        c: c.to_vec(),
        connectivity: None,
    }
    .generate(rng)
}

/// Degree-corrected block model.
pub fn gen_dcsbm<R: Rng + ?Sized>(
    sizes: &[usize],
    c: &[Vec<f64>],
    connectivity: ConnectivityMixture,
    rng: &mut R,
) -> Result<Skeleton> {
    BlockModel {
        sizes: sizes.to_vec(),
        c: c.to_vec(),
        connectivity: Some(connectivity),
    }
    .generate(rng)
}

/// Random geometric graph on `n` uniform points of the unit cube, with an
/// edge whenever two points are closer than `radius`.
pub fn gen_eps_graph<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Result<Skeleton> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum();
            if d2 < r2 {
                edges.push((i, j));
            }
        }
    }
    Skeleton::largest_component(n, edges, vec![0; n])
}

/// A connection drawn from a known phase assignment.
#[derive(Debug, Clone)]
pub struct SyntheticConnection {
    pub graph: ConnectionGraph,
    /// Ground-truth phase of every node, in `[0, 2 pi)`.
    pub omega: Vec<f64>,
    /// Whether `eta <= pi / (2n)`, which makes every cycle weakly
    /// inconsistent.
    pub weakly_inconsistent: bool,
}

impl SyntheticConnection {
    /// Ground-truth signal `x_i = e^{i omega_i}`.
    pub fn truth(&self) -> ComplexSignal {
        ComplexSignal::from_phases(&self.omega)
    }
}

/// `theta_(s,t) = omega_t - omega_s + eta * eps` with `eps` uniform on
/// `[-1, 1]`. All phases are drawn before any edge noise.
pub fn gen_connection<R: Rng + ?Sized>(skeleton: &Skeleton, eta: f64, rng: &mut R) -> Result<SyntheticConnection> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
    }
    let n = skeleton.n_nodes;
    let omega: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let edges: Vec<Edge> = skeleton
        .edges
        .iter()
        .map(|&(s, t)| {
            let eps: f64 = rng.random_range(-1.0..=1.0);
            Edge::unit(s, t, wrap_angle(omega[t] - omega[s] + eta * eps))
        })
        .collect();
    Ok(SyntheticConnection {
        graph: ConnectionGraph::build(n, &edges)?,
        omega,
        weakly_inconsistent: eta <= PI / (2.0 * n as f64),
    })
}

/// Standard complex normal: independent real and imaginary parts of
/// variance 1/2.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sum_{i < b} a_i u_i` over the `b` lowest eigenvectors of `L_theta`, with
/// standard complex normal `a_i`.
pub fn gen_bandlimited<R: Rng + ?Sized>(graph: &ConnectionGraph, b: usize, rng: &mut R) -> Result<ComplexSignal> {
    let n = graph.n_nodes();
    if b == 0 || b > n {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must lie in [1, {n}], got {b}"
        )));
    }
    check_dense_cap(n)?;
    let (_, vectors) = hermitian_eigen(&SparseHermitianOperator::connection_laplacian(graph).to_dense());
    let coeffs: Vec<Complex64> = (0..b).map(|_| complex_normal(rng)).collect();
    Ok((0..n)
        .map(|i| coeffs.iter().enumerate().map(|(k, a)| a * vectors[(i, k)]).sum())
        .collect())
}

/// Adds complex Gaussian noise of per-entry variance `|f|^2 / (n snr)`.
/// An infinite `snr` returns `f` unchanged.
pub fn add_noise<R: Rng + ?Sized>(f: &ComplexSignal, snr: f64, rng: &mut R) -> Result<ComplexSignal> {
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter(format!("snr must be positive, got {snr}")));
    }
    if snr.is_infinite() {
        return Ok(f.clone());
    }
    let sigma = (f.norm_sqr() / (f.len() as f64 * snr)).sqrt();
    Ok(f.iter().map(|z| z + sigma * complex_normal(rng)).collect())
}

/// `node,omega` rows with a header.
pub fn omega_to_csv(omega: &[f64]) -> String {
    let mut out = String::from("node,omega\n");
    for (i, w) in omega.iter().enumerate() {
        out.push_str(&format!("{i},{w:?}\n"));
    }
    out
}

pub fn parse_omega_csv(text: &str) -> Result<Vec<f64>> {
    let mut omega = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.starts_with("node")) {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: k + 1, msg };
        let (node, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected `node,omega`".into()))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad node id: {e}")))?;
        if node != omega.len() {
            return Err(parse_err(format!("expected node {}, got {node}", omega.len())));
        }
        omega.push(value.trim().parse().map_err(|e| parse_err(format!("bad angle: {e}")))?);
    }
    Ok(omega)
}
