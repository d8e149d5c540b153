//! Exact references for tiny graphs: exhaustive enumeration of multi-type
//! spanning forests, the determinantal kernel over edges and nodes, and exact
//! moments of the forest estimators.
//!
//! Linear algebra here is plain Gaussian elimination, kept separate from the
//! solvers it is used to check.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dense::check_dense_cap;
use crate::error::{Error, Result};
use crate::estimators::{estimate_gradient_step, estimate_rao_blackwell, estimate_tilde, EstimatorKind};
use crate::graph::{ConnectionGraph, SmoothingProblem};
use crate::sampler::{Component, CycleRecord, Mtsf, MtsfKey};
use crate::signal::ComplexSignal;

pub const MAX_ENUM_NODES: usize = 8;
pub const MAX_ENUM_EDGES: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One forest of the catalog. `edges` index into `graph.edges()`.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub roots: Vec<usize>,
    pub edges: Vec<usize>,
    /// Angle of each unicycle's cycle, in one orientation.
    pub cycle_angles: Vec<f64>,
    /// `prod q_r * prod w_e * prod (2 - 2 cos theta_C)`.
    pub weight: f64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct MtsfCatalog {
    pub entries: Vec<CatalogEntry>,
    /// Sum of all weights.
    pub z: f64,
}

impl CatalogEntry {
    pub fn key(&self, graph: &ConnectionGraph) -> MtsfKey {
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&e| {
                let e = graph.edges()[e];
                (e.source.min(e.target), e.source.max(e.target))
            })
            .collect();
        edges.sort_unstable();
        MtsfKey {
            roots: self.roots.clone(),
            edges,
        }
    }

    /// Builds the forest with trees oriented to their roots and each cycle
    /// anchored at its smallest node.
    pub fn to_mtsf(&self, graph: &ConnectionGraph) -> Mtsf {
        let n = graph.n_nodes();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &e in &self.edges {
            let e = graph.edges()[e];
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
        let angle = |a: usize, b: usize| graph.angle(a, b).unwrap();
        let mut out = Mtsf {
            component: vec![Component::Tree { root: usize::MAX }; n],
            parent: vec![None; n],
            rotation: vec![0.0; n],
            roots: self.roots.clone(),
            cycles: Vec::new(),
            log_weight: 0.0,
            steps: 0,
        };
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let grow = |out: &mut Mtsf, seen: &mut Vec<bool>, queue: &mut VecDeque<usize>, comp: Component| {
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        out.component[v] = comp;
                        out.parent[v] = Some(u);
                        out.rotation[v] = out.rotation[u] - angle(v, u);
                        queue.push_back(v);
                    }
                }
            }
        };
        for &r in &self.roots {
            seen[r] = true;
            out.component[r] = Component::Tree { root: r };
            queue.push_back(r);
            grow(&mut out, &mut seen, &mut queue, Component::Tree { root: r });
        }
        // Remaining nodes lie in unicycles. Peel leaves to expose the cycles.
        let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut leaves: Vec<usize> = (0..n).filter(|&v| !seen[v] && deg[v] == 1).collect();
        let mut peeled = seen.clone();
        while let Some(v) = leaves.pop() {
            peeled[v] = true;
            for &u in &adj[v] {
                if !peeled[u] {
                    deg[u] -= 1;
                    if deg[u] == 1 {
                        leaves.push(u);
                    }
                }
            }
        }
        for anchor in 0..n {
            if peeled[anchor] || seen[anchor] {
                continue;
            }
            let comp = Component::Unicycle { anchor };
            let mut cycle = vec![anchor];
            let mut prev = anchor;
            let mut cur = *adj[anchor].iter().filter(|&&v| !peeled[v]).min().unwrap();
            while cur != anchor {
                cycle.push(cur);
                let next = *adj[cur].iter().find(|&&v| !peeled[v] && v != prev).unwrap();
                prev = cur;
                cur = next;
            }
            let len = cycle.len();
            let mut total = 0.0;
            for k in (0..len).rev() {
                let (a, b) = (cycle[k], cycle[(k + 1) % len]);
                out.parent[a] = Some(b);
                out.component[a] = comp;
                seen[a] = true;
                if k > 0 {
                    total += angle(a, b);
                    out.rotation[a] = -total;
                }
            }
            let theta = crate::graph::wrap_angle(total + angle(anchor, cycle[1]));
            out.cycles.push(CycleRecord { anchor, angle: theta });
            queue.extend(cycle.iter().copied());
            grow(&mut out, &mut seen, &mut queue, comp);
        }
        for r in out.rotation.iter_mut() {
            *r = crate::graph::wrap_angle(*r);
        }
        out
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Lists every multi-type spanning forest with its weight and probability.
/// Forests of weight zero (roots with `q = 0`, consistent cycles) are kept.
pub fn enumerate_mtsfs(problem: &SmoothingProblem<'_>) -> Result<MtsfCatalog> {
    let graph = problem.graph();
    let (n, m) = (graph.n_nodes(), graph.n_edges());
    if n > MAX_ENUM_NODES || m > MAX_ENUM_EDGES {
        return Err(Error::EnumerationCapExceeded {
            n_nodes: n,
            n_edges: m,
            max_nodes: MAX_ENUM_NODES,
            max_edges: MAX_ENUM_EDGES,
        });
    }
    let edges = graph.edges();
    let mut entries = Vec::new();
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize > n {
            continue;
        }
        let chosen: Vec<usize> = (0..m).filter(|&e| mask >> e & 1 == 1).collect();
        let mut dsu = Dsu::new(n);
        let mut closing = Vec::new();
        for &e in &chosen {
            if !dsu.union(edges[e].source, edges[e].target) {
                closing.push(e);
            }
        }
        let mut size = vec![0usize; n];
        let mut n_edges = vec![0usize; n];
        let mut n_closing = vec![0usize; n];
        for v in 0..n {
            size[dsu.find(v)] += 1;
        }
        for &e in &chosen {
            n_edges[dsu.find(edges[e].source)] += 1;
        }
        for &e in &closing {
            n_closing[dsu.find(edges[e].source)] += 1;
        }
        let reps: Vec<usize> = (0..n).filter(|&v| dsu.find(v) == v).collect();
        if reps.iter().any(|&r| n_edges[r] + 1 < size[r] || n_closing[r] > 1) {
            continue;
        }
        let mut edge_weight: f64 = chosen.iter().map(|&e| edges[e].weight).product();
        let mut cycle_angles = Vec::new();
        for &e in &closing {
            let theta = closing_cycle_angle(graph, &chosen, e);
            edge_weight *= 2.0 - 2.0 * theta.cos();
            cycle_angles.push(theta);
        }
        // Each tree picks one root.
        let trees: Vec<Vec<usize>> = reps
            .iter()
            .filter(|&&r| n_closing[r] == 0)
            .map(|&r| (0..n).filter(|&v| dsu.find(v) == r).collect())
            .collect();
        let mut choice = vec![0usize; trees.len()];
        loop {
            let mut roots: Vec<usize> = trees.iter().zip(&choice).map(|(t, &k)| t[k]).collect();
            roots.sort_unstable();
            let weight = edge_weight * roots.iter().map(|&r| problem.q_at(r)).product::<f64>();
            entries.push(CatalogEntry {
                roots,
                edges: chosen.clone(),
                cycle_angles: cycle_angles.clone(),
                weight,
                probability: 0.0,
            });
            let mut k = 0;
            while k < trees.len() {
                choice[k] += 1;
                if choice[k] < trees[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == trees.len() {
                break;
            }
        }
    }
    let z: f64 = entries.iter().map(|e| e.weight).sum();
    for e in &mut entries {
        e.probability = e.weight / z;
    }
    Ok(MtsfCatalog { entries, z })
}

/// Angle of the cycle formed by `closing` with the other chosen edges.
fn closing_cycle_angle(graph: &ConnectionGraph, chosen: &[usize], closing: usize) -> f64 {
    let n = graph.n_nodes();
    let edges = graph.edges();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &e in chosen {
        if e != closing {
            adj[edges[e].source].push(edges[e].target);
            adj[edges[e].target].push(edges[e].source);
        }
    }
    let (s, t) = (edges[closing].source, edges[closing].target);
    let mut prev = vec![usize::MAX; n];
    prev[t] = t;
    let mut queue = VecDeque::from([t]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    // Walk s -> t along the forest, then close with t -> s.
    let mut total = 0.0;
    let mut u = s;
    while u != t {
        total += graph.angle(u, prev[u]).unwrap();
        u = prev[u];
    }
    crate::graph::wrap_angle(total + graph.angle(t, s).unwrap())
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = ONE;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .unwrap();
        if a[(piv, col)] == ZERO {
            return ZERO;
        }
        if piv != col {
            a.swap_rows(piv, col);
            det = -det;
        }
        let p = a[(col, col)];
        det *= p;
        for row in (col + 1)..n {
            let factor = a[(row, col)] / p;
            if factor != ZERO {
                for k in col..n {
                    let v = a[(col, k)];
                    a[(row, k)] -= factor * v;
                }
            }
        }
    }
    det
}

/// Solves `m x = b` column by column by Gaussian elimination.
pub fn solve(m: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .unwrap();
        if a[(piv, col)].norm() == 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        a.swap_rows(piv, col);
        x.swap_rows(piv, col);
        let p = a[(col, col)];
        for row in (col + 1)..n {
            let factor = a[(row, col)] / p;
            for k in col..n {
                let v = a[(col, k)];
                a[(row, k)] -= factor * v;
            }
            for k in 0..x.ncols() {
                let v = x[(col, k)];
                x[(row, k)] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        for k in 0..x.ncols() {
            let mut s = x[(col, k)];
            for j in (col + 1)..n {
                s -= a[(col, j)] * x[(j, k)];
            }
            x[(col, k)] = s / a[(col, col)];
        }
    }
    Ok(x)
}

/// `L_theta + Q` assembled straight from the edge list.
pub fn dense_system(problem: &SmoothingProblem<'_>) -> Result<DMatrix<Complex64>> {
    let graph = problem.graph();
    let n = graph.n_nodes();
    check_dense_cap(n)?;
    let mut a = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        a[(i, i)] = Complex64::new(problem.q_at(i), 0.0);
    }
    for e in graph.edges() {
        a[(e.source, e.source)] += e.weight;
        a[(e.target, e.target)] += e.weight;
        let off = Complex64::from_polar(e.weight, -e.angle);
        a[(e.source, e.target)] -= off;
        a[(e.target, e.source)] -= off.conj();
    }
    Ok(a)
}

/// `(L_theta + Q)^{-1} Q g` by elimination.
pub fn dense_solve(problem: &SmoothingProblem<'_>, g: &ComplexSignal) -> Result<ComplexSignal> {
    g.check_len(problem.n_nodes())?;
    let a = dense_system(problem)?;
    let b = DMatrix::from_iterator(g.len(), 1, g.iter().zip(problem.q()).map(|(z, q)| z * q));
    Ok(solve(&a, &b)?.iter().copied().collect())
}

/// Twisted incidence operator scaled by `sqrt(w)` on edge rows and
/// `sqrt(q)` on node rows. Rows list edges first, then nodes.
pub fn weighted_incidence(problem: &SmoothingProblem<'_>) -> DMatrix<Complex64> {
    let graph = problem.graph();
    let (n, m) = (graph.n_nodes(), graph.n_edges());
    let mut nabla = DMatrix::from_element(m + n, n, ZERO);
    for (k, e) in graph.edges().iter().enumerate() {
        let s = e.weight.sqrt();
        nabla[(k, e.source)] = -Complex64::from_polar(s, e.angle);
        nabla[(k, e.target)] = Complex64::new(s, 0.0);
    }
    for i in 0..n {
        nabla[(m + i, i)] = Complex64::new(problem.q_at(i).sqrt(), 0.0);
    }
    nabla
}

/// Marginal kernel `K = N (L_theta + Q)^{-1} N*` over edges then nodes.
pub fn build_kernel(problem: &SmoothingProblem<'_>) -> Result<DMatrix<Complex64>> {
    let graph = problem.graph();
    check_dense_cap(graph.n_nodes() + graph.n_edges())?;
    let nabla = weighted_incidence(problem);
    let inv = solve(
        &dense_system(problem)?,
        &DMatrix::identity(graph.n_nodes(), graph.n_nodes()),
    )?;
    Ok(&nabla * inv * nabla.adjoint())
}

/// Determinant of the principal submatrix on `subset`.
pub fn principal_minor(k: &DMatrix<Complex64>, subset: &[usize]) -> Complex64 {
    let s = subset.len();
    determinant(&DMatrix::from_fn(s, s, |a, b| k[(subset[a], subset[b])]))
}

/// Ground-set indices of a catalog entry in the kernel's ordering.
pub fn ground_subset(entry: &CatalogEntry, n_edges: usize) -> Vec<usize> {
    entry
        .edges
        .iter()
        .copied()
        .chain(entry.roots.iter().map(|&r| n_edges + r))
        .collect()
}

/// Exact mean and squared error of a forest estimator under the forest law.
#[derive(Debug, Clone)]
pub struct EstimatorMoments {
    pub mean: ComplexSignal,
    /// `E |f_i - f_*(i)|^2` per node.
    pub node_mse: Vec<f64>,
}

impl EstimatorMoments {
    pub fn mse(&self) -> f64 {
        self.node_mse.iter().sum()
    }
}

pub fn exact_estimator_moments(
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    which: EstimatorKind,
) -> Result<EstimatorMoments> {
    let catalog = enumerate_mtsfs(problem)?;
    let graph = problem.graph();
    let f_star = dense_solve(problem, g)?;
    let n = graph.n_nodes();
    let mut mean = vec![ZERO; n];
    let mut node_mse = vec![0.0; n];
    for entry in catalog.entries.iter().filter(|e| e.probability > 0.0) {
        let forest = entry.to_mtsf(graph);
        let est = match which {
            EstimatorKind::Tilde => estimate_tilde(&forest, g)?,
            EstimatorKind::RaoBlackwell => estimate_rao_blackwell(&forest, g, problem.q())?,
            EstimatorKind::GradientStep { alpha } => {
                let bar = estimate_rao_blackwell(&forest, g, problem.q())?;
                estimate_gradient_step(&bar, g, problem, alpha)?
            }
        };
        for i in 0..n {
            mean[i] += entry.probability * est[i];
            node_mse[i] += entry.probability * (est[i] - f_star[i]).norm_sqr();
        }
    }
    Ok(EstimatorMoments {
        mean: mean.into(),
        node_mse,
    })
}

/// `sum_phi P(phi) estimator(phi, g)`.
pub fn exact_estimator_expectation(
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    which: EstimatorKind,
) -> Result<ComplexSignal> {
    Ok(exact_estimator_moments(problem, g, which)?.mean)
}

/// `sum_phi P(phi) |estimator(phi, g) - f_*|^2`.
pub fn exact_estimator_second_moment(
    problem: &SmoothingProblem<'_>,
    g: &ComplexSignal,
    which: EstimatorKind,
) -> Result<f64> {
    Ok(exact_estimator_moments(problem, g, which)?.mse())
}

/// Expected root count under the forest law.
pub fn expected_roots(catalog: &MtsfCatalog) -> f64 {
    catalog
        .entries
        .iter()
        .map(|e| e.probability * e.roots.len() as f64)
        .sum()
}

/// Pearson goodness-of-fit p-value. Cells with expected count below 5 are
/// pooled into one cell.
pub fn chi_square_p(observed: &[u64], probabilities: &[f64], draws: u64) -> f64 {
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = p * draws as f64;
        if e < 5.0 {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    } else if pooled_obs > 0.0 {
        return 0.0;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

#[cfg(test)]
mod tests;
