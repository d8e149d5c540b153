//! Weighted undirected graphs carrying a unitary connection.
//!
//! Every undirected edge `{i, j}` is stored twice in a compressed adjacency
//! layout, once per orientation. The angle on `(j, i)` is the negation of the
//! angle on `(i, j)`, so that the rotation along a reversed edge is the inverse
//! rotation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// An undirected edge with the orientation it was given at build time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    /// Angle of the rotation applied when moving from `source` to `target`.
    pub angle: f64,
}

impl Edge {
    pub fn new(source: usize, target: usize, weight: f64, angle: f64) -> Self {
        Self {
            source,
            target,
            weight,
            angle,
        }
    }

    pub fn unit(source: usize, target: usize, angle: f64) -> Self {
        Self::new(source, target, 1.0, angle)
    }
}

/// One oriented adjacency entry `u -> node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub weight: f64,
    pub angle: f64,
}

/// Immutable weighted graph with one angle per oriented edge.
#[derive(Debug, Clone)]
pub struct ConnectionGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    angles: Vec<f64>,
    // Running sums of `weights` within each adjacency row, used to draw
    // neighbors proportionally to their weight.
    cum_weights: Vec<f64>,
    degrees: Vec<f64>,
    edges: Vec<Edge>,
    unweighted: bool,
}

impl ConnectionGraph {
    /// Builds the graph from undirected edges, each listed once.
    pub fn build(n_nodes: usize, edges: &[Edge]) -> Result<Self> {
        let mut rows: Vec<Vec<Neighbor>> = vec![Vec::new(); n_nodes];
        let mut canonical = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = (e.source, e.target);
            for node in [i, j] {
                if node >= n_nodes {
                    return Err(Error::NodeOutOfRange { node, n_nodes });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(Error::NonPositiveWeight { i, j, w: e.weight });
            }
            if !e.angle.is_finite() {
                return Err(Error::NonFiniteAngle { i, j });
            }
            let angle = wrap_angle(e.angle);
            rows[i].push(Neighbor {
                node: j,
                weight: e.weight,
                angle,
            });
            rows[j].push(Neighbor {
                node: i,
                weight: e.weight,
                angle: wrap_angle(-angle),
            });
            canonical.push(Edge::new(i, j, e.weight, angle));
        }

        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut targets = Vec::with_capacity(2 * edges.len());
        let mut weights = Vec::with_capacity(2 * edges.len());
        let mut angles = Vec::with_capacity(2 * edges.len());
        let mut cum_weights = Vec::with_capacity(2 * edges.len());
        let mut degrees = Vec::with_capacity(n_nodes);
        offsets.push(0);
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|nb| nb.node);
            for pair in row.windows(2) {
                if pair[0].node == pair[1].node {
                    let (a, b) = if u < pair[0].node {
                        (u, pair[0].node)
                    } else {
                        (pair[0].node, u)
                    };
                    return Err(Error::DuplicateEdge(a, b));
                }
            }
            let mut acc = 0.0;
            for nb in row.iter() {
                acc += nb.weight;
                targets.push(nb.node);
                weights.push(nb.weight);
                angles.push(nb.angle);
                cum_weights.push(acc);
            }
            degrees.push(acc);
            offsets.push(targets.len());
        }
        let unweighted = weights.iter().all(|&w| w == 1.0);

        Ok(Self {
            offsets,
            targets,
            weights,
            angles,
            cum_weights,
            degrees,
            edges: canonical,
            unweighted,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges in insertion order, with their build-time orientation.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.degrees.is_empty() {
            0.0
        } else {
            self.degrees.iter().sum::<f64>() / self.degrees.len() as f64
        }
    }

    /// True when every edge has weight exactly one.
    pub fn is_unweighted(&self) -> bool {
        self.unweighted
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Oriented adjacency of `u`, sorted by neighbor id.
    pub fn neighbors(&self, u: usize) -> impl ExactSizeIterator<Item = Neighbor> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        range.map(move |k| Neighbor {
            node: self.targets[k],
            weight: self.weights[k],
            angle: self.angles[k],
        })
    }

    /// Looks up the oriented edge `i -> j`.
    pub fn neighbor(&self, i: usize, j: usize) -> Option<Neighbor> {
        let row = &self.targets[self.offsets[i]..self.offsets[i + 1]];
        row.binary_search(&j).ok().map(|pos| {
            let k = self.offsets[i] + pos;
            Neighbor {
                node: j,
                weight: self.weights[k],
                angle: self.angles[k],
            }
        })
    }

    /// Angle of the rotation along the oriented edge `i -> j`.
    pub fn angle(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbor(i, j).map(|nb| nb.angle)
    }

    /// Picks the neighbor of `u` whose cumulative-weight interval contains
    /// `x`, for `x` in `[0, d_u)`. Returns the neighbor and the edge angle.
    pub(crate) fn pick_neighbor(&self, u: usize, x: f64) -> (usize, f64) {
        let lo = self.offsets[u];
        let hi = self.offsets[u + 1];
        let deg = hi - lo;
        debug_assert!(deg > 0);
        let pos = if self.unweighted {
            (x as usize).min(deg - 1)
        } else {
            let row = &self.cum_weights[lo..hi];
            row.partition_point(|&c| c <= x).min(deg - 1)
        };
        (self.targets[lo + pos], self.angles[lo + pos])
    }

    /// Composed rotation angle along a closed walk given as a node sequence
    /// `v0, v1, ..., vk` with `vk == v0`, reduced to `(-pi, pi]`.
    pub fn cycle_angle(&self, walk: &[usize]) -> Result<f64> {
        if walk.len() < 2 {
            return Err(Error::EmptyPath);
        }
        let (start, end) = (walk[0], walk[walk.len() - 1]);
        if start != end {
            return Err(Error::OpenPath { start, end });
        }
        let mut total = 0.0;
        for pair in walk.windows(2) {
            let theta = self
                .angle(pair[0], pair[1])
                .ok_or(Error::MissingEdge(pair[0], pair[1]))?;
            total += theta;
        }
        Ok(wrap_angle(total))
    }

    /// Connected component label per node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let mut label = vec![usize::MAX; n];
        let mut stack = Vec::new();
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for nb in self.neighbors(u) {
                    if label[nb.node] == usize::MAX {
                        label[nb.node] = next;
                        stack.push(nb.node);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes() > 0 && self.components().iter().all(|&c| c == 0)
    }

    /// Copy of the graph with all angles set to zero.
    pub fn trivial_connection(&self) -> Self {
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge::new(e.source, e.target, e.weight, 0.0))
            .collect();
        Self::build(self.n_nodes(), &edges).expect("edges of a valid graph")
    }

    /// Parses the edge-list text format: one `i j w theta` per line, `#`
    /// comments, and an optional `# nodes N` directive fixing the node count.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut max_id = None::<usize>;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("nodes") {
                    let n = parts
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: "malformed `# nodes N` directive".into(),
                        })?;
                    declared = Some(n);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `i j w theta`, found {} fields", fields.len()),
                });
            }
            let parse_id = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad node id `{s}`: {e}"),
                })
            };
            let parse_real = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad number `{s}`: {e}"),
                })
            };
            let i = parse_id(fields[0])?;
            let j = parse_id(fields[1])?;
            let w = parse_real(fields[2])?;
            let theta = parse_real(fields[3])?;
            max_id = Some(max_id.map_or(i.max(j), |m| m.max(i).max(j)));
            edges.push(Edge::new(i, j, w, theta));
        }
        let inferred = max_id.map_or(0, |m| m + 1);
        let n = declared.unwrap_or(inferred);
        Self::build(n, &edges)
    }

    /// Writes the edge-list format accepted by [`ConnectionGraph::parse_edge_list`].
    /// Reals are printed with round-trip precision.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# nodes {}", self.n_nodes()).unwrap();
        for e in &self.edges {
            writeln!(out, "{} {} {:?} {:?}", e.source, e.target, e.weight, e.angle).unwrap();
        }
        out
    }
}

/// Regularization weights `q_i` bound to a graph.
#[derive(Debug, Clone)]
pub struct SmoothingProblem<'g> {
    graph: &'g ConnectionGraph,
    q: Vec<f64>,
    uniform: Option<f64>,
}

impl<'g> SmoothingProblem<'g> {
    pub fn uniform(graph: &'g ConnectionGraph, q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidRegularization(format!(
                "uniform q must be positive and finite, got {q}"
            )));
        }
        Ok(Self {
            graph,
            q: vec![q; graph.n_nodes()],
            uniform: Some(q),
        })
    }

    /// Heterogeneous regularization; at least one `q_i` must be positive.
    pub fn heterogeneous(graph: &'g ConnectionGraph, q: Vec<f64>) -> Result<Self> {
        if q.len() != graph.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: graph.n_nodes(),
                got: q.len(),
            });
        }
        if q.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidRegularization(
                "every q_i must be non-negative and finite".into(),
            ));
        }
        if !q.iter().any(|&x| x > 0.0) {
            return Err(Error::InvalidRegularization("at least one q_i must be positive".into()));
        }
        let uniform = if q.windows(2).all(|w| w[0] == w[1]) {
            q.first().copied()
        } else {
            None
        };
        Ok(Self { graph, q, uniform })
    }

    /// `Q = q D`, the regularization that turns smoothing with the normalized
    /// Laplacian into a heterogeneous problem on the plain one.
    pub fn degree_scaled(graph: &'g ConnectionGraph, q: f64) -> Result<Self> {
        if let Some(i) = graph.degrees().iter().position(|&d| d == 0.0) {
            return Err(Error::IsolatedNode(i));
        }
        Self::heterogeneous(graph, graph.degrees().iter().map(|d| q * d).collect())
    }

    pub fn graph(&self) -> &'g ConnectionGraph {
        self.graph
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_at(&self, i: usize) -> f64 {
        self.q[i]
    }

    /// The common value when all `q_i` are equal.
    pub fn uniform_q(&self) -> Option<f64> {
        self.uniform
    }

    pub fn n_nodes(&self) -> usize {
        self.q.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k3() -> ConnectionGraph {
        let a = PI / 4.0;
        ConnectionGraph::build(3, &[Edge::unit(0, 1, a), Edge::unit(1, 2, a), Edge::unit(2, 0, a)]).unwrap()
    }

    #[test]
    fn k3_cycle_angle() {
        let g = k3();
        let theta = g.cycle_angle(&[0, 1, 2, 0]).unwrap();
        assert!((theta - 3.0 * PI / 4.0).abs() < 1e-12);
        let rev = g.cycle_angle(&[0, 2, 1, 0]).unwrap();
        assert!((rev + 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((theta.cos() - rev.cos()).abs() < 1e-15);
    }

    #[test]
    fn trivial_cycle_has_zero_angle() {
        let g = k3().trivial_connection();
        assert_eq!(g.cycle_angle(&[0, 1, 2, 0]).unwrap(), 0.0);
    }

    #[test]
    fn open_path_rejected() {
        assert_eq!(k3().cycle_angle(&[0, 1, 2]), Err(Error::OpenPath { start: 0, end: 2 }));
    }

    #[test]
    fn single_edge_degrees() {
        let g = ConnectionGraph::build(2, &[Edge::new(0, 1, 2.0, 0.0)]).unwrap();
        assert_eq!(g.degrees(), &[2.0, 2.0]);
        assert_eq!(g.angle(1, 0), Some(0.0));
        assert!(!g.is_unweighted());
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            ConnectionGraph::build(2, &[Edge::unit(0, 0, 0.0)]).unwrap_err(),
            Error::SelfLoop(0)
        );
        assert_eq!(
            ConnectionGraph::build(3, &[Edge::unit(0, 1, 0.0), Edge::unit(1, 0, 0.3)]).unwrap_err(),
            Error::DuplicateEdge(0, 1)
        );
        assert!(matches!(
            ConnectionGraph::build(2, &[Edge::new(0, 1, 0.0, 0.0)]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            ConnectionGraph::build(2, &[Edge::unit(0, 5, 0.0)]),
            Err(Error::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn reverse_angles_are_negated() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.3 {
                    let theta = rng.random_range(-10.0..10.0);
                    edges.push(Edge::new(i, j, rng.random_range(0.5..2.0), theta));
                }
            }
        }
        let g = ConnectionGraph::build(n, &edges).unwrap();
        for i in 0..n {
            let mut sum = 0.0;
            for nb in g.neighbors(i) {
                let back = g.neighbor(nb.node, i).unwrap();
                assert_eq!(back.weight, nb.weight);
                assert!(wrap_angle(nb.angle + back.angle).abs() < 1e-12);
                assert!(nb.angle > -PI && nb.angle <= PI);
                sum += nb.weight;
            }
            assert!((sum - g.degree(i)).abs() <= 1e-12 * sum.max(1.0));
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = ConnectionGraph::build(5, &[Edge::new(0, 1, 1.5, 0.1), Edge::new(3, 1, 1.0, -2.0)]).unwrap();
        let text = g.to_edge_list();
        let h = ConnectionGraph::parse_edge_list(&text).unwrap();
        assert_eq!(h.n_nodes(), 5);
        assert_eq!(h.edges(), g.edges());
    }

    #[test]
    fn parse_reports_line() {
        let err = ConnectionGraph::parse_edge_list("# hi\n0 1 1 0\n1 2 x 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn problem_validation() {
        let g = k3();
        assert!(SmoothingProblem::uniform(&g, 0.0).is_err());
        assert!(SmoothingProblem::heterogeneous(&g, vec![0.0; 3]).is_err());
        let p = SmoothingProblem::heterogeneous(&g, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.uniform_q(), None);
        let p = SmoothingProblem::heterogeneous(&g, vec![2.0; 3]).unwrap();
        assert_eq!(p.uniform_q(), Some(2.0));
    }
}
