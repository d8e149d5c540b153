use std::fmt::Write as _;

use crate::graph::{wrap_angle, ConnectionGraph};

/// The component a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Tree {
        root: usize,
    },
    /// `anchor` is the node at which the cycle was closed.
    Unicycle {
        anchor: usize,
    },
}

/// A cycle kept in the forest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub anchor: usize,
    /// Composed rotation angle around the cycle, in `(-pi, pi]`.
    pub angle: f64,
}

/// A multi-type spanning forest: rooted trees and unicycles covering every
/// node.
///
/// `rotation[i]` is the angle of the rotation carrying a value at the root
/// (or at the cycle anchor, for unicycles) back to `i`, so that the walk
/// estimate at `i` reads `exp(i * rotation[i]) * g[root]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mtsf {
    pub component: Vec<Component>,
    pub parent: Vec<Option<usize>>,
    pub rotation: Vec<f64>,
    pub roots: Vec<usize>,
    pub cycles: Vec<CycleRecord>,
    /// `sum log max(1, 1 - cos theta_C)` over kept cycles; zero in exact mode.
    pub log_weight: f64,
    /// Number of calls to the successor routine.
    pub steps: u64,
}

/// Order-independent identity of a forest: its roots and undirected edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MtsfKey {
    pub roots: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl Mtsf {
    pub(crate) fn reset(&mut self, n: usize) {
        self.component.clear();
        self.component.resize(n, Component::Tree { root: usize::MAX });
        self.parent.clear();
        self.parent.resize(n, None);
        self.rotation.clear();
        self.rotation.resize(n, 0.0);
        self.roots.clear();
        self.cycles.clear();
        self.log_weight = 0.0;
        self.steps = 0;
    }

    pub fn n_nodes(&self) -> usize {
        self.component.len()
    }

    pub fn n_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn n_edges(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    pub fn root_of(&self, i: usize) -> Option<usize> {
        match self.component[i] {
            Component::Tree { root } => Some(root),
            Component::Unicycle { .. } => None,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn key(&self) -> MtsfKey {
        let mut roots = self.roots.clone();
        roots.sort_unstable();
        let mut edges: Vec<(usize, usize)> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|j| (i.min(j), i.max(j))))
            .collect();
        edges.sort_unstable();
        MtsfKey { roots, edges }
    }

    /// Checks the structural invariants against `graph`. Returns a
    /// description of the first violation.
    pub fn validate(&self, graph: &ConnectionGraph) -> Result<(), String> {
        let n = graph.n_nodes();
        if self.n_nodes() != n {
            return Err(format!("forest covers {} nodes, graph has {n}", self.n_nodes()));
        }
        if self.n_edges() + self.n_roots() != n {
            return Err(format!(
                "{} edges + {} roots != {n} nodes",
                self.n_edges(),
                self.n_roots()
            ));
        }
        for (k, &r) in self.roots.iter().enumerate() {
            if self.component[r] != (Component::Tree { root: r }) || self.parent[r].is_some() {
                return Err(format!("root {r} is not the root of its own tree"));
            }
            if self.roots[..k].contains(&r) {
                return Err(format!("root {r} listed twice"));
            }
        }
        for c in &self.cycles {
            if self.component[c.anchor] != (Component::Unicycle { anchor: c.anchor }) {
                return Err(format!("cycle anchor {} is not in its unicycle", c.anchor));
            }
        }
        for i in 0..n {
            let target = match self.component[i] {
                Component::Tree { root } => root,
                Component::Unicycle { anchor } => anchor,
            };
            let mut node = i;
            let mut total = 0.0;
            let mut hops = 0;
            while node != target {
                let Some(p) = self.parent[node] else {
                    return Err(format!("parent chain from {i} stops at {node} before {target}"));
                };
                if self.component[p] != self.component[i] {
                    return Err(format!("edge {node}->{p} crosses components"));
                }
                let Some(theta) = graph.angle(node, p) else {
                    return Err(format!("edge {node}->{p} is not in the graph"));
                };
                total += theta;
                node = p;
                hops += 1;
                if hops > n {
                    return Err(format!("parent chain from {i} does not reach {target}"));
                }
            }
            let mismatch = wrap_angle(self.rotation[i] + total).abs();
            if mismatch > 1e-8 {
                return Err(format!("rotation at {i} is off by {mismatch}"));
            }
        }
        Ok(())
    }

    /// Text dump: `i kind root parent rotation` per node, then the cycle
    /// angles.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_nodes() {
            let (kind, root) = match self.component[i] {
                Component::Tree { root } => ("tree", root.to_string()),
                Component::Unicycle { .. } => ("unicycle", "-".to_string()),
            };
            let parent = self.parent[i].map_or("-".to_string(), |p| p.to_string());
            writeln!(out, "{i} {kind} {root} {parent} {:.12}", self.rotation[i]).unwrap();
        }
        out.push_str("# cycles");
        for c in &self.cycles {
            write!(out, " {:.12}", c.angle).unwrap();
        }
        out.push('\n');
        out
    }
}
