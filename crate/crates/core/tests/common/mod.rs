#![allow(dead_code)]

use std::f64::consts::PI;

use mtsf::synthetic::{gen_connection, gen_er, SyntheticConnection};
use mtsf::{Complex64, ComplexSignal, ConnectionGraph, Edge};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Desk-size graph with a uniform regularization.
pub struct Instance {
    pub name: &'static str,
    pub graph: ConnectionGraph,
    pub q: f64,
}

fn build(n: usize, edges: &[(usize, usize, f64, f64)]) -> ConnectionGraph {
    let edges: Vec<Edge> = edges.iter().map(|&(s, t, w, a)| Edge::new(s, t, w, a)).collect();
    ConnectionGraph::build(n, &edges).unwrap()
}

/// Weakly inconsistent instances with at most six nodes.
pub fn small_instances() -> Vec<Instance> {
    let t = PI / 8.0;
    vec![
        Instance {
            name: "triangle",
            graph: build(3, &[(0, 1, 1.0, t), (1, 2, 1.0, t), (2, 0, 1.0, t)]),
            q: 0.5,
        },
        Instance {
            name: "square",
            graph: build(
                4,
                &[
                    (0, 1, 1.0, 0.35),
                    (1, 2, 1.0, 0.35),
                    (2, 3, 1.0, 0.35),
                    (3, 0, 1.0, 0.35),
                ],
            ),
            q: 1.0,
        },
        Instance {
            name: "diamond",
            graph: build(
                4,
                &[
                    (0, 1, 1.0, 0.3),
                    (1, 2, 2.0, -0.2),
                    (2, 3, 0.5, 0.4),
                    (3, 0, 1.0, 0.1),
                    (0, 2, 1.5, 0.25),
                ],
            ),
            q: 4.0,
        },
        Instance {
            name: "bowtie",
            graph: build(
                5,
                &[
                    (0, 1, 1.0, 0.5),
                    (1, 2, 1.0, 0.2),
                    (2, 0, 1.0, 0.4),
                    (2, 3, 1.0, -0.3),
                    (3, 4, 1.0, -0.6),
                    (4, 2, 1.0, 0.1),
                ],
            ),
            q: 1.0,
        },
        Instance {
            name: "k4",
            graph: build(
                4,
                &[
                    (0, 1, 1.0, 0.2),
                    (0, 2, 1.0, -0.1),
                    (0, 3, 1.0, 0.15),
                    (1, 2, 1.0, 0.18),
                    (1, 3, 1.0, -0.2),
                    (2, 3, 1.0, 0.05),
                ],
            ),
            q: 0.5,
        },
        Instance {
            name: "prism",
            graph: build(
                6,
                &[
                    (0, 1, 1.0, 0.1),
                    (1, 2, 1.0, -0.15),
                    (2, 0, 1.0, 0.12),
                    (3, 4, 1.0, 0.05),
                    (4, 5, 1.0, 0.14),
                    (5, 3, 1.0, -0.1),
                    (0, 3, 1.0, 0.08),
                    (1, 4, 1.0, -0.12),
                    (2, 5, 1.0, 0.15),
                ],
            ),
            q: 4.0,
        },
        Instance {
            name: "star",
            graph: build(
                5,
                &[(0, 1, 1.0, 0.9), (0, 2, 2.0, -1.3), (0, 3, 1.0, 2.0), (3, 4, 0.5, 0.4)],
            ),
            q: 1.0,
        },
    ]
}

/// Triangle whose cycle angle is `3 pi / 4`, violating weak inconsistency.
pub fn incoherent_triangle() -> Instance {
    let t = PI / 4.0;
    Instance {
        name: "incoherent-triangle",
        graph: build(3, &[(0, 1, 1.0, t), (1, 2, 1.0, t), (2, 0, 1.0, t)]),
        q: 1.0,
    }
}

/// Fixed complex test signal.
pub fn test_signal(n: usize) -> ComplexSignal {
    (0..n)
        .map(|i| Complex64::from_polar(1.0 + 0.3 * (i % 3) as f64, 0.7 * i as f64 - 0.4))
        .collect()
}

pub fn er_connection(n: usize, mean_degree: f64, eta: f64, seed: u64) -> SyntheticConnection {
    let s = gen_er(n, mean_degree, &mut rng(seed)).unwrap();
    gen_connection(&s, eta, &mut rng(seed ^ 0xA5A5)).unwrap()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}
