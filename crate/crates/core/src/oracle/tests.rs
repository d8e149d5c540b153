use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::Edge;

fn random_graph(n: usize, p: f64, seed: u64, weighted: bool) -> ConnectionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                let w = if weighted { rng.random_range(0.3..2.0) } else { 1.0 };
                edges.push(Edge::new(i, j, w, rng.random_range(-PI..PI)));
            }
        }
    }
    ConnectionGraph::build(n, &edges).unwrap()
}

fn test_problems() -> Vec<(ConnectionGraph, Vec<f64>)> {
    let mut out = Vec::new();
    for (k, &(n, p, weighted)) in [
        (3, 1.0, false),
        (4, 0.7, true),
        (5, 0.5, false),
        (5, 0.6, true),
        (6, 0.4, true),
        (6, 0.5, false),
    ]
    .iter()
    .enumerate()
    {
        let g = random_graph(n, p, 100 + k as u64, weighted);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + k as u64);
        let q: Vec<f64> = (0..n)
            .map(|i| {
                if k % 2 == 1 && i % 3 == 1 {
                    0.0
                } else {
                    rng.random_range(0.2..1.5)
                }
            })
            .collect();
        out.push((g, q));
    }
    out
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn single_node_catalog() {
    let g = ConnectionGraph::build(1, &[]).unwrap();
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    let cat = enumerate_mtsfs(&p).unwrap();
    assert_eq!(cat.entries.len(), 1);
    assert_eq!(cat.entries[0].roots, vec![0]);
    assert_eq!(cat.z, 1.0);
}

#[test]
fn k2_catalog_and_kernel() {
    let g = ConnectionGraph::build(2, &[Edge::unit(0, 1, 0.9)]).unwrap();
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    let cat = enumerate_mtsfs(&p).unwrap();
    let mut forms: Vec<(Vec<usize>, Vec<usize>, f64)> = cat
        .entries
        .iter()
        .map(|e| (e.roots.clone(), e.edges.clone(), e.weight))
        .collect();
    forms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(
        forms,
        vec![
            (vec![0], vec![0], 1.0),
            (vec![0, 1], vec![], 1.0),
            (vec![1], vec![0], 1.0)
        ]
    );
    assert!((cat.z - 3.0).abs() < 1e-14);
    assert!((determinant(&dense_system(&p).unwrap()).re - 3.0).abs() < 1e-12);
    let k = build_kernel(&p).unwrap();
    for e in &cat.entries {
        let minor = principal_minor(&k, &ground_subset(e, 1));
        assert!(close(minor, Complex64::new(1.0 / 3.0, 0.0), 1e-12));
    }
}

#[test]
fn triangle_with_right_angle_cycle() {
    let edges = [
        Edge::unit(0, 1, PI / 6.0),
        Edge::unit(1, 2, PI / 6.0),
        Edge::unit(2, 0, PI / 6.0),
    ];
    let g = ConnectionGraph::build(3, &edges).unwrap();
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    let cat = enumerate_mtsfs(&p).unwrap();
    let unicycles: Vec<&CatalogEntry> = cat.entries.iter().filter(|e| !e.cycle_angles.is_empty()).collect();
    assert_eq!(unicycles.len(), 1);
    assert!((unicycles[0].cycle_angles[0].abs() - PI / 2.0).abs() < 1e-12);
    assert!((unicycles[0].weight - 2.0).abs() < 1e-12);
    assert!(unicycles[0].roots.is_empty());
    // Three isolated roots 1, one edge 3 * 2, spanning trees 3 * 3, unicycle 2.
    assert!((cat.z - 18.0).abs() < 1e-12);
    assert!((cat.z - determinant(&dense_system(&p).unwrap()).re).abs() < 1e-10);
}

#[test]
fn consistent_cycles_have_zero_weight() {
    let edges = [Edge::unit(0, 1, 0.3), Edge::unit(1, 2, 0.4), Edge::unit(0, 2, 0.7)];
    let g = ConnectionGraph::build(3, &edges).unwrap();
    let p = SmoothingProblem::uniform(&g, 0.5).unwrap();
    let cat = enumerate_mtsfs(&p).unwrap();
    let unicycle = cat.entries.iter().find(|e| !e.cycle_angles.is_empty()).unwrap();
    assert!(unicycle.weight.abs() < 1e-14);
}

#[test]
fn partition_function_is_determinant() {
    for (g, q) in test_problems() {
        let p = SmoothingProblem::heterogeneous(&g, q).unwrap();
        let cat = enumerate_mtsfs(&p).unwrap();
        let det = determinant(&dense_system(&p).unwrap());
        assert!(det.im.abs() < 1e-9 * det.re);
        assert!((cat.z - det.re).abs() <= 1e-8 * det.re, "{} vs {}", cat.z, det.re);
        let total: f64 = cat.entries.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kernel_is_projection_with_node_block() {
    for (g, q) in test_problems() {
        let p = SmoothingProblem::heterogeneous(&g, q.clone()).unwrap();
        let k = build_kernel(&p).unwrap();
        let (n, m) = (g.n_nodes(), g.n_edges());
        assert!((&k - k.adjoint()).norm() < 1e-10);
        assert!((&k * &k - &k).norm() < 1e-8);
        assert!((k.trace() - Complex64::new(n as f64, 0.0)).norm() < 1e-9);
        let inv = solve(&dense_system(&p).unwrap(), &DMatrix::identity(n, n)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = inv[(i, j)] * (q[i] * q[j]).sqrt();
                assert!(close(k[(m + i, m + j)], want, 1e-10));
            }
        }
        let cat = enumerate_mtsfs(&p).unwrap();
        let node_trace: f64 = (0..n).map(|i| k[(m + i, m + i)].re).sum();
        assert!((node_trace - expected_roots(&cat)).abs() < 1e-9);
    }
}

fn subsets(universe: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, universe: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for x in start..universe {
            if universe - x < size - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, universe, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, universe, size, &mut Vec::new(), &mut out);
    out
}

#[test]
fn minors_reproduce_forest_law() {
    for (g, q) in test_problems() {
        let p = SmoothingProblem::heterogeneous(&g, q).unwrap();
        let (n, m) = (g.n_nodes(), g.n_edges());
        let k = build_kernel(&p).unwrap();
        let cat = enumerate_mtsfs(&p).unwrap();
        let mut forests = HashSet::new();
        for e in &cat.entries {
            let s = ground_subset(e, m);
            let minor = principal_minor(&k, &s);
            assert!(
                close(minor, Complex64::new(e.probability, 0.0), 1e-8),
                "{minor} vs {}",
                e.probability
            );
            let mut s = s;
            s.sort_unstable();
            forests.insert(s);
        }
        for s in subsets(m + n, n) {
            if !forests.contains(&s) {
                assert!(principal_minor(&k, &s).norm() <= 1e-10);
            }
        }
    }
}

#[test]
fn catalog_forests_are_valid() {
    for (g, q) in test_problems() {
        let p = SmoothingProblem::heterogeneous(&g, q).unwrap();
        let cat = enumerate_mtsfs(&p).unwrap();
        let mut keys = HashSet::new();
        for e in &cat.entries {
            let f = e.to_mtsf(&g);
            f.validate(&g).unwrap();
            assert_eq!(f.key(), e.key(&g));
            let mut ours: Vec<f64> = f.cycles.iter().map(|c| c.angle.cos()).collect();
            let mut theirs: Vec<f64> = e.cycle_angles.iter().map(|a| a.cos()).collect();
            ours.sort_by(f64::total_cmp);
            theirs.sort_by(f64::total_cmp);
            assert_eq!(ours.len(), theirs.len());
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(keys.insert(e.key(&g)));
        }
    }
}

#[test]
fn elimination_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(6, 6, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let b = DMatrix::from_fn(6, 2, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
    assert!(close(determinant(&a), a.clone().determinant(), 1e-10));
    let x = solve(&a, &b).unwrap();
    assert!((&a * x - b).norm() < 1e-10);
    assert_eq!(determinant(&DMatrix::from_element(2, 2, ONE)), ZERO);
}

#[test]
fn dense_solve_matches_cholesky() {
    for (g, q) in test_problems() {
        let p = SmoothingProblem::heterogeneous(&g, q).unwrap();
        let sig = ComplexSignal::from_phases(&(0..g.n_nodes()).map(|i| i as f64).collect::<Vec<_>>());
        let a = dense_solve(&p, &sig).unwrap();
        let b = crate::solvers::solve_exact(&p, &sig).unwrap();
        assert!(a.distance(&b) < 1e-10);
    }
}

#[test]
fn enumeration_cap() {
    let g = random_graph(9, 0.1, 1, false);
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    assert!(matches!(enumerate_mtsfs(&p), Err(Error::EnumerationCapExceeded { .. })));
    let g = random_graph(8, 0.9, 1, false);
    assert!(g.n_edges() > 16);
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    assert!(matches!(enumerate_mtsfs(&p), Err(Error::EnumerationCapExceeded { .. })));
}

#[test]
fn chi_square_extremes() {
    assert!(chi_square_p(&[250, 250, 500], &[0.25, 0.25, 0.5], 1000) > 0.99);
    assert!(chi_square_p(&[500, 0, 500], &[0.25, 0.25, 0.5], 1000) < 1e-10);
    assert_eq!(chi_square_p(&[3, 0], &[1.0, 0.0], 3), 1.0);
}
