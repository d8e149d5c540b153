use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::Edge;
use crate::oracle::{dense_solve, enumerate_mtsfs, exact_estimator_moments};
use crate::sampler::{sample_mtsf, SamplingMode};
use crate::solvers::solve_exact;

fn random_signal(n: usize, seed: u64) -> ComplexSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_graph(n: usize, p: f64, seed: u64) -> ConnectionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push(Edge::new(i, j, rng.random_range(0.5..1.5), rng.random_range(-PI..PI)));
            }
        }
    }
    ConnectionGraph::build(n, &edges).unwrap()
}

/// Path 0-1-2-3-4 with random angles.
fn path5(seed: u64) -> ConnectionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<Edge> = (0..4)
        .map(|i| Edge::unit(i, i + 1, rng.random_range(-PI..PI)))
        .collect();
    ConnectionGraph::build(5, &edges).unwrap()
}

fn k3(theta: f64) -> ConnectionGraph {
    ConnectionGraph::build(
        3,
        &[
            Edge::unit(0, 1, theta),
            Edge::unit(1, 2, theta),
            Edge::unit(2, 0, theta),
        ],
    )
    .unwrap()
}

fn mean_se(xs: &[Complex64]) -> (Complex64, f64) {
    let n = xs.len() as f64;
    let mean: Complex64 = xs.iter().sum::<Complex64>() / n;
    let var = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn feynman_kac_isolated_node() {
    let g = ConnectionGraph::build(2, &[]).unwrap();
    let p = SmoothingProblem::uniform(&g, 0.7).unwrap();
    let sig = random_signal(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(feynman_kac_point(&p, &sig, 1, 10, &mut rng).unwrap(), sig[1]);
}

#[test]
fn feynman_kac_rejects_stalled_walks() {
    let g = ConnectionGraph::build(3, &[Edge::unit(0, 1, 0.1)]).unwrap();
    let p = SmoothingProblem::heterogeneous(&g, vec![0.0, 0.0, 1.0]).unwrap();
    let sig = random_signal(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(feynman_kac_point(&p, &sig, 0, 10, &mut rng), Err(Error::StalledWalk(0)));
}

#[test]
fn feynman_kac_matches_dense_solution() {
    let k2 = ConnectionGraph::build(2, &[Edge::unit(0, 1, 0.0)]).unwrap();
    let tri = k3(PI / 4.0);
    for (g, q) in [(&k2, 1.0), (&tri, 2.0)] {
        let p = SmoothingProblem::uniform(g, q).unwrap();
        let sig = random_signal(g.n_nodes(), 2);
        let f = solve_exact(&p, &sig).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..g.n_nodes() {
            let draws: Vec<Complex64> = (0..100_000)
                .map(|_| feynman_kac_point(&p, &sig, i, 1, &mut rng).unwrap())
                .collect();
            let (mean, se) = mean_se(&draws);
            assert!((mean - f[i]).norm() <= 5.0 * se, "node {i}: {mean} vs {}", f[i]);
        }
    }
}

#[test]
fn tilde_with_huge_q_returns_signal() {
    let g = random_graph(15, 0.3, 4);
    let p = SmoothingProblem::uniform(&g, 1e9 * g.max_degree()).unwrap();
    let sig = random_signal(15, 5);
    let forest = sample_mtsf(&p, &WalkConfig::with_seed(6).mode(SamplingMode::Importance)).unwrap();
    assert_eq!(estimate_tilde(&forest, &sig).unwrap(), sig);
}

#[test]
fn trivial_connection_copies_root_values() {
    let g = random_graph(20, 0.2, 7).trivial_connection();
    let p = SmoothingProblem::uniform(&g, 0.4).unwrap();
    let sig = random_signal(20, 8);
    for seed in 0..20 {
        let forest = sample_mtsf(&p, &WalkConfig::with_seed(seed)).unwrap();
        let est = estimate_tilde(&forest, &sig).unwrap();
        for i in 0..20 {
            assert_eq!(est[i], sig[forest.root_of(i).unwrap()]);
        }
    }
}

#[test]
fn rao_blackwell_simple_trees() {
    // Single-root trees: same as the tilde estimator.
    let g = random_graph(10, 0.3, 9);
    let p = SmoothingProblem::uniform(&g, 1e9 * g.max_degree()).unwrap();
    let sig = random_signal(10, 10);
    let forest = sample_mtsf(&p, &WalkConfig::with_seed(11).mode(SamplingMode::Importance)).unwrap();
    let rb = estimate_rao_blackwell(&forest, &sig, p.q()).unwrap();
    assert!(rb.distance(&estimate_tilde(&forest, &sig).unwrap()) < 1e-12);

    // One spanning tree without a connection: the plain average everywhere.
    let g = ConnectionGraph::build(
        4,
        &[Edge::unit(0, 1, 0.0), Edge::unit(1, 2, 0.0), Edge::unit(2, 3, 0.0)],
    )
    .unwrap();
    let p = SmoothingProblem::heterogeneous(&g, vec![1.0, 1e-300, 1e-300, 1e-300]).unwrap();
    let forest = sample_mtsf(&p, &WalkConfig::with_seed(12)).unwrap();
    assert_eq!(forest.roots, vec![0]);
    let uniform_q = vec![1.0; 4];
    let rb = estimate_rao_blackwell(&forest, &sig.as_slice()[..4].to_vec().into(), &uniform_q).unwrap();
    let avg: Complex64 = sig.as_slice()[..4].iter().sum::<Complex64>() / 4.0;
    for z in rb.iter() {
        assert!((z - avg).norm() < 1e-12);
    }
}

#[test]
fn unicycle_nodes_get_zero() {
    let g = k3(1.0);
    let p = SmoothingProblem::heterogeneous(&g, vec![0.0, 0.0, 0.0]).unwrap_or_else(|_| {
        // All-zero q is not a valid problem; use a tiny regularization instead.
        SmoothingProblem::heterogeneous(&g, vec![1e-300, 0.0, 0.0]).unwrap()
    });
    let sig = random_signal(3, 13);
    let forest = sample_mtsf(&p, &WalkConfig::with_seed(14).mode(SamplingMode::Importance)).unwrap();
    assert_eq!(forest.cycles.len(), 1);
    assert_eq!(estimate_tilde(&forest, &sig).unwrap(), ComplexSignal::zeros(3));
    assert_eq!(
        estimate_rao_blackwell(&forest, &sig, p.q()).unwrap(),
        ComplexSignal::zeros(3)
    );
}

/// Exact expectations and variances on small graphs, from the enumeration.
#[test]
fn oracle_unbiasedness_and_variances() {
    let mut cases: Vec<(ConnectionGraph, Vec<f64>)> = vec![(path5(15), vec![1.0; 5])];
    for seed in 0..4 {
        let g = random_graph(4 + seed as usize % 3, 0.6, 16 + seed);
        let n = g.n_nodes();
        cases.push((g.clone(), vec![0.7; n]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cases.push((
            g,
            (0..n)
                .map(|i| if i == 1 { 0.0 } else { rng.random_range(0.2..2.0) })
                .collect(),
        ));
    }
    for (g, q) in &cases {
        let p = SmoothingProblem::heterogeneous(g, q.clone()).unwrap();
        let sig = random_signal(g.n_nodes(), 17);
        let f = dense_solve(&p, &sig).unwrap();
        let tilde = exact_estimator_moments(&p, &sig, EstimatorKind::Tilde).unwrap();
        let rb = exact_estimator_moments(&p, &sig, EstimatorKind::RaoBlackwell).unwrap();
        let gs = exact_estimator_moments(&p, &sig, EstimatorKind::gradient_step()).unwrap();
        for m in [&tilde, &rb, &gs] {
            assert!(m.mean.distance(&f) < 1e-9, "{:?} vs {:?}", m.mean, f);
        }
        for i in 0..g.n_nodes() {
            assert!(rb.node_mse[i] <= tilde.node_mse[i] + 1e-12);
        }
        // Q-weighted Rao-Blackwell error: <g, Q f> - |f|_Q^2.
        let weighted_rb: f64 = (0..g.n_nodes()).map(|i| q[i] * rb.node_mse[i]).sum();
        let closed: f64 = (0..g.n_nodes())
            .map(|i| q[i] * ((sig[i].conj() * f[i]).re - f[i].norm_sqr()))
            .sum();
        assert!((weighted_rb - closed).abs() < 1e-9, "{weighted_rb} vs {closed}");
        if q.iter().all(|&x| x == q[0]) {
            assert!((rb.mse() - (sig.dot(&f).re - f.norm_sqr())).abs() < 1e-9);
            // Tilde error: sum_r |g_r|^2 c_r - |f|^2 with c_r the expected size
            // of the tree rooted at r. Each c_r <= 1, with equality when no
            // unicycle has positive probability.
            let cat = enumerate_mtsfs(&p).unwrap();
            let mut c = vec![0.0; g.n_nodes()];
            for e in &cat.entries {
                let forest = e.to_mtsf(g);
                for i in 0..g.n_nodes() {
                    if let Some(r) = forest.root_of(i) {
                        c[r] += e.probability;
                    }
                }
            }
            let exact: f64 = (0..g.n_nodes()).map(|r| sig[r].norm_sqr() * c[r]).sum::<f64>() - f.norm_sqr();
            assert!((tilde.mse() - exact).abs() < 1e-9);
            let bound = sig.norm_sqr() - f.norm_sqr();
            assert!(tilde.mse() <= bound + 1e-9);
            let has_unicycles = cat
                .entries
                .iter()
                .any(|e| e.probability > 0.0 && !e.cycle_angles.is_empty());
            if !has_unicycles {
                assert!((tilde.mse() - bound).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn path5_gradient_step_reduces_variance() {
    let g = path5(18);
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    let sig = random_signal(5, 19);
    let f = solve_exact(&p, &sig).unwrap();
    let rb = exact_estimator_moments(&p, &sig, EstimatorKind::RaoBlackwell).unwrap();
    let gs = exact_estimator_moments(&p, &sig, EstimatorKind::gradient_step()).unwrap();
    assert!(gs.mean.distance(&f) < 1e-10);
    assert!(rb.mean.distance(&f) < 1e-10);
    assert!(gs.mse() < rb.mse());
}

#[test]
fn gradient_step_fixed_point_and_zero_step() {
    let g = random_graph(12, 0.3, 20);
    let p = SmoothingProblem::uniform(&g, 0.5).unwrap();
    let sig = random_signal(12, 21);
    let f = solve_exact(&p, &sig).unwrap();
    assert!(estimate_gradient_step(&f, &sig, &p, 1.0).unwrap().distance(&f) < 1e-12);
    let other = random_signal(12, 22);
    assert_eq!(estimate_gradient_step(&other, &sig, &p, 0.0).unwrap(), other);
    assert!(estimate_gradient_step(&other, &sig, &p, -1.0).is_err());
}

#[test]
fn gradient_step_rejects_zero_diagonal() {
    let g = ConnectionGraph::build(3, &[Edge::unit(0, 1, 0.2)]).unwrap();
    let p = SmoothingProblem::heterogeneous(&g, vec![1.0, 1.0, 0.0]).unwrap();
    let sig = random_signal(3, 23);
    assert_eq!(estimate_gradient_step(&sig, &sig, &p, 1.0), Err(Error::IsolatedNode(2)));
}

#[test]
fn accumulator_basics() {
    let a = random_signal(4, 24);
    let b = random_signal(4, 25);
    let mut acc = EstimateAccumulator::new(4);
    assert_eq!(acc.combine(), Err(Error::ZeroWeight));
    acc.add(&a, 0.0).unwrap();
    assert_eq!(acc.combine().unwrap(), a);
    let mut plain = EstimateAccumulator::new(4);
    let mut weighted = EstimateAccumulator::new(4);
    for s in [&a, &b] {
        plain.add(s, 0.0).unwrap();
        weighted.add(s, 3.7).unwrap();
    }
    assert!(plain.combine().unwrap().distance(&weighted.combine().unwrap()) < 1e-14);
    assert!((weighted.weight_sum() - 2.0 * 3.7f64.exp()).abs() < 1e-10);
    assert!(acc.add(&random_signal(3, 1), 0.0).is_err());
}

#[test]
fn accumulator_survives_huge_log_weights() {
    let a = random_signal(3, 26);
    let b = random_signal(3, 27);
    let mut acc = EstimateAccumulator::new(3);
    acc.add(&a, 1000.0).unwrap();
    acc.add(&b, 1000.0 + 2f64.ln()).unwrap();
    let want = a.scale_real(1.0 / 3.0).add(&b.scale_real(2.0 / 3.0));
    assert!(acc.combine().unwrap().distance(&want) < 1e-12);
}

proptest! {
    #[test]
    fn accumulator_merge_is_order_free(
        logs in prop::collection::vec(-5.0f64..5.0, 1..12),
        split in 0usize..12,
        seed in any::<u64>(),
    ) {
        let signals: Vec<ComplexSignal> = (0..logs.len()).map(|k| random_signal(3, seed.wrapping_add(k as u64))).collect();
        let mut whole = EstimateAccumulator::new(3);
        for (s, &l) in signals.iter().zip(&logs) {
            whole.add(s, l).unwrap();
        }
        let split = split.min(logs.len());
        let mut left = EstimateAccumulator::new(3);
        let mut right = EstimateAccumulator::new(3);
        for (k, (s, &l)) in signals.iter().zip(&logs).enumerate() {
            if k < split { left.add(s, l).unwrap() } else { right.add(s, l).unwrap() }
        }
        let mut lr = left.clone();
        lr.merge(right.clone()).unwrap();
        let mut rl = right;
        rl.merge(left).unwrap();
        let w = whole.combine().unwrap();
        prop_assert!(lr.combine().unwrap().distance(&w) < 1e-10);
        prop_assert!(rl.combine().unwrap().distance(&w) < 1e-10);
        prop_assert_eq!(lr.count(), logs.len());
    }

    #[test]
    fn estimators_are_linear(seed in any::<u64>(), a_re in -3.0f64..3.0, a_im in -3.0f64..3.0) {
        let g = random_graph(12, 0.3, seed);
        let p = SmoothingProblem::uniform(&g, 0.3).unwrap();
        let forest = sample_mtsf(&p, &WalkConfig::with_seed(seed).mode(SamplingMode::Importance)).unwrap();
        let g1 = random_signal(12, seed ^ 1);
        let g2 = random_signal(12, seed ^ 2);
        let a = Complex64::new(a_re, a_im);
        let mixed = g1.scale(a).add(&g2);
        let tilde = |s: &ComplexSignal| estimate_tilde(&forest, s).unwrap();
        let rb = |s: &ComplexSignal| estimate_rao_blackwell(&forest, s, p.q()).unwrap();
        for est in [&tilde as &dyn Fn(&ComplexSignal) -> ComplexSignal, &rb] {
            let lhs = est(&mixed);
            let rhs = est(&g1).scale(a).add(&est(&g2));
            prop_assert!(lhs.distance(&rhs) < 1e-12);
        }
    }
}

#[test]
fn importance_mean_on_incoherent_triangle() {
    let g = k3(PI / 4.0);
    let p = SmoothingProblem::uniform(&g, 1.0).unwrap();
    let sig = random_signal(3, 28);
    let f = solve_exact(&p, &sig).unwrap();
    let cfg = WalkConfig::with_seed(29).mode(SamplingMode::Importance);
    let mut sampler = MtsfSampler::new(&p, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let m = 1_000_000;
    let mut draws = Vec::with_capacity(m);
    let mut forest = Mtsf::default();
    let mut scratch = RbScratch::default();
    for _ in 0..m {
        sampler.sample_into(&mut rng, &mut forest).unwrap();
        let mut est = vec![ZERO; 3];
        accumulate_rao_blackwell(&forest, sig.as_slice(), p.q(), &mut scratch, 1.0, &mut est);
        draws.push((forest.weight(), est));
    }
    let total: f64 = draws.iter().map(|d| d.0).sum();
    for i in 0..3 {
        let mean: Complex64 = draws.iter().map(|d| d.0 * d.1[i]).sum::<Complex64>() / total;
        let var: f64 = draws.iter().map(|d| (d.0 * (d.1[i] - mean)).norm_sqr()).sum::<f64>() / (total * total);
        assert!((mean - f[i]).norm() <= 5.0 * var.sqrt(), "node {i}: {mean} vs {}", f[i]);
    }
}

#[test]
fn dof_examples() {
    let g = random_graph(10, 0.4, 30);
    let huge = SmoothingProblem::uniform(&g, 1e9 * g.max_degree()).unwrap();
    let cfg = WalkConfig::with_seed(31).mode(SamplingMode::Importance);
    assert_eq!(estimate_dof(&huge, 50, &cfg).unwrap().mean, 10.0);

    let single = ConnectionGraph::build(1, &[]).unwrap();
    let p = SmoothingProblem::uniform(&single, 1.0).unwrap();
    let d = estimate_dof(&p, 100, &WalkConfig::default()).unwrap();
    assert_eq!((d.mean, d.std_error), (1.0, 0.0));

    let tri = k3(PI / 4.0);
    let p = SmoothingProblem::uniform(&tri, 1.0).unwrap();
    let exact: f64 = crate::solvers::ExactSolver::new(&p)
        .unwrap()
        .inverse()
        .diagonal()
        .iter()
        .map(|z| z.re)
        .sum();
    let d = estimate_dof(&p, 100_000, &cfg).unwrap();
    assert!((d.mean - exact).abs() <= 5.0 * d.std_error, "{} vs {exact}", d.mean);
    let cat = enumerate_mtsfs(&p).unwrap();
    assert!((crate::oracle::expected_roots(&cat) - exact).abs() < 1e-12);
}

#[test]
fn concentration_of_rao_blackwell_mean() {
    let g = random_graph(20, 0.25, 32);
    let p = SmoothingProblem::uniform(&g, 0.5).unwrap();
    let sig = random_signal(20, 33);
    let f = solve_exact(&p, &sig).unwrap();
    let (eps, delta) = (0.5f64, 0.1f64);
    let m = ((6.0 / (eps * eps)) * (20.0 / delta).ln()).ceil() as usize;
    let cfg = SmootherConfig::new(
        m,
        EstimatorKind::RaoBlackwell,
        WalkConfig::default().mode(SamplingMode::Importance),
    );
    let smoother = MtsfSmoother::new(&p, cfg).unwrap();
    let trials = 200;
    let good = (0..trials)
        .filter(|&t| smoother.smooth_seeded(&sig, t).unwrap().estimate.distance(&f) <= eps * sig.norm())
        .count();
    assert!(good as f64 >= (1.0 - delta) * trials as f64);
}

#[test]
fn smoother_is_deterministic_across_threads() {
    let g = random_graph(40, 0.1, 34);
    let p = SmoothingProblem::uniform(&g, 0.3).unwrap();
    let sig = random_signal(40, 35);
    let walk = WalkConfig::with_seed(36).mode(SamplingMode::Importance);
    for kind in [
        EstimatorKind::Tilde,
        EstimatorKind::RaoBlackwell,
        EstimatorKind::gradient_step(),
    ] {
        let mut cfg = SmootherConfig::new(100, kind, walk.clone());
        let seq = MtsfSmoother::new(&p, cfg.clone()).unwrap().smooth(&sig).unwrap();
        cfg.parallel = true;
        let par = MtsfSmoother::new(&p, cfg).unwrap().smooth(&sig).unwrap();
        assert_eq!(seq.estimate, par.estimate);
        assert_eq!(seq.mean_roots, par.mean_roots);
    }
}

#[test]
fn smoother_converges() {
    let g = random_graph(30, 0.15, 37);
    let p = SmoothingProblem::uniform(&g, 0.5).unwrap();
    let sig = random_signal(30, 38);
    let f = solve_exact(&p, &sig).unwrap();
    let walk = WalkConfig::with_seed(39).mode(SamplingMode::Importance);
    let mut prev = f64::INFINITY;
    for m in [10, 1000, 100_000] {
        let mut cfg = SmootherConfig::new(m, EstimatorKind::gradient_step(), walk.clone());
        cfg.parallel = true;
        let err = MtsfSmoother::new(&p, cfg)
            .unwrap()
            .smooth(&sig)
            .unwrap()
            .estimate
            .distance(&f)
            / f.norm();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 0.02, "{prev}");
}

#[test]
fn normalized_smoothing_identity() {
    let g = random_graph(15, 0.3, 40);
    let q = 0.8;
    let sig = random_signal(15, 41);
    let norm = crate::laplacian::SparseHermitianOperator::normalized(&g)
        .unwrap()
        .to_dense();
    let shifted = norm + nalgebra::DMatrix::<Complex64>::identity(15, 15) * Complex64::new(q, 0.0);
    let direct: ComplexSignal = shifted
        .lu()
        .solve(&nalgebra::DVector::from_iterator(15, sig.iter().map(|z| z * q)))
        .unwrap()
        .iter()
        .copied()
        .collect();
    let scaled = SmoothingProblem::degree_scaled(&g, q).unwrap();
    let via = normalized_output(&g, &solve_exact(&scaled, &normalized_input(&g, &sig).unwrap()).unwrap()).unwrap();
    assert!(direct.distance(&via) < 1e-10);

    let cfg = SmootherConfig::new(
        20_000,
        EstimatorKind::gradient_step(),
        WalkConfig::with_seed(42).mode(SamplingMode::Importance),
    );
    let mc = smooth_normalized(&g, q, &sig, cfg).unwrap();
    assert!(
        mc.distance(&direct) < 0.05 * direct.norm(),
        "{}",
        mc.distance(&direct) / direct.norm()
    );
}
