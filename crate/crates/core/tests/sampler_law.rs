mod common;

use std::collections::HashMap;

use common::*;
use mtsf::oracle::{chi_square_p, enumerate_mtsfs};
use mtsf::sampler::MtsfKey;
use mtsf::*;

fn counts(inst: &Instance, cfg: &WalkConfig, draws: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let p = SmoothingProblem::uniform(&inst.graph, inst.q).unwrap();
    let catalog = enumerate_mtsfs(&p).unwrap();
    let index: HashMap<MtsfKey, usize> = catalog
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| (e.key(&inst.graph), k))
        .collect();
    let mut sampler = MtsfSampler::new(&p, cfg).unwrap();
    let mut r = rng(seed);
    let mut mass = vec![0.0; catalog.entries.len()];
    for _ in 0..draws {
        let f = sampler.sample(&mut r).unwrap();
        mass[index[&f.key()]] += f.weight();
    }
    (mass, catalog.entries.iter().map(|e| e.probability).collect())
}

#[test]
fn exact_sampler_follows_the_forest_law() {
    for inst in small_instances().into_iter().take(3) {
        let draws = 20_000;
        let (mass, probs) = counts(&inst, &WalkConfig::default(), draws, 1);
        let observed: Vec<u64> = mass.iter().map(|&m| m as u64).collect();
        let p = chi_square_p(&observed, &probs, draws as u64);
        assert!(p > 1e-3, "{}: p = {p}", inst.name);
    }
}

#[test]
fn importance_weights_recover_the_forest_law() {
    let inst = incoherent_triangle();
    let cfg = WalkConfig::default().mode(SamplingMode::Importance);
    let (mass, probs) = counts(&inst, &cfg, 200_000, 2);
    let total: f64 = mass.iter().sum();
    for (m, p) in mass.iter().zip(&probs) {
        assert!((m / total - p).abs() < 0.01, "{} vs {p}", m / total);
    }
}

#[test]
fn exact_mode_rejects_incoherent_cycles() {
    let inst = incoherent_triangle();
    let p = SmoothingProblem::uniform(&inst.graph, inst.q).unwrap();
    let mut sampler = MtsfSampler::new(&p, &WalkConfig::default()).unwrap();
    let mut r = rng(3);
    let hit = (0..1000).any(|_| matches!(sampler.sample(&mut r), Err(Error::IncoherentCycle { .. })));
    assert!(hit);
}
