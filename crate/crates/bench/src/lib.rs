//! Shared fixtures for the benchmarks.

use mtsf::synthetic::{gen_connection, BlockModel, SyntheticConnection};
use mtsf::ComplexSignal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sparse degree-corrected block model with a connection of noise `eta`.
pub fn dcsbm(n: usize, eta: f64, seed: u64) -> SyntheticConnection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skeleton = BlockModel::dcsbm1(n).generate(&mut rng).expect("valid preset");
    gen_connection(&skeleton, eta, &mut rng).expect("valid eta")
}

/// Two-block model at mean degree 40.
pub fn sbm(n: usize, eta: f64, seed: u64) -> SyntheticConnection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skeleton = BlockModel::sbm(n).generate(&mut rng).expect("valid preset");
    gen_connection(&skeleton, eta, &mut rng).expect("valid eta")
}

pub fn signal(n: usize) -> ComplexSignal {
    ComplexSignal::from_phases(&(0..n).map(|i| 0.37 * i as f64).collect::<Vec<_>>())
}
