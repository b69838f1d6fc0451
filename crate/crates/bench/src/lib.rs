//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sara_core::harness::{build_instance, prepare_social, Instance, ScenarioConfig};

/// Random `n`x`n` utility matrix with roughly 10% forbidden cells.
pub fn random_matrix(n: usize, seed: u64) -> Vec<Vec<Option<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..n).map(|_| rng.random_bool(0.9).then(|| rng.random_range(0.0..100.0))).collect()).collect()
}

/// `proposers` random strict preference lists over `acceptors`.
pub fn random_prefs(proposers: usize, acceptors: usize, seed: u64) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefs = (0..proposers)
        .map(|_| {
            let mut order: Vec<usize> = (0..acceptors).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            order
        })
        .collect();
    let scores = (0..acceptors).map(|_| (0..proposers).map(|_| rng.random::<f64>()).collect()).collect();
    (prefs, scores)
}

/// The default scenario at `ues` UEs with a reduced tie pool.
pub fn scenario(ues: usize, seed: u64) -> Instance {
    let mut cfg = ScenarioConfig::default();
    cfg.network.ues = ues;
    cfg.social.pool = ues + cfg.network.sues;
    cfg.social.hyper.max_iters = 100;
    let social = prepare_social(&cfg).expect("surrogate ties");
    build_instance(&cfg, &social, seed).expect("instance")
}
