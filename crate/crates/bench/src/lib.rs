//! Fixed benchmark instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rewardsafe::{gen, ContextualBandit, Policy, Rational, Scalar, TabularMdp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mdp<S: Scalar>(seed: u64, n: usize, m: usize) -> TabularMdp<S> {
    gen::mdp(&mut rng(seed), n, m)
}

pub fn rational_mdp(seed: u64, n: usize, m: usize) -> TabularMdp<Rational> {
    mdp(seed, n, m)
}

pub fn distribution<S: Scalar>(seed: u64, len: usize) -> Vec<S> {
    gen::positive_distribution(&mut rng(seed), len)
}

pub fn policy(seed: u64, n: usize, m: usize) -> Policy<f64> {
    gen::policy(&mut rng(seed), n, m)
}

pub fn bandit(seed: u64, n: usize, m: usize) -> ContextualBandit<f64> {
    gen::bandit(&mut rng(seed), n, m)
}
