//! Random instances with small-denominator entries, so the rational backend
//! stays fast, plus a few fixed reference instances.

use rand::Rng;

use crate::mdp::{self, ContextualBandit, Policy, TabularMdp};
use crate::scalar::Scalar;

/// Random probability vector with weights in `lo..=hi`. `lo = 0` allows
/// zeros, but the vector always keeps positive total mass.
pub fn simplex<S: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, lo: i64, hi: i64) -> Vec<S> {
    loop {
        let w: Vec<i64> = (0..len).map(|_| rng.gen_range(lo..=hi)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.iter().map(|&x| S::from_ratio(x, total)).collect();
        }
    }
}

/// Strictly positive random distribution with weights `1..=9`.
pub fn positive_distribution<S: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<S> {
    simplex(rng, len, 1, 9)
}

/// Integer rewards in `-5..=5` with at least two distinct values.
pub fn reward<S: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<S> {
    loop {
        let r: Vec<i64> = (0..len).map(|_| rng.gen_range(-5..=5)).collect();
        if len == 1 || r.iter().any(|&x| x != r[0]) {
            return r.into_iter().map(|x| S::from_ratio(x, 1)).collect();
        }
    }
}

pub const GAMMAS: [(i64, i64); 4] = [(0, 1), (1, 2), (2, 3), (9, 10)];

/// Random valid MDP with nontrivial reward. Transition rows are sparse
/// (weights `0..=3`), so occupancy supports vary between policies.
/// Needs `m >= 2`, since a single action leaves `J` constant.
pub fn mdp<S: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> TabularMdp<S> {
    assert!(m >= 2, "a nontrivial MDP needs at least two actions");
    loop {
        let mut t = Vec::with_capacity(n * m * n);
        for _ in 0..n * m {
            t.extend(simplex::<S, _>(rng, n, 0, 3));
        }
        let mu0 = simplex(rng, n, 0, 3);
        let (gn, gd) = GAMMAS[rng.gen_range(0..GAMMAS.len())];
        let r = reward(rng, n * m);
        let Ok(candidate) = TabularMdp::new(n, m, t, mu0, S::from_ratio(gn, gd), r) else { continue };
        if mdp::validate(&candidate).is_ok() {
            return candidate;
        }
    }
}

/// Random bandit with positive context distribution.
pub fn bandit<S: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> ContextualBandit<S> {
    loop {
        let b = ContextualBandit::new(n, m, positive_distribution(rng, n), reward(rng, n * m)).expect("shapes");
        let nontrivial = (0..n).any(|s| {
            let row = &b.reward[s * m..(s + 1) * m];
            row.iter().any(|x| *x != row[0])
        });
        if nontrivial {
            return b;
        }
    }
}

/// Random stochastic policy with strictly positive rows.
pub fn policy<S: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Policy<S> {
    let mut probs = Vec::with_capacity(n * m);
    for _ in 0..n {
        probs.extend(positive_distribution::<S, _>(rng, m));
    }
    Policy { n_states: n, n_actions: m, probs }
}

/// One state, three actions; `rhat` makes the middle action `b` optimal
/// and attains the regret bound `U` with equality under `D = 1/3` each.
/// Returns `(mdp, rhat)` with `R = (1, 0, 1 - 1/U)`.
pub fn tightness_example<S: Scalar>(u: S, gamma: S) -> (TabularMdp<S>, Vec<S>) {
    let ra = S::one();
    let rb = S::zero();
    let rc = ra.clone() - (ra.clone() - rb.clone()) / u;
    let mid = (ra.clone() + rb.clone()) / S::from_usize(2);
    let rhat = vec![mid.clone(), mid, rc.clone()];
    let mdp = TabularMdp::new(1, 3, vec![S::one(); 3], vec![S::one()], gamma, vec![ra, rb, rc]).expect("shapes");
    (mdp, rhat)
}

/// One state, three actions with rewards `(1, 0, -1)`.
pub fn worked_example<S: Scalar>(gamma: S) -> TabularMdp<S> {
    TabularMdp::new(
        1,
        3,
        vec![S::one(); 3],
        vec![S::one()],
        gamma,
        vec![S::one(), S::zero(), -S::one()],
    )
    .expect("shapes")
}
