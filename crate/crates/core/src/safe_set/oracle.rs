//! LP route: the smallest weighted L1 norm over the translated normal cone.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{self, DeterministicPolicy, TabularMdp};
use crate::scalar::Scalar;

use super::lp;

/// `min d . |B|` over `B in -R + span(Phi) + cone{-e_i : i in zeros(v)}`,
/// where `v` is the occupancy of `vertex`.
pub fn lp_unsafe_distance<S: Scalar>(mdp: &TabularMdp<S>, d: &[S], vertex: &DeterministicPolicy) -> Result<S> {
    let occ = mdp::occupancy_measure(mdp, &vertex.to_policy(mdp.n_actions))?;
    let zeros: Vec<usize> = (0..occ.eta.len()).filter(|&i| occ.eta[i].is_negligible()).collect();
    lp_unsafe_distance_zeros(mdp, d, &zeros)
}

/// Same LP with the cone generators given directly.
pub fn lp_unsafe_distance_zeros<S: Scalar>(mdp: &TabularMdp<S>, d: &[S], zeros: &[usize]) -> Result<S> {
    let (n, m, nm) = (mdp.n_states, mdp.n_actions, mdp.n_pairs());
    if d.len() != nm {
        return Err(Error::InvalidArgument("distribution length differs from |S x A|".into()));
    }
    let k = zeros.len();
    // Columns: p (nm), q (nm), y+ (n), y- (n), w (k).
    let cols = 2 * nm + 2 * n + k;
    let mut a = Matrix::<S>::zeros(nm, cols);
    let mut b = vec![S::zero(); nm];
    let mut basis = Vec::with_capacity(nm);
    for s in 0..n {
        for act in 0..m {
            let i = s * m + act;
            let rhs = -mdp.reward[i].clone();
            // Flip rows with negative right-hand side so q_i starts basic.
            let sign = if rhs < S::zero() { -S::one() } else { S::one() };
            a[(i, i)] = sign.clone();
            a[(i, nm + i)] = -sign.clone();
            for s2 in 0..n {
                let ind = if s2 == s { S::one() } else { S::zero() };
                let phi = ind - mdp.gamma.clone() * mdp.p(s, act, s2).clone();
                a[(i, 2 * nm + s2)] = -sign.clone() * phi.clone();
                a[(i, 2 * nm + n + s2)] = sign.clone() * phi;
            }
            if let Some(j) = zeros.iter().position(|&z| z == i) {
                a[(i, 2 * nm + 2 * n + j)] = sign.clone();
            }
            basis.push(if rhs < S::zero() { nm + i } else { i });
            b[i] = sign * rhs;
        }
    }
    let mut c = vec![S::zero(); cols];
    for i in 0..nm {
        c[i] = d[i].clone();
        c[nm + i] = d[i].clone();
    }
    Ok(lp::minimize_from_basis(&c, &a, &b, basis)?.value)
}
