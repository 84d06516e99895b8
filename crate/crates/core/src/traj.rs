//! Finite-horizon trajectories: exhaustive enumeration, the return, choice
//! and common-start bounds, and the choice-distance epsilon chain.
//!
//! A trajectory of horizon `T` is the list of flat pair indices
//! `s_0 a_0, ..., s_{T-1} a_{T-1}`; its return is `sum_t gamma^t R(s_t, a_t)`.

use std::collections::BTreeMap;

use crate::error::{check_cap, Error, Result};
use crate::mdp::{self, DeterministicPolicy, Policy, TabularMdp};
use crate::rlhf::{bernoulli_kl_logits, sigmoid};
use crate::scalar::{dot, Scalar};

/// Slack of the float bound checks.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet<S> {
    pub horizon: usize,
    pub n_actions: usize,
    pub gamma: S,
    /// Flat pair indices `s * m + a`, one per step.
    pub trajectories: Vec<Vec<usize>>,
    pub probs: Vec<S>,
    /// Returns under the MDP's own reward.
    pub returns: Vec<S>,
}

impl<S: Scalar> TrajectorySet<S> {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn start_state(&self, i: usize) -> usize {
        self.trajectories[i][0] / self.n_actions
    }

    /// Discounted return of every trajectory under `r`.
    pub fn returns_for(&self, r: &[S]) -> Vec<S> {
        self.trajectories.iter().map(|xi| discounted_return(xi, r, &self.gamma)).collect()
    }

    /// Same trajectories with another distribution over them.
    pub fn with_probs(&self, probs: Vec<S>) -> Result<Self> {
        if probs.len() != self.len() {
            return Err(Error::InvalidArgument(format!("{} probabilities for {} trajectories", probs.len(), self.len())));
        }
        mdp::check_simplex(&probs, "trajectory distribution")?;
        Ok(Self { probs, ..self.clone() })
    }

    /// `(1-gamma)/(1-gamma^T) * sum_xi P(xi) sum_t gamma^t [pair_t = (s,a)]`,
    /// summed directly over the listed trajectories.
    pub fn pair_distribution(&self, n_pairs: usize) -> Vec<S> {
        let mut eta = vec![S::zero(); n_pairs];
        for (xi, p) in self.trajectories.iter().zip(&self.probs) {
            let mut w = p.clone();
            for &pair in xi {
                eta[pair] = eta[pair].clone() + w.clone();
                w = w * self.gamma.clone();
            }
        }
        let scale = horizon_scale(&self.gamma, self.horizon);
        eta.into_iter().map(|x| x * scale.clone()).collect()
    }
}

fn discounted_return<S: Scalar>(xi: &[usize], r: &[S], gamma: &S) -> S {
    let mut g = S::zero();
    let mut w = S::one();
    for &pair in xi {
        g = g + w.clone() * r[pair].clone();
        w = w * gamma.clone();
    }
    g
}

/// `(1-gamma)/(1-gamma^T)`, the factor turning `eta_T` into a distribution.
fn horizon_scale<S: Scalar>(gamma: &S, horizon: usize) -> S {
    (S::one() - gamma.clone()) / (S::one() - gamma.pow_usize(horizon))
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    Ok(())
}

/// Every positive-probability trajectory of length `horizon` under `pi`,
/// in lexicographic order of the pair sequence.
pub fn enumerate_trajectories<S: Scalar>(
    mdp: &TabularMdp<S>,
    pi: &Policy<S>,
    horizon: usize,
    cap: u128,
) -> Result<TrajectorySet<S>> {
    check_horizon(horizon)?;
    if pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions {
        return Err(Error::InvalidArgument("policy shape does not match the MDP".into()));
    }
    let nm = mdp.n_pairs() as u128;
    let needed = (0..horizon).fold(1u128, |acc, _| acc.saturating_mul(nm));
    check_cap(needed, cap)?;

    let (n, m) = (mdp.n_states, mdp.n_actions);
    let mut trajectories = Vec::new();
    let mut probs = Vec::new();
    // Stack of (prefix, probability of prefix and next state, next state).
    let mut stack: Vec<(Vec<usize>, S, usize)> = Vec::new();
    for s in (0..n).rev() {
        if !mdp.mu0[s].is_zero() {
            stack.push((Vec::new(), mdp.mu0[s].clone(), s));
        }
    }
    while let Some((prefix, p, s)) = stack.pop() {
        for a in (0..m).rev() {
            let pa = p.clone() * pi.prob(s, a).clone();
            if pa.is_zero() {
                continue;
            }
            let mut xi = prefix.clone();
            xi.push(s * m + a);
            if xi.len() == horizon {
                trajectories.push(xi);
                probs.push(pa);
                continue;
            }
            for s2 in (0..n).rev() {
                let t = mdp.p(s, a, s2);
                if !t.is_zero() {
                    stack.push((xi.clone(), pa.clone() * t.clone(), s2));
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by(|&i, &j| trajectories[i].cmp(&trajectories[j]));
    let trajectories: Vec<Vec<usize>> = order.iter().map(|&i| trajectories[i].clone()).collect();
    let probs: Vec<S> = order.iter().map(|&i| probs[i].clone()).collect();
    let returns = trajectories.iter().map(|xi| discounted_return(xi, &mdp.reward, &mdp.gamma)).collect();
    Ok(TrajectorySet { horizon, n_actions: m, gamma: mdp.gamma.clone(), trajectories, probs, returns })
}

/// The set of dynamics-feasible trajectories, weighted by the uniform policy.
pub fn feasible_trajectories<S: Scalar>(mdp: &TabularMdp<S>, horizon: usize, cap: u128) -> Result<TrajectorySet<S>> {
    enumerate_trajectories(mdp, &Policy::uniform(mdp.n_states, mdp.n_actions), horizon, cap)
}

/// Per-step pair marginals `P(s_t = s, a_t = a)` for `t < horizon`, by
/// forward recursion.
pub fn step_marginals<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>, horizon: usize) -> Vec<Vec<S>> {
    let (n, m) = (mdp.n_states, mdp.n_actions);
    let mut d = mdp.mu0.clone();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut pairs = vec![S::zero(); n * m];
        let mut next = vec![S::zero(); n];
        for s in 0..n {
            for a in 0..m {
                let w = d[s].clone() * pi.prob(s, a).clone();
                if w.is_zero() {
                    continue;
                }
                for (s2, t) in mdp.next_dist(s, a).iter().enumerate() {
                    next[s2] = next[s2].clone() + w.clone() * t.clone();
                }
                pairs[s * m + a] = w;
            }
        }
        out.push(pairs);
        d = next;
    }
    out
}

/// Truncated occupancy `eta_T = sum_{t<T} gamma^t P_t`.
pub fn finite_horizon_occupancy<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>, horizon: usize) -> Vec<S> {
    let mut eta = vec![S::zero(); mdp.n_pairs()];
    let mut w = S::one();
    for pairs in step_marginals(mdp, pi, horizon) {
        for (e, p) in eta.iter_mut().zip(pairs) {
            *e = e.clone() + w.clone() * p;
        }
        w = w * mdp.gamma.clone();
    }
    eta
}

/// `D_T = (1-gamma)/(1-gamma^T) * eta_T`.
pub fn finite_horizon_distribution<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>, horizon: usize) -> Result<Vec<S>> {
    check_horizon(horizon)?;
    let scale = horizon_scale(&mdp.gamma, horizon);
    Ok(finite_horizon_occupancy(mdp, pi, horizon).into_iter().map(|x| x * scale.clone()).collect())
}

/// `J_T(pi) = E[G]` for the reward `r`.
pub fn finite_horizon_eval<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>, r: &[S], horizon: usize) -> S {
    dot(&finite_horizon_occupancy(mdp, pi, horizon), r)
}

/// `J_T` of every deterministic stationary policy, in enumeration order.
pub fn deterministic_values<S: Scalar>(
    mdp: &TabularMdp<S>,
    r: &[S],
    horizon: usize,
    cap: u128,
) -> Result<Vec<(DeterministicPolicy, S)>> {
    let policies = mdp::enumerate_deterministic_policies(mdp, cap)?;
    Ok(policies
        .into_iter()
        .map(|p| {
            let v = finite_horizon_eval(mdp, &p.to_policy(mdp.n_actions), r, horizon);
            (p, v)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck<S> {
    pub lhs: S,
    pub rhs: S,
    pub holds: bool,
}

impl<S: Scalar> BoundCheck<S> {
    /// Exact comparison for rationals, [`BOUND_SLACK`] for floats.
    fn new(lhs: S, rhs: S) -> Self {
        let slack = if S::EXACT { S::zero() } else { S::from_f64_exact(BOUND_SLACK).expect("finite") };
        let holds = lhs <= rhs.clone() + slack;
        Self { lhs, rhs, holds }
    }
}

fn check_rewards<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], rhat: &[S]) -> Result<()> {
    if r.len() != mdp.n_pairs() || rhat.len() != mdp.n_pairs() {
        return Err(Error::InvalidArgument("reward length does not match |S x A|".into()));
    }
    Ok(())
}

/// `E_xi |G_r - G_rhat|` against `(1-gamma^T)/(1-gamma) * E_{D_T} |r - rhat|`.
pub fn verify_return_bound<S: Scalar>(
    mdp: &TabularMdp<S>,
    pi: &Policy<S>,
    r: &[S],
    rhat: &[S],
    horizon: usize,
    cap: u128,
) -> Result<BoundCheck<S>> {
    check_rewards(mdp, r, rhat)?;
    let set = enumerate_trajectories(mdp, pi, horizon, cap)?;
    let (g, gh) = (set.returns_for(r), set.returns_for(rhat));
    let lhs: S = set.probs.iter().zip(g.iter().zip(&gh)).map(|(p, (a, b))| p.clone() * (a.clone() - b.clone()).abs()).sum();
    let d = finite_horizon_distribution(mdp, pi, horizon)?;
    let err: S = d.iter().zip(r.iter().zip(rhat)).map(|(w, (a, b))| w.clone() * (a.clone() - b.clone()).abs()).sum();
    let rhs = err / horizon_scale(&mdp.gamma, horizon);
    Ok(BoundCheck::new(lhs, rhs))
}

/// Trajectories merged by their `(G_r, G_rhat)` pair; only that pair enters
/// the preference model. Sorted for a deterministic summation order.
fn return_groups(probs: &[f64], g: &[f64], gh: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut groups: BTreeMap<(u64, u64), (f64, f64, f64)> = BTreeMap::new();
    for ((p, a), b) in probs.iter().zip(g).zip(gh) {
        let key = (a.to_bits(), b.to_bits());
        groups.entry(key).or_insert((*a, *b, 0.0)).2 += p;
    }
    groups.into_values().collect()
}

/// `E_{xi1, xi2 ~ w x w} KL(p_r || p_rhat)` over grouped returns.
fn pair_kl(groups: &[(f64, f64, f64)], cap: u128) -> Result<f64> {
    let k = groups.len() as u128;
    check_cap(k.saturating_mul(k), cap)?;
    let mut total = 0.0;
    for &(g1, h1, w1) in groups {
        for &(g2, h2, w2) in groups {
            total += w1 * w2 * bernoulli_kl_logits(g1 - g2, h1 - h2);
        }
    }
    Ok(total)
}

/// Expected preference KL over all ordered pairs of trajectories drawn
/// independently from `probs`.
pub fn choice_distance(set: &TrajectorySet<f64>, r: &[f64], rhat: &[f64], cap: u128) -> Result<f64> {
    pair_kl(&return_groups(&set.probs, &set.returns_for(r), &set.returns_for(rhat)), cap)
}

fn choice_distance_and_return_gap(
    mdp: &TabularMdp<f64>,
    pi: &Policy<f64>,
    r: &[f64],
    rhat: &[f64],
    horizon: usize,
    cap: u128,
) -> Result<(TrajectorySet<f64>, f64, f64)> {
    check_rewards(mdp, r, rhat)?;
    let set = enumerate_trajectories(mdp, pi, horizon, cap)?;
    let (g, gh) = (set.returns_for(r), set.returns_for(rhat));
    let gap: f64 = set.probs.iter().zip(g.iter().zip(&gh)).map(|(p, (a, b))| p * (a - b).abs()).sum();
    let kl = pair_kl(&return_groups(&set.probs, &g, &gh), cap)?;
    Ok((set, kl, gap))
}

/// Expected trajectory-preference KL against `2 E_xi |G_r - G_rhat|`.
pub fn verify_choice_bound(
    mdp: &TabularMdp<f64>,
    pi: &Policy<f64>,
    r: &[f64],
    rhat: &[f64],
    horizon: usize,
    cap: u128,
) -> Result<BoundCheck<f64>> {
    let (_, kl, gap) = choice_distance_and_return_gap(mdp, pi, r, rhat, horizon, cap)?;
    Ok(BoundCheck::new(kl, 2.0 * gap))
}

/// Preference KL between trajectories sharing a start state against the
/// unconditional pair KL divided by the smallest positive `mu0` entry.
pub fn verify_common_prefix_bound(
    mdp: &TabularMdp<f64>,
    pi: &Policy<f64>,
    r: &[f64],
    rhat: &[f64],
    horizon: usize,
    cap: u128,
) -> Result<BoundCheck<f64>> {
    let (set, kl, _) = choice_distance_and_return_gap(mdp, pi, r, rhat, horizon, cap)?;
    let (g, gh) = (set.returns_for(r), set.returns_for(rhat));
    let mut lhs = 0.0;
    for s in 0..mdp.n_states {
        let mu = mdp.mu0[s];
        if mu <= 0.0 {
            continue;
        }
        let idx: Vec<usize> = (0..set.len()).filter(|&i| set.start_state(i) == s).collect();
        let probs: Vec<f64> = idx.iter().map(|&i| set.probs[i] / mu).collect();
        let gs: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
        let hs: Vec<f64> = idx.iter().map(|&i| gh[i]).collect();
        lhs += mu * pair_kl(&return_groups(&probs, &gs, &hs), cap)?;
    }
    let min_mu = mdp.mu0.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    Ok(BoundCheck::new(lhs, kl / min_mu))
}

/// `delta(q, sigma)`: how far a preference probability `q` may move while
/// its logit moves by less than `sigma`. `logit` is `log(q / (1 - q))`.
///
/// Written as `(e^sigma - 1) q (1-q) / max((1-q) + q e^sigma, q + (1-q) e^sigma)`
/// so that `q (1-q)` stays accurate for extreme logits.
pub fn delta_for_logit(logit: f64, sigma: f64) -> f64 {
    let q = sigmoid(logit);
    let a = logit.abs();
    let qq = (-a).exp() / (1.0 + (-a).exp()).powi(2);
    let es = sigma.exp();
    (sigma.exp_m1()) * qq / f64::max((1.0 - q) + q * es, q + (1.0 - q) * es)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceEpsilon {
    pub max_j: f64,
    pub min_j: f64,
    pub sigma: f64,
    pub delta: f64,
    pub mu: f64,
    pub epsilon: f64,
}

/// Choice-distance radius below which every optimal policy of a learned
/// reward has regret `< u`, for the trajectory distribution `traj`.
///
/// `traj` must list exactly the feasible trajectories of its horizon, each
/// with positive probability. `J` is the horizon-`T` evaluation over
/// deterministic stationary policies.
pub fn choice_safe_epsilon(mdp: &TabularMdp<f64>, traj: &TrajectorySet<f64>, u: f64, cap: u128) -> Result<ChoiceEpsilon> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("U = {u} is not in (0, 1]")));
    }
    mdp::check_simplex(&traj.probs, "trajectory distribution")?;
    if let Some(i) = traj.probs.iter().position(|&p| p <= 0.0) {
        return Err(Error::NonPositiveDistribution(format!("trajectory {i} has probability {}", traj.probs[i])));
    }
    let feasible = feasible_trajectories(mdp, traj.horizon, cap)?;
    if feasible.trajectories != traj.trajectories {
        return Err(Error::NonPositiveDistribution(format!(
            "distribution lists {} trajectories, {} are feasible",
            traj.len(),
            feasible.len()
        )));
    }

    let values = deterministic_values(mdp, &mdp.reward, traj.horizon, cap)?;
    let max_j = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let min_j = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    if max_j - min_j <= 0.0 {
        return Err(Error::TrivialReward("max J_T = min J_T".into()));
    }
    let sigma = (max_j - min_j) / 2.0 * u;

    // delta(q, sigma) shrinks as |logit| grows, so the extreme return gap decides.
    let g_hi = traj.returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g_lo = traj.returns.iter().copied().fold(f64::INFINITY, f64::min);
    let delta = delta_for_logit(g_hi - g_lo, sigma);
    let mu = 2.0 * delta * delta;
    let min_d = traj.probs.iter().copied().fold(f64::INFINITY, f64::min);
    let epsilon = mu * min_d * min_d;
    Ok(ChoiceEpsilon { max_j, min_j, sigma, delta, mu, epsilon })
}

/// Deterministic stationary policies within `tol` of the best horizon-`T`
/// value under `r`.
pub fn finite_horizon_optimal(
    mdp: &TabularMdp<f64>,
    r: &[f64],
    horizon: usize,
    tol: f64,
    cap: u128,
) -> Result<Vec<DeterministicPolicy>> {
    let values = deterministic_values(mdp, r, horizon, cap)?;
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(values.into_iter().filter(|v| v.1 >= best - tol).map(|v| v.0).collect())
}
