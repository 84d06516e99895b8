//! Tabular MDPs, contextual bandits, policies, occupancy measures and
//! reward-distance metrics.
//!
//! Every vector over state-action pairs is flat in state-major,
//! action-minor order: index `s * n_actions + a`.

use serde::{Deserialize, Serialize};

use crate::error::{check_cap, Error, Result};
use crate::linalg::Matrix;
use crate::policy_opt;
use crate::scalar::{dot, max_elem, min_elem, sum, Scalar};

/// Default cap for exhaustive enumerations.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// Reward over state-action pairs, flat.
pub type RewardTable<S> = Vec<S>;
/// Probability vector over state-action pairs, flat.
pub type DataDistribution<S> = Vec<S>;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<S> {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[(s * n_actions + a) * n_states + s2]`
    pub transitions: Vec<S>,
    pub mu0: Vec<S>,
    pub gamma: S,
    pub reward: RewardTable<S>,
}

impl<S: Scalar> TabularMdp<S> {
    /// Builds an MDP after checking shapes only; see [`validate`] for the
    /// semantic invariants.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<S>,
        mu0: Vec<S>,
        gamma: S,
        reward: Vec<S>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument("need at least one state and one action".into()));
        }
        let nm = n_states * n_actions;
        if transitions.len() != nm * n_states || mu0.len() != n_states || reward.len() != nm {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch: transitions {}, mu0 {}, reward {} for {} states x {} actions",
                transitions.len(),
                mu0.len(),
                reward.len(),
                n_states,
                n_actions
            )));
        }
        if !(gamma >= S::zero() && gamma < S::one()) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0,1), got {gamma}")));
        }
        Ok(TabularMdp { n_states, n_actions, transitions, mu0, gamma, reward })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn p(&self, s: usize, a: usize, s2: usize) -> &S {
        &self.transitions[(s * self.n_actions + a) * self.n_states + s2]
    }

    pub fn next_dist(&self, s: usize, a: usize) -> &[S] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn with_reward(&self, reward: Vec<S>) -> Self {
        assert_eq!(reward.len(), self.n_pairs());
        TabularMdp { reward, ..self.clone() }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TabularMdp<T> {
        TabularMdp {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: self.transitions.iter().map(&f).collect(),
            mu0: self.mu0.iter().map(&f).collect(),
            gamma: f(&self.gamma),
            reward: self.reward.iter().map(&f).collect(),
        }
    }

    pub fn as_f64(&self) -> TabularMdp<f64> {
        self.map(Scalar::as_f64)
    }
}

/// A contextual bandit `<S, A, mu0, R>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualBandit<S> {
    pub n_states: usize,
    pub n_actions: usize,
    pub mu0: Vec<S>,
    pub reward: RewardTable<S>,
}

impl<S: Scalar> ContextualBandit<S> {
    pub fn new(n_states: usize, n_actions: usize, mu0: Vec<S>, reward: Vec<S>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument("need at least one state and one action".into()));
        }
        if mu0.len() != n_states || reward.len() != n_states * n_actions {
            return Err(Error::InvalidArgument("bandit shape mismatch".into()));
        }
        Ok(ContextualBandit { n_states, n_actions, mu0, reward })
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex(&self.mu0, "mu0")?;
        if !range(&self.reward).gt_tol(&S::zero()) {
            return Err(Error::TrivialReward("range R = 0".into()));
        }
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Embeds the bandit as an MDP whose next context is drawn afresh from
    /// `mu0` regardless of the action. Its normalised state occupancy is
    /// `mu0` for every policy, so `D^pi(s,a) = mu0(s) pi(a|s)`.
    pub fn as_mdp(&self, gamma: S) -> TabularMdp<S> {
        let n = self.n_states;
        let mut transitions = Vec::with_capacity(self.n_pairs() * n);
        for _ in 0..self.n_pairs() {
            transitions.extend(self.mu0.iter().cloned());
        }
        TabularMdp::new(n, self.n_actions, transitions, self.mu0.clone(), gamma, self.reward.clone())
            .expect("bandit embedding has consistent shapes")
    }

    /// `J(pi) = E_{s~mu0, a~pi}[R(s,a)]`.
    pub fn eval(&self, pi: &Policy<S>, r: &[S]) -> S {
        let mut j = S::zero();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let i = s * self.n_actions + a;
                j = j + self.mu0[s].clone() * pi.probs[i].clone() * r[i].clone();
            }
        }
        j
    }

    /// `(max J, min J)`: per-state best and worst actions.
    pub fn value_range(&self, r: &[S]) -> (S, S) {
        let mut hi = S::zero();
        let mut lo = S::zero();
        for s in 0..self.n_states {
            let row = &r[s * self.n_actions..(s + 1) * self.n_actions];
            hi = hi + self.mu0[s].clone() * max_elem(row);
            lo = lo + self.mu0[s].clone() * min_elem(row);
        }
        (hi, lo)
    }

    pub fn regret(&self, r: &[S], pi: &Policy<S>) -> Result<S> {
        let (hi, lo) = self.value_range(r);
        let width = hi.clone() - lo;
        if width.is_negligible() {
            return Err(Error::TrivialReward("max J = min J".into()));
        }
        Ok((hi - self.eval(pi, r)) / width)
    }
}

/// Stochastic tabular policy, `probs[s * n_actions + a] = pi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<S> {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<S>,
}

impl<S: Scalar> Policy<S> {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<S>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::InvalidArgument("policy shape mismatch".into()));
        }
        let pi = Policy { n_states, n_actions, probs };
        pi.validate()?;
        Ok(pi)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = S::from_ratio(1, n_actions as i64);
        Policy { n_states, n_actions, probs: vec![p; n_states * n_actions] }
    }

    pub fn prob(&self, s: usize, a: usize) -> &S {
        &self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[S] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            check_simplex(self.row(s), &format!("policy row {s}"))?;
        }
        Ok(())
    }

    /// The deterministic policy if every row is one-hot.
    pub fn as_deterministic(&self) -> Option<DeterministicPolicy> {
        let mut actions = Vec::with_capacity(self.n_states);
        for s in 0..self.n_states {
            let row = self.row(s);
            let a = row.iter().position(|p| p.approx_eq(&S::one()))?;
            actions.push(a);
        }
        Some(DeterministicPolicy { actions })
    }

    pub fn as_f64(&self) -> Policy<f64> {
        Policy {
            n_states: self.n_states,
            n_actions: self.n_actions,
            probs: self.probs.iter().map(Scalar::as_f64).collect(),
        }
    }
}

/// Deterministic policy: `actions[s]` is the chosen action in state `s`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    pub actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn to_policy<S: Scalar>(&self, n_actions: usize) -> Policy<S> {
        let n = self.actions.len();
        let mut probs = vec![S::zero(); n * n_actions];
        for (s, &a) in self.actions.iter().enumerate() {
            assert!(a < n_actions, "action index out of range");
            probs[s * n_actions + a] = S::one();
        }
        Policy { n_states: n, n_actions, probs }
    }

    /// Pairs `(s,a)` with `pi(a|s) = 0`, as flat indices.
    pub fn zero_pairs(&self, n_actions: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (s, &chosen) in self.actions.iter().enumerate() {
            out.extend((0..n_actions).filter(|&a| a != chosen).map(|a| s * n_actions + a));
        }
        out
    }
}

/// Discounted state-action visitation `eta(s,a) = sum_t gamma^t P(s_t=s, a_t=a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure<S> {
    pub eta: Vec<S>,
}

impl<S: Scalar> OccupancyMeasure<S> {
    /// `D = (1 - gamma) eta`.
    pub fn normalized(&self, gamma: &S) -> Vec<S> {
        let f = S::one() - gamma.clone();
        self.eta.iter().map(|x| x.clone() * f.clone()).collect()
    }

    /// Flat indices with positive occupancy.
    pub fn support(&self) -> Vec<usize> {
        (0..self.eta.len()).filter(|&i| self.eta[i].gt_tol(&S::zero())).collect()
    }
}

/// Checks entries are nonnegative and sum to one (exactly for rationals).
pub fn check_simplex<S: Scalar>(v: &[S], what: &str) -> Result<()> {
    if let Some(x) = v.iter().find(|x| **x < -S::tol()) {
        return Err(Error::StochasticityViolation(format!("{what} has negative entry {x}")));
    }
    let total = sum(v);
    if !total.approx_eq(&S::one()) {
        return Err(Error::StochasticityViolation(format!("{what} sums to {total}")));
    }
    Ok(())
}

pub fn range<S: Scalar>(r: &[S]) -> S {
    max_elem(r) - min_elem(r)
}

/// States reachable from `supp(mu0)` under some action sequence.
pub fn reachable_states<S: Scalar>(mdp: &TabularMdp<S>) -> Vec<bool> {
    let n = mdp.n_states;
    let mut seen: Vec<bool> = mdp.mu0.iter().map(|p| p.gt_tol(&S::zero())).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&s| seen[s]).collect();
    while let Some(s) = stack.pop() {
        for a in 0..mdp.n_actions {
            for (s2, p) in mdp.next_dist(s, a).iter().enumerate() {
                if !seen[s2] && p.gt_tol(&S::zero()) {
                    seen[s2] = true;
                    stack.push(s2);
                }
            }
        }
    }
    seen
}

/// Checks stochasticity, reachability and non-triviality of the reward.
pub fn validate<S: Scalar>(mdp: &TabularMdp<S>) -> Result<()> {
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            check_simplex(mdp.next_dist(s, a), &format!("transitions[{s}][{a}]"))?;
        }
    }
    check_simplex(&mdp.mu0, "mu0")?;
    if let Some(s) = reachable_states(mdp).iter().position(|&r| !r) {
        return Err(Error::UnreachableState(s));
    }
    if !range(&mdp.reward).gt_tol(&S::zero()) {
        return Err(Error::TrivialReward("range R = 0".into()));
    }
    value_range(mdp, &mdp.reward)?;
    Ok(())
}

/// State transition matrix under `pi`: `P_pi[s][s2] = sum_a pi(a|s) tau(s2|s,a)`.
fn state_transition_matrix<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>) -> Matrix<S> {
    let n = mdp.n_states;
    let mut p = Matrix::<S>::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let w = pi.prob(s, a);
            if w.is_zero() {
                continue;
            }
            for (s2, t) in mdp.next_dist(s, a).iter().enumerate() {
                p[(s, s2)] = p[(s, s2)].clone() + w.clone() * t.clone();
            }
        }
    }
    p
}

/// Discounted state visitation `d = mu0 + gamma P_pi^T d` (unnormalised).
pub fn state_occupancy<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>) -> Result<Vec<S>> {
    let n = mdp.n_states;
    let p = state_transition_matrix(mdp, pi);
    let mut m = Matrix::<S>::identity(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = m[(i, j)].clone() - mdp.gamma.clone() * p[(j, i)].clone();
        }
    }
    m.solve(&mdp.mu0)
        .ok_or_else(|| Error::SingularSystem("flow system I - gamma P_pi^T".into()))
}

pub fn occupancy_measure<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>) -> Result<OccupancyMeasure<S>> {
    check_policy_shape(mdp, pi)?;
    let d = state_occupancy(mdp, pi)?;
    let mut eta = Vec::with_capacity(mdp.n_pairs());
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            eta.push(d[s].clone() * pi.prob(s, a).clone());
        }
    }
    Ok(OccupancyMeasure { eta })
}

/// `D^pi = (1 - gamma) eta^pi`.
pub fn policy_induced_distribution<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>) -> Result<DataDistribution<S>> {
    Ok(occupancy_measure(mdp, pi)?.normalized(&mdp.gamma))
}

/// `J = eta^pi . r`.
pub fn policy_eval<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>, r: &[S]) -> Result<S> {
    Ok(dot(&occupancy_measure(mdp, pi)?.eta, r))
}

/// `(max_pi J, min_pi J)` for reward `r`; fails if they coincide.
pub fn value_range<S: Scalar>(mdp: &TabularMdp<S>, r: &[S]) -> Result<(S, S)> {
    let best = policy_opt::solve_unregularized(mdp, r)?;
    let neg: Vec<S> = r.iter().map(|x| -x.clone()).collect();
    let worst = policy_opt::solve_unregularized(mdp, &neg)?;
    let hi = policy_eval(mdp, &best, r)?;
    let lo = policy_eval(mdp, &worst, r)?;
    let scale = range(r) / (S::one() - mdp.gamma.clone());
    let thr = S::tol() * S::max_of(S::one(), scale);
    if hi.clone() - lo.clone() <= thr {
        return Err(Error::TrivialReward("max J = min J".into()));
    }
    Ok((hi, lo))
}

/// `(max J - J(pi)) / (max J - min J)`.
pub fn regret<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], pi: &Policy<S>) -> Result<S> {
    let (hi, lo) = value_range(mdp, r)?;
    regret_with_range(mdp, r, pi, &hi, &lo)
}

/// Regret when `(max J, min J)` is already known.
pub fn regret_with_range<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], pi: &Policy<S>, hi: &S, lo: &S) -> Result<S> {
    let j = policy_eval(mdp, pi, r)?;
    let g = (hi.clone() - j) / (hi.clone() - lo.clone());
    // Clamp float round-off into [0,1]; rational values are exact already.
    Ok(if S::EXACT { g } else { S::min_of(S::max_of(g, S::zero()), S::one()) })
}

fn check_dist_args<S: Scalar>(d: &[S], r: &[S], rhat: &[S]) -> Result<S> {
    if d.len() != r.len() || r.len() != rhat.len() || r.is_empty() {
        return Err(Error::InvalidArgument("distance arguments differ in length".into()));
    }
    let w = range(r);
    if !w.gt_tol(&S::zero()) {
        return Err(Error::TrivialReward("range R = 0".into()));
    }
    Ok(w)
}

/// `E_d |rhat - r| / range r`.
pub fn mae_distance<S: Scalar>(d: &[S], r: &[S], rhat: &[S]) -> Result<S> {
    let w = check_dist_args(d, r, rhat)?;
    let total: S = (0..d.len()).map(|i| d[i].clone() * (rhat[i].clone() - r[i].clone()).abs()).sum();
    Ok(total / w)
}

/// `E_d ((rhat - r) / range r)^2`.
pub fn mse_distance<S: Scalar>(d: &[S], r: &[S], rhat: &[S]) -> Result<S> {
    let w = check_dist_args(d, r, rhat)?;
    let total: S = (0..d.len())
        .map(|i| {
            let e = (rhat[i].clone() - r[i].clone()) / w.clone();
            d[i].clone() * e.clone() * e
        })
        .sum();
    Ok(total)
}

/// Number of deterministic policies `m^n`, saturating.
pub fn deterministic_policy_count(n_states: usize, n_actions: usize) -> u128 {
    (0..n_states).fold(1u128, |acc, _| acc.saturating_mul(n_actions as u128))
}

/// All `m^n` deterministic policies in lexicographic order of the action
/// vector (last state varies fastest).
pub fn enumerate_deterministic_policies<S: Scalar>(
    mdp: &TabularMdp<S>,
    cap: u128,
) -> Result<Vec<DeterministicPolicy>> {
    enumerate_action_vectors(mdp.n_states, mdp.n_actions, cap)
}

pub fn enumerate_action_vectors(n_states: usize, n_actions: usize, cap: u128) -> Result<Vec<DeterministicPolicy>> {
    let count = deterministic_policy_count(n_states, n_actions);
    check_cap(count, cap)?;
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0usize; n_states];
    loop {
        out.push(DeterministicPolicy { actions: cur.clone() });
        let mut k = n_states;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < n_actions {
                break;
            }
            cur[k] = 0;
        }
    }
}

fn check_policy_shape<S: Scalar>(mdp: &TabularMdp<S>, pi: &Policy<S>) -> Result<()> {
    if pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions {
        return Err(Error::InvalidArgument("policy shape does not match the MDP".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn one_state(rewards: &[f64], gamma: f64) -> TabularMdp<f64> {
        let m = rewards.len();
        TabularMdp::new(1, m, vec![1.0; m], vec![1.0], gamma, rewards.to_vec()).unwrap()
    }

    fn chain() -> TabularMdp<Rational> {
        // s0 -a0-> s0, s0 -a1-> s1, s1 -> s0 under both actions.
        let t = vec![q(1, 1), q(0, 1), q(0, 1), q(1, 1), q(1, 1), q(0, 1), q(1, 1), q(0, 1)];
        TabularMdp::new(2, 2, t, vec![q(1, 1), q(0, 1)], q(1, 2), vec![q(0, 1), q(1, 1), q(2, 1), q(0, 1)]).unwrap()
    }

    #[test]
    fn valid_chain_passes() {
        validate(&chain()).unwrap();
    }

    #[test]
    fn unreachable_state_detected() {
        let t = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::new(2, 2, t, vec![1.0, 0.0], 0.5, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(validate(&mdp), Err(Error::UnreachableState(1)));
    }

    #[test]
    fn constant_reward_is_trivial() {
        let mdp = one_state(&[2.0, 2.0], 0.5);
        assert!(matches!(validate(&mdp), Err(Error::TrivialReward(_))));
    }

    #[test]
    fn bad_transition_row_rejected() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 0.9], vec![1.0], 0.5, vec![0.0, 1.0]).unwrap();
        assert!(matches!(validate(&mdp), Err(Error::StochasticityViolation(_))));
    }

    #[test]
    fn geometric_occupancy_single_state() {
        let mdp = one_state(&[1.0, 0.0], 0.5);
        let pi = DeterministicPolicy { actions: vec![0] }.to_policy(2);
        let occ = occupancy_measure(&mdp, &pi).unwrap();
        assert!((occ.eta[0] - 2.0).abs() < 1e-12 && occ.eta[1] == 0.0);
        assert!((policy_eval(&mdp, &pi, &mdp.reward).unwrap() - 2.0).abs() < 1e-12);
        let d = policy_induced_distribution(&mdp, &pi).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12 && d[1] == 0.0);
        let u = policy_induced_distribution(&mdp, &Policy::uniform(1, 2)).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12 && (u[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rational_occupancy_normalised_exactly() {
        let mdp = chain();
        let pi = Policy::new(2, 2, vec![q(1, 3), q(2, 3), q(1, 2), q(1, 2)]).unwrap();
        let occ = occupancy_measure(&mdp, &pi).unwrap();
        assert_eq!(sum(&occ.eta), q(2, 1));
    }

    #[test]
    fn regret_extremes_exact() {
        let mdp = chain();
        let best = policy_opt::solve_unregularized(&mdp, &mdp.reward).unwrap();
        let neg: Vec<Rational> = mdp.reward.iter().map(|x| -x.clone()).collect();
        let worst = policy_opt::solve_unregularized(&mdp, &neg).unwrap();
        assert_eq!(regret(&mdp, &mdp.reward, &best).unwrap(), q(0, 1));
        assert_eq!(regret(&mdp, &mdp.reward, &worst).unwrap(), q(1, 1));
    }

    #[test]
    fn tightness_example_regret() {
        let mdp = TabularMdp::new(1, 3, vec![q(1, 1); 3], vec![q(1, 1)], q(1, 2), vec![q(1, 1), q(0, 1), q(-1, 1)]).unwrap();
        let pi = DeterministicPolicy { actions: vec![1] }.to_policy(3);
        assert_eq!(regret(&mdp, &mdp.reward, &pi).unwrap(), q(1, 2));
    }

    #[test]
    fn distances_direct_evaluation() {
        let d = [0.5, 0.5];
        let r = [1.0, 0.0];
        let rhat = [1.0, 1.0];
        assert!((mae_distance(&d, &r, &rhat).unwrap() - 0.5).abs() < 1e-15);
        assert!((mse_distance(&d, &r, &rhat).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mae_distance(&d, &r, &r).unwrap(), 0.0);
        assert_eq!(mae_distance(&[0.0, 1.0], &r, &rhat).unwrap(), 1.0);
        assert!(matches!(mae_distance(&d, &[1.0, 1.0], &rhat), Err(Error::TrivialReward(_))));
    }

    #[test]
    fn enumeration_counts_and_order() {
        let p = enumerate_action_vectors(1, 3, DEFAULT_CAP).unwrap();
        assert_eq!(p.len(), 3);
        let p = enumerate_action_vectors(2, 2, DEFAULT_CAP).unwrap();
        let v: Vec<Vec<usize>> = p.into_iter().map(|d| d.actions).collect();
        assert_eq!(v, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(enumerate_action_vectors(3, 4, DEFAULT_CAP).unwrap().len(), 64);
        assert!(matches!(
            enumerate_action_vectors(30, 10, DEFAULT_CAP),
            Err(Error::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn bandit_embedding_occupancy_is_mu0() {
        let b = ContextualBandit::new(2, 2, vec![q(1, 3), q(2, 3)], vec![q(1, 1), q(0, 1), q(0, 1), q(1, 1)]).unwrap();
        let mdp = b.as_mdp(q(9, 10));
        let pi = Policy::new(2, 2, vec![q(1, 4), q(3, 4), q(1, 1), q(0, 1)]).unwrap();
        let d = policy_induced_distribution(&mdp, &pi).unwrap();
        assert_eq!(d, vec![q(1, 12), q(3, 12), q(2, 3), q(0, 1)]);
        assert_eq!(dot(&d, &b.reward), b.eval(&pi, &b.reward));
    }
}
