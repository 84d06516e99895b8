//! Contextual-bandit RLHF: Bradley-Terry choices, the closed-form
//! KL-regularised policy, choice-probability distances, and the attacks that
//! exploit rarely sampled actions of the reference policy.

use crate::adversary::{AttackReport, Check, CERT_TOL};
use crate::error::{Error, Result};
use crate::mdp::{self, range, ContextualBandit, Policy};
use crate::scalar::{max_elem, min_elem, Scalar};

/// Preference model over answers: `p(a1 > a2 | s) = sigmoid(R(s,a1) - R(s,a2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceModel {
    pub n_actions: usize,
    pub reward: Vec<f64>,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `KL(Bern(sigmoid x) || Bern(sigmoid y))`.
pub fn bernoulli_kl_logits(x: f64, y: f64) -> f64 {
    let p = sigmoid(x);
    // log sigmoid(z) = -softplus(-z)
    let t1 = p * (softplus(-y) - softplus(-x));
    let t2 = (1.0 - p) * (softplus(y) - softplus(x));
    (t1 + t2).max(0.0)
}

impl ChoiceModel {
    pub fn new(n_actions: usize, reward: Vec<f64>) -> Result<Self> {
        if n_actions == 0 || reward.len() % n_actions != 0 {
            return Err(Error::InvalidArgument("reward length is not a multiple of n_actions".into()));
        }
        if let Some(x) = reward.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite reward {x}")));
        }
        Ok(ChoiceModel { n_actions, reward })
    }

    pub fn bt_prob(&self, s: usize, a1: usize, a2: usize) -> f64 {
        let m = self.n_actions;
        sigmoid(self.reward[s * m + a1] - self.reward[s * m + a2])
    }
}

pub fn bt_prob(cm: &ChoiceModel, s: usize, a1: usize, a2: usize) -> f64 {
    cm.bt_prob(s, a1, a2)
}

fn check_reference(bandit: &ContextualBandit<f64>, pi_ref: &Policy<f64>) -> Result<()> {
    if pi_ref.n_states != bandit.n_states || pi_ref.n_actions != bandit.n_actions {
        return Err(Error::InvalidArgument("reference policy shape does not match the bandit".into()));
    }
    pi_ref.validate()?;
    if let Some(i) = pi_ref.probs.iter().position(|&p| p <= 0.0) {
        return Err(Error::NonPositiveReference(format!("pi_ref entry {i} is not positive")));
    }
    Ok(())
}

/// `pi(a|s) ∝ pi_ref(a|s) exp(rhat(s,a) / lambda)`.
pub fn rlhf_optimal_policy(
    bandit: &ContextualBandit<f64>,
    rhat: &[f64],
    pi_ref: &Policy<f64>,
    lambda: f64,
) -> Result<Policy<f64>> {
    check_reference(bandit, pi_ref)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let m = bandit.n_actions;
    let mut probs = Vec::with_capacity(bandit.n_pairs());
    for s in 0..bandit.n_states {
        let logits: Vec<f64> = (0..m).map(|a| pi_ref.row(s)[a].ln() + rhat[s * m + a] / lambda).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
        probs.extend(logits.iter().map(|l| (l - top).exp() / z));
    }
    Ok(Policy { n_states: bandit.n_states, n_actions: m, probs })
}

/// `J_rhat(pi) - lambda E_mu0 KL(pi(.|s) || pi_ref(.|s))`.
pub fn rlhf_objective(
    bandit: &ContextualBandit<f64>,
    rhat: &[f64],
    pi: &Policy<f64>,
    pi_ref: &Policy<f64>,
    lambda: f64,
) -> f64 {
    let m = bandit.n_actions;
    let mut total = 0.0;
    for s in 0..bandit.n_states {
        let mut kl = 0.0;
        let mut ret = 0.0;
        for a in 0..m {
            let p = pi.row(s)[a];
            ret += p * rhat[s * m + a];
            if p > 0.0 {
                kl += p * (p / pi_ref.row(s)[a]).ln();
            }
        }
        total += bandit.mu0[s] * (ret - lambda * kl);
    }
    total
}

/// `E_{s ~ mu0, a1, a2 ~ pi_ref} KL(p_r(.|s,a1,a2) || p_rhat(.|s,a1,a2))`.
pub fn choice_kl_distance(bandit: &ContextualBandit<f64>, pi_ref: &Policy<f64>, r: &[f64], rhat: &[f64]) -> f64 {
    let m = bandit.n_actions;
    let mut total = 0.0;
    for s in 0..bandit.n_states {
        let mut inner = 0.0;
        for a1 in 0..m {
            for a2 in 0..m {
                let x = r[s * m + a1] - r[s * m + a2];
                let y = rhat[s * m + a1] - rhat[s * m + a2];
                inner += pi_ref.row(s)[a1] * pi_ref.row(s)[a2] * bernoulli_kl_logits(x, y);
            }
        }
        total += bandit.mu0[s] * inner;
    }
    total
}

/// `R_L(s) = (1 - L) max_a R(s,a) + L min_a R(s,a)`.
pub fn reward_threshold<S: Scalar>(bandit: &ContextualBandit<S>, l: &S) -> Vec<S> {
    let m = bandit.n_actions;
    (0..bandit.n_states)
        .map(|s| {
            let row = &bandit.reward[s * m..(s + 1) * m];
            (S::one() - l.clone()) * max_elem(row) + l.clone() * min_elem(row)
        })
        .collect()
}

/// Which error certificate the mass bound targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdVariant {
    /// Choice-probability KL, error measured as `eps range R`.
    ChoiceKl,
    /// Mean absolute error under `D(s,a) = mu0(s) pi_ref(a|s)`.
    Mae,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateThreshold {
    pub state: usize,
    /// Chosen low-reward action, if any action lies below `R_L(s)`.
    pub action: Option<usize>,
    pub r_l: f64,
    pub pi_ref_mass: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlhfThresholdReport {
    pub per_state: Vec<StateThreshold>,
    pub satisfied: bool,
}

/// `log` of the per-action mass bound.
fn log_mass_bound(gap: f64, range_r: f64, lambda: f64, eps: f64, l: f64, variant: ThresholdVariant) -> f64 {
    let base = gap.ln() + range_r.ln() - l.ln() - range_r / lambda + 2.0 * eps.ln() - 2.0 * lambda.ln();
    match variant {
        ThresholdVariant::ChoiceKl => base - 4f64.ln(),
        ThresholdVariant::Mae => base,
    }
}

/// Per state, looks for an action below `R_L(s)` whose reference mass is
/// within the bound; among those that qualify, the one with least mass.
pub fn check_rlhf_threshold_variant(
    bandit: &ContextualBandit<f64>,
    pi_ref: &Policy<f64>,
    lambda: f64,
    eps: f64,
    l: f64,
    variant: ThresholdVariant,
) -> Result<RlhfThresholdReport> {
    check_reference(bandit, pi_ref)?;
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::InvalidArgument(format!("L must lie in (0,1), got {l}")));
    }
    if !(lambda > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument("lambda and eps must be positive".into()));
    }
    let m = bandit.n_actions;
    let range_r = range(&bandit.reward);
    let rl = reward_threshold(bandit, &l);
    let mut per_state = Vec::with_capacity(bandit.n_states);
    for (s, &r_l) in rl.iter().enumerate() {
        // (satisfied, mass, action, bound)
        let mut best: Option<(bool, f64, usize, f64)> = None;
        for a in 0..m {
            let gap = r_l - bandit.reward[s * m + a];
            if gap <= 0.0 {
                continue;
            }
            let mass = pi_ref.row(s)[a];
            let log_bound = log_mass_bound(gap, range_r, lambda, eps, l, variant);
            let ok = mass.ln() <= log_bound;
            let better = match best {
                None => true,
                Some((bok, bmass, _, _)) => (ok && !bok) || (ok == bok && mass < bmass),
            };
            if better {
                best = Some((ok, mass, a, log_bound.exp()));
            }
        }
        per_state.push(match best {
            Some((ok, mass, a, bound)) => {
                StateThreshold { state: s, action: Some(a), r_l, pi_ref_mass: mass, threshold: bound, satisfied: ok }
            }
            None => StateThreshold { state: s, action: None, r_l, pi_ref_mass: 0.0, threshold: 0.0, satisfied: false },
        });
    }
    let satisfied = per_state.iter().all(|p| p.satisfied);
    Ok(RlhfThresholdReport { per_state, satisfied })
}

pub fn check_rlhf_threshold(
    bandit: &ContextualBandit<f64>,
    pi_ref: &Policy<f64>,
    lambda: f64,
    eps: f64,
    l: f64,
) -> Result<RlhfThresholdReport> {
    check_rlhf_threshold_variant(bandit, pi_ref, lambda, eps, l, ThresholdVariant::ChoiceKl)
}

/// Smallest reward on `(s, a_s)` that drags the regularised policy's
/// expected reward in state `s` down to `R_L(s)`:
/// `max(R(s,a_s), lambda log(sum_{a != a_s} (R(s,a) - R_L) pi_ref(a|s) e^{R(s,a)/lambda}
///   / ((R_L - R(s,a_s)) pi_ref(a_s|s))))`.
pub fn bonus_reward(bandit: &ContextualBandit<f64>, pi_ref: &Policy<f64>, lambda: f64, s: usize, a_s: usize, r_l: f64) -> f64 {
    let m = bandit.n_actions;
    let row = &bandit.reward[s * m..(s + 1) * m];
    let top = max_elem(row);
    let num: f64 = (0..m)
        .filter(|&a| a != a_s)
        .map(|a| (row[a] - r_l) * pi_ref.row(s)[a] * ((row[a] - top) / lambda).exp())
        .sum();
    if num <= 0.0 {
        return row[a_s];
    }
    let den = (r_l - row[a_s]) * pi_ref.row(s)[a_s];
    let c = lambda * num.ln() + top - lambda * den.ln();
    c.max(row[a_s])
}

fn rlhf_attack(
    bandit: &ContextualBandit<f64>,
    pi_ref: &Policy<f64>,
    lambda: f64,
    eps: f64,
    l: f64,
    variant: ThresholdVariant,
) -> Result<AttackReport<f64>> {
    let report = check_rlhf_threshold_variant(bandit, pi_ref, lambda, eps, l, variant)?;
    if !report.satisfied {
        let bad: Vec<String> = report.per_state.iter().filter(|p| !p.satisfied).map(|p| p.state.to_string()).collect();
        let what = match variant {
            ThresholdVariant::ChoiceKl => "pi_ref(a_s|s) <= (R_L(s) - R(s,a_s)) range R / (L exp(range R/lambda)) eps^2/(4 lambda^2)",
            ThresholdVariant::Mae => "pi_ref(a_s|s) <= (R_L(s) - R(s,a_s))/L range R / exp(range R/lambda) eps^2/lambda^2",
        };
        return Err(Error::ConditionNotMet(format!("{what} fails in states [{}]", bad.join(", "))));
    }
    let m = bandit.n_actions;
    let r = &bandit.reward;
    let range_r = range(r);
    let mut rhat = r.clone();
    for st in &report.per_state {
        let a_s = st.action.expect("satisfied states have an action");
        rhat[st.state * m + a_s] = bonus_reward(bandit, pi_ref, lambda, st.state, a_s, st.r_l);
    }
    let pi = rlhf_optimal_policy(bandit, &rhat, pi_ref, lambda)?;
    let g = bandit.regret(r, &pi)?;
    let (err, bound, name) = match variant {
        ThresholdVariant::ChoiceKl => (choice_kl_distance(bandit, pi_ref, r, &rhat), eps * range_r, "choice KL <= eps range R"),
        ThresholdVariant::Mae => {
            let d = reference_distribution(bandit, pi_ref);
            (mdp::mae_distance(&d, r, &rhat)?, eps, "mae <= eps")
        }
    };
    let mut checks = vec![Check::le(name, err, bound, CERT_TOL), Check::ge("regret >= L", g, l, CERT_TOL)];
    let obj = rlhf_objective(bandit, &rhat, &pi, pi_ref, lambda);
    let obj_ref = rlhf_objective(bandit, &rhat, pi_ref, pi_ref, lambda);
    checks.push(Check::ge("objective(pi) >= objective(pi_ref)", obj, obj_ref, CERT_TOL));
    let out = AttackReport {
        rhat,
        bad_policy: pi,
        mae: err,
        regret_achieved: g,
        eps_budget: eps,
        l_target: l,
        certified: checks.iter().all(|c| c.holds),
        checks,
        constants: None,
    };
    if !out.certified {
        let names: Vec<String> = out.failed_checks().iter().map(|c| c.name.clone()).collect();
        return Err(Error::VerificationFailed(names.join("; ")));
    }
    Ok(out)
}

/// Preference-data attack; certificate is choice KL `<= eps range R`.
pub fn attack_rlhf(bandit: &ContextualBandit<f64>, pi_ref: &Policy<f64>, lambda: f64, eps: f64, l: f64) -> Result<AttackReport<f64>> {
    rlhf_attack(bandit, pi_ref, lambda, eps, l, ThresholdVariant::ChoiceKl)
}

/// Same construction, certified by MAE under `mu0(s) pi_ref(a|s)`.
pub fn attack_rlhf_mae(bandit: &ContextualBandit<f64>, pi_ref: &Policy<f64>, lambda: f64, eps: f64, l: f64) -> Result<AttackReport<f64>> {
    rlhf_attack(bandit, pi_ref, lambda, eps, l, ThresholdVariant::Mae)
}

/// `D(s,a) = mu0(s) pi_ref(a|s)`.
pub fn reference_distribution<S: Scalar>(bandit: &ContextualBandit<S>, pi_ref: &Policy<S>) -> Vec<S> {
    let m = bandit.n_actions;
    (0..bandit.n_pairs()).map(|i| bandit.mu0[i / m].clone() * pi_ref.probs[i].clone()).collect()
}

/// Two queries (safe, unsafe) and `n` answer styles each for helping
/// (actions `0..n`) and refusing (actions `n..2n`).
pub fn chatbot_example<S: Scalar>(damage: S, n: usize, mu_unsafe: S) -> Result<ContextualBandit<S>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one answer style".into()));
    }
    if !(damage > S::zero()) || mu_unsafe < S::zero() || mu_unsafe > S::one() {
        return Err(Error::InvalidArgument("need C > 0 and mu_unsafe in [0,1]".into()));
    }
    let mut reward = Vec::with_capacity(4 * n);
    reward.extend((0..n).map(|_| S::one()));
    reward.extend((0..n).map(|_| S::zero()));
    reward.extend((0..n).map(|_| -damage.clone()));
    reward.extend((0..n).map(|_| S::zero()));
    ContextualBandit::new(2, 2 * n, vec![S::one() - mu_unsafe.clone(), mu_unsafe], reward)
}

/// Regret of any always-helping policy: `mu C / (1 - mu + mu C)`.
pub fn chatbot_regret<S: Scalar>(damage: &S, mu_unsafe: &S) -> S {
    let num = mu_unsafe.clone() * damage.clone();
    num.clone() / (S::one() - mu_unsafe.clone() + num)
}

/// Least unsafe-query frequency at which always helping reaches regret `l`:
/// `L / ((1 - L) C + L)`.
pub fn chatbot_mu_threshold<S: Scalar>(damage: &S, l: &S) -> S {
    l.clone() / ((S::one() - l.clone()) * damage.clone() + l.clone())
}

/// Always helps, spreading mass uniformly over the `n` helpful styles.
pub fn chatbot_always_help<S: Scalar>(n: usize) -> Policy<S> {
    let p = S::from_ratio(1, n as i64);
    let mut probs = Vec::with_capacity(4 * n);
    for _ in 0..2 {
        probs.extend((0..n).map(|_| p.clone()));
        probs.extend((0..n).map(|_| S::zero()));
    }
    Policy { n_states: 2, n_actions: 2 * n, probs }
}

/// Learned reward agreeing with `R` except `rhat(unsafe, help_i0) = b`.
pub fn chatbot_reward_model<S: Scalar>(bandit: &ContextualBandit<S>, i0: usize, b: S) -> Vec<S> {
    let mut rhat = bandit.reward.clone();
    rhat[bandit.n_actions + i0] = b;
    rhat
}
