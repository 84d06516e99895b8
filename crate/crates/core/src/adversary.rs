//! Adversarial reward models: low error on the data distribution, yet the
//! (regularised) optimal policy has high regret.

use crate::error::{Error, Result};
use crate::mdp::{self, range, DeterministicPolicy, Policy, TabularMdp};
use crate::policy_opt::{self, RegularizerKind, RegularizerSpec};
use crate::scalar::{max_elem, min_elem, norm_sq, Scalar};

/// Slack for certificates that pass through an iterative solver.
pub const SOLVER_SLACK: f64 = 1e-6;
/// Slack for error and regret certificates in float mode.
pub const CERT_TOL: f64 = 1e-9;

/// A named inequality checked while certifying an attack.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, bound: f64, slack: f64) -> Self {
        Check { name: name.into(), value, bound, holds: value <= bound + slack }
    }

    pub fn ge(name: &str, value: f64, bound: f64, slack: f64) -> Self {
        Check { name: name.into(), value, bound, holds: value >= bound - slack }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport<S> {
    pub rhat: Vec<S>,
    pub bad_policy: Policy<S>,
    /// Error of `rhat` under the certificate's metric (MAE, or choice KL
    /// for the preference attack).
    pub mae: S,
    pub regret_achieved: S,
    pub eps_budget: S,
    pub l_target: S,
    pub certified: bool,
    /// Every inequality behind `certified`, plus auxiliary guarantees.
    pub checks: Vec<Check>,
    pub constants: Option<RegularizedAttackConstants>,
}

impl<S: Scalar> AttackReport<S> {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.holds).collect()
    }
}

/// `D(supp D^pi)`: data mass on the pairs `pi` visits.
pub fn support_mass<S: Scalar>(mdp: &TabularMdp<S>, d: &[S], pi: &Policy<S>) -> Result<S> {
    let occ = mdp::occupancy_measure(mdp, pi)?;
    Ok(occ.support().iter().map(|&i| d[i].clone()).sum())
}

/// Whether `pi` attains the unregularised optimum for `r`.
fn is_optimal<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], pi: &Policy<S>) -> Result<(bool, S, S)> {
    let best = policy_opt::solve_unregularized(mdp, r)?;
    let jb = mdp::policy_eval(mdp, &best, r)?;
    let jp = mdp::policy_eval(mdp, pi, r)?;
    let scale = S::max_of(S::one(), max_elem(&r.iter().map(|x| x.abs()).collect::<Vec<_>>()))
        / (S::one() - mdp.gamma.clone());
    Ok((jp.clone() >= jb.clone() - S::tol() * scale, jp, jb))
}

/// Raises the reward to `max R` on the support of `bad_pi`'s occupancy.
///
/// Requires `regret(bad_pi) >= l` and `D(supp D^bad_pi) < eps`. The report
/// re-checks the error, optimality and regret clauses independently.
pub fn attack_unregularized<S: Scalar>(
    mdp: &TabularMdp<S>,
    d: &[S],
    bad_pi: &Policy<S>,
    eps: &S,
    l: &S,
) -> Result<AttackReport<S>> {
    if d.len() != mdp.n_pairs() {
        return Err(Error::InvalidArgument("distribution length differs from |S x A|".into()));
    }
    let r = &mdp.reward;
    let g = mdp::regret(mdp, r, bad_pi)?;
    if g < l.clone() - S::tol() {
        return Err(Error::PreconditionFailed(format!("regret of the bad policy is {g} < L = {l}")));
    }
    let occ = mdp::occupancy_measure(mdp, bad_pi)?;
    let supp = occ.support();
    let mass: S = supp.iter().map(|&i| d[i].clone()).sum();
    if mass >= *eps {
        return Err(Error::PreconditionFailed(format!("D(supp D^pi) = {mass} is not below eps = {eps}")));
    }
    let top = max_elem(r);
    let mut rhat = r.clone();
    for &i in &supp {
        rhat[i] = top.clone();
    }
    let err = mdp::mae_distance(d, r, &rhat)?;
    let (optimal, j_bad, j_best) = is_optimal(mdp, &rhat, bad_pi)?;
    let slack = if S::EXACT { 0.0 } else { CERT_TOL };
    let checks = vec![
        Check::le("mae <= D(supp D^pi)", err.as_f64(), mass.as_f64(), slack),
        Check::le("mae <= eps", err.as_f64(), eps.as_f64(), slack),
        Check::ge("J_rhat(pi) >= max J_rhat", j_bad.as_f64(), j_best.as_f64(), 0.0),
        Check::ge("regret >= L", g.as_f64(), l.as_f64(), slack),
    ];
    let tol = S::tol();
    let certified = err <= mass.clone() + tol.clone() && err <= eps.clone() + tol.clone() && optimal && g >= l.clone() - tol;
    Ok(AttackReport {
        rhat,
        bad_policy: bad_pi.clone(),
        mae: err,
        regret_achieved: g,
        eps_budget: eps.clone(),
        l_target: l.clone(),
        certified,
        checks,
        constants: None,
    })
}

/// Deterministic policy with regret `>= l` and the least data mass on its
/// occupancy support; ties go to the lexicographically first policy.
pub fn find_bad_policy<S: Scalar>(
    mdp: &TabularMdp<S>,
    d: &[S],
    l: &S,
    cap: u128,
) -> Result<Option<(DeterministicPolicy, S)>> {
    let (hi, lo) = mdp::value_range(mdp, &mdp.reward)?;
    let mut best: Option<(DeterministicPolicy, S)> = None;
    for pi in mdp::enumerate_deterministic_policies(mdp, cap)? {
        let p = pi.to_policy(mdp.n_actions);
        let g = mdp::regret_with_range(mdp, &mdp.reward, &p, &hi, &lo)?;
        if g < l.clone() - S::tol() {
            continue;
        }
        let mass = support_mass(mdp, d, &p)?;
        if best.as_ref().map_or(true, |(_, m)| mass < *m) {
            best = Some((pi, mass));
        }
    }
    Ok(best)
}

/// `delta` and the occupancy radius `C(L,R)` within which every policy keeps
/// regret at least `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaConstants {
    /// `min(1, (1 - gamma) C(L,R) / sqrt |S x A|)`.
    pub delta: f64,
    /// `(1 - L) range Jbar / |R|` with `Jbar = D^pi . R`.
    pub radius: f64,
    /// Value before clamping to 1.
    pub unclamped: f64,
}

pub fn compute_delta<S: Scalar>(mdp: &TabularMdp<S>, l: f64) -> Result<DeltaConstants> {
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::InvalidArgument(format!("L must lie in (0,1), got {l}")));
    }
    let (hi, lo) = mdp::value_range(mdp, &mdp.reward)?;
    let g = mdp.gamma.as_f64();
    let range_jbar = (1.0 - g) * (hi - lo).as_f64();
    let norm = norm_sq(&mdp.reward).as_f64().sqrt();
    let radius = (1.0 - l) * range_jbar / norm;
    let unclamped = (1.0 - g) * radius / (mdp.n_pairs() as f64).sqrt();
    Ok(DeltaConstants { delta: unclamped.min(1.0), radius, unclamped })
}

/// Minimal probability weight of `pi`-compatible prefixes: `w[t][s]` is the
/// least `mu0(s_0) prod tau(s_{i+1} | s_i, pi(s_i))` over length-`t` prefixes
/// ending in `s` (`None` if none exist), for `t = 0..=t0` where `t0` is the
/// first step at which the set reachable within `t` steps stops growing.
pub fn min_prefix_weights<S: Scalar>(mdp: &TabularMdp<S>, pi: &DeterministicPolicy) -> Vec<Vec<Option<S>>> {
    let n = mdp.n_states;
    let first: Vec<Option<S>> =
        mdp.mu0.iter().map(|p| if p.gt_tol(&S::zero()) { Some(p.clone()) } else { None }).collect();
    let mut seen: Vec<bool> = first.iter().map(Option::is_some).collect();
    let mut layers = vec![first];
    loop {
        let prev = layers.last().expect("nonempty");
        let mut next: Vec<Option<S>> = vec![None; n];
        for s in 0..n {
            let Some(w) = &prev[s] else { continue };
            for (s2, p) in mdp.next_dist(s, pi.actions[s]).iter().enumerate() {
                if !p.gt_tol(&S::zero()) {
                    continue;
                }
                let cand = w.clone() * p.clone();
                next[s2] = Some(match next[s2].take() {
                    Some(cur) => S::min_of(cur, cand),
                    None => cand,
                });
            }
        }
        let grew = next.iter().enumerate().any(|(s, w)| w.is_some() && !seen[s]);
        if !grew {
            return layers;
        }
        for (s, w) in next.iter().enumerate() {
            seen[s] |= w.is_some();
        }
        layers.push(next);
    }
}

/// `(1 - gamma) min_{t <= t0, prefix} gamma^t tau(prefix) (1 - delta)^t delta`.
///
/// Lower-bounds the data mass that any policy putting probability at least
/// `delta` off `pi` at a reachable state must place off `pi`'s support.
pub fn compute_inner_constant<S: Scalar>(mdp: &TabularMdp<S>, pi: &DeterministicPolicy, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1], got {delta}")));
    }
    let g = mdp.gamma.as_f64();
    let mut best = f64::INFINITY;
    for (t, layer) in min_prefix_weights(mdp, pi).iter().enumerate() {
        // With gamma = 0 only the initial step carries occupancy.
        if g == 0.0 && t > 0 {
            break;
        }
        let step = g.powi(t as i32) * (1.0 - delta).powi(t as i32) * delta;
        for w in layer.iter().flatten() {
            best = best.min(step * w.as_f64());
        }
    }
    Ok((1.0 - g) * best)
}

/// Constants behind the regularised attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedAttackConstants {
    pub delta: f64,
    pub c_inner: f64,
    /// `lambda omega(pi*) / (range R c_inner)`.
    pub c_outer: f64,
    pub omega_at_pistar: f64,
    pub radius: f64,
}

fn worst_policy(mdp: &TabularMdp<f64>) -> Result<DeterministicPolicy> {
    let neg: Vec<f64> = mdp.reward.iter().map(|x| -x).collect();
    policy_opt::solve_unregularized_det(mdp, &neg)
}

fn regularizer_parts(reg: &RegularizerSpec) -> Result<(f64, Option<&Policy<f64>>)> {
    reg.validate()?;
    match reg.kind {
        RegularizerKind::None => Ok((0.0, None)),
        RegularizerKind::KlToReference => Ok((reg.lambda, reg.reference.as_ref())),
    }
}

/// Constants for the worst-case policy `pi*` of `mdp`.
pub fn regularized_constants(
    mdp: &TabularMdp<f64>,
    reg: &RegularizerSpec,
    l: f64,
) -> Result<(DeterministicPolicy, RegularizedAttackConstants)> {
    let (lambda, pref) = regularizer_parts(reg)?;
    let pistar = worst_policy(mdp)?;
    let dc = compute_delta(mdp, l)?;
    let c_inner = compute_inner_constant(mdp, &pistar, dc.delta)?;
    let omega = match pref {
        Some(p) if lambda > 0.0 => policy_opt::omega_kl(mdp, &pistar.to_policy(mdp.n_actions), p)?,
        _ => 0.0,
    };
    let c_outer = lambda * omega / (range(&mdp.reward) * c_inner);
    Ok((pistar, RegularizedAttackConstants { delta: dc.delta, c_inner, c_outer, omega_at_pistar: omega, radius: dc.radius }))
}

/// Attack against the (KL-)regularised optimal policy.
///
/// Raises the reward on `supp D^pi*` to `max R + lambda omega(pi*) / c_inner`,
/// so that every regularised optimum stays within `delta` of the worst-case
/// policy `pi*` on its support. Needs `D(supp D^pi*) <= eps / (1 + C)`.
pub fn attack_regularized(
    mdp: &TabularMdp<f64>,
    d: &[f64],
    reg: &RegularizerSpec,
    l: f64,
    eps: f64,
) -> Result<AttackReport<f64>> {
    if d.len() != mdp.n_pairs() {
        return Err(Error::InvalidArgument("distribution length differs from |S x A|".into()));
    }
    let (lambda, _) = regularizer_parts(reg)?;
    let (pistar, k) = regularized_constants(mdp, reg, l)?;
    let r = &mdp.reward;
    let pstar = pistar.to_policy::<f64>(mdp.n_actions);
    let occ_star = mdp::occupancy_measure(mdp, &pstar)?;
    let supp = occ_star.support();
    let mass: f64 = supp.iter().map(|&i| d[i]).sum();
    if !(k.c_inner > 0.0) || !k.c_outer.is_finite() {
        return Err(Error::ConditionNotMet(format!(
            "D(supp D^pi*) <= eps/(1+C) cannot hold: C is not finite (inner constant {})",
            k.c_inner
        )));
    }
    let allowed = eps / (1.0 + k.c_outer);
    if mass > allowed {
        return Err(Error::ConditionNotMet(format!(
            "D(supp D^pi*) <= eps/(1+C) fails: {mass} > {allowed} (C = {})",
            k.c_outer
        )));
    }
    let top = max_elem(r) + if lambda > 0.0 { lambda / k.c_inner * k.omega_at_pistar } else { 0.0 };
    let mut rhat = r.clone();
    for &i in &supp {
        rhat[i] = top;
    }

    let pihat = if lambda > 0.0 { policy_opt::solve_kl_regularized(mdp, &rhat, reg)? } else { pstar.clone() };
    let err = mdp::mae_distance(d, r, &rhat)?;
    let g = mdp::regret(mdp, r, &pihat)?;
    let scale = 1.0 + top.abs();
    let mut checks = vec![
        Check::le("mae <= eps", err, eps, CERT_TOL),
        Check::ge("regret >= L", g, l, CERT_TOL),
    ];
    // Optimality: the returned policy dominates natural competitors.
    let obj = policy_opt::regularized_objective(mdp, &rhat, &pihat, reg)?;
    let mut rivals = vec![("pi*", pstar.clone()), ("uniform", Policy::uniform(mdp.n_states, mdp.n_actions))];
    if let Some(p) = &reg.reference {
        rivals.push(("pi_ref", p.clone()));
    }
    if lambda == 0.0 {
        rivals.push(("argmax rhat", policy_opt::solve_unregularized(mdp, &rhat)?));
    }
    for (name, rival) in rivals {
        let o = policy_opt::regularized_objective(mdp, &rhat, &rival, reg)?;
        checks.push(Check::ge(&format!("objective(pi_hat) >= objective({name})"), obj, o, CERT_TOL * scale));
    }
    // Policy mass on the worst-case support.
    let min_mass = supp.iter().map(|&i| pihat.probs[i]).fold(f64::INFINITY, f64::min);
    checks.push(Check::ge("min pi_hat(a|s) on supp D^pi* >= 1 - delta", min_mass, 1.0 - k.delta, SOLVER_SLACK));
    // Occupancy perturbation bounds.
    let g_ = mdp.gamma;
    let d_hat = mdp::policy_induced_distribution(mdp, &pihat)?;
    let d_star = occ_star.normalized(&g_);
    let on_supp: f64 = supp.iter().map(|&i| d_hat[i]).sum();
    checks.push(Check::ge("D^pi_hat(supp D^pi*) >= 1 - delta/(1-gamma)", on_supp, 1.0 - k.delta / (1.0 - g_), SOLVER_SLACK));
    let gap: Vec<f64> = d_hat.iter().zip(&d_star).map(|(a, b)| a - b).collect();
    let bound = (mdp.n_pairs() as f64).sqrt() * k.delta / (1.0 - g_);
    checks.push(Check::le("|D^pi_hat - D^pi*| <= sqrt|SxA| delta/(1-gamma)", norm_sq(&gap).sqrt(), bound, SOLVER_SLACK));
    checks.push(Check::le("D(supp D^pi*) <= eps/(1+C)", mass, allowed, 0.0));

    let report = AttackReport {
        rhat,
        bad_policy: pihat,
        mae: err,
        regret_achieved: g,
        eps_budget: eps,
        l_target: l,
        certified: checks.iter().all(|c| c.holds),
        checks,
        constants: Some(k),
    };
    if !report.certified {
        let names: Vec<String> = report.failed_checks().iter().map(|c| c.name.clone()).collect();
        return Err(Error::VerificationFailed(names.join("; ")));
    }
    Ok(report)
}

/// Outcome of the sufficient condition for `D = D^pi_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfRefReport {
    /// `max / min` of `D^pi_ref` over `supp D^pi*`.
    pub k: f64,
    pub min_mass: f64,
    /// `(eps / (K |S| (1 + lambda / (range R c_inner))))^2`.
    pub bound: f64,
    pub holds: bool,
    /// Direct evaluation of `D^pi_ref(supp D^pi*)` against `eps / (1 + C)`.
    pub support_mass: f64,
    pub support_bound: f64,
}

pub fn check_selfref_kl_condition(
    mdp: &TabularMdp<f64>,
    pi_ref: &Policy<f64>,
    lambda: f64,
    eps: f64,
    l: f64,
) -> Result<SelfRefReport> {
    let reg = RegularizerSpec::kl(pi_ref.clone(), lambda)?;
    let (pistar, k) = regularized_constants(mdp, &reg, l)?;
    let d_ref = mdp::policy_induced_distribution(mdp, pi_ref)?;
    let supp = mdp::occupancy_measure(mdp, &pistar.to_policy(mdp.n_actions))?.support();
    let masses: Vec<f64> = supp.iter().map(|&i| d_ref[i]).collect();
    let (hi, lo) = (max_elem(&masses), min_elem(&masses));
    let ratio = hi / lo;
    let b = lambda / (range(&mdp.reward) * k.c_inner);
    let bound = (eps / (ratio * mdp.n_states as f64 * (1.0 + b))).powi(2);
    let support_mass: f64 = masses.iter().sum();
    Ok(SelfRefReport {
        k: ratio,
        min_mass: lo,
        bound,
        holds: lo <= bound,
        support_mass,
        support_bound: eps / (1.0 + k.c_outer),
    })
}
