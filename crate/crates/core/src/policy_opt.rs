//! Unregularised and KL-regularised policy optimisation.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{self, DeterministicPolicy, Policy, TabularMdp};
use crate::scalar::{dot, max_elem, Scalar};

/// Iteration cap for value and policy iteration.
pub const MAX_ITERS: usize = 1_000_000;
/// Bellman residual target (relative to the value scale).
pub const RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    None,
    KlToReference,
}

/// `lambda * omega(pi)` with `omega = KL(pi || reference)` or no regulariser.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub reference: Option<Policy<f64>>,
    pub lambda: f64,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec { kind: RegularizerKind::None, reference: None, lambda: 0.0 }
    }

    pub fn kl(reference: Policy<f64>, lambda: f64) -> Result<Self> {
        let spec = RegularizerSpec { kind: RegularizerKind::KlToReference, reference: Some(reference), lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.kind == RegularizerKind::KlToReference {
            let r = self
                .reference
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("KL regulariser needs a reference policy".into()))?;
            r.validate()?;
            if let Some(i) = r.probs.iter().position(|&p| p <= 0.0) {
                return Err(Error::NonPositiveReference(format!("pi_ref entry {i} is not positive")));
            }
        }
        Ok(())
    }
}

/// `Q(s,a) = r(s,a) + gamma sum_s2 tau(s2|s,a) V(s2)`.
pub fn q_values<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], v: &[S]) -> Vec<S> {
    let mut q = Vec::with_capacity(mdp.n_pairs());
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            q.push(r[mdp.idx(s, a)].clone() + mdp.gamma.clone() * dot(mdp.next_dist(s, a), v));
        }
    }
    q
}

/// Greedy policy with lowest-index tie-breaking. Float ties are resolved
/// within `tol` of the row maximum.
pub fn greedy<S: Scalar>(n_states: usize, n_actions: usize, q: &[S], tol: &S) -> DeterministicPolicy {
    let actions = (0..n_states)
        .map(|s| {
            let row = &q[s * n_actions..(s + 1) * n_actions];
            let best = max_elem(row);
            row.iter().position(|x| x.clone() >= best.clone() - tol.clone()).unwrap_or(0)
        })
        .collect();
    DeterministicPolicy { actions }
}

/// Value of a deterministic policy: solves `(I - gamma P_pi) V = r_pi`.
pub fn policy_values<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], pi: &DeterministicPolicy) -> Result<Vec<S>> {
    let n = mdp.n_states;
    let mut m = Matrix::<S>::identity(n);
    let mut rhs = Vec::with_capacity(n);
    for s in 0..n {
        let a = pi.actions[s];
        for (s2, p) in mdp.next_dist(s, a).iter().enumerate() {
            m[(s, s2)] = m[(s, s2)].clone() - mdp.gamma.clone() * p.clone();
        }
        rhs.push(r[mdp.idx(s, a)].clone());
    }
    m.solve(&rhs).ok_or_else(|| Error::SingularSystem("policy evaluation".into()))
}

/// Deterministic optimal policy for `r`.
///
/// Float backend: value iteration to residual `1e-12` (relative), then greedy
/// extraction. Rational backend: exact policy iteration, then greedy
/// extraction on the exact optimal values. Ties go to the lowest action index.
pub fn solve_unregularized<S: Scalar>(mdp: &TabularMdp<S>, r: &[S]) -> Result<Policy<S>> {
    Ok(solve_unregularized_det(mdp, r)?.to_policy(mdp.n_actions))
}

pub fn solve_unregularized_det<S: Scalar>(mdp: &TabularMdp<S>, r: &[S]) -> Result<DeterministicPolicy> {
    if S::EXACT {
        policy_iteration(mdp, r)
    } else {
        value_iteration(mdp, r)
    }
}

fn value_iteration<S: Scalar>(mdp: &TabularMdp<S>, r: &[S]) -> Result<DeterministicPolicy> {
    let (n, m) = (mdp.n_states, mdp.n_actions);
    let rmax = r.iter().fold(S::zero(), |acc, x| S::max_of(acc, x.abs()));
    let scale = S::max_of(S::one(), rmax) / (S::one() - mdp.gamma.clone());
    let target = S::from_f64_exact(RESIDUAL).expect("finite") * scale.clone();
    let mut v = vec![S::zero(); n];
    for _ in 0..MAX_ITERS {
        let q = q_values(mdp, r, &v);
        let next: Vec<S> = (0..n).map(|s| max_elem(&q[s * m..(s + 1) * m])).collect();
        let resid = next
            .iter()
            .zip(&v)
            .fold(S::zero(), |acc, (a, b)| S::max_of(acc, (a.clone() - b.clone()).abs()));
        v = next;
        if resid <= target {
            // Polish: evaluate the greedy policy exactly and re-extract until stable.
            let tie = S::tol() * scale;
            let mut pi = greedy(n, m, &q_values(mdp, r, &v), &tie);
            for _ in 0..n * m + 1 {
                let vp = policy_values(mdp, r, &pi)?;
                let next_pi = greedy(n, m, &q_values(mdp, r, &vp), &tie);
                if next_pi == pi {
                    break;
                }
                pi = next_pi;
            }
            return Ok(pi);
        }
    }
    Err(Error::NonConvergence(MAX_ITERS))
}

fn policy_iteration<S: Scalar>(mdp: &TabularMdp<S>, r: &[S]) -> Result<DeterministicPolicy> {
    let (n, m) = (mdp.n_states, mdp.n_actions);
    let zero = S::zero();
    let mut pi = greedy(n, m, r, &zero);
    for _ in 0..MAX_ITERS {
        let v = policy_values(mdp, r, &pi)?;
        let q = q_values(mdp, r, &v);
        // Switch only on strict improvement so the loop terminates.
        let mut changed = false;
        let mut next = pi.clone();
        for s in 0..n {
            let row = &q[s * m..(s + 1) * m];
            let best = max_elem(row);
            if best > row[pi.actions[s]] {
                next.actions[s] = row.iter().position(|x| *x == best).expect("max present");
                changed = true;
            }
        }
        if !changed {
            return Ok(greedy(n, m, &q, &zero));
        }
        pi = next;
    }
    Err(Error::NonConvergence(MAX_ITERS))
}

/// `log sum_a w_a exp(x_a)` with a max shift.
fn log_sum_exp_weighted(w: &[f64], x: &[f64]) -> f64 {
    let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = w.iter().zip(x).map(|(wi, xi)| wi * (xi - mx).exp()).sum();
    mx + s.ln()
}

/// Result of soft value iteration.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    pub policy: Policy<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

/// KL-regularised optimal policy by soft value iteration.
///
/// Backup `V(s) = lambda log sum_a pi_ref(a|s) exp(Q(s,a)/lambda)`; the
/// returned policy is `pi(a|s) ∝ pi_ref(a|s) exp(Q(s,a)/lambda)`. It maximises
/// `D^pi . r - lambda omega(pi)` with `omega` from [`omega_kl`].
pub fn solve_kl_regularized(mdp: &TabularMdp<f64>, r: &[f64], reg: &RegularizerSpec) -> Result<Policy<f64>> {
    Ok(soft_value_iteration(mdp, r, reg)?.policy)
}

pub fn soft_value_iteration(mdp: &TabularMdp<f64>, r: &[f64], reg: &RegularizerSpec) -> Result<SoftSolution> {
    reg.validate()?;
    if reg.kind != RegularizerKind::KlToReference || reg.lambda <= 0.0 {
        return Err(Error::InvalidArgument("soft value iteration needs a KL regulariser with lambda > 0".into()));
    }
    let pref = reg.reference.as_ref().expect("validated");
    if pref.n_states != mdp.n_states || pref.n_actions != mdp.n_actions {
        return Err(Error::InvalidArgument("reference policy shape does not match".into()));
    }
    let (n, m, lam) = (mdp.n_states, mdp.n_actions, reg.lambda);
    let rmax = r.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let target = RESIDUAL * (1.0 + rmax) / (1.0 - mdp.gamma);
    let mut v = vec![0.0; n];
    for it in 1..=MAX_ITERS {
        let q = q_values(mdp, r, &v);
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let x: Vec<f64> = q[s * m..(s + 1) * m].iter().map(|qv| qv / lam).collect();
                lam * log_sum_exp_weighted(pref.row(s), &x)
            })
            .collect();
        let resid = next.iter().zip(&v).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        v = next;
        if resid <= target {
            let q = q_values(mdp, r, &v);
            let policy = soft_policy(n, m, pref, &q, lam);
            return Ok(SoftSolution { policy, q, v, iterations: it });
        }
    }
    Err(Error::NonConvergence(MAX_ITERS))
}

/// `pi(a|s) ∝ pi_ref(a|s) exp(q(s,a)/lambda)`, normalised with a log-sum-exp shift.
pub fn soft_policy(n: usize, m: usize, pref: &Policy<f64>, q: &[f64], lambda: f64) -> Policy<f64> {
    let mut probs = Vec::with_capacity(n * m);
    for s in 0..n {
        let x: Vec<f64> = q[s * m..(s + 1) * m].iter().map(|qv| qv / lambda).collect();
        let lse = log_sum_exp_weighted(pref.row(s), &x);
        for a in 0..m {
            probs.push(pref.row(s)[a] * (x[a] - lse).exp());
        }
    }
    Policy { n_states: n, n_actions: m, probs }
}

/// Per-state KL divergences `KL(pi(.|s) || pi_ref(.|s))`.
fn per_state_kl(pi: &Policy<f64>, pref: &Policy<f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pi.n_states);
    for s in 0..pi.n_states {
        let mut kl = 0.0;
        for (a, (&p, &q)) in pi.row(s).iter().zip(pref.row(s)).enumerate() {
            if p <= 0.0 {
                continue;
            }
            if q <= 0.0 {
                return Err(Error::SupportViolation(format!("pi puts mass on ({s},{a}) where pi_ref is zero")));
            }
            kl += p * (p / q).ln();
        }
        out.push(kl.max(0.0));
    }
    Ok(out)
}

/// `omega(pi) = sum_s d^pi(s) KL(pi(.|s) || pi_ref(.|s))` with `d^pi` the
/// normalised discounted state occupancy.
pub fn omega_kl(mdp: &TabularMdp<f64>, pi: &Policy<f64>, pi_ref: &Policy<f64>) -> Result<f64> {
    let d = mdp::state_occupancy(mdp, pi)?;
    let kl = per_state_kl(pi, pi_ref)?;
    let mut total = 0.0;
    for s in 0..mdp.n_states {
        // States the policy never visits carry no weight, even if unsupported.
        if d[s] > 0.0 {
            total += (1.0 - mdp.gamma) * d[s] * kl[s];
        }
    }
    Ok(total)
}

/// `D^pi . r - lambda omega(pi)`: the objective that (lambda, omega)-optimal
/// policies maximise.
pub fn regularized_objective(mdp: &TabularMdp<f64>, r: &[f64], pi: &Policy<f64>, reg: &RegularizerSpec) -> Result<f64> {
    let d = mdp::policy_induced_distribution(mdp, pi)?;
    let j = dot(&d, r);
    match reg.kind {
        RegularizerKind::None => Ok(j),
        RegularizerKind::KlToReference => {
            let pref = reg.reference.as_ref().expect("validated");
            Ok(j - reg.lambda * omega_kl(mdp, pi, pref)?)
        }
    }
}
