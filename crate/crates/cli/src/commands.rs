use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rewardsafe::adversary::{self, AttackReport, Check};
use rewardsafe::linalg::Matrix;
use rewardsafe::mdp::{self, check_simplex, range};
use rewardsafe::policy_opt::{self, RegularizerSpec};
use rewardsafe::safe_set::{self, build_safety_matrix, check_safety, SafetyMatrix};
use rewardsafe::scalar::dot;
use rewardsafe::traj::{self, BoundCheck};
use rewardsafe::{gen, rlhf, ContextualBandit, DeterministicPolicy, Error, Policy, Rational, Scalar};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::io::{load_matrix, load_model, load_policy, load_vector, matrix_json, policy_json, vec_json, CliScalar, Model};

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: &'static str,
    pub tol: f64,
    pub seed: u64,
    pub cap: u128,
    pub oracle: bool,
    pub promote: bool,
}

/// A command's result. `failure` turns a printed report into a nonzero exit.
pub struct Output {
    pub report: Value,
    /// Printed instead of the report when the report goes to `--out`.
    pub summary: Option<Value>,
    pub failure: Option<CliError>,
}

impl Output {
    fn ok(report: Value) -> Self {
        Output { report, summary: None, failure: None }
    }
}

/// Loads and validates a model.
fn load_valid<S: CliScalar>(cfg: &RunConfig, file: &Path) -> CliResult<Model<S>> {
    let model = load_model::<S>(file, cfg.promote)?;
    match &model {
        Model::Mdp(m) => mdp::validate(m)?,
        Model::Bandit(b) => {
            b.validate()?;
            let (hi, lo) = b.value_range(&b.reward);
            if hi <= lo {
                return Err(Error::TrivialReward("max J = min J".into()).into());
            }
        }
    }
    Ok(model)
}

fn load_dist<S: CliScalar>(cfg: &RunConfig, path: &Path, len: usize) -> CliResult<Vec<S>> {
    let d = load_vector::<S>(path, len, cfg.promote)?;
    check_simplex(&d, "data distribution")?;
    Ok(d)
}

fn neg<S: Scalar>(r: &[S]) -> Vec<S> {
    r.iter().map(|x| -x.clone()).collect()
}

pub fn validate<S: CliScalar>(cfg: &RunConfig, file: &Path) -> CliResult<Output> {
    let model = load_valid::<S>(cfg, file)?;
    let g = model.mdp();
    let (hi, lo) = match &model {
        Model::Mdp(m) => mdp::value_range(m, &m.reward)?,
        Model::Bandit(b) => b.value_range(&b.reward),
    };
    let best = policy_opt::solve_unregularized_det(&g, &g.reward)?;
    let worst = policy_opt::solve_unregularized_det(&g, &neg(&g.reward))?;
    Ok(Output::ok(json!({
        "valid": true,
        "kind": model.kind(),
        "mode": cfg.mode,
        "n_states": g.n_states,
        "n_actions": g.n_actions,
        "gamma": g.gamma.to_json(),
        "range_r": range(&g.reward).to_json(),
        "j_max": hi.to_json(),
        "j_min": lo.to_json(),
        "range_j": (hi - lo).to_json(),
        "optimal_policy": best.actions,
        "worst_policy": worst.actions,
    })))
}

pub fn matrix<S: CliScalar>(cfg: &RunConfig, file: &Path, l: &str, out: Option<&Path>) -> CliResult<Output> {
    let g = load_valid::<S>(cfg, file)?.mdp();
    let l = S::from_flag(l)?;
    let mat = build_safety_matrix(&g, &l, cfg.cap)?;
    let summary = out.map(|p| json!({"rows": mat.len(), "n_pairs": g.n_pairs(), "out": p.display().to_string()}));
    Ok(Output { report: matrix_json(&mat, g.n_pairs(), &l, cfg.mode), summary, failure: None })
}

fn witness_json<S: CliScalar>(mat: &SafetyMatrix<S>, row: usize, d: &[S]) -> Value {
    let p = &mat.provenance[row];
    json!({
        "row": row,
        "value": dot(&mat.rows[row], d).to_json(),
        "vertex": p.vertex.actions,
        "e_f": p.e_f,
        "e_g": p.e_g,
    })
}

pub struct CheckArgs<'a> {
    pub file: &'a Path,
    pub dist: &'a Path,
    pub epsilon: &'a str,
    pub regret_bound: Option<&'a str>,
    pub matrix: Option<&'a Path>,
}

pub fn check<S: CliScalar>(cfg: &RunConfig, a: &CheckArgs) -> CliResult<Output> {
    let g = load_valid::<S>(cfg, a.file)?.mdp();
    let d = load_dist::<S>(cfg, a.dist, g.n_pairs())?;
    let eps = S::from_flag(a.epsilon)?;
    if eps <= S::zero() {
        return Err(CliError::Usage("epsilon must be positive".into()));
    }
    let l_flag = a.regret_bound.map(S::from_flag).transpose()?;
    let (mat, l) = match a.matrix {
        Some(p) => {
            let (m, l) = load_matrix::<S>(p, g.n_pairs())?;
            if l_flag.as_ref().is_some_and(|x| *x != l) {
                return Err(CliError::Usage(format!("--regret-bound differs from the matrix's L = {l}")));
            }
            (m, l)
        }
        None => {
            let l = l_flag.ok_or_else(|| CliError::Usage("--regret-bound is required without --matrix".into()))?;
            (build_safety_matrix(&g, &l, cfg.cap)?, l)
        }
    };
    let rr = range(&g.reward);
    let v = check_safety(&mat, &d, &eps, &rr);
    let witness = match (v.safe, v.witness_row) {
        (false, Some(i)) => witness_json(&mat, i, &d),
        _ => Value::Null,
    };
    let mut report = json!({
        "safe": v.safe,
        "margin": v.margin.as_ref().map(CliScalar::to_json),
        "epsilon": eps.to_json(),
        "regret_bound": l.to_json(),
        "range_r": rr.to_json(),
        "rows": mat.len(),
        "witness": witness,
    });
    let mut failure = None;
    if cfg.oracle {
        let verts = safe_set::high_regret_vertices(&g, &l, cfg.cap)?;
        let mut best: Option<S> = None;
        for vx in &verts.vertices {
            let x = safe_set::lp_unsafe_distance_zeros(&g, &d, &vx.zeros())?;
            if best.as_ref().map_or(true, |b| x < *b) {
                best = Some(x);
            }
        }
        let rhs = eps.clone() * rr.clone();
        let oracle_safe = best.as_ref().map_or(true, |b| *b > rhs);
        let agreement = oracle_safe == v.safe;
        // Float near-ties may legitimately split the two routes.
        let near_tie = !S::EXACT
            && (best.as_ref().is_some_and(|b| (b.as_f64() - rhs.as_f64()).abs() <= cfg.tol)
                || v.margin.as_ref().is_some_and(|m| m.as_f64().abs() <= cfg.tol));
        report["oracle"] = json!({
            "safe": oracle_safe,
            "min_distance": best.as_ref().map(CliScalar::to_json),
            "vertices": verts.vertices.len(),
            "agreement": agreement,
            "near_tie": near_tie,
        });
        if !agreement && !near_tie {
            failure = Some(Error::VerificationFailed("matrix and LP oracle verdicts differ".into()).into());
        }
    }
    Ok(Output { report, summary: None, failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Unreg,
    Reg,
    Rlhf,
    RlhfMae,
}

impl AttackKind {
    fn name(self) -> &'static str {
        match self {
            AttackKind::Unreg => "unreg",
            AttackKind::Reg => "reg",
            AttackKind::Rlhf => "rlhf",
            AttackKind::RlhfMae => "rlhf-mae",
        }
    }
}

pub struct AttackArgs<'a> {
    pub file: &'a Path,
    pub kind: AttackKind,
    pub epsilon: &'a str,
    pub regret_bound: &'a str,
    pub dist: Option<&'a Path>,
    pub lambda: f64,
    pub ref_policy: Option<&'a Path>,
    pub policy: Option<&'a Path>,
}

fn checks_json(checks: &[Check]) -> Value {
    Value::Array(
        checks
            .iter()
            .map(|c| json!({"name": c.name, "value": c.value.to_json(), "bound": c.bound.to_json(), "holds": c.holds}))
            .collect(),
    )
}

fn attack_json<S: CliScalar>(kind: AttackKind, mode: &str, rep: &AttackReport<S>) -> Value {
    let constants = rep.constants.map(|k| {
        json!({
            "delta": k.delta.to_json(),
            "c_inner": k.c_inner.to_json(),
            "c_outer": k.c_outer.to_json(),
            "omega_at_pistar": k.omega_at_pistar.to_json(),
            "radius": k.radius.to_json(),
        })
    });
    json!({
        "attack": kind.name(),
        "mode": mode,
        "certified": rep.certified,
        "error": rep.mae.to_json(),
        "regret": rep.regret_achieved.to_json(),
        "epsilon": rep.eps_budget.to_json(),
        "regret_bound": rep.l_target.to_json(),
        "rhat": vec_json(&rep.rhat),
        "bad_policy": policy_json(&rep.bad_policy),
        "checks": checks_json(&rep.checks),
        "constants": constants,
    })
}

fn attack_output<S: CliScalar>(kind: AttackKind, mode: &str, rep: &AttackReport<S>) -> Output {
    let failure = (!rep.certified).then(|| {
        let names: Vec<&str> = rep.failed_checks().iter().map(|c| c.name.as_str()).collect();
        Error::VerificationFailed(format!("attack not certified: {}", names.join("; "))).into()
    });
    Output { report: attack_json(kind, mode, rep), summary: None, failure }
}

fn reference_policy(path: Option<&Path>, n: usize, m: usize, promote: bool) -> CliResult<Policy<f64>> {
    match path {
        Some(p) => load_policy::<f64>(p, n, m, promote),
        None => Ok(Policy::uniform(n, m)),
    }
}

pub fn attack<S: CliScalar>(cfg: &RunConfig, a: &AttackArgs) -> CliResult<Output> {
    let model = load_valid::<S>(cfg, a.file)?;
    let need_dist = || a.dist.ok_or_else(|| CliError::Usage(format!("--dist is required for --mode {}", a.kind.name())));
    match a.kind {
        AttackKind::Unreg => {
            let g = model.mdp();
            let d = load_dist::<S>(cfg, need_dist()?, g.n_pairs())?;
            let eps = S::from_flag(a.epsilon)?;
            let l = S::from_flag(a.regret_bound)?;
            let bad = match a.policy {
                Some(p) => load_policy::<S>(p, g.n_states, g.n_actions, cfg.promote)?,
                None => match adversary::find_bad_policy(&g, &d, &l, cfg.cap)? {
                    Some((pi, _)) => pi.to_policy(g.n_actions),
                    None => return Err(Error::ConditionNotMet(format!("no deterministic policy has regret >= L = {l}")).into()),
                },
            };
            let rep = adversary::attack_unregularized(&g, &d, &bad, &eps, &l)?;
            Ok(attack_output(a.kind, cfg.mode, &rep))
        }
        AttackKind::Reg => {
            let g = model.mdp().as_f64();
            let d = load_dist::<f64>(cfg, need_dist()?, g.n_pairs())?;
            let (eps, l) = (f64::from_flag(a.epsilon)?, f64::from_flag(a.regret_bound)?);
            let pref = reference_policy(a.ref_policy, g.n_states, g.n_actions, cfg.promote)?;
            let reg = if a.lambda == 0.0 { RegularizerSpec::none() } else { RegularizerSpec::kl(pref, a.lambda)? };
            let rep = adversary::attack_regularized(&g, &d, &reg, l, eps)?;
            Ok(attack_output(a.kind, "float", &rep))
        }
        AttackKind::Rlhf | AttackKind::RlhfMae => {
            let b: ContextualBandit<f64> = match model.as_f64() {
                Model::Bandit(b) => b,
                Model::Mdp(_) => return Err(CliError::Usage("RLHF attacks need a bandit model".into())),
            };
            let (eps, l) = (f64::from_flag(a.epsilon)?, f64::from_flag(a.regret_bound)?);
            let pref = reference_policy(a.ref_policy, b.n_states, b.n_actions, cfg.promote)?;
            let rep = if a.kind == AttackKind::Rlhf {
                rlhf::attack_rlhf(&b, &pref, a.lambda, eps, l)?
            } else {
                rlhf::attack_rlhf_mae(&b, &pref, a.lambda, eps, l)?
            };
            Ok(attack_output(a.kind, "float", &rep))
        }
    }
}

fn bound_json<S: CliScalar>(b: &BoundCheck<S>) -> Value {
    json!({"lhs": b.lhs.to_json(), "rhs": b.rhs.to_json(), "holds": b.holds})
}

pub fn verify_bounds<S: CliScalar>(cfg: &RunConfig, file: &Path, horizon: usize, trials: usize, seed: u64) -> CliResult<Output> {
    if horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    let g = load_valid::<S>(cfg, file)?.mdp();
    let gf = g.as_f64();
    let (n, m) = (g.n_states, g.n_actions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(trials);
    let mut all_hold = true;
    for t in 0..trials {
        let pi: Policy<S> = gen::policy(&mut rng, n, m);
        // Perturb around R so that the error changes sign across pairs.
        let rr = range(&g.reward);
        let rhat: Vec<S> =
            g.reward.iter().map(|x| x.clone() + rr.clone() * S::from_ratio(rng.gen_range(-4..=4), 4)).collect();
        let rhat_f: Vec<f64> = rhat.iter().map(Scalar::as_f64).collect();
        let pf = pi.as_f64();
        let ret = traj::verify_return_bound(&g, &pi, &g.reward, &rhat, horizon, cfg.cap)?;
        let choice = traj::verify_choice_bound(&gf, &pf, &gf.reward, &rhat_f, horizon, cfg.cap)?;
        let prefix = traj::verify_common_prefix_bound(&gf, &pf, &gf.reward, &rhat_f, horizon, cfg.cap)?;
        all_hold &= ret.holds && choice.holds && prefix.holds;
        rows.push(json!({
            "trial": t,
            "return_bound": bound_json(&ret),
            "choice_bound": bound_json(&choice),
            "prefix_bound": bound_json(&prefix),
        }));
    }
    // A constant shift makes the return bound an equality.
    let shift = S::from_ratio(rng.gen_range(-8..=8), 4);
    let shifted: Vec<S> = g.reward.iter().map(|x| x.clone() + shift.clone()).collect();
    let pi = Policy::<S>::uniform(n, m);
    let eq = traj::verify_return_bound(&g, &pi, &g.reward, &shifted, horizon, cfg.cap)?;
    let equal = if S::EXACT { eq.lhs == eq.rhs } else { (eq.lhs.as_f64() - eq.rhs.as_f64()).abs() <= cfg.tol };
    all_hold &= eq.holds && equal;
    let report = json!({
        "mode": cfg.mode,
        "choice_bounds_mode": "float",
        "horizon": horizon,
        "seed": seed,
        "trials": rows,
        "constant_shift": {"shift": shift.to_json(), "lhs": eq.lhs.to_json(), "rhs": eq.rhs.to_json(), "equal": equal},
        "all_hold": all_hold,
    });
    let failure = (!all_hold).then(|| Error::VerificationFailed("a trajectory bound failed".into()).into());
    Ok(Output { report, summary: None, failure })
}

pub fn threshold<S: CliScalar>(cfg: &RunConfig, file: &Path, dist: &Path, l: &str) -> CliResult<Output> {
    let g = load_valid::<S>(cfg, file)?.mdp();
    let d = load_dist::<S>(cfg, dist, g.n_pairs())?;
    let l = S::from_flag(l)?;
    let sq = safe_set::safe_epsilon_threshold_sq(&g, &d, &l)?;
    Ok(Output::ok(json!({
        "mode": cfg.mode,
        "regret_bound": l.to_json(),
        "threshold": sq.as_f64().sqrt().to_json(),
        "threshold_sq": sq.to_json(),
    })))
}

pub fn regret_bound<S: CliScalar>(cfg: &RunConfig, file: &Path, rhat: &Path) -> CliResult<Output> {
    let g = load_valid::<S>(cfg, file)?.mdp();
    let rhat = load_vector::<S>(rhat, g.n_pairs(), cfg.promote)?;
    let b = safe_set::regret_upper_bound_sq(&g, &g.reward, &rhat)?;
    Ok(Output::ok(json!({
        "mode": cfg.mode,
        "bound": b.bound().to_json(),
        "bound_sq": b.bound_sq.to_json(),
        "projected": b.projected().map(|x| x.to_json()),
        "projected_sq": b.projected_sq.as_ref().map(CliScalar::to_json),
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    Tightness,
    Chatbot,
    Worked,
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn tightness() -> CliResult<Value> {
    let mut rows = Vec::new();
    let mut all = true;
    for u in [q(1, 4), q(1, 2), q(1, 1)] {
        let (g, rhat) = gen::tightness_example(u.clone(), q(1, 2));
        let pihat = DeterministicPolicy { actions: vec![1] }.to_policy::<Rational>(3);
        let best = policy_opt::solve_unregularized(&g, &rhat)?;
        let optimal = mdp::policy_eval(&g, &pihat, &rhat)? == mdp::policy_eval(&g, &best, &rhat)?;
        let reg = mdp::regret(&g, &g.reward, &pihat)?;
        let b = safe_set::regret_upper_bound_sq(&g, &g.reward, &rhat)?;
        let d = vec![q(1, 3); 3];
        let (hi, lo) = mdp::value_range(&g, &g.reward)?;
        let err = mdp::mae_distance(&d, &g.reward, &rhat)? * range(&g.reward);
        let mae_bound = err / ((q(1, 1) - g.gamma.clone()) * (hi - lo) * q(1, 3));
        let u_sq = u.clone() * u.clone();
        let ok = optimal && reg == u && b.bound_sq == u_sq && b.projected_sq.as_ref() == Some(&u_sq) && mae_bound == u;
        all &= ok;
        rows.push(json!({
            "u": u.to_json(),
            "reward": vec_json(&g.reward),
            "rhat": vec_json(&rhat),
            "rhat_optimal_is_b": optimal,
            "regret": reg.to_json(),
            "regret_bound_sq": b.bound_sq.to_json(),
            "projected_bound_sq": b.projected_sq.as_ref().map(CliScalar::to_json),
            "error_bound": mae_bound.to_json(),
            "expected": u.to_json(),
            "match": ok,
        }));
    }
    Ok(json!({"example": "tightness", "gamma": "1/2", "distribution": ["1/3", "1/3", "1/3"], "rows": rows, "all_match": all}))
}

fn chatbot() -> CliResult<Value> {
    let mut rows = Vec::new();
    let mut all = true;
    for c in [1, 10, 100] {
        let damage = q(c, 1);
        for l in [q(1, 10), q(1, 4), q(1, 2), q(3, 4), q(9, 10)] {
            let mu = rlhf::chatbot_mu_threshold(&damage, &l);
            let help = rlhf::chatbot_always_help::<Rational>(2);
            let b = rlhf::chatbot_example(damage.clone(), 2, mu.clone())?;
            let at = b.regret(&b.reward, &help)?;
            let below_mu = mu.clone() * q(99, 100);
            let b = rlhf::chatbot_example(damage.clone(), 2, below_mu)?;
            let below = b.regret(&b.reward, &help)?;
            let closed = rlhf::chatbot_regret(&damage, &mu);
            let ok = at == l && closed == l && below < l;
            all &= ok;
            rows.push(json!({
                "c": c,
                "l": l.to_json(),
                "mu_threshold": mu.to_json(),
                "mu_threshold_f64": mu.as_f64(),
                "regret_at_threshold": at.to_json(),
                "regret_below_threshold": below.as_f64(),
                "match": ok,
            }));
        }
    }
    Ok(json!({"example": "chatbot", "answer_styles": 2, "rows": rows, "all_match": all}))
}

fn matrix_rows_json(m: &Matrix<Rational>) -> Value {
    Value::Array((0..m.rows).map(|i| vec_json(m.row(i))).collect())
}

fn worked() -> CliResult<Value> {
    let g = gen::worked_example(q(1, 2));
    let basis = safe_set::build_phi_basis(&g)?;
    let ones = Matrix::from_rows(vec![vec![q(1, 1)]; 3]);
    let l = q(1, 2);
    let mat = build_safety_matrix(&g, &l, 1 << 20)?;
    // D lives on the simplex: substitute d3 = 1 - d1 - d2.
    let reduced: Vec<Value> = mat
        .rows
        .iter()
        .map(|r| json!({"coeffs": vec_json(&[r[0].clone() - r[2].clone(), r[1].clone() - r[2].clone()]), "offset": r[2].to_json()}))
        .collect();
    let ok = basis.a == ones && basis.p == ones;
    Ok(json!({
        "example": "worked",
        "reward": vec_json(&g.reward),
        "gamma": g.gamma.to_json(),
        "regret_bound": l.to_json(),
        "a": matrix_rows_json(&basis.a),
        "p": matrix_rows_json(&basis.p),
        "a_and_p_are_ones": ok,
        "rows": mat.rows.iter().map(|r| vec_json(r)).collect::<Vec<_>>(),
        "reduced_constraints": reduced,
        "all_match": ok,
    }))
}

pub fn example(name: ExampleName) -> CliResult<Output> {
    let report = match name {
        ExampleName::Tightness => tightness()?,
        ExampleName::Chatbot => chatbot()?,
        ExampleName::Worked => worked()?,
    };
    let failure = (report["all_match"] != json!(true))
        .then(|| Error::VerificationFailed("computed values differ from the expected ones".into()).into());
    Ok(Output { report, summary: None, failure })
}
