//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rewardsafe::adversary::{self, attack_regularized, attack_unregularized, find_bad_policy, regularized_constants};
use rewardsafe::mdp::{self, range};
use rewardsafe::policy_opt::{self, RegularizerSpec};
use rewardsafe::rlhf::{self, attack_rlhf, attack_rlhf_mae};
use rewardsafe::safe_set::{self, build_safety_matrix, check_all_unsafe, check_safety, lp_unsafe_distance};
use rewardsafe::traj;
use rewardsafe::{gen, ContextualBandit, DeterministicPolicy, Policy, Rational, Scalar, TabularMdp};

const CAP: u128 = 1 << 22;

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: String) -> Outcome {
    Outcome { ok: true, detail }
}

fn fail(detail: String) -> Outcome {
    Outcome { ok: false, detail }
}

/// MDP with `max J > min J`, so regret is defined.
fn nontrivial_mdp<S: Scalar>(rng: &mut ChaCha8Rng, n: usize, m: usize) -> TabularMdp<S> {
    loop {
        let g: TabularMdp<S> = gen::mdp(rng, n, m);
        if let Ok((hi, lo)) = mdp::value_range(&g, &g.reward) {
            if !(hi - lo).is_negligible() {
                return g;
            }
        }
    }
}

fn worst_policy<S: Scalar>(g: &TabularMdp<S>) -> DeterministicPolicy {
    let neg: Vec<S> = g.reward.iter().map(|x| -x.clone()).collect();
    policy_opt::solve_unregularized_det(g, &neg).unwrap()
}

/// Best value among all deterministic policies, by direct evaluation.
fn brute_force_max<S: Scalar>(g: &TabularMdp<S>, r: &[S]) -> S {
    mdp::enumerate_deterministic_policies(g, CAP)
        .unwrap()
        .iter()
        .map(|p| mdp::policy_eval(g, &p.to_policy(g.n_actions), r).unwrap())
        .fold(None, |acc: Option<S>, v| Some(acc.map_or(v.clone(), |a| S::max_of(a, v))))
        .unwrap()
}

fn mean_abs<S: Scalar>(d: &[S], r: &[S], rhat: &[S]) -> S {
    let w = range(r);
    d.iter().zip(r.iter().zip(rhat)).map(|(p, (a, b))| p.clone() * (a.clone() - b.clone()).abs() / w.clone()).sum()
}

fn c1_characterization() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut agree, mut total, mut safe_count) = (0usize, 0usize, 0usize);
    let mut first_bad = None;
    for i in 0..100 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let g: TabularMdp<Rational> = nontrivial_mdp(&mut rng, n, m);
        let l = q(rng.gen_range(1..=4), 4);
        let mat = build_safety_matrix(&g, &l, CAP).unwrap();
        let set = safe_set::high_regret_vertices(&g, &l, CAP).unwrap();
        let rr = range(&g.reward);
        for k in 0..5 {
            let d: Vec<Rational> = gen::simplex(&mut rng, g.n_pairs(), 0, 5);
            let dists: Vec<Rational> = set.vertices.iter().map(|v| lp_unsafe_distance(&g, &d, &v.policy).unwrap()).collect();
            let lp_min = dists.iter().min().unwrap().clone();
            // Alternate between boundary-relative and free epsilons.
            let eps = if k % 2 == 0 {
                let f = [q(1, 2), q(9, 10), q(1, 1), q(11, 10), q(2, 1)][rng.gen_range(0..5)].clone();
                let e = &lp_min / &rr * f;
                if e.is_positive() { e } else { q(1, 100) }
            } else {
                q(rng.gen_range(1..=20), 40)
            };
            let oracle_safe = dists.iter().all(|x| *x > &eps * &rr);
            let verdict = check_safety(&mat, &d, &eps, &rr);
            total += 1;
            safe_count += usize::from(oracle_safe);
            if verdict.safe == oracle_safe {
                agree += 1;
            } else if first_bad.is_none() {
                first_bad = Some(format!("instance {i} draw {k}"));
            }
        }
    }
    let took = start.elapsed();
    let detail = format!("{agree}/{total} agree ({safe_count} safe), {:.1}s", took.as_secs_f64());
    if agree == total && took < Duration::from_secs(300) {
        pass(detail)
    } else {
        fail(format!("{detail}; first mismatch: {first_bad:?}"))
    }
}

fn c2_unregularized_attack() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ok = 0;
    for i in 0..100 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let g: TabularMdp<Rational> = nontrivial_mdp(&mut rng, n, m);
        let d: Vec<Rational> = gen::positive_distribution(&mut rng, g.n_pairs());
        let cand = DeterministicPolicy { actions: (0..n).map(|_| rng.gen_range(0..m)).collect() };
        let reg = mdp::regret(&g, &g.reward, &cand.to_policy(m)).unwrap();
        let bad = if reg.is_zero() { worst_policy(&g) } else { cand };
        let bad_pi = bad.to_policy::<Rational>(m);
        let g_bad = mdp::regret(&g, &g.reward, &bad_pi).unwrap();
        let l = &g_bad * q(rng.gen_range(1..=4), 4);
        let mass = adversary::support_mass(&g, &d, &bad_pi).unwrap();
        let eps = &mass + (q(1, 1) - &mass) / q(rng.gen_range(2..=10), 1);
        let rep = match attack_unregularized(&g, &d, &bad_pi, &eps, &l) {
            Ok(r) => r,
            Err(e) => return fail(format!("instance {i}: {e}")),
        };
        // Independent re-check of the three clauses.
        let err = mean_abs(&d, &g.reward, &rep.rhat);
        let best = brute_force_max(&g, &rep.rhat);
        let j_bad = mdp::policy_eval(&g, &bad_pi, &rep.rhat).unwrap();
        let clauses = err <= eps && j_bad >= best && g_bad >= l;
        if rep.certified && clauses && rep.mae <= mass && err == rep.mae {
            ok += 1;
        } else {
            return fail(format!("instance {i}: certified={} clauses={clauses} mae={} mass={mass}", rep.certified, rep.mae));
        }
    }
    pass(format!("{ok}/100 certified, mae <= D(supp) exactly"))
}

fn c3_threshold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut safe = 0;
    for i in 0..60 {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(2..=3);
        let g: TabularMdp<Rational> = nontrivial_mdp(&mut rng, n, m);
        let d: Vec<Rational> = gen::positive_distribution(&mut rng, g.n_pairs());
        let l = q(rng.gen_range(1..=4), 4);
        let thr_sq = safe_set::safe_epsilon_threshold_sq(&g, &d, &l).unwrap();
        let mut eps = Rational::from_f64_exact(0.99 * thr_sq.as_f64().sqrt()).unwrap();
        while !safe_set::below_threshold(&eps, &thr_sq) {
            eps = eps * q(999, 1000);
        }
        let mat = build_safety_matrix(&g, &l, CAP).unwrap();
        if !check_safety(&mat, &d, &eps, &range(&g.reward)).safe {
            return fail(format!("instance {i}: eps = 0.99 threshold judged unsafe"));
        }
        safe += 1;
    }
    for (un, ud) in [(1, 4), (1, 2), (1, 1)] {
        for (gn, gd) in [(0, 1), (1, 2), (9, 10)] {
            let u = q(un, ud);
            let (g, rhat) = gen::tightness_example(u.clone(), q(gn, gd));
            let pihat = DeterministicPolicy { actions: vec![1] }.to_policy::<Rational>(3);
            let best = brute_force_max(&g, &rhat);
            let optimal = mdp::policy_eval(&g, &pihat, &rhat).unwrap() == best;
            let reg = mdp::regret(&g, &g.reward, &pihat).unwrap();
            let b = safe_set::regret_upper_bound_sq(&g, &g.reward, &rhat).unwrap();
            let d = vec![q(1, 3); 3];
            let (hi, lo) = mdp::value_range(&g, &g.reward).unwrap();
            let abs_err: Rational = d.iter().zip(g.reward.iter().zip(&rhat)).map(|(p, (a, c))| p * (a - c).abs()).sum();
            let d_bound = abs_err / ((q(1, 1) - &g.gamma) * (hi - lo) * q(1, 3));
            let exact = optimal && reg == u && b.projected_sq == Some(&u * &u) && b.bound_sq == &u * &u && d_bound == u;
            // Float route of the same example.
            let (gf, rf) = gen::tightness_example(u.as_f64(), gn as f64 / gd as f64);
            let regf = mdp::regret(&gf, &gf.reward, &pihat.as_f64()).unwrap();
            let (bf, pf) = safe_set::regret_upper_bound(&gf, &gf.reward, &rf).unwrap();
            let uf = u.as_f64();
            let float = (regf - uf).abs() < 1e-9 && (bf - uf).abs() < 1e-9 && (pf.unwrap() - uf).abs() < 1e-9;
            if !(exact && float) {
                return fail(format!("tightness U={u} gamma={gn}/{gd}: regret={reg} bound_sq={} exact={exact} float={float}", b.bound_sq));
            }
        }
    }
    pass(format!("{safe}/60 safe at 0.99 threshold; tightness bound = regret = U for U in {{1/4, 1/2, 1}} x 3 gammas"))
}

fn c4_mutual_exclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut only_safe, mut only_attack, mut total) = (0, 0, 0);
    for i in 0..150 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let g: TabularMdp<Rational> = nontrivial_mdp(&mut rng, n, m);
        let d: Vec<Rational> = gen::positive_distribution(&mut rng, g.n_pairs());
        let l = q(rng.gen_range(1..=4), 4);
        let thr_sq = safe_set::safe_epsilon_threshold_sq(&g, &d, &l).unwrap();
        let (_, mass) = find_bad_policy(&g, &d, &l, CAP).unwrap().expect("the worst policy has regret 1");
        let thr = Rational::from_f64_exact(thr_sq.as_f64().sqrt()).unwrap();
        let mut grid: Vec<Rational> = (1..=8).map(|k| &thr * q(k, 4)).collect();
        grid.extend([&mass * q(1, 2), mass.clone(), &mass * q(3, 2), &mass * q(2, 1)]);
        for eps in grid.into_iter().filter(|e| e.is_positive()) {
            let a = safe_set::below_threshold(&eps, &thr_sq);
            let b = mass < eps;
            total += 1;
            if a && b {
                return fail(format!("instance {i}: eps={eps} satisfies both conditions"));
            }
            only_safe += usize::from(a);
            only_attack += usize::from(b);
        }
    }
    pass(format!("{total} (instance, eps) pairs: {only_safe} threshold-only, {only_attack} attack-only, 0 both"))
}

fn c5_regularized_attack() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut ok = 0;
    let mut tried = 0;
    while ok < 24 {
        tried += 1;
        if tried > 200 {
            return fail(format!("only {ok} certified attacks in 200 instances"));
        }
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(2..=3);
        let g: TabularMdp<f64> = nontrivial_mdp(&mut rng, n, m);
        let lambda = [0.05, 0.2, 1.0][rng.gen_range(0..3)];
        let l = [0.5, 0.8][rng.gen_range(0..2)];
        let eps = 0.3;
        let pref = gen::policy::<f64, _>(&mut rng, n, m);
        let reg = RegularizerSpec::kl(pref, lambda).unwrap();
        let (pistar, k) = regularized_constants(&g, &reg, l).unwrap();
        let supp = mdp::occupancy_measure(&g, &pistar.to_policy(m)).unwrap().support();
        if supp.len() == g.n_pairs() {
            continue;
        }
        // Engineered so that D(supp D^pi*) = eps / (2 (1 + C)).
        let on = eps / (2.0 * (1.0 + k.c_outer));
        let off = g.n_pairs() - supp.len();
        let d: Vec<f64> = (0..g.n_pairs())
            .map(|i| if supp.contains(&i) { on / supp.len() as f64 } else { (1.0 - on) / off as f64 })
            .collect();
        let rep = match attack_regularized(&g, &d, &reg, l, eps) {
            Ok(r) => r,
            Err(e) => return fail(format!("instance {tried}: {e}")),
        };
        let min_mass = supp.iter().map(|&i| rep.bad_policy.probs[i]).fold(f64::INFINITY, f64::min);
        let err = mean_abs(&d, &g.reward, &rep.rhat);
        let regret = mdp::regret(&g, &g.reward, &rep.bad_policy).unwrap();
        let lemma_checks = rep.checks.iter().filter(|c| c.name.starts_with("D^pi_hat") || c.name.starts_with("|D^pi_hat")).all(|c| c.holds);
        if !(rep.certified && err <= eps + 1e-9 && min_mass >= 1.0 - k.delta - 1e-6 && regret >= l - 1e-9 && lemma_checks) {
            return fail(format!("instance {tried}: mae={err} min_mass={min_mass} delta={} regret={regret}", k.delta));
        }
        ok += 1;
    }
    pass(format!("{ok} certified regularised attacks (of {tried} drawn instances)"))
}

fn rlhf_instance(rng: &mut ChaCha8Rng, mae: bool) -> (ContextualBandit<f64>, Policy<f64>, f64, f64, f64) {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=4);
    let b = loop {
        let b: ContextualBandit<f64> = gen::bandit(rng, n, m);
        let all_rows = (0..n).all(|s| {
            let row = &b.reward[s * m..(s + 1) * m];
            row.iter().any(|x| *x != row[0])
        });
        if all_rows {
            break b;
        }
    };
    let rr = range(&b.reward);
    let lambda = rr * [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    let l = [0.3, 0.5, 0.7][rng.gen_range(0..3)];
    let eps = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
    let mut probs = Vec::with_capacity(n * m);
    for s in 0..n {
        let row = &b.reward[s * m..(s + 1) * m];
        let (hi, lo) = (row.iter().cloned().fold(f64::MIN, f64::max), row.iter().cloned().fold(f64::MAX, f64::min));
        let r_l = (1.0 - l) * hi + l * lo;
        let a_s = (0..m).find(|&a| row[a] == lo).unwrap();
        let mut bound = (r_l - lo) * rr / (l * (rr / lambda).exp()) * eps * eps / (lambda * lambda);
        if !mae {
            bound /= 4.0;
        }
        let low = f64::min(bound / 2.0, 0.5 / m as f64);
        for a in 0..m {
            probs.push(if a == a_s { low } else { (1.0 - low) / (m - 1) as f64 });
        }
    }
    (b, Policy::new(n, m, probs).unwrap(), lambda, eps, l)
}

fn c6_rlhf_attack() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for (mae, label) in [(false, "choice-KL"), (true, "MAE")] {
        for i in 0..25 {
            let (b, pref, lambda, eps, l) = rlhf_instance(&mut rng, mae);
            let res = if mae { attack_rlhf_mae(&b, &pref, lambda, eps, l) } else { attack_rlhf(&b, &pref, lambda, eps, l) };
            let rep = match res {
                Ok(r) => r,
                Err(e) => return fail(format!("{label} instance {i}: {e}")),
            };
            let rr = range(&b.reward);
            // Closed-form policy recomputed here: pi ∝ pi_ref exp(rhat / lambda).
            let m = b.n_actions;
            let mut probs = Vec::new();
            for s in 0..b.n_states {
                let w: Vec<f64> = (0..m).map(|a| pref.probs[s * m + a] * (rep.rhat[s * m + a] / lambda).exp()).collect();
                let z: f64 = w.iter().sum();
                probs.extend(w.iter().map(|x| x / z));
            }
            let pi = Policy::new(b.n_states, m, probs).unwrap();
            let regret = b.regret(&b.reward, &pi).unwrap();
            let err = if mae {
                let d = rlhf::reference_distribution(&b, &pref);
                mean_abs(&d, &b.reward, &rep.rhat)
            } else {
                rlhf::choice_kl_distance(&b, &pref, &b.reward, &rep.rhat)
            };
            let bound = if mae { eps } else { eps * rr };
            if !(rep.certified && err <= bound + 1e-9 && regret >= l - 1e-9) {
                return fail(format!("{label} instance {i}: err={err} bound={bound} regret={regret} L={l}"));
            }
        }
    }
    pass("25 choice-KL + 25 MAE attacks certified; closed-form regret >= L".into())
}

fn c7_trajectory_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut held = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..200 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=3);
        let mut horizon = rng.gen_range(1..=4);
        while ((n * m) as u64).pow(horizon as u32) > 1300 {
            horizon -= 1;
        }
        let g: TabularMdp<f64> = gen::mdp(&mut rng, n, m);
        let pi = gen::policy::<f64, _>(&mut rng, n, m);
        let rhat: Vec<f64> = gen::reward(&mut rng, n * m);
        let checks = [
            traj::verify_return_bound(&g, &pi, &g.reward, &rhat, horizon, CAP).unwrap(),
            traj::verify_choice_bound(&g, &pi, &g.reward, &rhat, horizon, CAP).unwrap(),
            traj::verify_common_prefix_bound(&g, &pi, &g.reward, &rhat, horizon, CAP).unwrap(),
        ];
        for (k, c) in checks.iter().enumerate() {
            worst_gap = worst_gap.max(c.lhs - c.rhs);
            if !c.holds || c.lhs > c.rhs + 1e-9 {
                return fail(format!("instance {i} bound {}: lhs={} rhs={}", k + 1, c.lhs, c.rhs));
            }
        }
        held += 1;
    }
    // Constant shift attains equality, exactly in rationals.
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    for i in 0..20 {
        let g: TabularMdp<Rational> = gen::mdp(&mut rng, 2, 2);
        let pi = gen::policy::<Rational, _>(&mut rng, 2, 2);
        let c = q(rng.gen_range(-9..=9), rng.gen_range(1..=4));
        let rhat: Vec<Rational> = g.reward.iter().map(|x| x + &c).collect();
        let horizon = rng.gen_range(1..=4);
        let chk = traj::verify_return_bound(&g, &pi, &g.reward, &rhat, horizon, CAP).unwrap();
        let geo: Rational = (0..horizon).map(|t| g.gamma.pow_usize(t)).sum();
        if !(chk.lhs == chk.rhs && chk.lhs == c.abs() * geo) {
            return fail(format!("shift instance {i}: lhs={} rhs={}", chk.lhs, chk.rhs));
        }
    }
    pass(format!("{held}/200 instances hold all three bounds (max lhs - rhs = {worst_gap:.3e}); 20 shifts attain equality exactly"))
}

fn c8_chatbot() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for i in 0..50 {
        let c = rng.gen_range(0.1..200.0);
        let mu = rng.gen_range(0.0..1.0);
        let n = rng.gen_range(1..=6);
        let b = rlhf::chatbot_example(c, n, mu).unwrap();
        let reg = b.regret(&b.reward, &rlhf::chatbot_always_help(n)).unwrap();
        let want = mu * c / (1.0 - mu + mu * c);
        if (reg - want).abs() > 1e-10 {
            return fail(format!("draw {i}: regret {reg} vs {want}"));
        }
        let b1 = rlhf::chatbot_example(1.0, n, mu).unwrap();
        let r1 = b1.regret(&b1.reward, &rlhf::chatbot_always_help(n)).unwrap();
        if (r1 - mu).abs() > 1e-10 {
            return fail(format!("draw {i}: C = 1 regret {r1} vs mu {mu}"));
        }
    }
    let mut grid = 0;
    for c in [1, 10, 100] {
        for lk in 1..=9 {
            let l = q(lk, 10);
            let thr = rlhf::chatbot_mu_threshold(&q(c, 1), &l);
            for mk in 0..=100 {
                let mu = q(mk, 100);
                let b = rlhf::chatbot_example(q(c, 1), 2, mu.clone()).unwrap();
                let reg = b.regret(&b.reward, &rlhf::chatbot_always_help(2)).unwrap();
                if (mu >= thr) != (reg >= l) {
                    return fail(format!("C={c} L={l} mu={mu}: threshold {thr} disagrees with regret {reg}"));
                }
                grid += 1;
            }
            // The threshold itself sits exactly at regret L.
            let b = rlhf::chatbot_example(q(c, 1), 2, thr.clone()).unwrap();
            if b.regret(&b.reward, &rlhf::chatbot_always_help(2)).unwrap() != l {
                return fail(format!("C={c} L={l}: regret at threshold differs from L"));
            }
        }
    }
    pass(format!("50 random (C, mu, N) within 1e-10; C = 1 gives mu; {grid} grid points agree exactly"))
}

fn c9_cross_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=4);
        let b: ContextualBandit<f64> = gen::bandit(&mut rng, n, m);
        let pref = gen::policy::<f64, _>(&mut rng, n, m);
        let lambda = [0.1, 0.5, 1.0, 3.0][rng.gen_range(0..4)];
        let gamma = [0.0, 0.5, 0.9][rng.gen_range(0..3)];
        let rhat = gen::reward::<f64, _>(&mut rng, n * m);
        let soft = policy_opt::solve_kl_regularized(&b.as_mdp(gamma), &rhat, &RegularizerSpec::kl(pref.clone(), lambda).unwrap());
        let soft = match soft {
            Ok(p) => p,
            Err(e) => return fail(format!("bandit {i}: {e}")),
        };
        // Closed form, evaluated directly.
        for s in 0..n {
            let w: Vec<f64> = (0..m).map(|a| pref.probs[s * m + a] * (rhat[s * m + a] / lambda).exp()).collect();
            let z: f64 = w.iter().sum();
            for a in 0..m {
                worst = worst.max((soft.probs[s * m + a] - w[a] / z).abs());
            }
        }
    }
    if worst <= 1e-8 {
        pass(format!("100 bandits, max |soft VI - closed form| = {worst:.2e}"))
    } else {
        fail(format!("max deviation {worst:.2e} > 1e-8"))
    }
}

fn c10_metric_transfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut equal = 0;
    for i in 0..1000 {
        let len = rng.gen_range(2..=9);
        let d: Vec<Rational> = gen::simplex(&mut rng, len, 0, 5);
        let r: Vec<Rational> = gen::reward(&mut rng, len);
        let rhat: Vec<Rational> = gen::reward(&mut rng, len);
        let mae = mdp::mae_distance(&d, &r, &rhat).unwrap();
        let mse = mdp::mse_distance(&d, &r, &rhat).unwrap();
        let rr = range(&r);
        let errs: Vec<Rational> = r.iter().zip(&rhat).map(|(a, b)| (a - b).abs() / &rr).collect();
        let mut supp = (0..len).filter(|&j| d[j].is_positive());
        let first = supp.next().unwrap();
        let constant = supp.all(|j| errs[j] == errs[first]);
        if &mae * &mae > mse || ((&mae * &mae == mse) != constant) {
            return fail(format!("draw {i}: mae={mae} mse={mse} constant={constant}"));
        }
        equal += usize::from(constant);
    }
    // Constructed equality cases: |rhat - r| = c range R on supp D, arbitrary off it.
    for k in 0..20 {
        let len = 6;
        let mut d: Vec<Rational> = gen::simplex(&mut rng, len, 1, 5);
        d[k % len] = q(0, 1);
        let tot: Rational = d.iter().cloned().sum();
        let d: Vec<Rational> = d.iter().map(|x| x / &tot).collect();
        let r: Vec<Rational> = gen::reward(&mut rng, len);
        let c = q(rng.gen_range(1..=5), 3);
        let rr = range(&r);
        let rhat: Vec<Rational> = (0..len)
            .map(|j| if j == k % len { q(100, 1) } else if rng.gen_bool(0.5) { &r[j] + &c * &rr } else { &r[j] - &c * &rr })
            .collect();
        let mae = mdp::mae_distance(&d, &r, &rhat).unwrap();
        if &mae * &mae != mdp::mse_distance(&d, &r, &rhat).unwrap() {
            return fail(format!("constructed case {k}: equality fails"));
        }
    }
    pass(format!("1000 draws satisfy mae^2 <= mse ({equal} equality cases, all D-a.s. constant); 20 constructed equalities exact"))
}

fn c11_all_unsafe() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut certified = 0;
    for eps in [q(1, 3), q(1, 4), q(2, 7), q(3, 20), q(1, 10)] {
        let inv = q(1, 1) / &eps;
        let m = inv.ceil().to_integer().try_into().unwrap_or(0usize) + 1;
        let mut reward = vec![q(0, 1); m];
        reward[0] = q(1, 1);
        let g = TabularMdp::new(1, m, vec![q(1, 1); m], vec![q(1, 1)], q(1, 2), reward).unwrap();
        let l = q(1, 1);
        let Some(family) = check_all_unsafe(&g, &eps, &l, CAP).unwrap() else {
            return fail(format!("eps={eps}: no disjoint family with m={m}"));
        };
        for t in 0..20 {
            let d: Vec<Rational> = gen::positive_distribution(&mut rng, m);
            let pick = family
                .iter()
                .map(|p| p.to_policy::<Rational>(m))
                .find(|p| adversary::support_mass(&g, &d, p).unwrap() < eps);
            let Some(bad) = pick else {
                return fail(format!("eps={eps} draw {t}: every family member has mass >= eps"));
            };
            match attack_unregularized(&g, &d, &bad, &eps, &l) {
                Ok(rep) if rep.certified => certified += 1,
                Ok(_) => return fail(format!("eps={eps} draw {t}: not certified")),
                Err(e) => return fail(format!("eps={eps} draw {t}: {e}")),
            }
        }
    }
    pass(format!("5 values of eps, family found each time; {certified}/100 random D certified unsafe"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("safety characterization equals LP oracle", c1_characterization),
        ("unregularised attack soundness", c2_unregularized_attack),
        ("threshold soundness and tightness example", c3_threshold),
        ("threshold and attack conditions are exclusive", c4_mutual_exclusion),
        ("regularised attack certificates", c5_regularized_attack),
        ("RLHF attack certificates", c6_rlhf_attack),
        ("trajectory-level bounds", c7_trajectory_bounds),
        ("chatbot example", c8_chatbot),
        ("soft VI matches closed form on bandits", c9_cross_solver),
        ("mae^2 <= mse", c10_metric_transfer),
        ("all-unsafe witness family", c11_all_unsafe),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("{} [{}] {name}: {}", if out.ok { "PASS" } else { "FAIL" }, i + 1, out.detail);
        failed += usize::from(!out.ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
