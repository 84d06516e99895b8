//! Safety of data distributions: high-regret vertices, the safety matrix,
//! the LP oracle, the closed-form epsilon threshold and the regret bound.

pub mod lp;
mod matrix;
mod oracle;

pub use matrix::{build_safety_matrix, candidate_count, RowProvenance, SafetyMatrix};
pub use oracle::{lp_unsafe_distance, lp_unsafe_distance_zeros};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mdp::{self, DeterministicPolicy, OccupancyMeasure, TabularMdp};
use crate::scalar::{dot, min_elem, norm_sq, Scalar};

/// One vertex of the occupancy polytope with regret at least `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<S> {
    /// Lexicographically first deterministic policy inducing the vertex.
    pub policy: DeterministicPolicy,
    pub occupancy: OccupancyMeasure<S>,
    pub regret: S,
    /// Every deterministic policy inducing this occupancy, in order.
    pub policies: Vec<DeterministicPolicy>,
}

impl<S: Scalar> Vertex<S> {
    /// Flat pairs with zero occupancy: the generators of the normal cone.
    pub fn zeros(&self) -> Vec<usize> {
        (0..self.occupancy.eta.len()).filter(|&i| self.occupancy.eta[i].is_negligible()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighRegretVertexSet<S> {
    pub vertices: Vec<Vertex<S>>,
    pub regret_bound: S,
}

/// Enumerates deterministic policies, keeps those with regret `>= l` and
/// merges policies that induce the same occupancy measure.
pub fn high_regret_vertices<S: Scalar>(mdp: &TabularMdp<S>, l: &S, cap: u128) -> Result<HighRegretVertexSet<S>> {
    if *l < S::zero() || *l > S::one() {
        return Err(Error::InvalidArgument(format!("L must lie in [0,1], got {l}")));
    }
    let (hi, lo) = mdp::value_range(mdp, &mdp.reward)?;
    let mut vertices: Vec<Vertex<S>> = Vec::new();
    for pi in mdp::enumerate_deterministic_policies(mdp, cap)? {
        let p = pi.to_policy(mdp.n_actions);
        let occ = mdp::occupancy_measure(mdp, &p)?;
        let j = dot(&occ.eta, &mdp.reward);
        let g = (hi.clone() - j) / (hi.clone() - lo.clone());
        // A float regret that should equal L may land a hair below it.
        if g < l.clone() - S::tol() {
            continue;
        }
        let g = if S::EXACT { g } else { S::min_of(S::max_of(g, S::zero()), S::one()) };
        match vertices.iter_mut().find(|v| same_vector(&v.occupancy.eta, &occ.eta)) {
            Some(v) => v.policies.push(pi),
            None => vertices.push(Vertex { policy: pi.clone(), occupancy: occ, regret: g, policies: vec![pi] }),
        }
    }
    Ok(HighRegretVertexSet { vertices, regret_bound: l.clone() })
}

pub(crate) fn same_vector<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
}

/// The shaping subspace basis `Phi = A - gamma P` together with its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBasis<S> {
    /// `(n m) x n`.
    pub columns: Matrix<S>,
    /// State indicator: `A[(s,a), s'] = [s = s']`.
    pub a: Matrix<S>,
    /// Transition rows: `P[(s,a), s'] = tau(s'|s,a)`.
    pub p: Matrix<S>,
}

pub fn build_phi_basis<S: Scalar>(mdp: &TabularMdp<S>) -> Result<PhiBasis<S>> {
    let (n, nm) = (mdp.n_states, mdp.n_pairs());
    let mut a = Matrix::<S>::zeros(nm, n);
    let mut p = Matrix::<S>::zeros(nm, n);
    let mut phi = Matrix::<S>::zeros(nm, n);
    for s in 0..n {
        for act in 0..mdp.n_actions {
            let i = mdp.idx(s, act);
            a[(i, s)] = S::one();
            for s2 in 0..n {
                p[(i, s2)] = mdp.p(s, act, s2).clone();
                phi[(i, s2)] = a[(i, s2)].clone() - mdp.gamma.clone() * p[(i, s2)].clone();
            }
        }
    }
    let rank = phi.rank();
    if rank != n {
        return Err(Error::RankDeficient { rank, expected: n });
    }
    Ok(PhiBasis { columns: phi, a, p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyVerdict<S> {
    pub safe: bool,
    /// `min_i M_i . d - eps range_r`; `None` when `M` has no rows.
    pub margin: Option<S>,
    pub witness_row: Option<usize>,
}

/// `safe` iff every row satisfies `M_i . d > eps range_r` strictly.
pub fn check_safety<S: Scalar>(m: &SafetyMatrix<S>, d: &[S], eps: &S, range_r: &S) -> SafetyVerdict<S> {
    let rhs = eps.clone() * range_r.clone();
    let mut best: Option<(usize, S)> = None;
    for (i, row) in m.rows.iter().enumerate() {
        let v = dot(row, d);
        if best.as_ref().map_or(true, |(_, b)| v < *b) {
            best = Some((i, v));
        }
    }
    match best {
        None => SafetyVerdict { safe: true, margin: None, witness_row: None },
        Some((i, v)) => {
            let margin = v - rhs;
            SafetyVerdict { safe: margin > S::zero(), margin: Some(margin), witness_row: Some(i) }
        }
    }
}

/// Squared closed-form threshold
/// `((1 - gamma) range J / range R * min d * L)^2 / 2`.
///
/// Any `eps > 0` with `eps^2` strictly below it certifies safety.
pub fn safe_epsilon_threshold_sq<S: Scalar>(mdp: &TabularMdp<S>, d: &[S], l: &S) -> Result<S> {
    if d.len() != mdp.n_pairs() {
        return Err(Error::InvalidArgument("distribution length differs from |S x A|".into()));
    }
    let min_d = min_elem(d);
    if min_d <= S::zero() {
        return Err(Error::NonPositiveDistribution(format!("min D = {min_d}")));
    }
    if *l <= S::zero() || *l > S::one() {
        return Err(Error::InvalidArgument(format!("L must lie in (0,1], got {l}")));
    }
    let (hi, lo) = mdp::value_range(mdp, &mdp.reward)?;
    let t = (S::one() - mdp.gamma.clone()) * (hi - lo) / mdp::range(&mdp.reward) * min_d * l.clone();
    Ok(t.clone() * t / S::from_usize(2))
}

/// `(1 - gamma) / sqrt 2 * range J / range R * min d * L`.
pub fn safe_epsilon_threshold<S: Scalar>(mdp: &TabularMdp<S>, d: &[S], l: &S) -> Result<f64> {
    Ok(safe_epsilon_threshold_sq(mdp, d, l)?.as_f64().sqrt())
}

/// Whether `eps` lies strictly below the threshold whose square is `thr_sq`.
pub fn below_threshold<S: Scalar>(eps: &S, thr_sq: &S) -> bool {
    *eps <= S::zero() || eps.clone() * eps.clone() < *thr_sq
}

/// Squared regret bounds for the optimal policies of `rhat`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretBoundSq<S> {
    /// `2 |r - rhat|^2 / ((1 - gamma) range J)^2`.
    pub bound_sq: S,
    /// Same with `rhat` replaced by the projection of `r` onto `rhat`,
    /// reported when `r . rhat >= 0`.
    pub projected_sq: Option<S>,
}

impl<S: Scalar> RegretBoundSq<S> {
    pub fn bound(&self) -> f64 {
        self.bound_sq.as_f64().sqrt()
    }

    pub fn projected(&self) -> Option<f64> {
        self.projected_sq.as_ref().map(|v| v.as_f64().sqrt())
    }

    /// The smaller of the two bounds, squared.
    pub fn best_sq(&self) -> S {
        match &self.projected_sq {
            Some(p) => S::min_of(p.clone(), self.bound_sq.clone()),
            None => self.bound_sq.clone(),
        }
    }
}

pub fn regret_upper_bound_sq<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], rhat: &[S]) -> Result<RegretBoundSq<S>> {
    if r.len() != mdp.n_pairs() || rhat.len() != mdp.n_pairs() {
        return Err(Error::InvalidArgument("reward length differs from |S x A|".into()));
    }
    let (hi, lo) = mdp::value_range(mdp, r)?;
    let denom = (S::one() - mdp.gamma.clone()) * (hi - lo);
    let denom_sq = denom.clone() * denom;
    let two = S::from_usize(2);
    let diff: Vec<S> = r.iter().zip(rhat).map(|(a, b)| a.clone() - b.clone()).collect();
    let bound_sq = two.clone() * norm_sq(&diff) / denom_sq.clone();
    let cross = dot(r, rhat);
    let projected_sq = if cross >= -S::tol() {
        let nh = norm_sq(rhat);
        let resid: Vec<S> = if nh.is_zero() {
            r.to_vec()
        } else {
            let c = cross / nh;
            r.iter().zip(rhat).map(|(a, b)| a.clone() - c.clone() * b.clone()).collect()
        };
        Some(two * norm_sq(&resid) / denom_sq)
    } else {
        None
    };
    Ok(RegretBoundSq { bound_sq, projected_sq })
}

/// Float view of [`regret_upper_bound_sq`]: `(bound, projected)`.
pub fn regret_upper_bound<S: Scalar>(mdp: &TabularMdp<S>, r: &[S], rhat: &[S]) -> Result<(f64, Option<f64>)> {
    let b = regret_upper_bound_sq(mdp, r, rhat)?;
    Ok((b.bound(), b.projected()))
}

/// Greedy search for at least `1/eps` high-regret deterministic policies
/// with pairwise disjoint occupancy supports. Such a family makes every data
/// distribution unsafe.
pub fn check_all_unsafe<S: Scalar>(
    mdp: &TabularMdp<S>,
    eps: &S,
    l: &S,
    cap: u128,
) -> Result<Option<Vec<DeterministicPolicy>>> {
    if *eps <= S::zero() {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let set = high_regret_vertices(mdp, l, cap)?;
    let mut cands: Vec<(Vec<usize>, DeterministicPolicy)> =
        set.vertices.iter().map(|v| (v.occupancy.support(), v.policy.clone())).collect();
    cands.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.1.cmp(&b.1)));
    let mut used = vec![false; mdp.n_pairs()];
    let mut family = Vec::new();
    for (supp, pi) in cands {
        if supp.iter().any(|&i| used[i]) {
            continue;
        }
        for &i in &supp {
            used[i] = true;
        }
        family.push(pi);
        if S::from_usize(family.len()) * eps.clone() >= S::one() {
            return Ok(Some(family));
        }
    }
    Ok(None)
}
