//! Safety matrix construction.
//!
//! A candidate is a vertex `v`, a set `E_F` of cone generators taken from
//! `zeros(v)` and a set `E_G = E_F + S` of active rows with `|S| = n`. The
//! bracket system `E_G [Phi, -E_F] x = E_G R` is block triangular: the `S`
//! rows fix the shaping coefficients through `Phi_S y = R_S` and the `E_F`
//! rows then give the cone coefficients `w = (Phi y - R)_{E_F}`. So one
//! `n x n` solve per `S` serves every vertex and every `E_F`.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{check_cap, Result};
use crate::linalg::Matrix;
use crate::mdp::{DeterministicPolicy, TabularMdp};
use crate::scalar::Scalar;

use super::{build_phi_basis, high_regret_vertices};

/// The candidate that first produced a row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RowProvenance {
    pub vertex: DeterministicPolicy,
    pub e_f: Vec<usize>,
    pub e_g: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMatrix<S> {
    pub rows: Vec<Vec<S>>,
    pub provenance: Vec<RowProvenance>,
}

impl<S> SafetyMatrix<S> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Number of `(E_F, E_G)` candidates for vertices with the given zero-set sizes.
pub fn candidate_count(n_states: usize, n_pairs: usize, zero_sizes: &[usize]) -> u128 {
    zero_sizes
        .iter()
        .map(|&z| (0..=z).map(|k| binomial(z, k).saturating_mul(binomial(n_pairs - k, n_states))).fold(0u128, u128::saturating_add))
        .fold(0u128, u128::saturating_add)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn row_key<S: Scalar>(row: &[S]) -> String {
    let mut key = String::new();
    for x in row {
        if S::EXACT {
            key.push_str(&x.to_string());
        } else {
            let v = (x.as_f64() / S::tol().as_f64()).round();
            key.push_str(&format!("{}", if v == 0.0 { 0.0 } else { v }));
        }
        key.push(',');
    }
    key
}

/// Lexicographic order treating entries within tolerance as equal.
fn cmp_rows<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if !x.approx_eq(y) {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Builds the deduplicated safety matrix for regret level `l`.
///
/// Rows are sorted lexicographically; each keeps the first candidate that
/// produced it, in the order vertex, `|E_F|`, `E_F`, `S`.
pub fn build_safety_matrix<S: Scalar>(mdp: &TabularMdp<S>, l: &S, cap: u128) -> Result<SafetyMatrix<S>> {
    let (n, nm) = (mdp.n_states, mdp.n_pairs());
    let set = high_regret_vertices(mdp, l, cap)?;
    let zero_sets: Vec<Vec<usize>> = set.vertices.iter().map(|v| v.zeros()).collect();
    let sizes: Vec<usize> = zero_sets.iter().map(Vec::len).collect();
    check_cap(candidate_count(n, nm, &sizes), cap)?;
    let phi = build_phi_basis(mdp)?.columns;

    // B0 = Phi y - R for every invertible Phi_S.
    let subsets = combinations(nm, n);
    let solved: Vec<Option<Vec<S>>> = subsets
        .par_iter()
        .map(|sub| {
            let rhs: Vec<S> = sub.iter().map(|&i| mdp.reward[i].clone()).collect();
            let y = phi.select_rows(sub).solve(&rhs)?;
            let pred = phi.mul_vec(&y);
            Some(pred.into_iter().zip(&mdp.reward).map(|(p, r)| p - r.clone()).collect())
        })
        .collect();

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut prov: Vec<RowProvenance> = Vec::new();
    let neg_tol = -S::tol();
    for (v, zeros) in set.vertices.iter().zip(&zero_sets) {
        // (|E_F|, E_F, S index) for every valid candidate of this vertex.
        let mut cands: Vec<(Vec<usize>, usize)> = Vec::new();
        for (si, b0) in solved.iter().enumerate() {
            let Some(b0) = b0 else { continue };
            let sub = &subsets[si];
            let free: Vec<usize> = zeros.iter().copied().filter(|j| !sub.contains(j) && b0[*j] >= neg_tol).collect();
            for k in 0..=free.len() {
                for pick in combinations(free.len(), k) {
                    cands.push((pick.iter().map(|&p| free[p]).collect(), si));
                }
            }
        }
        cands.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        for (e_f, si) in cands {
            let b0 = solved[si].as_ref().expect("only solved subsets are candidates");
            let mut row: Vec<S> = b0.iter().map(|x| x.abs()).collect();
            for &j in &e_f {
                row[j] = S::zero();
            }
            let key = row_key(&row);
            if index.contains_key(&key) {
                continue;
            }
            index.insert(key, rows.len());
            let mut e_g: Vec<usize> = e_f.iter().copied().chain(subsets[si].iter().copied()).collect();
            e_g.sort_unstable();
            rows.push(row);
            prov.push(RowProvenance { vertex: v.policy.clone(), e_f, e_g });
        }
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| cmp_rows(&rows[a], &rows[b]));
    Ok(SafetyMatrix {
        rows: order.iter().map(|&i| rows[i].clone()).collect(),
        provenance: order.iter().map(|&i| prov[i].clone()).collect(),
    })
}

impl<S: Scalar> SafetyMatrix<S> {
    /// Dense view, `rows x |S x A|`.
    pub fn to_matrix(&self, n_pairs: usize) -> Matrix<S> {
        let mut m = Matrix::zeros(self.rows.len(), n_pairs);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }
}
