//! Dense tableau simplex with Bland's rule, generic over [`Scalar`].
//!
//! With the rational backend every pivot is exact, so optimal values are exact.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S> {
    pub value: S,
    pub x: Vec<S>,
}

struct Tableau<S> {
    /// `rows x (cols + 1)`; last column is the right-hand side.
    t: Matrix<S>,
    basis: Vec<usize>,
    cols: usize,
}

impl<S: Scalar> Tableau<S> {
    fn rhs(&self, i: usize) -> &S {
        &self.t[(i, self.cols)]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.t.cols;
        let piv = self.t[(r, c)].clone();
        for j in 0..w {
            self.t[(r, j)] = self.t[(r, j)].clone() / piv.clone();
        }
        for i in 0..self.t.rows {
            if i == r || self.t[(i, c)].is_zero() {
                continue;
            }
            let f = self.t[(i, c)].clone();
            for j in 0..w {
                if self.t[(r, j)].is_zero() {
                    continue;
                }
                let v = f.clone() * self.t[(r, j)].clone();
                self.t[(i, j)] = self.t[(i, j)].clone() - v;
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_j - c_B B^-1 A_j` for the current basis.
    fn reduced_costs(&self, cost: &[S]) -> Vec<S> {
        (0..self.cols)
            .map(|j| {
                let mut z = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    z = z - cost[b].clone() * self.t[(i, j)].clone();
                }
                z
            })
            .collect()
    }

    /// Minimises `cost . x` from the current feasible basis. Columns with
    /// `allowed[j] == false` never enter.
    fn optimise(&mut self, cost: &[S], allowed: &[bool]) -> Result<()> {
        let neg_tol = -S::tol();
        let max_pivots = 50_000usize.max(100 * (self.t.rows + self.cols));
        for _ in 0..max_pivots {
            let rc = self.reduced_costs(cost);
            // Bland: lowest-index improving column.
            let Some(c) = (0..self.cols).find(|&j| allowed[j] && rc[j] < neg_tol) else {
                return Ok(());
            };
            let mut best: Option<(usize, S)> = None;
            for i in 0..self.t.rows {
                let a = self.t[(i, c)].clone();
                if a <= S::tol() {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = best else { return Err(Error::LpUnbounded) };
            self.pivot(r, c);
        }
        Err(Error::NonConvergence(max_pivots))
    }

    fn solution(&self) -> Vec<S> {
        let mut x = vec![S::zero(); self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs(i).clone();
        }
        x
    }
}

/// Minimises `c . x` subject to `A x = b`, `x >= 0` (two-phase simplex).
pub fn minimize<S: Scalar>(c: &[S], a: &Matrix<S>, b: &[S]) -> Result<LpSolution<S>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);
    // Phase one on [A | I] with rows flipped so that b >= 0.
    let cols = n + m;
    let mut t = Matrix::zeros(m, cols + 1);
    for i in 0..m {
        let flip = b[i] < S::zero();
        for j in 0..n {
            t[(i, j)] = if flip { -a[(i, j)].clone() } else { a[(i, j)].clone() };
        }
        t[(i, n + i)] = S::one();
        t[(i, cols)] = if flip { -b[i].clone() } else { b[i].clone() };
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), cols };
    let mut phase1 = vec![S::zero(); cols];
    for j in n..cols {
        phase1[j] = S::one();
    }
    tab.optimise(&phase1, &vec![true; cols])?;
    let infeas: S = tab.basis.iter().enumerate().filter(|(_, &bv)| bv >= n).map(|(i, _)| tab.rhs(i).clone()).sum();
    if infeas.gt_tol(&S::zero()) {
        return Err(Error::LpInfeasible);
    }
    // Drive artificial variables out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.t.rows {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| !tab.t[(i, j)].is_negligible()) {
                Some(j) => tab.pivot(i, j),
                None => {
                    remove_row(&mut tab, i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat(S::zero()).take(m));
    let allowed: Vec<bool> = (0..cols).map(|j| j < n).collect();
    tab.optimise(&cost, &allowed)?;
    let mut x = tab.solution();
    x.truncate(n);
    let value = crate::scalar::dot(c, &x);
    Ok(LpSolution { value, x })
}

/// Minimises `c . x` subject to `A x = b`, `x >= 0`, starting from a basis
/// whose columns form an identity in `A` and with `b >= 0`.
pub fn minimize_from_basis<S: Scalar>(c: &[S], a: &Matrix<S>, b: &[S], basis: Vec<usize>) -> Result<LpSolution<S>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(basis.len(), m);
    debug_assert!(b.iter().all(|v| *v >= S::zero()));
    let mut t = Matrix::zeros(m, n + 1);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = a[(i, j)].clone();
        }
        t[(i, n)] = b[i].clone();
    }
    let mut tab = Tableau { t, basis, cols: n };
    tab.optimise(c, &vec![true; n])?;
    let x = tab.solution();
    let value = crate::scalar::dot(c, &x);
    Ok(LpSolution { value, x })
}

fn remove_row<S: Scalar>(tab: &mut Tableau<S>, r: usize) {
    let w = tab.t.cols;
    let mut data = Vec::with_capacity((tab.t.rows - 1) * w);
    for i in 0..tab.t.rows {
        if i != r {
            data.extend_from_slice(tab.t.row(i));
        }
    }
    tab.t = Matrix { rows: tab.t.rows - 1, cols: w, data };
    tab.basis.remove(r);
}
