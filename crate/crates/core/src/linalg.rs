//! Small dense linear algebra over [`Scalar`]: Gaussian elimination, rank, solve.

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| crate::scalar::dot(self.row(i), x)).collect()
    }

    /// Submatrix made of the given rows, all columns.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Matrix { rows: self.rows, cols, data }
    }

    fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, x| S::max_of(m, x.abs()))
    }

    fn pivot_threshold(&self) -> S {
        if S::EXACT {
            S::zero()
        } else {
            S::tol() * S::max_of(S::one(), self.max_abs())
        }
    }

    /// Rank by Gaussian elimination (exact for rationals, relative threshold
    /// `1e-9` for floats).
    pub fn rank(&self) -> usize {
        let thr = self.pivot_threshold();
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = pick_pivot(&m, rank, c, &thr) else { continue };
            m.swap_rows(rank, p);
            eliminate_below(&mut m, rank, c);
            rank += 1;
        }
        rank
    }

    /// Solves the square system `self · x = b`. Returns `None` if singular.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let thr = self.pivot_threshold();
        let mut m = self.hcat(&Matrix { rows: n, cols: 1, data: b.to_vec() });
        for c in 0..n {
            let p = pick_pivot(&m, c, c, &thr)?;
            m.swap_rows(c, p);
            eliminate_below(&mut m, c, c);
        }
        let mut x = vec![S::zero(); n];
        for i in (0..n).rev() {
            let mut acc = m[(i, n)].clone();
            for j in i + 1..n {
                acc = acc - m[(i, j)].clone() * x[j].clone();
            }
            x[i] = acc / m[(i, i)].clone();
        }
        Some(x)
    }

    /// Solves `self · X = B` column by column; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i].clone();
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

fn pick_pivot<S: Scalar>(m: &Matrix<S>, from: usize, c: usize, thr: &S) -> Option<usize> {
    if S::EXACT {
        (from..m.rows).find(|&i| !m[(i, c)].is_zero())
    } else {
        let (best, val) = (from..m.rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((from, S::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        (val > *thr).then_some(best)
    }
}

fn eliminate_below<S: Scalar>(m: &mut Matrix<S>, r: usize, c: usize) {
    let piv = m[(r, c)].clone();
    for i in r + 1..m.rows {
        if m[(i, c)].is_zero() {
            continue;
        }
        let f = m[(i, c)].clone() / piv.clone();
        for j in c..m.cols {
            let v = m[(r, j)].clone() * f.clone();
            m[(i, j)] = m[(i, j)].clone() - v;
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}
