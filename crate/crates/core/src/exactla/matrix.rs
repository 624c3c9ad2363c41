//! Dense rational matrices and exact Gaussian elimination.

use super::{ExactlaError, Rat, Result};
use num_traits::Zero;

/// Dense matrix of arbitrary-precision rationals, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, num_traits::One::one());
        }
        m
    }

    /// Build from explicit rows; all rows must share a length.
    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ExactlaError::DimensionMismatch(
                "ragged rows in matrix constructor".into(),
            ));
        }
        let nrows = rows.len();
        Ok(RatMatrix {
            rows: nrows,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Matrix with zero rows and `cols` columns.
    pub fn empty(cols: usize) -> Self {
        RatMatrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[Rat]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn push_row(&mut self, row: Vec<Rat>) -> Result<()> {
        if row.len() != self.cols {
            return Err(ExactlaError::DimensionMismatch(format!(
                "push_row: expected {} entries, got {}",
                self.cols,
                row.len()
            )));
        }
        self.data.extend(row);
        self.rows += 1;
        Ok(())
    }

    pub fn transpose(&self) -> RatMatrix {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mat_vec(&self, x: &[Rat]) -> Result<Vec<Rat>> {
        if x.len() != self.cols {
            return Err(ExactlaError::DimensionMismatch(format!(
                "mat_vec: matrix has {} cols, vector has {}",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| super::dot(self.row(i), x)).collect())
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn transpose_vec(&self, x: &[Rat]) -> Result<Vec<Rat>> {
        if x.len() != self.rows {
            return Err(ExactlaError::DimensionMismatch(format!(
                "transpose_vec: matrix has {} rows, vector has {}",
                self.rows,
                x.len()
            )));
        }
        let mut out = vec![Rat::zero(); self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j).is_zero() {
                    out[j] = &out[j] + self.get(i, j) * &x[i];
                }
            }
        }
        Ok(out)
    }

    pub fn mat_mat(&self, other: &RatMatrix) -> Result<RatMatrix> {
        if self.cols != other.rows {
            return Err(ExactlaError::DimensionMismatch(
                "mat_mat: inner dimensions differ".into(),
            ));
        }
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = &out.data[i * other.cols + j] + a * other.get(k, j);
                    out.data[i * other.cols + j] = v;
                }
            }
        }
        Ok(out)
    }

    /// Stack rows of `other` below `self`.
    pub fn vstack(&self, other: &RatMatrix) -> Result<RatMatrix> {
        if self.cols != other.cols && self.rows != 0 && other.rows != 0 {
            return Err(ExactlaError::DimensionMismatch(
                "vstack: column counts differ".into(),
            ));
        }
        let cols = if self.rows == 0 { other.cols } else { self.cols };
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(RatMatrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    /// Select a subset of rows.
    pub fn select_rows(&self, idx: &[usize]) -> RatMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend(self.row(i).iter().cloned());
        }
        RatMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Select a subset of columns.
    pub fn select_cols(&self, idx: &[usize]) -> RatMatrix {
        let mut out = RatMatrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                out.set(i, jj, self.get(i, j).clone());
            }
        }
        out
    }
}

/// Row-echelon elimination; returns (echelon matrix, pivot column per pivot
/// row, column permutation-free). Used by rank/solve/nullspace.
fn echelon(a: &RatMatrix) -> (RatMatrix, Vec<usize>) {
    let mut m = a.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        // Find a pivot in column c at or below row r.
        let Some(p) = (r..rows).find(|&i| !m.get(i, c).is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..cols {
                let tmp = m.get(r, j).clone();
                m.set(r, j, m.get(p, j).clone());
                m.set(p, j, tmp);
            }
        }
        let piv = m.get(r, c).clone();
        for j in c..cols {
            let v = m.get(r, j) / &piv;
            m.set(r, j, v);
        }
        for i in 0..rows {
            if i != r && !m.get(i, c).is_zero() {
                let f = m.get(i, c).clone();
                for j in c..cols {
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

/// Exact rank.
pub fn rank(a: &RatMatrix) -> usize {
    echelon(a).1.len()
}

/// One exact solution of `A x = b`, or `None` if inconsistent. When the
/// system is underdetermined the free variables are set to zero.
pub fn solve_general(a: &RatMatrix, b: &[Rat]) -> Result<Option<Vec<Rat>>> {
    if b.len() != a.rows {
        return Err(ExactlaError::DimensionMismatch(
            "solve_general: rhs length".into(),
        ));
    }
    let mut aug = RatMatrix::zeros(a.rows, a.cols + 1);
    for i in 0..a.rows {
        for j in 0..a.cols {
            aug.set(i, j, a.get(i, j).clone());
        }
        aug.set(i, a.cols, b[i].clone());
    }
    let (e, pivots) = echelon(&aug);
    // Inconsistent iff a pivot lands in the rhs column.
    if pivots.iter().any(|&c| c == a.cols) {
        return Ok(None);
    }
    let mut x = vec![Rat::zero(); a.cols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = e.get(r, a.cols).clone();
    }
    Ok(Some(x))
}

/// Rational basis of the nullspace of `A`.
pub fn nullspace(a: &RatMatrix) -> Vec<Vec<Rat>> {
    let (e, pivots) = echelon(a);
    let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..a.cols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![Rat::zero(); a.cols];
        v[free] = num_traits::One::one();
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = -e.get(r, free).clone();
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{rint, rq};

    fn m(rows: &[&[i64]]) -> RatMatrix {
        RatMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rint(x)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rank_and_nullspace() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(rank(&a), 2);
        let ns = nullspace(&a);
        assert_eq!(ns.len(), 1);
        for v in &ns {
            assert!(a.mat_vec(v).unwrap().iter().all(|x| x == &rint(0)));
        }
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let a = m(&[&[2, 0], &[0, 4]]);
        let x = solve_general(&a, &[rint(1), rint(1)]).unwrap().unwrap();
        assert_eq!(x, vec![rq(1, 2), rq(1, 4)]);

        let b = m(&[&[1, 1], &[1, 1]]);
        assert!(solve_general(&b, &[rint(0), rint(1)]).unwrap().is_none());
    }

    #[test]
    fn transpose_vec_matches_explicit_transpose() {
        let a = m(&[&[1, 2], &[3, 4], &[5, 6]]);
        let x = vec![rint(1), rint(-1), rint(2)];
        assert_eq!(
            a.transpose_vec(&x).unwrap(),
            a.transpose().mat_vec(&x).unwrap()
        );
    }
}
