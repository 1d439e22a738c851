//! Minimal compressed-sparse-column matrix used for constraint data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CscMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowval: Vec::new(),
            nzval: Vec::new(),
        }
    }

    /// Builds a matrix from coordinate triplets. Duplicates are summed and
    /// explicit zeros are kept so the sparsity pattern is data-independent.
    pub fn from_triplets(nrows: usize, ncols: usize, rows: &[usize], cols: &[usize], vals: &[T]) -> Result<Self> {
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(Error::InvalidProblem("triplet arrays have different lengths".into()));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for k in 0..rows.len() {
            if rows[k] >= nrows || cols[k] >= ncols {
                return Err(Error::InvalidProblem(format!(
                    "triplet ({}, {}) outside {}x{}",
                    rows[k], cols[k], nrows, ncols
                )));
            }
        }
        order.sort_by_key(|&k| (cols[k], rows[k]));

        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(rows.len());
        let mut nzval: Vec<T> = Vec::with_capacity(rows.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let key = (cols[k], rows[k]);
            if last == Some(key) {
                let end = nzval.len() - 1;
                nzval[end] = nzval[end] + vals[k];
                continue;
            }
            last = Some(key);
            rowval.push(rows[k]);
            nzval.push(vals[k]);
            colptr[cols[k] + 1] += 1;
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        })
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    /// Iterates over `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols)
            .flat_map(move |j| (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowval[p], j, self.nzval[p])))
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let range = self.colptr[col]..self.colptr[col + 1];
        match self.rowval[range.clone()].binary_search(&row) {
            Ok(p) => self.nzval[range.start + p],
            Err(_) => T::zero(),
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = T::zero());
        self.mul_vec_add(T::one(), x, y);
    }

    /// `y += alpha * A x`
    pub fn mul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for j in 0..self.ncols {
            let xj = alpha * x[j];
            if xj == T::zero() {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowval[p]] = y[self.rowval[p]] + self.nzval[p] * xj;
            }
        }
    }

    /// `y = A^T x`
    pub fn tmul_vec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        self.tmul_vec_add(T::one(), x, y);
    }

    /// `y += alpha * A^T x`
    pub fn tmul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = T::zero();
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc = acc + self.nzval[p] * x[self.rowval[p]];
            }
            y[j] = y[j] + alpha * acc;
        }
    }

    /// Scales in place to `diag(row) * A * diag(col)`.
    pub fn scale(&mut self, row: &[T], col: &[T]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.nzval[p] = self.nzval[p] * row[self.rowval[p]] * col[j];
            }
        }
    }

    pub fn col_norms_inf(&self) -> Vec<T> {
        (0..self.ncols)
            .map(|j| {
                self.nzval[self.colptr[j]..self.colptr[j + 1]]
                    .iter()
                    .fold(T::zero(), |m, v| m.max(v.abs()))
            })
            .collect()
    }

    pub fn row_norms_inf(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        for (i, _, v) in self.triplets() {
            out[i] = out[i].max(v.abs());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CscMatrix::from_triplets(2, 2, &[1, 0, 1], &[0, 1, 0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn products_match_dense() {
        let a = CscMatrix::from_triplets(3, 2, &[0, 2, 1, 2], &[0, 0, 1, 1], &[1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut y = vec![0.0; 3];
        a.mul_vec(&[2.0, 4.0], &mut y);
        assert_eq!(y, vec![2.0, 12.0, -2.0]);
        let mut z = vec![0.0; 2];
        a.tmul_vec(&[1.0, 1.0, 1.0], &mut z);
        assert_eq!(z, vec![-1.0, 3.5]);
    }

    #[test]
    fn out_of_bounds_triplet_rejected() {
        assert!(CscMatrix::<f64>::from_triplets(1, 1, &[1], &[0], &[1.0]).is_err());
    }
}
