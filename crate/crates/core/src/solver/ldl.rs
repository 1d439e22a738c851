//! Sparse LDL' factorization of quasi-definite matrices.
//!
//! Up-looking elimination driven by the elimination tree, with a symbolic
//! phase computed once per sparsity pattern and a numeric phase per iteration.
//! Pivots whose sign disagrees with the expected inertia are replaced by a
//! small value of the right sign (dynamic regularization).

use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

/// Upper-triangular CSC pattern of a symmetric matrix, diagonal included.
#[derive(Clone, Debug)]
pub(crate) struct UpperPattern {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct LdlFactor<T> {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    dinv: Vec<T>,
    // Workspace reused across numeric factorizations.
    y_vals: Vec<T>,
    y_used: Vec<bool>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    next_in_col: Vec<usize>,
    /// Number of pivots replaced in the last factorization.
    pub dynamic_hits: usize,
}

impl<T: Scalar> LdlFactor<T> {
    /// Symbolic analysis. Panics if the pattern has entries below the diagonal.
    pub fn symbolic(pat: &UpperPattern) -> Self {
        let n = pat.n;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in pat.colptr[j]..pat.colptr[j + 1] {
                let mut i = pat.rowval[p];
                assert!(i <= j, "pattern is not upper triangular");
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        Self {
            n,
            etree,
            lp,
            li: vec![0; nnz],
            lx: vec![T::zero(); nnz],
            d: vec![T::zero(); n],
            dinv: vec![T::zero(); n],
            y_vals: vec![T::zero(); n],
            y_used: vec![false; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            next_in_col: vec![0; n],
            dynamic_hits: 0,
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of the matrix with pattern `pat` and values `vals`.
    ///
    /// `signs[k]` is the expected sign of pivot `k`. A pivot with
    /// `signs[k] * d_k <= eps` is replaced by `signs[k] * delta`.
    /// Returns false if a pivot is not finite.
    pub fn numeric(&mut self, pat: &UpperPattern, vals: &[T], signs: &[i8], eps: T, delta: T) -> bool {
        let n = self.n;
        self.dynamic_hits = 0;
        self.next_in_col.copy_from_slice(&self.lp[..n]);
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = T::zero();
            for p in pat.colptr[k]..pat.colptr[k + 1] {
                let b = pat.rowval[p];
                if b == k {
                    self.d[k] = vals[p];
                    continue;
                }
                self.y_vals[b] = vals[p];
                if !self.y_used[b] {
                    self.y_used[b] = true;
                    self.elim[0] = b;
                    let mut ne = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if self.y_used[next] {
                            break;
                        }
                        self.y_used[next] = true;
                        self.elim[ne] = next;
                        ne += 1;
                        next = self.etree[next];
                    }
                    while ne > 0 {
                        ne -= 1;
                        self.y_idx[nnz_y] = self.elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for t in (0..nnz_y).rev() {
                let c = self.y_idx[t];
                let tmp = self.next_in_col[c];
                let yc = self.y_vals[c];
                for j in self.lp[c]..tmp {
                    let r = self.li[j];
                    self.y_vals[r] = self.y_vals[r] - self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc * self.dinv[c];
                self.lx[tmp] = l;
                self.d[k] = self.d[k] - yc * l;
                self.next_in_col[c] += 1;
                self.y_vals[c] = T::zero();
                self.y_used[c] = false;
            }
            let sign = if signs[k] >= 0 { T::one() } else { -T::one() };
            if !self.d[k].is_finite() {
                return false;
            }
            if sign * self.d[k] <= eps {
                self.d[k] = sign * delta;
                self.dynamic_hits += 1;
            }
            self.dinv[k] = T::one() / self.d[k];
        }
        true
    }

    /// Solves `L D L' x = b` in place.
    pub fn solve(&self, x: &mut [T]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] = x[self.li[j]] - self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] = x[i] * self.dinv[i];
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc = acc - self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
    }
}

/// Minimum-degree ordering of a symmetric pattern given as adjacency lists
/// (diagonal excluded). Returns `perm` with `perm[new] = old`.
///
/// Plain elimination-graph variant; ties are broken by the lower index so the
/// result is deterministic.
pub(crate) fn minimum_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = adj.len();
    let mut g: Vec<Vec<usize>> = adj
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|i| Reverse((g[i].len(), i))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, p))) = heap.pop() {
        if done[p] || deg != g[p].len() {
            continue;
        }
        done[p] = true;
        perm.push(p);
        let nbrs = std::mem::take(&mut g[p]);
        for &u in &nbrs {
            merged.clear();
            let (a, b) = (&g[u], &nbrs);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (_, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != p && next != u {
                    merged.push(next);
                }
            }
            g[u].clear();
            g[u].extend_from_slice(&merged);
            heap.push(Reverse((g[u].len(), u)));
        }
    }
    perm
}
