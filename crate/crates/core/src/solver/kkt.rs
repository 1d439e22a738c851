//! Reduced KKT system of the interior-point method.
//!
//! The Newton system `[[0, A'], [A, -W^2]] [dx; dz] = [rx; rz]` is solved in
//! the scaled form
//!
//! ```text
//! [[0,       A0', (W^-1 A)'],   [dx ]   [rx       ]
//!  [A0,      0,   0        ], * [dz0] = [rz0      ]
//!  [W^-1 A,  0,   -I       ]]   [p  ]   [W^-1 rz  ]
//! ```
//!
//! with `dz = W^-1 p` on the nonzero cones and `A0` the zero-cone rows.
//! Near the boundary of a second-order cone the eigenvalues of `W^2` spread
//! over many orders of magnitude and eliminating a dense `W^2` block loses
//! the pivot signs; the `-I` block does not have that problem.
//!
//! The sparsity pattern is fixed, so ordering and symbolic analysis happen
//! once; each iteration rescales the cone rows and refactors.

use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

use super::cones::{soc_mul_w, Cone};
use super::ldl::{minimum_degree, LdlFactor, UpperPattern};

/// Rows of `A` that are rescaled together: one orthant row or one
/// second-order cone. Every row of a group gets the union column pattern.
struct Group<T> {
    cone: usize,
    /// Offset of the first row inside the cone.
    local: usize,
    rows: std::ops::Range<usize>,
    cols: Vec<usize>,
    /// `a[p * cols.len() + q] = A[rows.start + p, cols[q]]`.
    a: Vec<T>,
    slots: Vec<usize>,
}

pub(crate) struct Kkt<T> {
    n: usize,
    m: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    pat: UpperPattern,
    vals: Vec<T>,
    signs: Vec<i8>,
    /// Slot of the diagonal entry of each unpermuted index.
    diag: Vec<usize>,
    zero_row: Vec<bool>,
    groups: Vec<Group<T>>,
    factor: LdlFactor<T>,
    static_reg: T,
    dyn_eps: T,
    dyn_delta: T,
    sol: Vec<T>,
    res: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Kkt<T> {
    pub fn new(a: &CscMatrix<T>, cones: &[Cone<T>], static_reg: T) -> Self {
        let (m, n) = (a.nrows, a.ncols);
        let dim = n + m;
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); m];
        for (i, j, v) in a.triplets() {
            rows[i].push((j, v));
        }

        // Entries as (row, col) of the unpermuted upper triangle.
        let mut entries: Vec<(usize, usize)> = (0..dim).map(|k| (k, k)).collect();
        let mut zero_row = vec![false; dim];
        let mut fixed = Vec::new();
        let mut groups = Vec::new();
        for (ci, cone) in cones.iter().enumerate() {
            let r = cone.rows();
            let spans: Vec<std::ops::Range<usize>> = match cone {
                Cone::Zero { .. } => {
                    for i in r {
                        zero_row[n + i] = true;
                        for &(j, v) in &rows[i] {
                            fixed.push((entries.len(), v));
                            entries.push((j, n + i));
                        }
                    }
                    continue;
                }
                Cone::Nonneg { .. } => r.clone().map(|i| i..i + 1).collect(),
                Cone::Soc { .. } => vec![r.clone()],
            };
            for span in spans {
                let mut cols: Vec<usize> = span.clone().flat_map(|i| rows[i].iter().map(|e| e.0)).collect();
                cols.sort_unstable();
                cols.dedup();
                let mut av = Vec::with_capacity(span.len() * cols.len());
                let mut slots = Vec::with_capacity(av.capacity());
                for i in span.clone() {
                    for &c in &cols {
                        let v = rows[i].iter().find(|e| e.0 == c).map_or(T::zero(), |e| e.1);
                        av.push(v);
                        slots.push(entries.len());
                        entries.push((c, n + i));
                    }
                }
                groups.push(Group {
                    cone: ci,
                    local: span.start - r.start,
                    rows: span,
                    cols,
                    a: av,
                    slots,
                });
            }
        }

        let mut adj = vec![Vec::new(); dim];
        for &(i, j) in &entries {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let perm = minimum_degree(&adj);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Permuted upper-triangle CSC; slot[e] is the position of entry e.
        let mut keyed: Vec<(usize, usize, usize)> = entries
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| {
                let (pi, pj) = (iperm[i], iperm[j]);
                (pi.max(pj), pi.min(pj), e)
            })
            .collect();
        keyed.sort_unstable();
        let mut colptr = vec![0usize; dim + 1];
        let mut rowval = Vec::with_capacity(keyed.len());
        let mut slot = vec![0usize; entries.len()];
        for (pos, &(col, row, e)) in keyed.iter().enumerate() {
            colptr[col + 1] += 1;
            rowval.push(row);
            slot[e] = pos;
        }
        for c in 0..dim {
            colptr[c + 1] += colptr[c];
        }
        let pat = UpperPattern { n: dim, colptr, rowval };
        let mut vals = vec![T::zero(); keyed.len()];
        for &(e, v) in &fixed {
            vals[slot[e]] = v;
        }
        for g in &mut groups {
            g.slots.iter_mut().for_each(|s| *s = slot[*s]);
        }
        let diag = (0..dim).map(|k| slot[k]).collect();
        let signs = (0..dim).map(|k| if perm[k] < n { 1 } else { -1 }).collect();
        let factor = LdlFactor::symbolic(&pat);
        log::debug!("kkt: dim {dim}, nnz(K) {}, nnz(L) {}", pat.rowval.len(), factor.nnz_l());
        let eps = T::epsilon();
        Self {
            n,
            m,
            perm,
            pat,
            vals,
            signs,
            diag,
            zero_row,
            groups,
            factor,
            static_reg,
            dyn_eps: eps * T::lit(1000.0),
            dyn_delta: T::lit(2e-7).max(eps.sqrt()),
            sol: vec![T::zero(); dim],
            res: vec![T::zero(); m],
            tmp: vec![T::zero(); m],
        }
    }

    /// Rescales the cone rows by `W^{-1}` and refactors. With `identity`
    /// set, nonzero cones use `W = I` (initialization).
    pub fn refactor(&mut self, cones: &[Cone<T>], identity: bool) -> bool {
        let mut col = Vec::new();
        let mut out = Vec::new();
        for g in &self.groups {
            let nc = g.cols.len();
            let d = g.rows.len();
            match &cones[g.cone] {
                Cone::Soc { eta, w, .. } if !identity => {
                    col.resize(d, T::zero());
                    out.resize(d, T::zero());
                    for q in 0..nc {
                        for p in 0..d {
                            col[p] = g.a[p * nc + q];
                        }
                        soc_mul_w(*eta, w, &col, &mut out, true);
                        for p in 0..d {
                            self.vals[g.slots[p * nc + q]] = out[p];
                        }
                    }
                }
                Cone::Nonneg { w, .. } if !identity => {
                    let s = T::one() / w[g.local];
                    for (q, &pos) in g.slots.iter().enumerate() {
                        self.vals[pos] = g.a[q] * s;
                    }
                }
                _ => {
                    for (q, &pos) in g.slots.iter().enumerate() {
                        self.vals[pos] = g.a[q];
                    }
                }
            }
        }
        for k in 0..self.n + self.m {
            let v = if k < self.n {
                self.static_reg
            } else if self.zero_row[k] {
                -self.static_reg
            } else {
                -T::one() - self.static_reg
            };
            self.vals[self.diag[k]] = v;
        }
        let ok = self
            .factor
            .numeric(&self.pat, &self.vals, &self.signs, self.dyn_eps, self.dyn_delta);
        if self.factor.dynamic_hits > 0 {
            log::trace!("kkt: {} pivots regularized", self.factor.dynamic_hits);
        }
        ok && self.vals.iter().all(|v| v.is_finite())
    }

    /// Solves `[[0, A'], [A, -W^2]] [x; z] = [rx; rz]` (`identity` as in
    /// `refactor`) with up to `refine` steps of iterative refinement against
    /// that unregularized system. Returns false if the result is not finite.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        a: &CscMatrix<T>,
        cones: &[Cone<T>],
        identity: bool,
        rx: &[T],
        rz: &[T],
        x: &mut [T],
        z: &mut [T],
        refine: usize,
    ) -> bool {
        let (n, m) = (self.n, self.m);
        self.solve_once(cones, identity, rx, rz, x, z);
        let rhs_norm = crate::scalar::norm_inf(rx).max(crate::scalar::norm_inf(rz));
        let tol = T::epsilon() * (T::lit(4500.0) + T::lit(450.0) * rhs_norm);
        let mut ex = vec![T::zero(); n];
        let mut ez = vec![T::zero(); m];
        let (mut dx, mut dz) = (vec![T::zero(); n], vec![T::zero(); m]);
        let mut last = T::infinity();
        for _ in 0..refine {
            let r = self.residual(a, cones, identity, rx, rz, x, z, &mut ex, &mut ez);
            if r <= tol || !(r < last) {
                break;
            }
            last = r;
            self.solve_once(cones, identity, &ex, &ez, &mut dx, &mut dz);
            for (v, d) in x.iter_mut().zip(&dx) {
                *v = *v + *d;
            }
            for (v, d) in z.iter_mut().zip(&dz) {
                *v = *v + *d;
            }
        }
        x.iter().chain(z.iter()).all(|v| v.is_finite())
    }

    /// One solve with the factored scaled matrix.
    fn solve_once(&mut self, cones: &[Cone<T>], identity: bool, rx: &[T], rz: &[T], x: &mut [T], z: &mut [T]) {
        let n = self.n;
        self.scale_rows(cones, identity, rz);
        for (k, &old) in self.perm.iter().enumerate() {
            self.sol[k] = if old < n { rx[old] } else { self.tmp[old - n] };
        }
        self.factor.solve(&mut self.sol);
        let mut p = std::mem::take(&mut self.res);
        p.resize(self.m, T::zero());
        for (k, &old) in self.perm.iter().enumerate() {
            if old < n {
                x[old] = self.sol[k];
            } else {
                p[old - n] = self.sol[k];
            }
        }
        self.scale_rows(cones, identity, &p);
        z.copy_from_slice(&self.tmp);
        self.res = p;
    }

    /// `(ex, ez) = (rx, rz) - [[0, A'], [A, -W^2]] (x, z)`; returns the
    /// inf-norm.
    #[allow(clippy::too_many_arguments)]
    fn residual(
        &mut self,
        a: &CscMatrix<T>,
        cones: &[Cone<T>],
        identity: bool,
        rx: &[T],
        rz: &[T],
        x: &[T],
        z: &[T],
        ex: &mut [T],
        ez: &mut [T],
    ) -> T {
        ex.copy_from_slice(rx);
        a.tmul_vec_add(-T::one(), z, ex);
        ez.copy_from_slice(rz);
        a.mul_vec_add(-T::one(), x, ez);
        if identity {
            for cone in cones.iter().filter(|c| !c.is_zero()) {
                for i in cone.rows() {
                    ez[i] = ez[i] + z[i];
                }
            }
        } else {
            let mut wz = vec![T::zero(); self.m];
            for cone in cones {
                cone.mul_w(z, &mut wz, false);
            }
            for cone in cones {
                cone.mul_w(&wz, &mut self.tmp, false);
            }
            for cone in cones.iter().filter(|c| !c.is_zero()) {
                for i in cone.rows() {
                    ez[i] = ez[i] + self.tmp[i];
                }
            }
        }
        crate::scalar::norm_inf(ex).max(crate::scalar::norm_inf(ez))
    }

    /// `tmp = W^{-1} v` on the nonzero cones, `v` on the zero cone.
    fn scale_rows(&mut self, cones: &[Cone<T>], identity: bool, v: &[T]) {
        self.tmp.copy_from_slice(v);
        if identity {
            return;
        }
        for cone in cones {
            if !cone.is_zero() {
                cone.mul_w(v, &mut self.tmp, true);
            }
        }
    }
}
