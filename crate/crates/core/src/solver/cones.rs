//! Cone kernels: Nesterov-Todd scaling, Jordan algebra and step lengths for
//! the zero cone, the nonnegative orthant and second-order cones.

use std::ops::Range;

use crate::bfm::{ConeKind, ConeSpec};
use crate::scalar::{norm2, Scalar};

/// Euclidean projection onto `{ (t, u) : t >= |u| }`.
///
/// Inputs of length 0 or 1 are treated as the nonnegative ray.
pub fn project_soc<T: Scalar>(z: &[T]) -> Vec<T> {
    if z.is_empty() {
        return Vec::new();
    }
    let t = z[0];
    let nu = z[1..].iter().map(|&u| u * u).sum::<T>().sqrt();
    if t >= nu {
        return z.to_vec();
    }
    if t <= -nu {
        return vec![T::zero(); z.len()];
    }
    let a = (t + nu) * T::lit(0.5);
    let mut out = Vec::with_capacity(z.len());
    out.push(a);
    out.extend(z[1..].iter().map(|&u| a * u / nu));
    out
}

#[derive(Clone, Debug)]
pub(crate) enum Cone<T> {
    Zero {
        rows: Range<usize>,
    },
    Nonneg {
        rows: Range<usize>,
        /// `W = diag(w)`, `w = sqrt(s / z)`.
        w: Vec<T>,
    },
    Soc {
        rows: Range<usize>,
        eta: T,
        /// Normalized scaling point; `W = eta * [w0, w1'; w1, I + w1 w1'/(1 + w0)]`.
        w: Vec<T>,
    },
}

impl<T: Scalar> Cone<T> {
    pub fn from_specs(specs: &[ConeSpec]) -> Vec<Self> {
        let mut start = 0;
        specs
            .iter()
            .map(|k| {
                let rows = start..start + k.dim;
                start += k.dim;
                match k.kind {
                    ConeKind::Zero => Cone::Zero { rows },
                    ConeKind::Nonnegative => Cone::Nonneg {
                        rows,
                        w: vec![T::one(); k.dim],
                    },
                    ConeKind::SecondOrder => {
                        let mut w = vec![T::zero(); k.dim];
                        w[0] = T::one();
                        Cone::Soc { rows, eta: T::one(), w }
                    }
                }
            })
            .collect()
    }

    pub fn rows(&self) -> Range<usize> {
        match self {
            Cone::Zero { rows } | Cone::Nonneg { rows, .. } | Cone::Soc { rows, .. } => rows.clone(),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Cone::Zero { .. } => 0,
            Cone::Nonneg { rows, .. } => rows.len(),
            Cone::Soc { .. } => 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Cone::Zero { .. })
    }

    /// Adds `alpha * e` where `e` is the cone's identity element.
    pub fn add_identity(&self, alpha: T, v: &mut [T]) {
        match self {
            Cone::Zero { .. } => {}
            Cone::Nonneg { rows, .. } => v[rows.clone()].iter_mut().for_each(|x| *x = *x + alpha),
            Cone::Soc { rows, .. } => v[rows.start] = v[rows.start] + alpha,
        }
    }

    /// Smallest eigenvalue of `v` in the cone's Jordan algebra.
    pub fn min_eig(&self, v: &[T]) -> T {
        match self {
            Cone::Zero { .. } => T::infinity(),
            Cone::Nonneg { rows, .. } => v[rows.clone()].iter().fold(T::infinity(), |m, &x| m.min(x)),
            Cone::Soc { rows, .. } => {
                let b = &v[rows.clone()];
                b[0] - tail_norm(b)
            }
        }
    }

    /// Recomputes the NT scaling at `(s, z)` and writes `lambda = W z`.
    /// Returns false when either point has left the cone interior.
    pub fn update_scaling(&mut self, s: &[T], z: &[T], lambda: &mut [T]) -> bool {
        match self {
            Cone::Zero { rows } => {
                lambda[rows.clone()].iter_mut().for_each(|x| *x = T::zero());
                true
            }
            Cone::Nonneg { rows, w } => {
                for (k, i) in rows.clone().enumerate() {
                    if !(s[i] > T::zero() && z[i] > T::zero()) {
                        return false;
                    }
                    w[k] = (s[i] / z[i]).sqrt();
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                true
            }
            Cone::Soc { rows, eta, w } => {
                let (sb, zb) = (&s[rows.clone()], &z[rows.clone()]);
                let sres = jdet(sb);
                let zres = jdet(zb);
                if !(sres > T::zero() && zres > T::zero() && sb[0] > T::zero() && zb[0] > T::zero()) {
                    return false;
                }
                let (sn, zn) = (sres.sqrt(), zres.sqrt());
                let dot: T = sb.iter().zip(zb).map(|(&a, &b)| a * b).sum::<T>() / (sn * zn);
                let gamma = ((T::one() + dot) * T::lit(0.5)).sqrt();
                let two_gamma = gamma + gamma;
                w[0] = (sb[0] / sn + zb[0] / zn) / two_gamma;
                for k in 1..w.len() {
                    w[k] = (sb[k] / sn - zb[k] / zn) / two_gamma;
                }
                // Re-normalize so that w0^2 - |w1|^2 = 1 holds to roundoff.
                let w1sq: T = w[1..].iter().map(|&x| x * x).sum();
                w[0] = (T::one() + w1sq).sqrt();
                *eta = (sres / zres).sqrt().sqrt();
                let mut out = vec![T::zero(); rows.len()];
                soc_mul_w(*eta, w, zb, &mut out, false);
                lambda[rows.clone()].copy_from_slice(&out);
                true
            }
        }
    }

    /// `out = W v` (or `W^{-1} v` when `inverse`) on this cone's rows.
    pub fn mul_w(&self, v: &[T], out: &mut [T], inverse: bool) {
        match self {
            Cone::Zero { rows } => out[rows.clone()].iter_mut().for_each(|x| *x = T::zero()),
            Cone::Nonneg { rows, w } => {
                for (k, i) in rows.clone().enumerate() {
                    out[i] = if inverse { v[i] / w[k] } else { v[i] * w[k] };
                }
            }
            Cone::Soc { rows, eta, w } => {
                let r = rows.clone();
                let mut tmp = vec![T::zero(); r.len()];
                soc_mul_w(*eta, w, &v[r.clone()], &mut tmp, inverse);
                out[r].copy_from_slice(&tmp);
            }
        }
    }

    /// Combines two candidate values of `ds` on this cone's rows: `comp` is
    /// kept along the eigendirections of `W` with eigenvalue below one and
    /// `prim` along the rest. The result lands in `prim`.
    pub fn blend(&self, prim: &mut [T], comp: &[T]) {
        match self {
            Cone::Zero { rows } => prim[rows.clone()].iter_mut().for_each(|x| *x = T::zero()),
            Cone::Nonneg { rows, w } => {
                for (k, i) in rows.clone().enumerate() {
                    if w[k] < T::one() {
                        prim[i] = comp[i];
                    }
                }
            }
            Cone::Soc { rows, eta, w } => {
                let r = rows.clone();
                let diff: Vec<T> = r.clone().map(|i| comp[i] - prim[i]).collect();
                let nw = norm2(&w[1..]);
                let take = |e: T| e < T::one();
                let mut corr = vec![T::zero(); r.len()];
                if nw <= T::epsilon() {
                    if take(*eta) {
                        corr.copy_from_slice(&diff);
                    }
                } else {
                    // Eigenvectors (1, +-u) / sqrt 2 with u = w1 / |w1|, and
                    // the complement of u in the tail with eigenvalue eta.
                    let half = T::lit(0.5);
                    let ud: T = w[1..].iter().zip(&diff[1..]).map(|(&a, &b)| a * b).sum::<T>() / nw;
                    let proj = |sign: T| half * (diff[0] + sign * ud);
                    let (cp, cm) = (proj(T::one()), proj(-T::one()));
                    let (ep, em) = (*eta * (w[0] + nw), *eta * (w[0] - nw));
                    let ap = if take(ep) { cp } else { T::zero() };
                    let am = if take(em) { cm } else { T::zero() };
                    corr[0] = ap + am;
                    let tail_perp = take(*eta);
                    for k in 1..r.len() {
                        let uk = w[k] / nw;
                        let along = (ap - am) * uk;
                        let perp = if tail_perp { diff[k] - ud * uk } else { T::zero() };
                        corr[k] = along + perp;
                    }
                }
                for (k, i) in r.enumerate() {
                    prim[i] = prim[i] + corr[k];
                }
            }
        }
    }

    /// Jordan product `out = u o v`.
    pub fn circ(&self, u: &[T], v: &[T], out: &mut [T]) {
        match self {
            Cone::Zero { rows } => out[rows.clone()].iter_mut().for_each(|x| *x = T::zero()),
            Cone::Nonneg { rows, .. } => {
                for i in rows.clone() {
                    out[i] = u[i] * v[i];
                }
            }
            Cone::Soc { rows, .. } => {
                let (ub, vb) = (&u[rows.clone()], &v[rows.clone()]);
                let d: T = ub.iter().zip(vb).map(|(&a, &b)| a * b).sum();
                let (u0, v0) = (ub[0], vb[0]);
                for (k, i) in rows.clone().enumerate().skip(1) {
                    out[i] = u0 * vb[k] + v0 * ub[k];
                }
                out[rows.start] = d;
            }
        }
    }

    /// Jordan division `out = lambda \ v`, the solution of `lambda o out = v`.
    pub fn inv_circ(&self, lambda: &[T], v: &[T], out: &mut [T]) {
        match self {
            Cone::Zero { rows } => out[rows.clone()].iter_mut().for_each(|x| *x = T::zero()),
            Cone::Nonneg { rows, .. } => {
                for i in rows.clone() {
                    out[i] = v[i] / lambda[i];
                }
            }
            Cone::Soc { rows, .. } => {
                let (lb, vb) = (&lambda[rows.clone()], &v[rows.clone()]);
                let det = jdet(lb);
                let l1v1: T = lb[1..].iter().zip(&vb[1..]).map(|(&a, &b)| a * b).sum();
                let x0 = (lb[0] * vb[0] - l1v1) / det;
                out[rows.start] = x0;
                for (k, i) in rows.clone().enumerate().skip(1) {
                    out[i] = (vb[k] - x0 * lb[k]) / lb[0];
                }
            }
        }
    }

    /// Largest `alpha` in `[0, cap]` keeping `u + alpha du` in the cone.
    pub fn step_length(&self, u: &[T], du: &[T], cap: T) -> T {
        match self {
            Cone::Zero { .. } => cap,
            Cone::Nonneg { rows, .. } => {
                rows.clone()
                    .fold(cap, |a, i| if du[i] < T::zero() { a.min(-u[i] / du[i]) } else { a })
            }
            Cone::Soc { rows, .. } => soc_step(&u[rows.clone()], &du[rows.clone()], cap),
        }
    }
}

fn tail_norm<T: Scalar>(v: &[T]) -> T {
    v[1..].iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// `v0^2 - |v1|^2`, computed as a product to limit cancellation.
fn jdet<T: Scalar>(v: &[T]) -> T {
    let n = tail_norm(v);
    (v[0] - n) * (v[0] + n)
}

pub(super) fn soc_mul_w<T: Scalar>(eta: T, w: &[T], v: &[T], out: &mut [T], inverse: bool) {
    let w0 = w[0];
    let w1v1: T = w[1..].iter().zip(&v[1..]).map(|(&a, &b)| a * b).sum();
    let (sign, scale) = if inverse {
        (-T::one(), T::one() / eta)
    } else {
        (T::one(), eta)
    };
    out[0] = scale * (w0 * v[0] + sign * w1v1);
    let coef = sign * v[0] + w1v1 / (T::one() + w0);
    for k in 1..v.len() {
        out[k] = scale * (v[k] + coef * w[k]);
    }
}

fn soc_step<T: Scalar>(u: &[T], du: &[T], cap: T) -> T {
    let two = T::lit(2.0);
    let a = jdet(du);
    let b = two * (u[0] * du[0] - u[1..].iter().zip(&du[1..]).map(|(&x, &y)| x * y).sum::<T>());
    let c = jdet(u).max(T::zero());
    let mut alpha = cap;
    if du[0] < T::zero() {
        alpha = alpha.min(-u[0] / du[0]);
    }
    // First positive root of a t^2 + b t + c with c >= 0.
    let root = if a.abs() <= T::epsilon() * (b.abs() + c.abs()).max(T::min_positive_value()) {
        if b < T::zero() {
            -c / b
        } else {
            T::infinity()
        }
    } else {
        let disc = b * b - T::lit(4.0) * a * c;
        if disc < T::zero() {
            T::infinity()
        } else {
            let sq = disc.sqrt();
            let q = if b >= T::zero() {
                -(b + sq) * T::lit(0.5)
            } else {
                (-b + sq) * T::lit(0.5)
            };
            let r1 = if a != T::zero() { q / a } else { T::infinity() };
            let r2 = if q != T::zero() { c / q } else { T::infinity() };
            [r1, r2]
                .into_iter()
                .filter(|r| *r > T::zero())
                .fold(T::infinity(), T::min)
        }
    };
    alpha.min(root).max(T::zero())
}
