//! Ruiz equilibration of the constraint matrix plus a scalar cost scaling.
//!
//! The scaled problem is `(E A D) xs + ss = E b` with cost `k D c`; the
//! original iterates are `x = D xs`, `s = E^{-1} ss`, `z = E zs / k`.

use crate::bfm::{ConeKind, ConicProblem};
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

#[derive(Clone, Debug)]
pub(crate) struct Scaled<T> {
    pub a: CscMatrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub d: Vec<T>,
    pub e: Vec<T>,
    pub k: T,
}

impl<T: Scalar> Scaled<T> {
    pub fn unscale_x(&self, xs: &[T], out: &mut [T]) {
        for ((o, &x), &d) in out.iter_mut().zip(xs).zip(&self.d) {
            *o = x * d;
        }
    }

    pub fn unscale_s(&self, ss: &[T], out: &mut [T]) {
        for ((o, &s), &e) in out.iter_mut().zip(ss).zip(&self.e) {
            *o = s / e;
        }
    }

    pub fn unscale_z(&self, zs: &[T], out: &mut [T]) {
        for ((o, &z), &e) in out.iter_mut().zip(zs).zip(&self.e) {
            *o = z * e / self.k;
        }
    }
}

fn clamp_inv_sqrt<T: Scalar>(norm: T) -> T {
    if norm <= T::zero() {
        return T::one();
    }
    (T::one() / norm.sqrt()).max(T::lit(MIN_SCALE)).min(T::lit(MAX_SCALE))
}

pub(crate) fn equilibrate<T: Scalar>(prob: &ConicProblem<T>, iterations: usize) -> Scaled<T> {
    let (m, n) = (prob.num_rows(), prob.num_vars());
    let mut a = prob.a.clone();
    let mut d = vec![T::one(); n];
    let mut e = vec![T::one(); m];
    let ranges = prob.cone_ranges();
    for _ in 0..iterations {
        let dd: Vec<T> = a.col_norms_inf().into_iter().map(clamp_inv_sqrt).collect();
        let mut ee: Vec<T> = a.row_norms_inf().into_iter().map(clamp_inv_sqrt).collect();
        // A second-order cone must be scaled uniformly to stay invariant.
        for (cone, r) in prob.cones.iter().zip(&ranges) {
            if cone.kind == ConeKind::SecondOrder {
                let mean = ee[r.clone()].iter().copied().sum::<T>() / T::lit(r.len() as f64);
                ee[r.clone()].iter_mut().for_each(|v| *v = mean);
            }
        }
        a.scale(&ee, &dd);
        d.iter_mut().zip(&dd).for_each(|(x, &y)| *x = *x * y);
        e.iter_mut().zip(&ee).for_each(|(x, &y)| *x = *x * y);
    }
    let mut c: Vec<T> = prob.c.iter().zip(&d).map(|(&c, &d)| c * d).collect();
    let cnorm = crate::scalar::norm_inf(&c);
    let k = if cnorm > T::zero() {
        T::one() / cnorm.max(T::lit(MIN_SCALE)).min(T::lit(MAX_SCALE))
    } else {
        T::one()
    };
    c.iter_mut().for_each(|v| *v = *v * k);
    let b = prob.b.iter().zip(&e).map(|(&b, &e)| b * e).collect();
    Scaled { a, b, c, d, e, k }
}

pub(crate) fn identity<T: Scalar>(prob: &ConicProblem<T>) -> Scaled<T> {
    Scaled {
        a: prob.a.clone(),
        b: prob.b.clone(),
        c: prob.c.clone(),
        d: vec![T::one(); prob.num_vars()],
        e: vec![T::one(); prob.num_rows()],
        k: T::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfm::ConeSpec;

    #[test]
    fn soc_rows_share_one_scale_and_norms_shrink_toward_one() {
        let a =
            CscMatrix::from_triplets(4, 2, &[0, 1, 2, 3, 0], &[0, 0, 1, 1, 1], &[1000.0, 1.0, 0.01, 5.0, 2.0]).unwrap();
        let prob = ConicProblem {
            c: vec![1.0, 100.0],
            a,
            b: vec![1.0, 0.0, 0.0, 0.0],
            cones: vec![ConeSpec::nonnegative(1), ConeSpec::second_order(3)],
        };
        let sc = equilibrate(&prob, 10);
        assert_eq!(sc.e[1], sc.e[2]);
        assert_eq!(sc.e[2], sc.e[3]);
        let cn = sc.a.col_norms_inf();
        assert!(cn.iter().all(|&v| v > 0.1 && v < 10.0), "{cn:?}");
        assert!((crate::scalar::norm_inf::<f64>(&sc.c) - 1.0).abs() < 1e-12);
    }
}
