//! Small conic programs with known optima.

use bfm_relax::bfm::{ConeKind, ConeSpec, ConicProblem};
use bfm_relax::solver::SolveOutcome;
use bfm_relax::sparse::CscMatrix;

/// Builds a problem from dense rows of `A` (so `s = b - A x`).
pub fn problem(c: &[f64], rows: &[(&[f64], f64)], cones: Vec<ConeSpec>) -> ConicProblem<f64> {
    let (mut ri, mut ci, mut v) = (vec![], vec![], vec![]);
    for (i, (row, _)) in rows.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                ri.push(i);
                ci.push(j);
                v.push(a);
            }
        }
    }
    ConicProblem {
        c: c.to_vec(),
        a: CscMatrix::from_triplets(rows.len(), c.len(), &ri, &ci, &v).unwrap(),
        b: rows.iter().map(|r| r.1).collect(),
        cones,
    }
}

pub struct Case {
    pub name: &'static str,
    pub prob: ConicProblem<f64>,
    pub optimum: f64,
}

pub fn battery() -> Vec<Case> {
    use ConeSpec as K;
    let s2 = 2f64.sqrt();
    vec![
        Case {
            name: "equality pins x",
            prob: problem(&[1.0], &[(&[1.0], 1.0)], vec![K::zero(1)]),
            optimum: 1.0,
        },
        Case {
            name: "epigraph of a fixed vector norm",
            prob: problem(
                &[1.0],
                &[(&[-1.0], 0.0), (&[0.0], 3.0), (&[0.0], 4.0)],
                vec![K::second_order(3)],
            ),
            optimum: 5.0,
        },
        Case {
            name: "two-variable LP vertex",
            prob: problem(
                &[-2.0, -3.0],
                &[
                    (&[1.0, 1.0], 4.0),
                    (&[1.0, 3.0], 6.0),
                    (&[-1.0, 0.0], 0.0),
                    (&[0.0, -1.0], 0.0),
                ],
                vec![K::nonnegative(4)],
            ),
            optimum: -9.0,
        },
        Case {
            name: "simplex LP",
            prob: problem(
                &[1.0, 2.0, 3.0],
                &[
                    (&[1.0, 1.0, 1.0], 1.0),
                    (&[-1.0, 0.0, 0.0], 0.0),
                    (&[0.0, -1.0, 0.0], 0.0),
                    (&[0.0, 0.0, -1.0], 0.0),
                ],
                vec![K::zero(1), K::nonnegative(3)],
            ),
            optimum: 1.0,
        },
        Case {
            name: "distance from a point to a line",
            // vars (t, x, y): min t, (t, x - 1, y - 2) in SOC, x + y = 0
            prob: problem(
                &[1.0, 0.0, 0.0],
                &[
                    (&[0.0, 1.0, 1.0], 0.0),
                    (&[-1.0, 0.0, 0.0], 0.0),
                    (&[0.0, -1.0, 0.0], -1.0),
                    (&[0.0, 0.0, -1.0], -2.0),
                ],
                vec![K::zero(1), K::second_order(3)],
            ),
            optimum: 3.0 / s2,
        },
        Case {
            name: "rotated cone x >= y^2",
            // vars (x, y): y = 3, (x + 1, 2y, x - 1) in SOC
            prob: problem(
                &[1.0, 0.0],
                &[
                    (&[0.0, 1.0], 3.0),
                    (&[-1.0, 0.0], 1.0),
                    (&[0.0, -2.0], 0.0),
                    (&[-1.0, 0.0], -1.0),
                ],
                vec![K::zero(1), K::second_order(3)],
            ),
            optimum: 9.0,
        },
        Case {
            name: "linear objective over the unit disc",
            prob: problem(
                &[1.0, 1.0],
                &[(&[0.0, 0.0], 1.0), (&[-1.0, 0.0], 0.0), (&[0.0, -1.0], 0.0)],
                vec![K::second_order(3)],
            ),
            optimum: -s2,
        },
        Case {
            name: "absolute value epigraph with a bound",
            // vars (t, x): t >= x - 3, t >= 3 - x, x <= 1
            prob: problem(
                &[1.0, 0.0],
                &[(&[-1.0, 1.0], 3.0), (&[-1.0, -1.0], -3.0), (&[0.0, 1.0], 1.0)],
                vec![K::nonnegative(3)],
            ),
            optimum: 2.0,
        },
        Case {
            name: "sum of two 2-d cones",
            // vars (t1, t2, x): (t1, x) in SOC2, (t2, x - 2) in SOC2
            prob: problem(
                &[1.0, 1.0, 0.0],
                &[
                    (&[-1.0, 0.0, 0.0], 0.0),
                    (&[0.0, 0.0, -1.0], 0.0),
                    (&[0.0, -1.0, 0.0], 0.0),
                    (&[0.0, 0.0, -1.0], -2.0),
                ],
                vec![K::second_order(2), K::second_order(2)],
            ),
            optimum: 2.0,
        },
        Case {
            name: "chord of a circle",
            // vars (x, y): min -x, y = 1, (2, x, y) in SOC
            prob: problem(
                &[-1.0, 0.0],
                &[
                    (&[0.0, 1.0], 1.0),
                    (&[0.0, 0.0], 2.0),
                    (&[-1.0, 0.0], 0.0),
                    (&[0.0, -1.0], 0.0),
                ],
                vec![K::zero(1), K::second_order(3)],
            ),
            optimum: -(3f64.sqrt()),
        },
        Case {
            name: "five-dimensional cone",
            prob: problem(
                &[1.0],
                &[
                    (&[-1.0], 0.0),
                    (&[0.0], 1.0),
                    (&[0.0], 2.0),
                    (&[0.0], 2.0),
                    (&[0.0], 4.0),
                ],
                vec![K::second_order(5)],
            ),
            optimum: 5.0,
        },
        Case {
            name: "badly scaled LP",
            // min 1e3 x + y, x >= 1e-3, y >= 1e3, x + 1e-4 y <= 10
            prob: problem(
                &[1e3, 1.0],
                &[(&[-1.0, 0.0], -1e-3), (&[0.0, -1.0], -1e3), (&[1.0, 1e-4], 10.0)],
                vec![K::nonnegative(3)],
            ),
            optimum: 1.0 + 1e3,
        },
    ]
}

pub fn kkt_residuals(p: &ConicProblem<f64>, out: &SolveOutcome<f64>) -> (f64, f64) {
    let mut r = vec![0.0; p.num_rows()];
    p.a.mul_vec(&out.x, &mut r);
    let pr = r
        .iter()
        .zip(&out.s)
        .zip(&p.b)
        .map(|((ax, s), b)| (ax + s - b).abs())
        .fold(0.0, f64::max);
    let mut d = vec![0.0; p.num_vars()];
    p.a.tmul_vec(&out.y, &mut d);
    let dr = d.iter().zip(&p.c).map(|(a, c)| (a + c).abs()).fold(0.0, f64::max);
    (pr, dr)
}

pub fn cone_violation(p: &ConicProblem<f64>, v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (cone, r) in p.cones.iter().zip(p.cone_ranges()) {
        let b = &v[r];
        match cone.kind {
            ConeKind::Zero => {}
            ConeKind::Nonnegative => worst = b.iter().fold(worst, |w, &x| w.max(-x)),
            ConeKind::SecondOrder => {
                let n = b[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max(n - b[0]);
            }
        }
    }
    worst
}

pub fn in_cone(v: &[f64]) -> bool {
    let n = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    v[0] >= n * (1.0 - 1e-12) - 1e-12
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
