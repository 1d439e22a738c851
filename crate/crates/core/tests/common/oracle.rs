//! Two-bus relaxation and a one-dimensional brute-force oracle for it.
//!
//! Bus 1 is the slack at exactly 1 p.u. and bus 2 carries the load. The
//! objective only sees `l`, so the optimum is the smallest `l` for which some
//! admissible load makes the cone and the voltage bounds hold. For fixed `l`
//! the best loads are `Pc = Pd` (when `r >= 0`) and the `Qc >= Qd` that puts
//! `H = Qc + x l` closest to zero.

use bfm_relax::bfm::{build_cr, extract_solution, BfmSolution, ObjectiveSpec};
use bfm_relax::netmodel::{Branch, Bus, Generator, Network};
use bfm_relax::solver::{solve, SolveStatus, SolverSettings};

pub const V1: f64 = 1.0;
pub const V2_MIN: f64 = 0.8;
pub const V2_MAX: f64 = 1.2;

pub fn two_bus(r: f64, x: f64, pd: f64, qd: f64) -> Network<f64> {
    Network {
        base_mva: 100.0,
        buses: vec![
            Bus::new(1, 0.0, 0.0, 1.0, 1.0, true),
            Bus::new(2, pd, qd, V2_MIN, V2_MAX, false),
        ],
        branches: vec![Branch::series(1, 2, r, x)],
        generators: vec![Generator::new(1, -10.0, 10.0, -10.0, 10.0)],
    }
}

#[derive(Debug)]
pub struct Oracle {
    pub l: f64,
    pub f: f64,
    pub h: f64,
    pub v2: f64,
    pub qc: f64,
}

pub fn point(r: f64, x: f64, pd: f64, qd: f64, l: f64) -> (f64, f64, f64, f64) {
    let qc = qd.max(-x * l);
    let (f, h) = (pd + r * l, qc + x * l);
    let v2 = V1 - 2.0 * (r * f + x * h) + (r * r + x * x) * l;
    (f, h, v2, qc)
}

pub fn feasible(r: f64, x: f64, pd: f64, qd: f64, l: f64) -> bool {
    let (f, h, v2, _) = point(r, x, pd, qd, l);
    l * V1 >= f * f + h * h && (V2_MIN * V2_MIN..=V2_MAX * V2_MAX).contains(&v2)
}

/// First feasible `l` on a uniform grid, then bisection on the bracket.
pub fn oracle(r: f64, x: f64, pd: f64, qd: f64) -> Oracle {
    let step = 1e-4;
    let mut hi = 0.0;
    while !feasible(r, x, pd, qd, hi) {
        hi += step;
        assert!(hi < 50.0, "no feasible l");
    }
    let mut lo = (hi - step).max(0.0);
    if feasible(r, x, pd, qd, lo) {
        hi = lo;
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if feasible(r, x, pd, qd, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (f, h, v2, qc) = point(r, x, pd, qd, hi);
    Oracle { l: hi, f, h, v2, qc }
}

pub fn solve_cr(net: &Network<f64>) -> BfmSolution<f64> {
    let (prob, map) = build_cr(net, &ObjectiveSpec::default()).unwrap();
    let out = solve(&prob, &SolverSettings::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    extract_solution(&prob, &map, &out.x).unwrap()
}

/// An optimum is flat when the objective is only quadratic in `H` (the
/// reactive load can cancel it) or carries just `epsilon_l` (`r = 0`). A
/// 1e-9 solver tolerance then pins the point only to about its square root.
pub fn tolerance(r: f64, o: &Oracle) -> f64 {
    if r == 0.0 || o.h.abs() < 1e-9 {
        1e-4
    } else {
        1e-7
    }
}

/// Every variable the optimum pins down, as `(name, solver, oracle)`.
/// Generation and the slack-bus load are only fixed through their
/// difference, which equals the sending flow.
pub fn pinned(sol: &BfmSolution<f64>, o: &Oracle, pd: f64) -> [(&'static str, f64, f64); 9] {
    [
        ("v1", sol.v[0], V1),
        ("v2", sol.v[1], o.v2),
        ("l", sol.l[0], o.l),
        ("F", sol.f[0], o.f),
        ("H", sol.h[0], o.h),
        ("Pc2", sol.pc[1], pd),
        ("Qc2", sol.qc[1], o.qc),
        ("Pg - Pc1", sol.pg[0] - sol.pc[0], o.f),
        ("Qg - Qc1", sol.qg[0] - sol.qc[0], o.h),
    ]
}

/// Largest deviation from the oracle and the variable where it occurs.
pub fn worst_deviation(sol: &BfmSolution<f64>, o: &Oracle, pd: f64) -> (&'static str, f64) {
    pinned(sol, o, pd)
        .iter()
        .map(|&(name, got, want)| (name, (got - want).abs()))
        .fold(("", 0.0), |w, d| if d.1 > w.1 { d } else { w })
}

pub fn compare(sol: &BfmSolution<f64>, o: &Oracle, r: f64, pd: f64) {
    let tol = tolerance(r, o);
    for (name, got, want) in pinned(sol, o, pd) {
        assert!(
            (got - want).abs() <= tol,
            "{name}: {got} vs oracle {want} (tol {tol:e})"
        );
    }
}

/// `(r, x, Pd, Qd)`; the first is the 10 MW reference case.
pub const CASES: [(f64, f64, f64, f64); 6] = [
    (0.01, 0.1, 0.1, 0.0),
    (0.01, 0.1, 0.5, 0.2),
    (0.02, 0.05, 0.9, 0.4),
    (0.1, 0.3, 0.2, 0.05),
    (0.05, 0.2, 0.3, -0.1),
    (0.0, 0.1, 0.4, 0.1),
];
