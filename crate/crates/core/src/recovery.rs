//! Voltage angles from a branch-flow solution, and the polar AC power-flow
//! residuals used to check them.
//!
//! For a branch `i -> j` with series impedance `z = r + jx` and sending-end
//! series flow `S = F + jH`, the current is `I = S* / V_i*`, so
//!
//! ```text
//! V_i V_j* = |V_i|^2 - z* S = (v_i - rF - xH) + j(xF - rH)
//! ```
//!
//! and `beta = theta_i - theta_j` is the argument of the right-hand side. A
//! tap ratio `t e^{j phi}` on the from side replaces `v_i` by `v_i / t^2` and
//! shifts the angle by `phi`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex;
use serde::Serialize;

use crate::bfm::{check_feasibility, BfmSolution};
use crate::error::{Error, Result};
use crate::netmodel::Network;
use crate::scalar::Scalar;

/// Dense bus admittance matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix<T> {
    pub n: usize,
    pub y: Vec<Complex<T>>,
}

impl<T: Scalar> AdmittanceMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.y[i * self.n + j]
    }

    pub fn g(&self, i: usize, j: usize) -> T {
        self.get(i, j).re
    }

    pub fn b(&self, i: usize, j: usize) -> T {
        self.get(i, j).im
    }

    fn add(&mut self, i: usize, j: usize, v: Complex<T>) {
        let e = &mut self.y[i * self.n + j];
        *e = *e + v;
    }
}

/// Assembles the bus admittance matrix from in-service branches.
///
/// Series-only networks give a symmetric matrix with zero row sums. Shunts,
/// line charging and taps are included when the network carries them.
pub fn build_admittance<T: Scalar>(net: &Network<T>) -> Result<AdmittanceMatrix<T>> {
    let n = net.buses.len();
    let ends = net.endpoints()?;
    let mut y = AdmittanceMatrix {
        n,
        y: vec![Complex::new(T::zero(), T::zero()); n * n],
    };
    let half = T::lit(0.5);
    for (k, br) in net.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        if br.has_zero_impedance() {
            return Err(Error::ZeroImpedance(k + 1));
        }
        let ys = Complex::new(br.r, br.x).inv();
        let charge = Complex::new(T::zero(), half * br.charging);
        let phi = br.shift_deg.to_radians();
        let tap = Complex::from_polar(br.tap, phi);
        let (i, j) = (ends[k].from, ends[k].to);
        y.add(i, i, (ys + charge) / (br.tap * br.tap));
        y.add(j, j, ys + charge);
        y.add(i, j, -ys / tap.conj());
        y.add(j, i, -ys / tap);
    }
    for (i, bus) in net.buses.iter().enumerate() {
        y.add(i, i, Complex::new(bus.g_shunt, bus.b_shunt));
    }
    Ok(y)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap<T: Scalar>(a: T) -> T {
    let pi = T::lit(PI);
    let two_pi = pi + pi;
    let r = a - two_pi * ((a + pi) / two_pi).floor();
    if r <= -pi {
        r + two_pi
    } else {
        r
    }
}

/// Angle difference `theta_i - theta_j - phi` across the series element of
/// `branch`, from its flows.
pub fn branch_angle<T: Scalar>(net: &Network<T>, sol: &BfmSolution<T>, from: usize, branch: usize) -> T {
    let br = &net.branches[branch];
    let (f, h) = (sol.f[branch], sol.h[branch]);
    let w = sol.v[from] / (br.tap * br.tap);
    (br.x * f - br.r * h).atan2(w - br.r * f - br.x * h)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CycleMismatch<T> {
    pub line: usize,
    pub mismatch: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct AngleRecovery<T> {
    /// Bus voltage magnitudes `sqrt(v)`.
    pub u: Vec<T>,
    /// Radians, slack bus at exactly 0.
    pub theta: Vec<T>,
    /// Per branch; `None` for out-of-service branches.
    pub beta: Vec<Option<T>>,
    /// Non-tree branches only.
    pub mismatch: Vec<CycleMismatch<T>>,
    pub max_mismatch: T,
    pub recoverable: bool,
    pub ar_feasible: bool,
    /// Recovery ran on a point that is not AR-feasible.
    pub forced: bool,
}

impl<T: Scalar> AngleRecovery<T> {
    /// `bus,U,theta` with external bus ids.
    pub fn profile_csv(&self, net: &Network<T>) -> String {
        let mut out = String::from("bus,U,theta\n");
        for (i, bus) in net.buses.iter().enumerate() {
            let _ = writeln!(out, "{},{:.12e},{:.12e}", bus.id, self.u[i], self.theta[i]);
        }
        out
    }
}

/// Recovers bus angles along a breadth-first spanning tree rooted at the
/// slack bus, then measures how far each remaining branch is from closing
/// its cycle.
///
/// Refuses points that are not AR-feasible within `tol` unless `force`.
pub fn recover_angles<T: Scalar>(
    net: &Network<T>,
    sol: &BfmSolution<T>,
    tol: T,
    force: bool,
) -> Result<AngleRecovery<T>> {
    let feas = check_feasibility(net, sol, tol)?;
    if !feas.ar_feasible && !force {
        return Err(Error::NotArFeasible {
            max_cone_residual: feas.max_cone_residual.to_f64_lossy(),
        });
    }
    let ends = net.endpoints()?;
    let n = net.buses.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut beta = vec![None; net.branches.len()];
    for (k, br) in net.branches.iter().enumerate() {
        if br.in_service {
            adj[ends[k].from].push(k);
            adj[ends[k].to].push(k);
            beta[k] = Some(branch_angle(net, sol, ends[k].from, k));
        }
    }

    let root = net.slack_index().unwrap_or(0);
    let mut theta = vec![T::zero(); n];
    let mut seen = vec![false; n];
    let mut tree = vec![false; net.branches.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(i) = queue.pop_front() {
        for &k in &adj[i] {
            let (a, b) = (ends[k].from, ends[k].to);
            let j = if a == i { b } else { a };
            if seen[j] {
                continue;
            }
            let d = beta[k].unwrap_or_else(T::zero) + net.branches[k].shift_deg.to_radians();
            theta[j] = if a == i { theta[i] - d } else { theta[i] + d };
            seen[j] = true;
            tree[k] = true;
            queue.push_back(j);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Disconnected);
    }

    let mut mismatch = Vec::new();
    let mut max_mismatch = T::zero();
    for (k, br) in net.branches.iter().enumerate() {
        let Some(bk) = beta[k] else { continue };
        if tree[k] {
            continue;
        }
        let (a, b) = (ends[k].from, ends[k].to);
        let m = wrap(theta[a] - theta[b] - br.shift_deg.to_radians() - bk).abs();
        max_mismatch = max_mismatch.max(m);
        mismatch.push(CycleMismatch {
            line: k + 1,
            mismatch: m,
        });
    }
    Ok(AngleRecovery {
        u: sol.v.iter().map(|v| v.max(T::zero()).sqrt()).collect(),
        theta,
        beta,
        mismatch,
        max_mismatch,
        recoverable: max_mismatch <= tol,
        ar_feasible: feas.ar_feasible,
        forced: !feas.ar_feasible,
    })
}

/// Bus injections and magnitudes/angles at which to evaluate the AC equations.
#[derive(Clone, Debug)]
pub struct AcPoint<'a, T> {
    pub u: &'a [T],
    pub theta: &'a [T],
    pub pg: &'a [T],
    pub qg: &'a [T],
    pub pc: &'a [T],
    pub qc: &'a [T],
}

impl<'a, T: Scalar> AcPoint<'a, T> {
    pub fn from_recovery(rec: &'a AngleRecovery<T>, sol: &'a BfmSolution<T>) -> Self {
        Self {
            u: &rec.u,
            theta: &rec.theta,
            pg: &sol.pg,
            qg: &sol.qg,
            pc: &sol.pc,
            qc: &sol.qc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct AcResiduals<T> {
    pub dp: Vec<T>,
    pub dq: Vec<T>,
    pub max_p: T,
    pub max_q: T,
}

impl<T: Scalar> AcResiduals<T> {
    pub fn max(&self) -> T {
        self.max_p.max(self.max_q)
    }
}

/// Polar power-flow mismatch per bus:
///
/// ```text
/// dP_i = (Pg_i - Pc_i) - U_i sum_j U_j (G_ij cos t_ij + B_ij sin t_ij)
/// dQ_i = (Qg_i - Qc_i) - U_i sum_j U_j (G_ij sin t_ij - B_ij cos t_ij)
/// ```
///
/// Generator values are summed per bus; out-of-service generators are skipped.
pub fn ac_residuals<T: Scalar>(
    net: &Network<T>,
    y: &AdmittanceMatrix<T>,
    pt: &AcPoint<'_, T>,
) -> Result<AcResiduals<T>> {
    let n = net.buses.len();
    let ng = net.generators.len();
    for (len, want) in [
        (pt.u.len(), n),
        (pt.theta.len(), n),
        (pt.pc.len(), n),
        (pt.qc.len(), n),
        (pt.pg.len(), ng),
        (pt.qg.len(), ng),
        (y.n, n),
    ] {
        if len != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: len,
            });
        }
    }
    let gen_bus = net.generator_buses()?;
    let mut dp: Vec<T> = (0..n).map(|i| -pt.pc[i]).collect();
    let mut dq: Vec<T> = (0..n).map(|i| -pt.qc[i]).collect();
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.in_service {
            dp[gen_bus[g]] = dp[gen_bus[g]] + pt.pg[g];
            dq[gen_bus[g]] = dq[gen_bus[g]] + pt.qg[g];
        }
    }
    for i in 0..n {
        let (mut p, mut q) = (T::zero(), T::zero());
        for j in 0..n {
            let yij = y.get(i, j);
            if yij.re == T::zero() && yij.im == T::zero() {
                continue;
            }
            let (s, c) = (pt.theta[i] - pt.theta[j]).sin_cos();
            p = p + pt.u[j] * (yij.re * c + yij.im * s);
            q = q + pt.u[j] * (yij.re * s - yij.im * c);
        }
        dp[i] = dp[i] - pt.u[i] * p;
        dq[i] = dq[i] - pt.u[i] * q;
    }
    let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    Ok(AcResiduals {
        max_p: max_abs(&dp),
        max_q: max_abs(&dq),
        dp,
        dq,
    })
}
