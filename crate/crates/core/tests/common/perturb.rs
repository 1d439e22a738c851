//! Instances whose loads sit on their bounds and one branch carries extra current.

use super::{ac_case, CaseOptions, Draw};
use bfm_relax::bfm::{BfmSolution, ObjectiveSpec};
use bfm_relax::netmodel::Network;
use num_complex::Complex64;

pub const EPS_L: f64 = 1e-5;

/// Inverse of the perturbation: moves `delta` of squared current onto
/// `branch`, taking the losses out of the endpoint loads, then lowers the
/// load bounds so both loads sit exactly on them.
pub fn inflate(net: &mut Network<f64>, sol: &mut BfmSolution<f64>, branch: usize, delta: f64) {
    let ends = net.endpoints().unwrap();
    let br = net.branches[branch].clone();
    sol.l[branch] += delta;
    sol.f[branch] += 0.5 * br.r * delta;
    sol.h[branch] += 0.5 * br.x * delta;
    for bus in [ends[branch].from, ends[branch].to] {
        sol.pc[bus] -= 0.5 * br.r * delta;
        sol.qc[bus] -= 0.5 * br.x * delta;
        net.buses[bus].demand_p = sol.pc[bus];
        net.buses[bus].demand_q = sol.qc[bus];
    }
    sol.objective = ObjectiveSpec::losses(EPS_L).evaluate(net, sol);
}

pub struct Instance {
    pub net: Network<f64>,
    pub sol: BfmSolution<f64>,
    pub branch: usize,
    pub delta: f64,
}

pub fn instance(u: &[f64], buses: usize, extra: usize, negative_x: f64, delta: f64) -> Instance {
    let mut d = Draw::new(u);
    let case = ac_case(
        &mut d,
        CaseOptions {
            buses,
            extra_branches: extra,
            negative_x,
            ..Default::default()
        },
    );
    let (mut net, mut sol) = (case.net, case.sol);
    let branch = d.index(net.branches.len());
    inflate(&mut net, &mut sol, branch, delta);
    Instance {
        net,
        sol,
        branch,
        delta,
    }
}

pub fn scale(sol: &BfmSolution<f64>) -> f64 {
    [&sol.v, &sol.l, &sol.f, &sol.h, &sol.pg, &sol.qg, &sol.pc, &sol.qc]
        .iter()
        .flat_map(|v| v.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()))
}

/// Radial instance with one branch's reactance negated and its current inflated.
pub fn negative_instance(u: &[f64], buses: usize, delta: f64) -> Instance {
    let mut d = Draw::new(u);
    let case = ac_case(
        &mut d,
        CaseOptions {
            buses,
            ..Default::default()
        },
    );
    let k = d.index(case.net.branches.len());
    let mut net = case.net.negate_reactance(k).unwrap();
    let mut sol = case.sol;
    rebuild_flows(&mut net, &mut sol, &case.u, &case.theta);
    inflate(&mut net, &mut sol, k, delta);
    Instance {
        net,
        sol,
        branch: k,
        delta,
    }
}

/// Recomputes flows, currents and loads from bus phasors after the data changed.
pub fn rebuild_flows(net: &mut Network<f64>, sol: &mut BfmSolution<f64>, u: &[f64], theta: &[f64]) {
    let ends = net.endpoints().unwrap();
    let n = net.buses.len();
    let mut inj_p = vec![0.0; n];
    let mut inj_q = vec![0.0; n];
    for (k, br) in net.branches.iter().enumerate() {
        let (i, j) = (ends[k].from, ends[k].to);
        let vi = Complex64::from_polar(u[i], theta[i]);
        let vj = Complex64::from_polar(u[j], theta[j]);
        let cur = (vi - vj) / Complex64::new(br.r, br.x);
        let s = vi * cur.conj();
        sol.l[k] = cur.norm_sqr();
        sol.f[k] = s.re;
        sol.h[k] = s.im;
        inj_p[i] += s.re;
        inj_q[i] += s.im;
        inj_p[j] -= s.re - br.r * sol.l[k];
        inj_q[j] -= s.im - br.x * sol.l[k];
    }
    sol.pg[0] = inj_p[0];
    sol.qg[0] = inj_q[0];
    for i in 1..n {
        sol.pc[i] = -inj_p[i];
        sol.qc[i] = -inj_q[i];
        net.buses[i].demand_p = sol.pc[i];
        net.buses[i].demand_q = sol.qc[i];
    }
}
