//! Branch-flow model and its second-order cone relaxation.
//!
//! Per bus `i` and in-service branch `i -> j`:
//!
//! ```text
//! Pg_i - Pc_i = sum_{i->k} F_ik - sum_{j->i} (F_ji - r_ji l_ji)
//! Qg_i - Qc_i = sum_{i->k} H_ik - sum_{j->i} (H_ji - x_ji l_ji)
//! v_j = v_i - 2 (r F + x H) + (r^2 + x^2) l
//! l v_i >= F^2 + H^2          (relaxed from equality)
//! ```
//!
//! The rotated cone is written as the standard cone on
//! `(l + v_i, 2F, 2H, l - v_i)`. Bus shunts, line charging and tap ratios
//! enter linearly in `v` and vanish for series-only networks.

mod feasibility;
mod problem;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Endpoints, Network};
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

pub use feasibility::{check_feasibility, ConstraintRef, FeasibilityReport, Violation};
pub use problem::{ConeKind, ConeSpec, ConicProblem, ProblemDump, TripletMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Series losses `sum (r + epsilon_l) l`.
    NetworkLosses,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ObjectiveSpec<T> {
    pub kind: ObjectiveKind,
    /// Added to every `l` coefficient so the objective is strictly increasing
    /// in `l` even on zero-resistance branches. Must be positive.
    pub epsilon_l: T,
}

impl<T: Scalar> Default for ObjectiveSpec<T> {
    fn default() -> Self {
        Self::losses(T::lit(DEFAULT_EPSILON_L))
    }
}

/// Default `epsilon_l`.
pub const DEFAULT_EPSILON_L: f64 = 1e-5;

impl<T: Scalar> ObjectiveSpec<T> {
    pub fn losses(epsilon_l: T) -> Self {
        Self {
            kind: ObjectiveKind::NetworkLosses,
            epsilon_l,
        }
    }

    /// Objective coefficient on `l` for a branch of resistance `r`.
    pub fn l_coefficient(&self, r: T) -> T {
        r + self.epsilon_l
    }

    /// Objective of a solution, evaluated directly from branch currents.
    pub fn evaluate(&self, net: &Network<T>, sol: &BfmSolution<T>) -> T {
        net.branches
            .iter()
            .zip(&sol.l)
            .filter(|(br, _)| br.in_service)
            .map(|(br, &l)| self.l_coefficient(br.r) * l)
            .sum()
    }
}

/// Column layout of the CR variable vector.
///
/// Branch and generator quantities exist only for in-service elements;
/// `branch_slot` / `gen_slot` map file positions to offsets within the
/// per-branch and per-generator ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VariableMap {
    pub v: Range<usize>,
    pub l: Range<usize>,
    pub f: Range<usize>,
    pub h: Range<usize>,
    pub pg: Range<usize>,
    pub qg: Range<usize>,
    pub pc: Range<usize>,
    pub qc: Range<usize>,
    pub branch_slot: Vec<Option<usize>>,
    pub gen_slot: Vec<Option<usize>>,
}

impl VariableMap {
    fn new<T: Scalar>(net: &Network<T>) -> Self {
        let nb = net.buses.len();
        let mut next = 0;
        let branch_slot: Vec<Option<usize>> = net
            .branches
            .iter()
            .map(|b| {
                b.in_service.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let nl = next;
        next = 0;
        let gen_slot: Vec<Option<usize>> = net
            .generators
            .iter()
            .map(|g| {
                g.in_service.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let ng = next;

        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        Self {
            v: take(nb),
            l: take(nl),
            f: take(nl),
            h: take(nl),
            pg: take(ng),
            qg: take(ng),
            pc: take(nb),
            qc: take(nb),
            branch_slot,
            gen_slot,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.qc.end
    }

    pub fn num_buses(&self) -> usize {
        self.v.len()
    }

    pub fn l_col(&self, branch: usize) -> Option<usize> {
        self.branch_slot[branch].map(|s| self.l.start + s)
    }

    pub fn f_col(&self, branch: usize) -> Option<usize> {
        self.branch_slot[branch].map(|s| self.f.start + s)
    }

    pub fn h_col(&self, branch: usize) -> Option<usize> {
        self.branch_slot[branch].map(|s| self.h.start + s)
    }

    pub fn pg_col(&self, gen: usize) -> Option<usize> {
        self.gen_slot[gen].map(|s| self.pg.start + s)
    }

    pub fn qg_col(&self, gen: usize) -> Option<usize> {
        self.gen_slot[gen].map(|s| self.qg.start + s)
    }
}

/// Values of the CR decision vector, indexed like the network.
///
/// Out-of-service branches and generators carry zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BfmSolution<T> {
    pub v: Vec<T>,
    pub l: Vec<T>,
    #[serde(rename = "F")]
    pub f: Vec<T>,
    #[serde(rename = "H")]
    pub h: Vec<T>,
    pub pg: Vec<T>,
    pub qg: Vec<T>,
    pub pc: Vec<T>,
    pub qc: Vec<T>,
    pub objective: T,
}

impl<T: Scalar> BfmSolution<T> {
    pub fn zeros(num_buses: usize, num_branches: usize, num_gens: usize) -> Self {
        Self {
            v: vec![T::zero(); num_buses],
            l: vec![T::zero(); num_branches],
            f: vec![T::zero(); num_branches],
            h: vec![T::zero(); num_branches],
            pg: vec![T::zero(); num_gens],
            qg: vec![T::zero(); num_gens],
            pc: vec![T::zero(); num_buses],
            qc: vec![T::zero(); num_buses],
            objective: T::zero(),
        }
    }

    pub fn aligned_with(&self, net: &Network<T>) -> bool {
        let (nb, nl, ng) = (net.buses.len(), net.branches.len(), net.generators.len());
        [&self.v, &self.pc, &self.qc].iter().all(|v| v.len() == nb)
            && [&self.l, &self.f, &self.h].iter().all(|v| v.len() == nl)
            && [&self.pg, &self.qg].iter().all(|v| v.len() == ng)
    }

    /// Conic gap `l v_i / tap^2 - F^2 - H^2` of one branch.
    pub fn cone_gap(&self, net: &Network<T>, ends: &[Endpoints], branch: usize) -> T {
        let br = &net.branches[branch];
        let w = self.v[ends[branch].from] / (br.tap * br.tap);
        let (f, h) = (self.f[branch], self.h[branch]);
        self.l[branch] * w - (f * f + h * h)
    }
}

/// Builds the conic relaxation of the branch-flow model.
///
/// Row order: P and Q balance per bus, voltage drop per branch (zero cone);
/// bounds (nonnegative cone); one 4-dimensional SOC per in-service branch.
pub fn build_cr<T: Scalar>(net: &Network<T>, obj: &ObjectiveSpec<T>) -> Result<(ConicProblem<T>, VariableMap)> {
    if !(obj.epsilon_l > T::zero()) {
        return Err(Error::InvalidArgument("epsilon_l must be positive".into()));
    }
    let ends = net.endpoints()?;
    let gen_bus = net.generator_buses()?;
    let map = VariableMap::new(net);
    let nb = net.buses.len();
    let two = T::lit(2.0);
    let half = T::lit(0.5);

    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut row = 0usize;
    let mut push = |r: usize, c: usize, v: T| {
        rows.push(r);
        cols.push(c);
        vals.push(v);
    };

    // Balance rows: P at 2i, Q at 2i + 1.
    for (i, bus) in net.buses.iter().enumerate() {
        push(2 * i, map.pc.start + i, -T::one());
        push(2 * i + 1, map.qc.start + i, -T::one());
        if bus.g_shunt != T::zero() {
            push(2 * i, map.v.start + i, -bus.g_shunt);
        }
        if bus.b_shunt != T::zero() {
            push(2 * i + 1, map.v.start + i, bus.b_shunt);
        }
    }
    for (g, &bus) in gen_bus.iter().enumerate() {
        if let (Some(pg), Some(qg)) = (map.pg_col(g), map.qg_col(g)) {
            push(2 * bus, pg, T::one());
            push(2 * bus + 1, qg, T::one());
        }
    }
    for (k, br) in net.branches.iter().enumerate() {
        let (Some(l), Some(f), Some(h)) = (map.l_col(k), map.f_col(k), map.h_col(k)) else {
            continue;
        };
        let Endpoints { from: i, to: j } = ends[k];
        push(2 * i, f, -T::one());
        push(2 * i + 1, h, -T::one());
        push(2 * j, f, T::one());
        push(2 * j, l, -br.r);
        push(2 * j + 1, h, T::one());
        push(2 * j + 1, l, -br.x);
        if br.charging != T::zero() {
            let inv_tap2 = T::one() / (br.tap * br.tap);
            push(2 * i + 1, map.v.start + i, half * br.charging * inv_tap2);
            push(2 * j + 1, map.v.start + j, half * br.charging);
        }
    }
    row += 2 * nb;
    b.extend(std::iter::repeat_n(T::zero(), 2 * nb));

    // Voltage drop.
    for (k, br) in net.branches.iter().enumerate() {
        let (Some(l), Some(f), Some(h)) = (map.l_col(k), map.f_col(k), map.h_col(k)) else {
            continue;
        };
        let Endpoints { from: i, to: j } = ends[k];
        let inv_tap2 = T::one() / (br.tap * br.tap);
        push(row, map.v.start + j, T::one());
        push(row, map.v.start + i, -inv_tap2);
        push(row, f, two * br.r);
        push(row, h, two * br.x);
        push(row, l, -(br.r * br.r + br.x * br.x));
        b.push(T::zero());
        row += 1;
    }
    let zero_rows = row;

    // Bounds: lower `-x + s = -lb`, upper `x + s = ub`. Infinite bounds are skipped.
    let mut bound = |col: usize, lower: Option<T>, upper: Option<T>| {
        if let Some(lb) = lower.filter(|v| v.is_finite()) {
            push(row, col, -T::one());
            b.push(-lb);
            row += 1;
        }
        if let Some(ub) = upper.filter(|v| v.is_finite()) {
            push(row, col, T::one());
            b.push(ub);
            row += 1;
        }
    };
    for (i, bus) in net.buses.iter().enumerate() {
        bound(
            map.v.start + i,
            Some(bus.v_min * bus.v_min),
            Some(bus.v_max * bus.v_max),
        );
    }
    for (k, br) in net.branches.iter().enumerate() {
        if let Some(l) = map.l_col(k) {
            bound(l, Some(T::zero()), br.i_max);
        }
    }
    for (g, gen) in net.generators.iter().enumerate() {
        if let (Some(pg), Some(qg)) = (map.pg_col(g), map.qg_col(g)) {
            bound(pg, Some(gen.p_min), Some(gen.p_max));
            bound(qg, Some(gen.q_min), Some(gen.q_max));
        }
    }
    for (i, bus) in net.buses.iter().enumerate() {
        bound(map.pc.start + i, Some(bus.demand_p), None);
    }
    for (i, bus) in net.buses.iter().enumerate() {
        bound(map.qc.start + i, Some(bus.demand_q), None);
    }
    let nonneg_rows = row - zero_rows;

    // Cones: s = (l + w, 2F, 2H, l - w) with w = v_i / tap^2, so A = -coefficients.
    let mut soc_count = 0;
    for (k, br) in net.branches.iter().enumerate() {
        let (Some(l), Some(f), Some(h)) = (map.l_col(k), map.f_col(k), map.h_col(k)) else {
            continue;
        };
        let vi = map.v.start + ends[k].from;
        let inv_tap2 = T::one() / (br.tap * br.tap);
        push(row, l, -T::one());
        push(row, vi, -inv_tap2);
        push(row + 1, f, -two);
        push(row + 2, h, -two);
        push(row + 3, l, -T::one());
        push(row + 3, vi, inv_tap2);
        b.extend([T::zero(); 4]);
        row += 4;
        soc_count += 1;
    }

    let n = map.num_vars();
    let mut c = vec![T::zero(); n];
    for (k, br) in net.branches.iter().enumerate() {
        if let Some(l) = map.l_col(k) {
            c[l] = obj.l_coefficient(br.r);
        }
    }

    let a = CscMatrix::from_triplets(row, n, &rows, &cols, &vals)?;
    let mut cones = vec![ConeSpec::zero(zero_rows)];
    if nonneg_rows > 0 {
        cones.push(ConeSpec::nonnegative(nonneg_rows));
    }
    cones.extend(std::iter::repeat_n(ConeSpec::second_order(4), soc_count));
    let prob = ConicProblem { c, a, b, cones };
    prob.validate()?;
    Ok((prob, map))
}

/// Reads OPF quantities out of a solver primal vector.
pub fn extract_solution<T: Scalar>(prob: &ConicProblem<T>, map: &VariableMap, x: &[T]) -> Result<BfmSolution<T>> {
    if x.len() != map.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: map.num_vars(),
            got: x.len(),
        });
    }
    let nb = map.num_buses();
    let nl = map.branch_slot.len();
    let ng = map.gen_slot.len();
    let mut sol = BfmSolution::zeros(nb, nl, ng);
    sol.v.copy_from_slice(&x[map.v.clone()]);
    sol.pc.copy_from_slice(&x[map.pc.clone()]);
    sol.qc.copy_from_slice(&x[map.qc.clone()]);
    for k in 0..nl {
        if let Some(s) = map.branch_slot[k] {
            sol.l[k] = x[map.l.start + s];
            sol.f[k] = x[map.f.start + s];
            sol.h[k] = x[map.h.start + s];
        }
    }
    for g in 0..ng {
        if let Some(s) = map.gen_slot[g] {
            sol.pg[g] = x[map.pg.start + s];
            sol.qg[g] = x[map.qg.start + s];
        }
    }
    sol.objective = crate::scalar::dot(&prob.c, x);
    Ok(sol)
}

/// Inverse of [`extract_solution`]: lays a solution out as a primal vector.
pub fn pack_solution<T: Scalar>(sol: &BfmSolution<T>, map: &VariableMap) -> Vec<T> {
    let mut x = vec![T::zero(); map.num_vars()];
    x[map.v.clone()].copy_from_slice(&sol.v);
    x[map.pc.clone()].copy_from_slice(&sol.pc);
    x[map.qc.clone()].copy_from_slice(&sol.qc);
    for (k, slot) in map.branch_slot.iter().enumerate() {
        if let Some(s) = slot {
            x[map.l.start + s] = sol.l[k];
            x[map.f.start + s] = sol.f[k];
            x[map.h.start + s] = sol.h[k];
        }
    }
    for (g, slot) in map.gen_slot.iter().enumerate() {
        if let Some(s) = slot {
            x[map.pg.start + s] = sol.pg[g];
            x[map.qg.start + s] = sol.qg[g];
        }
    }
    x
}
