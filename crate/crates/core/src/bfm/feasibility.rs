//! Direct evaluation of the branch-flow constraints on a candidate point.
//!
//! This works from the network data alone and never touches the assembled
//! conic problem, so it doubles as an independent check on `build_cr`.

use serde::Serialize;

use crate::error::Result;
use crate::netmodel::Network;
use crate::scalar::Scalar;

use super::BfmSolution;

/// A single constraint, identified by the 0-based element it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ConstraintRef {
    ActiveBalance(usize),
    ReactiveBalance(usize),
    VoltageDrop(usize),
    Cone(usize),
    VoltageLower(usize),
    VoltageUpper(usize),
    CurrentNonnegative(usize),
    CurrentUpper(usize),
    PgLower(usize),
    PgUpper(usize),
    QgLower(usize),
    QgUpper(usize),
    PcLower(usize),
    QcLower(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Violation<T> {
    pub constraint: ConstraintRef,
    pub amount: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct FeasibilityReport<T> {
    pub max_active_balance: T,
    pub max_reactive_balance: T,
    pub max_voltage_drop: T,
    /// Minimum over branches of `l v - F^2 - H^2`; negative means a cone is violated.
    pub min_cone_slack: T,
    /// Maximum over branches of `|l v - F^2 - H^2|`.
    pub max_cone_residual: T,
    pub max_bound_violation: T,
    pub cr_feasible: bool,
    pub ar_feasible: bool,
    /// Every constraint violated by more than the tolerance.
    pub violations: Vec<Violation<T>>,
}

/// Residuals of every constraint family of the CR/AR models at `sol`.
pub fn check_feasibility<T: Scalar>(net: &Network<T>, sol: &BfmSolution<T>, tol: T) -> Result<FeasibilityReport<T>> {
    if !sol.aligned_with(net) {
        return Err(crate::error::Error::InvalidArgument(
            "solution is not aligned with the network".into(),
        ));
    }
    let ends = net.endpoints()?;
    let gen_bus = net.generator_buses()?;
    let nb = net.buses.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    let mut violations = Vec::new();
    let mut flag = |c: ConstraintRef, amount: T| {
        if amount > tol {
            violations.push(Violation { constraint: c, amount });
        }
    };

    // Net injection minus outgoing flow, per bus.
    let mut p_res = vec![T::zero(); nb];
    let mut q_res = vec![T::zero(); nb];
    for (i, bus) in net.buses.iter().enumerate() {
        p_res[i] = -sol.pc[i] - bus.g_shunt * sol.v[i];
        q_res[i] = -sol.qc[i] + bus.b_shunt * sol.v[i];
    }
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.in_service {
            p_res[gen_bus[g]] = p_res[gen_bus[g]] + sol.pg[g];
            q_res[gen_bus[g]] = q_res[gen_bus[g]] + sol.qg[g];
        }
    }
    let mut max_drop = T::zero();
    let mut min_slack = T::infinity();
    let mut max_cone = T::zero();
    for (k, br) in net.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let (i, j) = (ends[k].from, ends[k].to);
        let (l, f, h) = (sol.l[k], sol.f[k], sol.h[k]);
        let inv_tap2 = T::one() / (br.tap * br.tap);
        p_res[i] = p_res[i] - f;
        q_res[i] = q_res[i] - h + half * br.charging * inv_tap2 * sol.v[i];
        p_res[j] = p_res[j] + f - br.r * l;
        q_res[j] = q_res[j] + h - br.x * l + half * br.charging * sol.v[j];

        let drop = sol.v[j] - sol.v[i] * inv_tap2 + two * (br.r * f + br.x * h) - (br.r * br.r + br.x * br.x) * l;
        max_drop = max_drop.max(drop.abs());
        flag(ConstraintRef::VoltageDrop(k), drop.abs());

        let slack = l * sol.v[i] * inv_tap2 - (f * f + h * h);
        min_slack = min_slack.min(slack);
        max_cone = max_cone.max(slack.abs());
        flag(ConstraintRef::Cone(k), -slack);
        flag(ConstraintRef::CurrentNonnegative(k), -l);
        if let Some(imax) = br.i_max {
            flag(ConstraintRef::CurrentUpper(k), l - imax);
        }
    }
    let max_p = p_res.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    let max_q = q_res.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    for i in 0..nb {
        flag(ConstraintRef::ActiveBalance(i), p_res[i].abs());
        flag(ConstraintRef::ReactiveBalance(i), q_res[i].abs());
    }

    let mut max_bound = T::zero();
    let mut bound = |c: ConstraintRef, amount: T, flag: &mut dyn FnMut(ConstraintRef, T)| {
        max_bound = max_bound.max(amount);
        flag(c, amount);
    };
    for (i, bus) in net.buses.iter().enumerate() {
        let v = sol.v[i];
        bound(ConstraintRef::VoltageLower(i), bus.v_min * bus.v_min - v, &mut flag);
        bound(ConstraintRef::VoltageUpper(i), v - bus.v_max * bus.v_max, &mut flag);
        bound(ConstraintRef::PcLower(i), bus.demand_p - sol.pc[i], &mut flag);
        bound(ConstraintRef::QcLower(i), bus.demand_q - sol.qc[i], &mut flag);
    }
    for (k, br) in net.branches.iter().enumerate() {
        if br.in_service {
            bound(ConstraintRef::CurrentNonnegative(k), -sol.l[k], &mut |_, _| {});
            if let Some(imax) = br.i_max {
                bound(ConstraintRef::CurrentUpper(k), sol.l[k] - imax, &mut |_, _| {});
            }
        }
    }
    for (g, gen) in net.generators.iter().enumerate() {
        if !gen.in_service {
            continue;
        }
        bound(ConstraintRef::PgLower(g), gen.p_min - sol.pg[g], &mut flag);
        bound(ConstraintRef::PgUpper(g), sol.pg[g] - gen.p_max, &mut flag);
        bound(ConstraintRef::QgLower(g), gen.q_min - sol.qg[g], &mut flag);
        bound(ConstraintRef::QgUpper(g), sol.qg[g] - gen.q_max, &mut flag);
    }
    if !min_slack.is_finite() {
        min_slack = T::zero();
    }

    let cr_feasible = max_p <= tol && max_q <= tol && max_drop <= tol && max_bound <= tol && min_slack >= -tol;
    let ar_feasible = cr_feasible && max_cone <= tol;
    Ok(FeasibilityReport {
        max_active_balance: max_p,
        max_reactive_balance: max_q,
        max_voltage_drop: max_drop,
        min_cone_slack: min_slack,
        max_cone_residual: max_cone,
        max_bound_violation: max_bound,
        cr_feasible,
        ar_feasible,
        violations,
    })
}
