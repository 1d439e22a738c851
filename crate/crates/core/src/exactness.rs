//! Conic gaps, the sufficient conditions for an exact relaxation, and the
//! load-shifting perturbation used to argue that a non-binding cone cannot
//! be optimal.
//!
//! Indices passed into functions are 0-based; every `line` field in a report
//! is the 1-based position of the branch in the case file.

use std::fmt::Write as _;

use serde::Serialize;

use crate::bfm::{check_feasibility, BfmSolution, ConstraintRef, ObjectiveKind, ObjectiveSpec, Violation};
use crate::error::{Error, Result};
use crate::netmodel::Network;
use crate::scalar::Scalar;
use crate::solver::SolveStatus;

/// Default relative gap above which a cone counts as non-binding.
pub const DEFAULT_TIGHT_TOL: f64 = 1e-5;
/// Default feasibility tolerance for checking perturbed candidates.
pub const DEFAULT_CHECK_TOL: f64 = 1e-6;
/// Default perturbation size.
pub const DEFAULT_PERTURB_EPS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct BranchGap<T> {
    pub line: usize,
    /// `l v_i - F^2 - H^2`, in p.u. squared.
    pub gap: T,
    /// `gap / max(1, F^2 + H^2)`.
    pub relative_gap: T,
    pub binding: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct GapReport<T> {
    pub tight_tol: T,
    /// One entry per in-service branch, in file order.
    pub branches: Vec<BranchGap<T>>,
    pub max_gap: T,
    pub num_nonbinding: usize,
}

impl<T: Scalar> GapReport<T> {
    pub fn nonbinding(&self) -> impl Iterator<Item = &BranchGap<T>> {
        self.branches.iter().filter(|b| !b.binding)
    }

    pub fn is_exact(&self) -> bool {
        self.num_nonbinding == 0
    }

    /// `branch,gap,relative_gap,binding` with one row per in-service branch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("branch,gap,relative_gap,binding\n");
        for b in &self.branches {
            let _ = writeln!(out, "{},{:e},{:e},{}", b.line, b.gap, b.relative_gap, b.binding);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Conic gap of every in-service branch.
pub fn gap_report<T: Scalar>(net: &Network<T>, sol: &BfmSolution<T>, tight_tol: T) -> Result<GapReport<T>> {
    if !sol.aligned_with(net) {
        return Err(Error::InvalidArgument(
            "solution is not aligned with the network".into(),
        ));
    }
    let ends = net.endpoints()?;
    let mut branches = Vec::new();
    let mut max_gap = T::zero();
    let mut num_nonbinding = 0;
    for (k, br) in net.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let gap = sol.cone_gap(net, &ends, k);
        let flow = sol.f[k] * sol.f[k] + sol.h[k] * sol.h[k];
        let relative_gap = gap / flow.max(T::one());
        let binding = relative_gap <= tight_tol;
        if !binding {
            num_nonbinding += 1;
        }
        if branches.is_empty() || gap > max_gap {
            max_gap = gap;
        }
        branches.push(BranchGap {
            line: k + 1,
            gap,
            relative_gap,
            binding,
        });
    }
    Ok(GapReport {
        tight_tol,
        branches,
        max_gap,
        num_nonbinding,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Pending,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Pending => "pending",
        }
    }
}

/// Connectivity and absence of load upper bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConnectivityCondition {
    pub connected: bool,
    pub no_load_upper_bounds: bool,
    pub verdict: Verdict,
}

/// Convexity of the objective.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityCondition {
    pub linear: bool,
    pub verdict: Verdict,
}

/// Objective strictly increasing in every `l` and independent of flows and loads.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityCondition {
    /// Lines whose `l` coefficient `r + epsilon_l` is not positive.
    pub nonincreasing_lines: Vec<usize>,
    pub independent_of_flows_and_loads: bool,
    pub verdict: Verdict,
}

/// Feasibility of the relaxation, known only after a solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityCondition {
    pub status: Option<SolveStatus>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct NegativeReactance<T> {
    pub line: usize,
    pub from_bus: i64,
    pub to_bus: i64,
    pub x: T,
}

/// No in-service line with negative reactance.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ReactanceCondition<T> {
    pub negative_reactance: Vec<NegativeReactance<T>>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionsReport<T> {
    pub cond_i: ConnectivityCondition,
    pub cond_ii: ConvexityCondition,
    pub cond_iii: MonotonicityCondition,
    pub cond_iv: FeasibilityCondition,
    pub cond_v: ReactanceCondition<T>,
}

impl<T: Scalar> ConditionsReport<T> {
    /// Fills in the feasibility condition from a solve.
    pub fn with_status(mut self, status: SolveStatus) -> Self {
        self.cond_iv = FeasibilityCondition {
            status: Some(status),
            verdict: Verdict::from_bool(status == SolveStatus::Optimal),
        };
        self
    }

    pub fn verdicts(&self) -> [(&'static str, Verdict); 5] {
        [
            ("i", self.cond_i.verdict),
            ("ii", self.cond_ii.verdict),
            ("iii", self.cond_iii.verdict),
            ("iv", self.cond_iv.verdict),
            ("v", self.cond_v.verdict),
        ]
    }

    /// True when no condition has failed. Pending counts as passing.
    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| *v != Verdict::Fail)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.verdicts()
            .iter()
            .filter(|(_, v)| *v == Verdict::Fail)
            .map(|(name, _)| *name)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `condition,verdict,detail` with one row per condition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,verdict,detail\n");
        for (name, verdict, detail) in self.details() {
            let _ = writeln!(out, "{name},{},\"{detail}\"", verdict.as_str());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, verdict, detail) in self.details() {
            let _ = writeln!(out, "({name:<3}) {:<7} {detail}", verdict.as_str());
        }
        out
    }

    fn details(&self) -> Vec<(&'static str, Verdict, String)> {
        let c = &self.cond_i;
        let i = format!(
            "connected={} no_load_upper_bounds={}",
            c.connected, c.no_load_upper_bounds
        );
        let ii = format!("linear={}", self.cond_ii.linear);
        let c = &self.cond_iii;
        let iii = format!(
            "nonincreasing_lines=[{}] independent_of_flows_and_loads={}",
            join(c.nonincreasing_lines.iter()),
            c.independent_of_flows_and_loads
        );
        let iv = match self.cond_iv.status {
            Some(s) => format!("status={s}"),
            None => "status=pending".to_string(),
        };
        let v = format!(
            "negative_reactance=[{}]",
            self.cond_v
                .negative_reactance
                .iter()
                .map(|n| format!("line {} ({} -> {}) x={}", n.line, n.from_bus, n.to_bus, n.x))
                .collect::<Vec<_>>()
                .join("; ")
        );
        vec![
            ("i", self.cond_i.verdict, i),
            ("ii", self.cond_ii.verdict, ii),
            ("iii", self.cond_iii.verdict, iii),
            ("iv", self.cond_iv.verdict, iv),
            ("v", self.cond_v.verdict, v),
        ]
    }
}

fn join<I: Iterator<Item = D>, D: std::fmt::Display>(it: I) -> String {
    it.map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

/// Checks the sufficient conditions for an exact relaxation from the data and
/// the objective alone. The feasibility condition stays pending.
pub fn audit_conditions<T: Scalar>(net: &Network<T>, obj: &ObjectiveSpec<T>) -> Result<ConditionsReport<T>> {
    let connected = net.is_connected()?;
    // Loads enter the relaxation only through `Pc >= Pd`, `Qc >= Qd`.
    let no_load_upper_bounds = true;
    let linear = match obj.kind {
        ObjectiveKind::NetworkLosses => true,
    };
    let nonincreasing_lines: Vec<usize> = net
        .branches
        .iter()
        .enumerate()
        .filter(|(_, br)| br.in_service)
        .filter(|(_, br)| !(obj.l_coefficient(br.r) > T::zero()))
        .map(|(k, _)| k + 1)
        .collect();
    let independent_of_flows_and_loads = match obj.kind {
        ObjectiveKind::NetworkLosses => true,
    };
    let negative_reactance: Vec<NegativeReactance<T>> = net
        .branches
        .iter()
        .enumerate()
        .filter(|(_, br)| br.in_service && br.x < T::zero())
        .map(|(k, br)| NegativeReactance {
            line: k + 1,
            from_bus: br.from_bus,
            to_bus: br.to_bus,
            x: br.x,
        })
        .collect();
    Ok(ConditionsReport {
        cond_i: ConnectivityCondition {
            connected,
            no_load_upper_bounds,
            verdict: Verdict::from_bool(connected && no_load_upper_bounds),
        },
        cond_ii: ConvexityCondition {
            linear,
            verdict: Verdict::from_bool(linear),
        },
        cond_iii: MonotonicityCondition {
            verdict: Verdict::from_bool(nonincreasing_lines.is_empty() && independent_of_flows_and_loads),
            nonincreasing_lines,
            independent_of_flows_and_loads,
        },
        cond_iv: FeasibilityCondition {
            status: None,
            verdict: Verdict::Pending,
        },
        cond_v: ReactanceCondition {
            verdict: Verdict::from_bool(negative_reactance.is_empty()),
            negative_reactance,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PerturbationResult<T> {
    pub line: usize,
    pub eps: T,
    pub candidate: BfmSolution<T>,
    pub feasible: bool,
    pub violated_constraints: Vec<Violation<T>>,
    /// Candidate objective minus original objective.
    pub objective_delta: T,
}

impl<T: Scalar> PerturbationResult<T> {
    pub fn violates(&self, pred: impl Fn(ConstraintRef) -> bool) -> bool {
        self.violated_constraints.iter().any(|v| pred(v.constraint))
    }
}

/// Shifts `eps` of squared current off `branch` and hands the freed losses to
/// the loads at both ends:
///
/// ```text
/// l' = l - eps,  F' = F - r eps / 2,  H' = H - x eps / 2
/// Pc' = Pc + r eps / 2,  Qc' = Qc + x eps / 2   (at both endpoints)
/// ```
///
/// Voltages, generation and every other branch are left alone. Nothing is
/// clamped: with `x < 0` the reactive loads go down.
pub fn perturb<T: Scalar>(
    net: &Network<T>,
    sol: &BfmSolution<T>,
    obj: &ObjectiveSpec<T>,
    branch: usize,
    eps: T,
    tol: T,
) -> Result<PerturbationResult<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if branch >= net.branches.len() {
        return Err(Error::IndexOutOfRange {
            index: branch,
            len: net.branches.len(),
        });
    }
    if !sol.aligned_with(net) {
        return Err(Error::InvalidArgument(
            "solution is not aligned with the network".into(),
        ));
    }
    let ends = net.endpoints()?;
    let br = &net.branches[branch];
    let half = T::lit(0.5);
    let r1 = half * br.r * eps;
    let x1 = half * br.x * eps;

    let mut cand = sol.clone();
    cand.l[branch] = cand.l[branch] - eps;
    cand.f[branch] = cand.f[branch] - r1;
    cand.h[branch] = cand.h[branch] - x1;
    for bus in [ends[branch].from, ends[branch].to] {
        cand.pc[bus] = cand.pc[bus] + r1;
        cand.qc[bus] = cand.qc[bus] + x1;
    }
    cand.objective = obj.evaluate(net, &cand);
    let objective_delta = cand.objective - obj.evaluate(net, sol);
    let report = check_feasibility(net, &cand, tol)?;
    Ok(PerturbationResult {
        line: branch + 1,
        eps,
        candidate: cand,
        feasible: report.cr_feasible,
        violated_constraints: report.violations,
        objective_delta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

impl Sign {
    fn of<T: Scalar>(v: T) -> Self {
        if v > T::zero() {
            Sign::Positive
        } else if v < T::zero() {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentOutcome {
    /// Feasible and strictly better: the point was not optimal.
    Improves,
    /// The perturbed point violates a constraint.
    Infeasible,
    /// Feasible but not better.
    NoImprovement,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ContradictionEntry<T> {
    pub line: usize,
    pub gap: T,
    pub x: T,
    pub reactance_sign: Sign,
    pub outcome: ArgumentOutcome,
    pub objective_delta: T,
    pub violated: Vec<ConstraintRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ContradictionRecord<T> {
    pub eps: T,
    pub entries: Vec<ContradictionEntry<T>>,
}

impl<T: Scalar> ContradictionRecord<T> {
    /// Some perturbation failed on a branch whose reactance is negative.
    pub fn has_negative_reactance_failure(&self) -> bool {
        self.entries
            .iter()
            .any(|e| e.outcome == ArgumentOutcome::Infeasible && e.reactance_sign == Sign::Negative)
    }
}

/// Runs [`perturb`] on every non-binding branch of `sol` and records whether
/// the improvement argument goes through.
pub fn demonstrate_contradiction<T: Scalar>(
    net: &Network<T>,
    sol: &BfmSolution<T>,
    obj: &ObjectiveSpec<T>,
    tight_tol: T,
    eps: T,
    tol: T,
) -> Result<ContradictionRecord<T>> {
    let gaps = gap_report(net, sol, tight_tol)?;
    let mut entries = Vec::new();
    for g in gaps.nonbinding() {
        let k = g.line - 1;
        let x = net.branches[k].x;
        let p = perturb(net, sol, obj, k, eps, tol)?;
        let outcome = if !p.feasible {
            ArgumentOutcome::Infeasible
        } else if p.objective_delta < T::zero() {
            ArgumentOutcome::Improves
        } else {
            ArgumentOutcome::NoImprovement
        };
        entries.push(ContradictionEntry {
            line: g.line,
            gap: g.gap,
            x,
            reactance_sign: Sign::of(x),
            outcome,
            objective_delta: p.objective_delta,
            violated: p.violated_constraints.iter().map(|v| v.constraint).collect(),
        });
    }
    Ok(ContradictionRecord { eps, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::two_bus;

    fn one_branch(l: f64, f: f64, h: f64) -> (Network<f64>, BfmSolution<f64>) {
        let net = two_bus(0.01, 0.1, 0.0, 0.0);
        let mut sol = BfmSolution::zeros(2, 1, 1);
        sol.v = vec![1.0, 1.0];
        sol.l[0] = l;
        sol.f[0] = f;
        sol.h[0] = h;
        (net, sol)
    }

    #[test]
    fn gap_examples() {
        let (net, sol) = one_branch(1.0, 0.6, 0.8);
        let rep = gap_report(&net, &sol, 1e-5).unwrap();
        assert!(rep.branches[0].gap.abs() < 1e-15);
        assert!(rep.branches[0].binding);
        assert_eq!(rep.num_nonbinding, 0);

        let (net, sol) = one_branch(2.0, 0.6, 0.8);
        let rep = gap_report(&net, &sol, 1e-5).unwrap();
        assert!((rep.branches[0].gap - 1.0).abs() < 1e-15);
        assert!((rep.branches[0].relative_gap - 1.0).abs() < 1e-15);
        assert!(!rep.branches[0].binding);
        assert_eq!(rep.num_nonbinding, 1);
        assert_eq!(rep.max_gap, rep.branches[0].gap);
        assert_eq!(rep.to_csv().lines().count(), 2);
    }

    #[test]
    fn audit_flags_negative_reactance() {
        let net = two_bus(0.01, 0.1, 0.5, 0.2);
        let obj = ObjectiveSpec::losses(1e-6);
        let rep = audit_conditions(&net, &obj).unwrap();
        assert!(rep.all_pass());
        assert_eq!(rep.cond_iv.verdict, Verdict::Pending);

        let rep = audit_conditions(&net.negate_reactance(0).unwrap(), &obj).unwrap();
        assert_eq!(rep.failed(), vec!["v"]);
        assert_eq!(rep.cond_v.negative_reactance[0].line, 1);
        assert_eq!(rep.cond_v.negative_reactance[0].x, -0.1);
    }

    #[test]
    fn audit_detects_disconnection_and_bad_coefficients() {
        let mut net = two_bus(0.0, 0.1, 0.5, 0.2);
        net.branches[0].in_service = false;
        let rep = audit_conditions(&net, &ObjectiveSpec::losses(1e-6)).unwrap();
        assert_eq!(rep.cond_i.verdict, Verdict::Fail);

        let net = two_bus(0.0, 0.1, 0.5, 0.2);
        let rep = audit_conditions(&net, &ObjectiveSpec::losses(0.0)).unwrap();
        assert_eq!(rep.cond_iii.nonincreasing_lines, vec![1]);
        assert_eq!(rep.failed(), vec!["iii"]);
        assert_eq!(
            rep.clone().with_status(SolveStatus::MaxIter).cond_iv.verdict,
            Verdict::Fail
        );
    }

    #[test]
    fn perturb_rejects_bad_arguments() {
        let (net, sol) = one_branch(1.0, 0.6, 0.8);
        let obj = ObjectiveSpec::losses(1e-6);
        assert!(perturb(&net, &sol, &obj, 0, 0.0, 1e-9).is_err());
        assert!(perturb(&net, &sol, &obj, 1, 0.1, 1e-9).is_err());
    }

    #[test]
    fn empty_record_without_nonbinding_branches() {
        let (mut net, mut sol) = one_branch(1.0, 0.6, 0.8);
        net.buses[1].demand_p = 0.0;
        sol.pg[0] = 0.6;
        let rec = demonstrate_contradiction(&net, &sol, &ObjectiveSpec::losses(1e-6), 1e-5, 1e-3, 1e-6).unwrap();
        assert!(rec.entries.is_empty());
    }
}
