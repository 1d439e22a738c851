//! Reactance-negation sweep and single-branch sign flip, with table output.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bfm::{build_cr, check_feasibility, extract_solution, BfmSolution, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::exactness::{audit_conditions, demonstrate_contradiction, gap_report, ConditionsReport, GapReport};
use crate::netmodel::Network;
use crate::recovery::{ac_residuals, build_admittance, recover_angles, AcPoint, AngleRecovery};
use crate::scalar::Scalar;
use crate::solver::{solve, SolveOutcome, SolveStatus, SolverSettings};

/// Knobs shared by the experiment pipelines.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOptions<T> {
    pub tight_tol: T,
    /// Tolerance for AR-feasibility, angle recovery and perturbation checks.
    pub check_tol: T,
    pub perturb_eps: T,
    /// Worker threads for the sweep; `None` uses every available core.
    pub workers: Option<usize>,
    pub force_recovery: bool,
}

impl<T: Scalar> Default for ExperimentOptions<T> {
    fn default() -> Self {
        Self {
            tight_tol: T::lit(crate::exactness::DEFAULT_TIGHT_TOL),
            check_tol: T::lit(crate::exactness::DEFAULT_CHECK_TOL),
            perturb_eps: T::lit(crate::exactness::DEFAULT_PERTURB_EPS),
            workers: None,
            force_recovery: false,
        }
    }
}

/// One relaxation solve and the solution read back from it.
#[derive(Clone, Debug)]
pub struct CrRun<T> {
    pub outcome: SolveOutcome<T>,
    pub solution: BfmSolution<T>,
    pub solve_ms: f64,
}

impl<T: Scalar> CrRun<T> {
    pub fn status(&self) -> SolveStatus {
        self.outcome.status
    }
}

/// Builds and solves the relaxation of `net`.
pub fn run_cr<T: Scalar>(net: &Network<T>, obj: &ObjectiveSpec<T>, settings: &SolverSettings<T>) -> Result<CrRun<T>> {
    let (prob, map) = build_cr(net, obj)?;
    let start = Instant::now();
    let outcome = solve(&prob, settings)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    let solution = extract_solution(&prob, &map, &outcome.x)?;
    Ok(CrRun {
        outcome,
        solution,
        solve_ms,
    })
}

/// How a row with non-binding cones relates to negative reactance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// All cones bind, or the solve did not finish.
    None,
    /// A perturbation on a negative-reactance branch was infeasible.
    NegativeReactance,
    /// Non-binding cones without that explanation.
    NeedsReview,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepRow<T> {
    /// 1-based position in the case file; 0 for the unmodified baseline.
    pub line: usize,
    pub status: SolveStatus,
    /// Absent when the solve did not reach optimality.
    pub max_gap: Option<T>,
    pub num_nonbinding: usize,
    pub solve_ms: f64,
    pub mechanism: Mechanism,
}

fn sweep_row<T: Scalar>(
    net: &Network<T>,
    line: usize,
    obj: &ObjectiveSpec<T>,
    settings: &SolverSettings<T>,
    opts: &ExperimentOptions<T>,
) -> Result<SweepRow<T>> {
    let run = run_cr(net, obj, settings)?;
    let mut row = SweepRow {
        line,
        status: run.status(),
        max_gap: None,
        num_nonbinding: 0,
        solve_ms: run.solve_ms,
        mechanism: Mechanism::None,
    };
    if run.status() == SolveStatus::Optimal {
        let gaps = gap_report(net, &run.solution, opts.tight_tol)?;
        row.max_gap = Some(gaps.max_gap);
        row.num_nonbinding = gaps.num_nonbinding;
        if gaps.num_nonbinding > 0 {
            let rec = demonstrate_contradiction(
                net,
                &run.solution,
                obj,
                opts.tight_tol,
                opts.perturb_eps,
                opts.check_tol,
            )?;
            row.mechanism = if rec.has_negative_reactance_failure() {
                Mechanism::NegativeReactance
            } else {
                Mechanism::NeedsReview
            };
        }
    }
    Ok(row)
}

/// Solves the unmodified network; reported as line 0.
pub fn baseline_row<T: Scalar>(
    net: &Network<T>,
    obj: &ObjectiveSpec<T>,
    settings: &SolverSettings<T>,
    opts: &ExperimentOptions<T>,
) -> Result<SweepRow<T>> {
    sweep_row(net, 0, obj, settings, opts)
}

/// Negates each in-service branch's reactance in turn and solves the
/// relaxation. Rows come back in file order whatever the worker count.
pub fn nr_sweep<T: Scalar>(
    net: &Network<T>,
    obj: &ObjectiveSpec<T>,
    settings: &SolverSettings<T>,
    opts: &ExperimentOptions<T>,
) -> Result<Vec<SweepRow<T>>> {
    if let Some(k) = net.branches.iter().position(|b| b.in_service && !(b.x > T::zero())) {
        return Err(Error::InvalidArgument(format!(
            "sweep needs every reactance positive; line {} has x = {}",
            k + 1,
            net.branches[k].x
        )));
    }
    build_cr(net, obj)?;
    let lines: Vec<usize> = (0..net.branches.len())
        .filter(|&k| net.branches[k].in_service)
        .collect();
    let work = || {
        lines
            .par_iter()
            .map(|&k| sweep_row(&net.negate_reactance(k)?, k + 1, obj, settings, opts))
            .collect::<Result<Vec<_>>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(work)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

/// Renders sweep rows. Apart from `solve_ms`, output depends only on the rows.
pub fn emit_table<T: Scalar>(rows: &[SweepRow<T>], format: TableFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("line,status,max_gap,num_nonbinding,solve_ms\n");
            for r in rows {
                let gap = r.max_gap.map(|g| format!("{g:e}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.3}",
                    r.line, r.status, gap, r.num_nonbinding, r.solve_ms
                );
            }
        }
        TableFormat::Json => {
            out = serde_json::to_string_pretty(rows)?;
            out.push('\n');
        }
        TableFormat::Text => {
            let _ = writeln!(
                out,
                "{:>6}  {:>12}  {:>8}  {:<17}  {:>10}  note",
                "Line #", "Max gap", "# of L/G", "status", "time (ms)"
            );
            for r in rows {
                let gap = r
                    .max_gap
                    .map(|g| format!("{:.4e}", g.to_f64_lossy()))
                    .unwrap_or_else(|| "n/a".into());
                let count = if r.num_nonbinding == 0 {
                    "--".to_string()
                } else {
                    r.num_nonbinding.to_string()
                };
                let note = match r.mechanism {
                    Mechanism::None => "",
                    Mechanism::NegativeReactance => "negative reactance",
                    Mechanism::NeedsReview => "review",
                };
                let _ = writeln!(
                    out,
                    "{:>6}  {:>12}  {:>8}  {:<17}  {:>10.1}  {}",
                    r.line,
                    gap,
                    count,
                    r.status.as_str(),
                    r.solve_ms,
                    note
                );
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ProfilePoint<T> {
    pub bus: i64,
    #[serde(rename = "U")]
    pub u: T,
    pub theta: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum RecoveryVerdict<T> {
    Recovered {
        recovery: AngleRecovery<T>,
        max_ac_residual: T,
    },
    Refused {
        reason: String,
    },
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct PipelineRun<T> {
    pub x: T,
    pub conditions: ConditionsReport<T>,
    pub status: SolveStatus,
    pub solve_ms: f64,
    pub objective: T,
    pub gaps: Option<GapReport<T>>,
    pub ar_feasible: bool,
    pub recovery: RecoveryVerdict<T>,
    pub profile: Vec<ProfilePoint<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct FlipComparison<T> {
    pub line: usize,
    pub before: PipelineRun<T>,
    pub after: PipelineRun<T>,
}

impl<T: Scalar> FlipComparison<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "flip of line {}", self.line);
        for (name, run) in [("before", &self.before), ("after", &self.after)] {
            let _ = writeln!(out, "[{name}] x = {}", run.x);
            let _ = writeln!(out, "  status          {}", run.status);
            let _ = writeln!(out, "  objective       {:.6e}", run.objective.to_f64_lossy());
            let failed = run.conditions.failed();
            let _ = writeln!(
                out,
                "  conditions      {}",
                if failed.is_empty() {
                    "all pass".to_string()
                } else {
                    format!("failed: {}", failed.join(", "))
                }
            );
            if let Some(g) = &run.gaps {
                let lines: Vec<String> = g
                    .nonbinding()
                    .map(|b| format!("{} ({:.4e})", b.line, b.gap.to_f64_lossy()))
                    .collect();
                let _ = writeln!(out, "  max gap         {:.4e}", g.max_gap.to_f64_lossy());
                let _ = writeln!(out, "  non-binding     {} [{}]", g.num_nonbinding, lines.join(", "));
            }
            let _ = writeln!(out, "  AR-feasible     {}", run.ar_feasible);
            let rec = match &run.recovery {
                RecoveryVerdict::Recovered {
                    recovery,
                    max_ac_residual,
                } => format!(
                    "{}recoverable={} max cycle mismatch {:.3e}, max AC residual {:.3e}",
                    if recovery.forced { "FORCED " } else { "" },
                    recovery.recoverable,
                    recovery.max_mismatch.to_f64_lossy(),
                    max_ac_residual.to_f64_lossy()
                ),
                RecoveryVerdict::Refused { reason } => format!("refused: {reason}"),
                RecoveryVerdict::Skipped => "skipped".to_string(),
            };
            let _ = writeln!(out, "  angle recovery  {rec}");
        }
        out
    }
}

/// Audit, solve, gap report and angle recovery for one network. `branch`
/// only selects which reactance is echoed in the result.
pub fn pipeline<T: Scalar>(
    net: &Network<T>,
    obj: &ObjectiveSpec<T>,
    settings: &SolverSettings<T>,
    opts: &ExperimentOptions<T>,
    branch: usize,
) -> Result<PipelineRun<T>> {
    let conditions = audit_conditions(net, obj)?;
    let run = run_cr(net, obj, settings)?;
    let conditions = conditions.with_status(run.status());
    let sol = &run.solution;
    let optimal = run.status() == SolveStatus::Optimal;
    let gaps = if optimal {
        Some(gap_report(net, sol, opts.tight_tol)?)
    } else {
        None
    };
    let ar_feasible = optimal && check_feasibility(net, sol, opts.check_tol)?.ar_feasible;
    let recovery = if !optimal {
        RecoveryVerdict::Skipped
    } else {
        match recover_angles(net, sol, opts.check_tol, opts.force_recovery) {
            Ok(rec) => {
                let y = build_admittance(net)?;
                let res = ac_residuals(net, &y, &AcPoint::from_recovery(&rec, sol))?;
                RecoveryVerdict::Recovered {
                    recovery: rec,
                    max_ac_residual: res.max(),
                }
            }
            Err(e @ Error::NotArFeasible { .. }) => RecoveryVerdict::Refused { reason: e.to_string() },
            Err(e) => return Err(e),
        }
    };
    let theta = match &recovery {
        RecoveryVerdict::Recovered { recovery, .. } => Some(&recovery.theta),
        _ => None,
    };
    let profile = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| ProfilePoint {
            bus: b.id,
            u: sol.v[i].max(T::zero()).sqrt(),
            theta: theta.map(|t| t[i]),
        })
        .collect();
    Ok(PipelineRun {
        x: net.branches[branch].x,
        conditions,
        status: run.status(),
        solve_ms: run.solve_ms,
        objective: sol.objective,
        gaps,
        ar_feasible,
        recovery,
        profile,
    })
}

/// Runs the pipeline on `net` as given and with the reactance of `branch`
/// (0-based) negated.
pub fn flip_experiment<T: Scalar>(
    net: &Network<T>,
    branch: usize,
    obj: &ObjectiveSpec<T>,
    settings: &SolverSettings<T>,
    opts: &ExperimentOptions<T>,
) -> Result<FlipComparison<T>> {
    let flipped = net.negate_reactance(branch)?;
    Ok(FlipComparison {
        line: branch + 1,
        before: pipeline(net, obj, settings, opts, branch)?,
        after: pipeline(&flipped, obj, settings, opts, branch)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(line: usize) -> SweepRow<f64> {
        SweepRow {
            line,
            status: SolveStatus::Optimal,
            max_gap: Some(1.5),
            num_nonbinding: 1,
            solve_ms: 2.0,
            mechanism: Mechanism::NegativeReactance,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let out = emit_table::<f64>(&[], TableFormat::Csv).unwrap();
        assert_eq!(out, "line,status,max_gap,num_nonbinding,solve_ms\n");
    }

    #[test]
    fn one_row_per_line_in_declared_order() {
        let out = emit_table(&[row(3)], TableFormat::Csv).unwrap();
        assert_eq!(out.lines().nth(1), Some("3,optimal,1.5e0,1,2.000"));
        let json: serde_json::Value = serde_json::from_str(&emit_table(&[row(3)], TableFormat::Json).unwrap()).unwrap();
        assert_eq!(json[0]["line"], 3);
        let text = emit_table(&[row(3), row(4)], TableFormat::Text).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
