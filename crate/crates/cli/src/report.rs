//! Output documents that have no counterpart in the library.

use std::fmt::Write;

use bfm_relax::bfm::BfmSolution;
use bfm_relax::exactness::GapReport;
use bfm_relax::experiments::{CrRun, FlipComparison, RecoveryVerdict};
use bfm_relax::netmodel::Network;
use bfm_relax::recovery::{AcResiduals, AngleRecovery};
use bfm_relax::solver::{Residuals, SolveStatus};
use serde::Serialize;

#[derive(Serialize)]
struct SolveDoc<'a> {
    status: SolveStatus,
    iterations: usize,
    objective: f64,
    residuals: Residuals<f64>,
    solution: &'a BfmSolution<f64>,
    gaps: Option<&'a GapReport<f64>>,
}

pub fn solve_json(run: &CrRun<f64>, gaps: Option<&GapReport<f64>>) -> bfm_relax::Result<String> {
    let doc = SolveDoc {
        status: run.status(),
        iterations: run.outcome.iterations,
        objective: run.solution.objective,
        residuals: run.outcome.residuals,
        solution: &run.solution,
        gaps,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn solve_text(run: &CrRun<f64>, gaps: Option<&GapReport<f64>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status      {}", run.status());
    let _ = writeln!(out, "iterations  {}", run.outcome.iterations);
    let _ = writeln!(out, "objective   {:.9e}", run.solution.objective);
    if let Some(g) = gaps {
        let lines: Vec<String> = g.nonbinding().map(|b| format!("{} ({:.4e})", b.line, b.gap)).collect();
        let _ = writeln!(out, "max gap     {:.4e}", g.max_gap);
        let _ = writeln!(out, "non-binding {} [{}]", g.num_nonbinding, lines.join(", "));
    }
    out
}

/// One row per run: `run,line,x,status,objective,max_gap,num_nonbinding,failed_conditions,ar_feasible,recovery`.
pub fn flip_csv(cmp: &FlipComparison<f64>) -> String {
    let mut out =
        String::from("run,line,x,status,objective,max_gap,num_nonbinding,failed_conditions,ar_feasible,recovery\n");
    for (name, run) in [("before", &cmp.before), ("after", &cmp.after)] {
        let (max_gap, count) = match &run.gaps {
            Some(g) => (format!("{:e}", g.max_gap), g.num_nonbinding.to_string()),
            None => (String::new(), String::new()),
        };
        let recovery = match &run.recovery {
            RecoveryVerdict::Recovered { recovery, .. } if recovery.recoverable => "recovered",
            RecoveryVerdict::Recovered { .. } => "cycle_mismatch",
            RecoveryVerdict::Refused { .. } => "refused",
            RecoveryVerdict::Skipped => "skipped",
        };
        let _ = writeln!(
            out,
            "{name},{},{},{},{:e},{max_gap},{count},{},{},{recovery}",
            cmp.line,
            run.x,
            run.status,
            run.objective,
            run.conditions.failed().join(" "),
            run.ar_feasible
        );
    }
    out
}

#[derive(Serialize)]
struct RecoverDoc<'a> {
    recovery: &'a AngleRecovery<f64>,
    ac_residual: &'a AcResiduals<f64>,
}

pub fn recover_json(rec: &AngleRecovery<f64>, res: &AcResiduals<f64>) -> bfm_relax::Result<String> {
    Ok(serde_json::to_string_pretty(&RecoverDoc {
        recovery: rec,
        ac_residual: res,
    })?)
}

pub fn recover_text(net: &Network<f64>, rec: &AngleRecovery<f64>, res: &AcResiduals<f64>) -> String {
    let mut out = String::new();
    if rec.forced {
        let _ = writeln!(out, "warning: forced recovery on a point that is not AR-feasible");
    }
    let _ = writeln!(out, "recoverable         {}", rec.recoverable);
    let _ = writeln!(out, "max cycle mismatch  {:.3e}", rec.max_mismatch);
    let _ = writeln!(
        out,
        "max AC residual     {:.3e} (P {:.3e}, Q {:.3e})",
        res.max(),
        res.max_p,
        res.max_q
    );
    let _ = writeln!(out, "{:>6} {:>10} {:>12}", "bus", "U", "theta");
    for (i, bus) in net.buses.iter().enumerate() {
        let _ = writeln!(out, "{:>6} {:>10.6} {:>12.6}", bus.id, rec.u[i], rec.theta[i]);
    }
    out
}
