//! Primal-dual interior-point solver for conic programs over products of
//! zero, nonnegative and second-order cones.
//!
//! Problems are `min c'x  s.t.  Ax + s = b, s in K`; the dual is
//! `max -b'y  s.t.  A'y + c = 0, y in K*`.

mod cones;
mod equilibrate;
mod ipm;
mod kkt;
mod ldl;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bfm::{ConicProblem, ProblemDump};
use crate::error::Result;
use crate::scalar::Scalar;

pub use cones::project_soc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverSettings<T> {
    pub tol_feas: T,
    pub tol_gap: T,
    /// Tolerance on infeasibility certificates.
    pub tol_infeas: T,
    pub max_iter: usize,
    pub equilibrate: bool,
    pub equilibrate_iters: usize,
    /// Static regularization on the KKT diagonal.
    pub static_reg: T,
    /// Iterative-refinement steps per KKT solve.
    pub refine_steps: usize,
    pub max_step_fraction: T,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol_feas: T::lit(T::DEFAULT_TOL),
            tol_gap: T::lit(T::DEFAULT_TOL),
            tol_infeas: T::lit(T::DEFAULT_TOL * 10.0),
            max_iter: 200,
            equilibrate: true,
            equilibrate_iters: 10,
            static_reg: T::lit(T::DEFAULT_STATIC_REG),
            refine_steps: 3,
            max_step_fraction: T::lit(0.99),
            trace: false,
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(self.tol_feas) && pos(self.tol_gap) && pos(self.tol_infeas)) {
            return Err(crate::Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(crate::Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.max_step_fraction > T::zero() && self.max_step_fraction < T::one()) {
            return Err(crate::Error::InvalidArgument(
                "max_step_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relative residuals of the reported point, on the unscaled problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Residuals<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub primal_res: T,
    pub dual_res: T,
    pub gap: T,
    pub step: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveOutcome<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    /// Dual multipliers of the rows of `Ax + s = b`.
    pub y: Vec<T>,
    pub s: Vec<T>,
    pub iterations: usize,
    pub residuals: Residuals<T>,
    pub primal_objective: T,
    pub dual_objective: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> SolveOutcome<T> {
    /// Iteration trace as CSV with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,primal_res,dual_res,gap,step\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.iteration, r.primal_res, r.dual_res, r.gap, r.step
            ));
        }
        out
    }
}

/// Solves `prob` with the built-in interior-point method.
pub fn solve<T: Scalar>(prob: &ConicProblem<T>, settings: &SolverSettings<T>) -> Result<SolveOutcome<T>> {
    prob.validate()?;
    settings.validate()?;
    Ok(ipm::run(prob, settings))
}

/// Anything that can solve a conic problem given in its dump form.
pub trait ConicBackend<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn solve_dump(&self, dump: &ProblemDump<T>, settings: &SolverSettings<T>) -> Result<SolveOutcome<T>>;
}

/// The built-in interior-point backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl<T: Scalar> ConicBackend<T> for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve_dump(&self, dump: &ProblemDump<T>, settings: &SolverSettings<T>) -> Result<SolveOutcome<T>> {
        solve(&ConicProblem::from_dump(dump)?, settings)
    }
}

/// Parses a JSON problem dump and hands it to `backend`.
pub fn solve_json<T: Scalar>(
    backend: &dyn ConicBackend<T>,
    json: &str,
    settings: &SolverSettings<T>,
) -> Result<SolveOutcome<T>> {
    let dump: ProblemDump<T> = serde_json::from_str(json)?;
    backend.solve_dump(&dump, settings)
}
