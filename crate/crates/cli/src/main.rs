//! `bfmrelax`: solve, audit and stress the branch-flow conic relaxation of
//! MATPOWER cases from the command line.

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bfm_relax::bfm::{ObjectiveSpec, DEFAULT_EPSILON_L};
use bfm_relax::exactness::{audit_conditions, gap_report, Verdict, DEFAULT_CHECK_TOL, DEFAULT_TIGHT_TOL};
use bfm_relax::experiments::{
    baseline_row, emit_table, flip_experiment, nr_sweep, run_cr, ExperimentOptions, TableFormat,
};
use bfm_relax::netmodel::{parse_matpower, validate, Network, ParseOptions, Severity};
use bfm_relax::recovery::{ac_residuals, build_admittance, recover_angles, AcPoint};
use bfm_relax::solver::{SolveStatus, SolverSettings};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Model(#[from] bfm_relax::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver stopped with status {0}")]
    Solver(SolveStatus),
    #[error("conditions failed: {0}")]
    Audit(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Model(_) | CliError::Config(_) | CliError::Output(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Audit(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Json => TableFormat::Json,
            Format::Text => TableFormat::Text,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bfmrelax",
    version,
    about = "Branch-flow conic relaxation: solve, audit exactness, negative-reactance experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the relaxation and report the solution with its cone gaps.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the solver iteration trace as CSV to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Check the exactness conditions; the feasibility condition comes from a solve.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 when any condition fails.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        trace: bool,
    },
    /// Negate each line's reactance in turn and tabulate the cone gaps.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to every available core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the full pipeline with and without one line's reactance negated.
    Flip {
        #[command(flatten)]
        common: Common,
        /// Line to flip, 1-based in case-file order.
        #[arg(long)]
        branch: usize,
        /// Recover angles even when the solution is not AR-feasible.
        #[arg(long)]
        force_recovery: bool,
    },
    /// Recover bus angles from the relaxed optimum and check the AC equations.
    Recover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        force_recovery: bool,
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// MATPOWER case file.
    #[arg(long, value_name = "PATH")]
    case: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Relative gap above which a cone counts as non-binding.
    #[arg(long, default_value_t = DEFAULT_TIGHT_TOL)]
    tight_tol: f64,
    /// Solver feasibility and gap tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Added to every current coefficient of the loss objective.
    #[arg(long, default_value_t = DEFAULT_EPSILON_L)]
    epsilon_l: f64,
    /// Keep bus shunts, line charging and transformer taps.
    #[arg(long)]
    keep_shunts: bool,
}

struct Setup {
    net: Network<f64>,
    obj: ObjectiveSpec<f64>,
    settings: SolverSettings<f64>,
    opts: ExperimentOptions<f64>,
}

impl Common {
    fn setup(&self, trace: bool) -> Result<Setup> {
        if !(self.tight_tol > 0.0) {
            return Err(CliError::Config("--tight-tol must be positive".into()));
        }
        if !(self.epsilon_l > 0.0) {
            return Err(CliError::Config("--epsilon-l must be positive".into()));
        }
        let text = std::fs::read_to_string(&self.case).map_err(|source| CliError::Read {
            path: self.case.clone(),
            source,
        })?;
        let parsed = parse_matpower::<f64>(
            &text,
            &ParseOptions {
                keep_shunts_and_taps: self.keep_shunts,
            },
        )?;
        let errors: Vec<String> = validate(&parsed.network)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message)
            .collect();
        if !errors.is_empty() {
            return Err(CliError::Config(format!(
                "{}: {}",
                self.case.display(),
                errors.join("; ")
            )));
        }
        let mut settings = SolverSettings {
            trace,
            ..SolverSettings::default()
        };
        if let Some(tol) = self.tol {
            settings.tol_feas = tol;
            settings.tol_gap = tol;
            settings.tol_infeas = 10.0 * tol;
        }
        if let Some(n) = self.max_iter {
            settings.max_iter = n;
        }
        settings.validate()?;
        Ok(Setup {
            net: parsed.network,
            obj: ObjectiveSpec::losses(self.epsilon_l),
            settings,
            opts: ExperimentOptions {
                tight_tol: self.tight_tol,
                check_tol: DEFAULT_CHECK_TOL,
                ..ExperimentOptions::default()
            },
        })
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn emit(doc: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(doc.as_bytes())?;
    if !doc.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn emit_trace(trace: bool, csv: String) {
    if trace {
        eprint!("{csv}");
    }
}

fn solve_cmd(common: &Common, trace: bool) -> Result<()> {
    let s = common.setup(trace)?;
    let run = run_cr(&s.net, &s.obj, &s.settings)?;
    emit_trace(trace, run.outcome.trace_csv());
    let gaps = if run.status() == SolveStatus::Optimal {
        Some(gap_report(&s.net, &run.solution, s.opts.tight_tol)?)
    } else {
        None
    };
    let doc = match common.format(Format::Json) {
        Format::Json => report::solve_json(&run, gaps.as_ref())?,
        Format::Csv => gaps.as_ref().map(|g| g.to_csv()).unwrap_or_default(),
        Format::Text => report::solve_text(&run, gaps.as_ref()),
    };
    emit(&doc)?;
    match run.status() {
        SolveStatus::Optimal => Ok(()),
        status => Err(CliError::Solver(status)),
    }
}

fn audit_cmd(common: &Common, strict: bool, trace: bool) -> Result<()> {
    let s = common.setup(trace)?;
    let run = run_cr(&s.net, &s.obj, &s.settings)?;
    emit_trace(trace, run.outcome.trace_csv());
    let audit = audit_conditions(&s.net, &s.obj)?.with_status(run.status());
    let doc = match common.format(Format::Text) {
        Format::Json => audit.to_json()?,
        Format::Csv => audit.to_csv(),
        Format::Text => audit.to_text(),
    };
    emit(&doc)?;
    let failed: Vec<&str> = audit
        .verdicts()
        .iter()
        .filter(|(_, v)| *v == Verdict::Fail)
        .map(|(n, _)| *n)
        .collect();
    if strict && !failed.is_empty() {
        return Err(CliError::Audit(failed.join(", ")));
    }
    Ok(())
}

fn sweep_cmd(common: &Common, workers: Option<usize>) -> Result<()> {
    if workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let mut s = common.setup(false)?;
    s.opts.workers = workers;
    let base = baseline_row(&s.net, &s.obj, &s.settings, &s.opts)?;
    if base.num_nonbinding > 0 || base.status != SolveStatus::Optimal {
        log::warn!(
            "baseline is not exact ({}, {} non-binding); negation effects are not isolated",
            base.status,
            base.num_nonbinding
        );
    } else {
        log::info!("baseline exact, max gap {:e}", base.max_gap.unwrap_or_default());
    }
    let rows = nr_sweep(&s.net, &s.obj, &s.settings, &s.opts)?;
    emit(&emit_table(&rows, common.format(Format::Text).into())?)
}

fn flip_cmd(common: &Common, branch: usize, force: bool) -> Result<()> {
    let mut s = common.setup(false)?;
    let n = s.net.branches.len();
    if branch == 0 || branch > n {
        return Err(CliError::Config(format!("--branch must lie in 1..={n}")));
    }
    s.opts.force_recovery = force;
    let cmp = flip_experiment(&s.net, branch - 1, &s.obj, &s.settings, &s.opts)?;
    let doc = match common.format(Format::Text) {
        Format::Json => serde_json::to_string_pretty(&cmp).map_err(bfm_relax::Error::from)?,
        Format::Csv => report::flip_csv(&cmp),
        Format::Text => cmp.to_text(),
    };
    emit(&doc)
}

fn recover_cmd(common: &Common, force: bool, trace: bool) -> Result<()> {
    let s = common.setup(trace)?;
    let run = run_cr(&s.net, &s.obj, &s.settings)?;
    emit_trace(trace, run.outcome.trace_csv());
    if run.status() != SolveStatus::Optimal {
        return Err(CliError::Solver(run.status()));
    }
    let rec = recover_angles(&s.net, &run.solution, s.opts.check_tol, force)?;
    let y = build_admittance(&s.net)?;
    let res = ac_residuals(&s.net, &y, &AcPoint::from_recovery(&rec, &run.solution))?;
    let doc = match common.format(Format::Json) {
        Format::Json => report::recover_json(&rec, &res)?,
        Format::Csv => rec.profile_csv(&s.net),
        Format::Text => report::recover_text(&s.net, &rec, &res),
    };
    emit(&doc)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Solve { common, trace } => solve_cmd(common, *trace),
        Command::Audit { common, strict, trace } => audit_cmd(common, *strict, *trace),
        Command::Sweep { common, workers } => sweep_cmd(common, *workers),
        Command::Flip {
            common,
            branch,
            force_recovery,
        } => flip_cmd(common, *branch, *force_recovery),
        Command::Recover {
            common,
            force_recovery,
            trace,
        } => recover_cmd(common, *force_recovery, *trace),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
