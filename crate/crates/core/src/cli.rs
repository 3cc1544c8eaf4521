//! The `meco` command line: `solve`, `sweep`, `gen` and `check`.
//!
//! Exit codes: 0 success, 1 constraint violations found by `check` or an
//! I/O failure, 2 infeasible scenario, 3 unparsable or invalid input,
//! 4 numeric failure. Errors are also printed to stderr as one JSON line
//! `{"error": kind, "message": text}`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Allocation, CloudCapacity, Scenario, Violation};
use crate::scenario::{self, GenSpec};
use crate::solvers::{PolicyKind, SolveReport, SOLVER_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Axis {
    #[serde(rename = "slot_T")]
    #[value(name = "slot_T")]
    SlotT,
    #[serde(rename = "cloud_F")]
    #[value(name = "cloud_F")]
    CloudF,
}

impl Axis {
    pub fn apply(&self, base: &GenSpec, value: f64) -> GenSpec {
        match self {
            Axis::SlotT => GenSpec { slot: value, ..base.clone() },
            Axis::CloudF => GenSpec { cloud: CloudCapacity::from_f64(value), ..base.clone() },
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::P1Optimal, PolicyKind::Suboptimal, PolicyKind::Baseline]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: GenSpec,
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() || self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("sweep values must be nonempty and strictly increasing".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("sweep values must be positive and finite".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidInput("at least one policy is required".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(spec)
    }

    /// Scenario for one sweep point. The trial seed ignores the axis index,
    /// so every axis value sees the same users and channels.
    pub fn scenario(&self, axis_index: usize, trial: usize) -> Result<Scenario> {
        let seed = scenario::split(self.base.seed, trial as u64);
        let spec = GenSpec { seed, ..self.axis.apply(&self.base, self.values[axis_index]) };
        scenario::generate(&spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    /// Trial index, or `mean` for aggregate rows.
    pub trial: String,
    pub policy: PolicyKind,
    #[serde(rename = "weighted_energy_J")]
    pub weighted_energy: f64,
    pub lambda: f64,
    pub mu: f64,
    pub offloaded_bits_total: f64,
    pub solve_iterations: f64,
}

impl SweepRow {
    fn from_report(axis_value: f64, trial: usize, r: &SolveReport) -> Self {
        SweepRow {
            axis_value,
            trial: trial.to_string(),
            policy: r.policy_kind,
            weighted_energy: r.objective(),
            lambda: r.dual.lambda,
            mu: r.dual.mu,
            offloaded_bits_total: r.allocation.total_bits(),
            solve_iterations: (r.diagnostics.outer_iterations + r.diagnostics.inner_iterations) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Per-trial rows in (axis, trial, policy) order, then mean rows.
    pub rows: Vec<SweepRow>,
    /// First failure; rows hold everything before it in output order.
    pub error: Option<Error>,
}

impl SweepOutcome {
    /// Mean weighted energy for one axis value and policy.
    pub fn mean(&self, axis_value: f64, policy: PolicyKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.trial == "mean" && r.axis_value == axis_value && r.policy == policy)
            .map(|r| r.weighted_energy)
    }

    pub fn trial_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.trial != "mean")
    }
}

/// Solves every (axis value, trial, policy) point of the sweep.
///
/// Trials run in parallel; rows come back in deterministic order. On a
/// failure the rows before it (in output order) are kept and no mean rows
/// are added.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let points: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|a| (0..spec.trials).map(move |t| (a, t))).collect();
    let results: Vec<Result<Vec<SweepRow>>> = points
        .par_iter()
        .map(|&(a, t)| {
            let s = spec.scenario(a, t)?;
            spec.policies
                .iter()
                .map(|p| p.solve(&s).map(|r| SweepRow::from_report(spec.values[a], t, &r)))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(points.len() * spec.policies.len());
    for res in results {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => return Ok(SweepOutcome { rows, error: Some(e) }),
        }
    }
    let n = spec.trials as f64;
    let mut means = Vec::new();
    for &v in &spec.values {
        for &p in &spec.policies {
            let mut acc = SweepRow {
                axis_value: v,
                trial: "mean".into(),
                policy: p,
                weighted_energy: 0.0,
                lambda: 0.0,
                mu: 0.0,
                offloaded_bits_total: 0.0,
                solve_iterations: 0.0,
            };
            for r in rows.iter().filter(|r| r.axis_value == v && r.policy == p) {
                acc.weighted_energy += r.weighted_energy / n;
                acc.lambda += r.lambda / n;
                acc.mu += r.mu / n;
                acc.offloaded_bits_total += r.offloaded_bits_total / n;
                acc.solve_iterations += r.solve_iterations / n;
            }
            means.push(acc);
        }
    }
    rows.extend(means);
    Ok(SweepOutcome { rows, error: None })
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// What `check` reports about a scenario and allocation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub feasible: bool,
    pub required_cycles: f64,
    pub capacity: CloudCapacity,
    pub violations: Vec<Violation>,
    pub objective: Option<f64>,
}

/// An allocation file may hold a bare allocation or a full solve report.
#[derive(Deserialize)]
#[serde(untagged)]
enum AllocationDoc {
    Report { allocation: Allocation },
    Bare(Allocation),
}

pub fn parse_allocation(text: &str) -> Result<Allocation> {
    let doc: AllocationDoc = serde_json::from_str(text)?;
    Ok(match doc {
        AllocationDoc::Report { allocation } | AllocationDoc::Bare(allocation) => allocation,
    })
}

pub fn check(s: &Scenario, a: &Allocation, tol: f64) -> Result<CheckReport> {
    if a.ell.len() != s.len() || a.t.len() != s.len() {
        return Err(Error::InvalidInput(format!(
            "allocation has {}/{} entries for {} users",
            a.ell.len(),
            a.t.len(),
            s.len()
        )));
    }
    let feas = model::check_feasible(s);
    Ok(CheckReport {
        feasible: feas.feasible,
        required_cycles: feas.required_cycles,
        capacity: s.system.cloud,
        violations: model::check_constraints(s, a, tol),
        objective: model::objective(s, a).ok(),
    })
}

#[derive(Debug, Parser)]
#[command(name = "meco", version, about = "Energy-optimal TDMA offloading: solve, sweep, generate, check")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Reference setting, task sizes in kilobytes.
    Default,
    /// Reference setting with task sizes divided by 50.
    Desk,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write the report as JSON.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "P1-optimal")]
        policy: PolicyKind,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative tolerance for the final constraint audit.
        #[arg(long, default_value_t = SOLVER_TOL)]
        tol: f64,
    },
    /// Run a parameter sweep and write per-trial and mean rows as CSV.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Repeat to select several policies.
        #[arg(long)]
        policy: Vec<PolicyKind>,
    },
    /// Draw a scenario from a generator spec (or a preset).
    Gen {
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit an allocation (or a solve report) against a scenario.
    Check {
        scenario: PathBuf,
        allocation: PathBuf,
        #[arg(long, default_value_t = SOLVER_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => 2,
        Error::Parse(_) | Error::InvalidInput(_) => 3,
        Error::Domain { .. } | Error::Violation(_) | Error::IterationLimit { .. } | Error::Numeric(_) => 4,
        Error::Io(_) => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn json_line<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve { scenario, policy, out, tol } => {
            let s = Scenario::from_json(&read(&scenario)?)?;
            let r = policy.solve(&s)?;
            let audit = if policy == PolicyKind::P2Optimal { s.relaxed() } else { s };
            if let Some(v) = model::check_constraints(&audit, &r.allocation, tol).first() {
                return Err(Error::Numeric(format!("report violates {:?} by {:e}", v.constraint, v.magnitude)));
            }
            emit(out.as_deref(), &json_line(&r))?;
            Ok(0)
        }
        Command::Sweep { spec, out, trials, seed, policy } => {
            let mut sw = SweepSpec::from_json(&read(&spec)?)?;
            if let Some(t) = trials {
                sw.trials = t;
            }
            if let Some(s) = seed {
                sw.base.seed = s;
            }
            if !policy.is_empty() {
                sw.policies = policy;
            }
            let outcome = run_sweep(&sw)?;
            let mut buf = Vec::new();
            write_csv(&outcome.rows, &mut buf)?;
            emit(out.as_deref(), &buf)?;
            match outcome.error {
                Some(e) => Err(e),
                None => Ok(0),
            }
        }
        Command::Gen { spec, preset, seed, out } => {
            let mut g = match spec {
                Some(p) => GenSpec::from_json(&read(&p)?)?,
                None => match preset {
                    Preset::Default => scenario::default_spec(),
                    Preset::Desk => scenario::desk_spec(),
                },
            };
            if let Some(s) = seed {
                g.seed = s;
            }
            let s = scenario::generate(&g)?;
            emit(out.as_deref(), format!("{}\n", s.to_json()).as_bytes())?;
            Ok(0)
        }
        Command::Check { scenario, allocation, tol, out } => {
            let s = Scenario::from_json(&read(&scenario)?)?;
            let a = parse_allocation(&read(&allocation)?)?;
            let rep = check(&s, &a, tol)?;
            emit(out.as_deref(), &json_line(&rep))?;
            Ok(if !rep.feasible {
                2
            } else if rep.violations.is_empty() {
                0
            } else {
                1
            })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            exit_code(&e)
        }
    }
}
