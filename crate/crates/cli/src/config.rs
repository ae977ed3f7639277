use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qubit_aging::analysis::{grid, InitialState, Method, SweepAxis, SweepOptions};
use qubit_aging::exact::MAX_QUBITS;
use qubit_aging::exec::Execution;
use qubit_aging::model::ModelParams;
use qubit_aging::ode::Controls;
use qubit_aging::Error;

use crate::args::{
    AxisArg, BasinArgs, Command, CompareArgs, CumulantArgs, Format, GridSpec, InitArgs,
    IntervalArgs, JumpArgs, MethodArg, ModelArgs, SizeScanArgs, SolverArgs, Sweep2dArgs, SweepArgs,
};
use crate::output::sig12;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or flag combinations; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The computation itself failed; exit code 1.
    #[error("{0}")]
    Solver(Error),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 1,
        }
    }
}

fn flag_for(name: &str) -> &str {
    match name {
        "n_qubits" => "--n",
        "detuning" => "--delta",
        "drive" => "--omega",
        "coherent_coupling" => "--g",
        "dissipative_coupling" => "--v",
        "kappa" => "--kappa",
        "inactive_ratio" => "--p",
        "initial state" => "--q0/--a0",
        "jump_threshold" => "--jump-threshold",
        "t_max" => "--t-max",
        "steady_tol" => "--steady-tol",
        "abs_tol" => "--abs-tol",
        "rel_tol" => "--rel-tol",
        other => other,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => {
                CliError::Usage(format!("invalid {}: {reason}", flag_for(name)))
            }
            Error::InvalidGrid(reason) => CliError::Usage(format!("invalid grid: {reason}")),
            Error::NonIntegerSplit { .. } | Error::TooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::RequiresZeroV { v } => {
                CliError::Usage(format!("the cumulant solver needs --v 0 (got {v})"))
            }
            other => CliError::Solver(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Everything needed to reproduce a run; written as `meta` in JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub job: Job,
    pub params: ModelParams,
    pub controls: Controls,
    pub threads: Option<usize>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Job {
    Sweep {
        p: GridSpec,
        init: InitialState,
        method: Method,
        jump_threshold: f64,
        hysteresis: bool,
    },
    Sweep2d {
        axis: SweepAxis,
        x: GridSpec,
        p: GridSpec,
    },
    Basin {
        p: f64,
        q0: GridSpec,
        a0: GridSpec,
    },
    Interval,
    Sizescan {
        p: f64,
        n: GridSpec,
        init: InitialState,
        jump_threshold: f64,
        hysteresis: bool,
    },
    Compare {
        p: GridSpec,
        init: InitialState,
    },
    CumulantSweep {
        p: GridSpec,
        init: InitialState,
        jump_threshold: f64,
        hysteresis: bool,
    },
}

impl RunConfig {
    pub fn execution(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let (threshold, hysteresis) = match self.job {
            Job::Sweep {
                jump_threshold,
                hysteresis,
                ..
            }
            | Job::Sizescan {
                jump_threshold,
                hysteresis,
                ..
            }
            | Job::CumulantSweep {
                jump_threshold,
                hysteresis,
                ..
            } => (jump_threshold, hysteresis),
            _ => (SweepOptions::default().jump_threshold, false),
        };
        SweepOptions::default()
            .with_controls(self.controls)
            .with_execution(self.execution())
            .with_jump_threshold(threshold)
            .with_hysteresis(hysteresis)
    }
}

pub fn expand(spec: &GridSpec) -> Result<Vec<f64>, CliError> {
    Ok(grid(spec.start, spec.stop, spec.step)?)
}

/// Snaps every `p` to the nearest `k/N`, warning about each change, and
/// drops duplicates created by the snapping.
pub fn integer_ratios(n: usize, ps: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(ps.len());
    for &p in ps {
        let r = ModelParams::rounded_ratio(n, p);
        if (r - p).abs() > 1e-12 {
            eprintln!(
                "warning: p = {} rounded to {} so that N·p is an integer",
                sig12(p),
                sig12(r)
            );
        }
        if out.last().is_none_or(|&last| (last - r).abs() > 1e-12) {
            out.push(r);
        }
    }
    out
}

fn params(m: &ModelArgs, default_v: f64) -> Result<ModelParams, CliError> {
    let params = ModelParams {
        n_qubits: m.n,
        detuning: m.delta,
        drive: m.omega,
        coherent_coupling: m.g,
        dissipative_coupling: m.v.unwrap_or(default_v),
        kappa: m.kappa,
        inactive_ratio: 0.0,
    };
    params.validate()?;
    Ok(params)
}

fn controls(s: &SolverArgs) -> Result<Controls, CliError> {
    let c = Controls::default()
        .with_t_max(s.t_max)
        .with_steady_tol(s.steady_tol)
        .with_tolerances(s.abs_tol, s.rel_tol);
    c.validate()?;
    if s.threads == Some(0) {
        return Err(usage("invalid --threads: must be at least 1"));
    }
    Ok(c)
}

fn init(i: &InitArgs, default: InitialState) -> Result<InitialState, CliError> {
    let s = InitialState::new(i.q0.unwrap_or(default.q0), i.a0.unwrap_or(default.a0.re));
    if !(s.q0.is_finite() && s.a0.re.is_finite()) {
        return Err(usage("invalid --q0/--a0: must be finite"));
    }
    Ok(s)
}

fn jumps(j: &JumpArgs) -> Result<(f64, bool), CliError> {
    if !(j.jump_threshold > 0.0 && j.jump_threshold.is_finite()) {
        return Err(usage(format!(
            "invalid --jump-threshold: must be positive, got {}",
            j.jump_threshold
        )));
    }
    Ok((j.jump_threshold, j.hysteresis))
}

fn check_p_grid(spec: &GridSpec) -> Result<(), CliError> {
    let ps = expand(spec)?;
    if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(usage("invalid --p: values must lie in [0, 1]"));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(usage(format!("invalid --p: must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Collective => Method::Collective,
        MethodArg::MeanField => Method::MeanField,
        MethodArg::Exact => Method::Exact,
        MethodArg::Cumulant => Method::Cumulant,
    }
}

/// Validates the parsed flags and resolves defaults.
pub fn build(command: &Command) -> Result<RunConfig, CliError> {
    let half = InitialState::half();
    let config = |job, params, controls, threads, format, output: &Option<PathBuf>| RunConfig {
        job,
        params,
        controls,
        threads,
        format,
        output: output.clone(),
    };
    let cfg = match command {
        Command::Sweep(SweepArgs {
            model,
            p,
            init: i,
            method: m,
            jumps: j,
            solver,
            out,
        }) => {
            let params = params(model, 0.2)?;
            check_p_grid(p)?;
            let method = method(*m);
            if method == Method::Exact && params.n_qubits > MAX_QUBITS {
                return Err(usage(format!(
                    "--method exact supports at most --n {MAX_QUBITS}"
                )));
            }
            if method == Method::Cumulant && params.dissipative_coupling != 0.0 {
                return Err(usage("--method cumulant needs --v 0"));
            }
            let (jump_threshold, hysteresis) = jumps(j)?;
            let job = Job::Sweep {
                p: *p,
                init: init(i, half)?,
                method,
                jump_threshold,
                hysteresis,
            };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
        Command::CumulantSweep(CumulantArgs {
            model,
            p,
            init: i,
            jumps: j,
            solver,
            out,
        }) => {
            let params = params(model, 0.0)?;
            if params.dissipative_coupling != 0.0 {
                return Err(usage("cumulant-sweep needs --v 0"));
            }
            check_p_grid(p)?;
            let (jump_threshold, hysteresis) = jumps(j)?;
            let job = Job::CumulantSweep {
                p: *p,
                init: init(i, InitialState::zero())?,
                jump_threshold,
                hysteresis,
            };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
        Command::Sweep2d(Sweep2dArgs {
            model,
            axis,
            x,
            p,
            solver,
            out,
        }) => {
            let params = params(model, 0.2)?;
            check_p_grid(p)?;
            expand(x)?;
            let axis = match axis {
                AxisArg::G => SweepAxis::G,
                AxisArg::Omega => SweepAxis::Omega,
            };
            let job = Job::Sweep2d { axis, x: *x, p: *p };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
        Command::Basin(BasinArgs {
            model,
            p,
            q0_grid,
            a0_grid,
            solver,
            out,
        }) => {
            let params = params(model, 0.2)?;
            check_p(*p)?;
            expand(q0_grid)?;
            expand(a0_grid)?;
            let job = Job::Basin {
                p: *p,
                q0: *q0_grid,
                a0: *a0_grid,
            };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
        Command::Interval(IntervalArgs {
            model,
            format,
            output,
        }) => {
            let params = params(model, 0.2)?;
            if *format == Format::Svg {
                return Err(usage("interval output supports --format csv or json"));
            }
            config(
                Job::Interval,
                params,
                Controls::default(),
                None,
                *format,
                output,
            )
        }
        Command::Sizescan(SizeScanArgs {
            model,
            p,
            n_grid,
            init: i,
            jumps: j,
            solver,
            out,
        }) => {
            let params = params(model, 0.2)?;
            check_p(*p)?;
            let ns = expand(n_grid)?;
            if ns.iter().any(|&n| n < 1.0 || n.fract().abs() > 1e-9) || n_grid.step.fract() != 0.0 {
                return Err(usage(
                    "invalid --n-grid: qubit numbers must be positive integers",
                ));
            }
            let (jump_threshold, hysteresis) = jumps(j)?;
            let job = Job::Sizescan {
                p: *p,
                n: *n_grid,
                init: init(i, half)?,
                jump_threshold,
                hysteresis,
            };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
        Command::Compare(CompareArgs {
            model,
            p,
            init: i,
            solver,
            out,
        }) => {
            let params = params(model, 0.2)?;
            check_p_grid(p)?;
            let job = Job::Compare {
                p: *p,
                init: init(i, half)?,
            };
            config(
                job,
                params,
                controls(solver)?,
                solver.threads,
                out.format,
                &out.output,
            )
        }
    };
    Ok(cfg)
}
