//! Command-line front end: flag parsing, validation, dispatch to the
//! solvers and CSV/JSON/SVG output.

pub mod args;
pub mod config;
pub mod output;
mod svg;

use std::ffi::OsString;

use clap::Parser;

use qubit_aging::analysis::{
    basin_map, bistable_interval, compare_methods, size_scan, sweep_2d, sweep_p, InitialState,
    Method, SweepResult,
};

use crate::args::{Cli, GridSpec};
use crate::config::{build, expand, integer_ratios, CliError, Job, RunConfig};
use crate::output::{
    sig12, BasinRow, CompareRow, IntervalRow, JumpRow, Report, SizeRow, Sweep2dRow, SweepRow, Table,
};

fn sweep_rows(r: &SweepResult) -> Vec<SweepRow> {
    r.axis
        .iter()
        .zip(&r.nbar)
        .zip(&r.outcomes)
        .map(|((&p, &nbar), o)| SweepRow {
            p: sig12(p),
            nbar: sig12(nbar),
            converged: o.converged(),
        })
        .collect()
}

fn jump_rows(r: &SweepResult) -> Option<Vec<JumpRow>> {
    Some(r.jumps.iter().map(JumpRow::from).collect())
}

fn warn_unconverged(r: &SweepResult) {
    let bad = r.outcomes.iter().filter(|o| !o.converged()).count();
    if bad > 0 {
        eprintln!(
            "warning: {bad} of {} points did not reach the steady-state tolerance",
            r.outcomes.len()
        );
    }
}

#[cfg(feature = "parallel")]
fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|&n| n > 1) {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_threads: Option<usize>) {}

fn line_sweep(
    cfg: &RunConfig,
    p: &GridSpec,
    init: InitialState,
    method: Method,
) -> Result<Report, CliError> {
    let mut ps = expand(p)?;
    if matches!(method, Method::MeanField | Method::Exact) {
        ps = integer_ratios(cfg.params.n_qubits, &ps);
    }
    let r = sweep_p(&cfg.params, &ps, init, method, &cfg.sweep_options())?;
    warn_unconverged(&r);
    Ok(Report {
        table: Table::Sweep(sweep_rows(&r)),
        jumps: jump_rows(&r),
    })
}

/// Runs the computation described by `cfg`.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    set_threads(cfg.threads);
    let params = cfg.params;
    let options = cfg.sweep_options();
    let report = match &cfg.job {
        Job::Sweep {
            p, init, method, ..
        } => line_sweep(cfg, p, *init, *method)?,
        Job::CumulantSweep { p, init, .. } => line_sweep(cfg, p, *init, Method::Cumulant)?,
        Job::Sweep2d { axis, x, p } => {
            let (xs, ps) = (expand(x)?, expand(p)?);
            let m = sweep_2d(&params, *axis, &xs, &ps, &options)?;
            let rows = xs
                .iter()
                .enumerate()
                .flat_map(|(i, &x)| {
                    let m = &m;
                    ps.iter().enumerate().map(move |(j, &p)| Sweep2dRow {
                        x: sig12(x),
                        p: sig12(p),
                        nbar: sig12(m.nbar[i][j]),
                    })
                })
                .collect();
            Report {
                table: Table::Sweep2d(rows),
                jumps: None,
            }
        }
        Job::Basin { p, q0, a0 } => {
            let (qs, as_) = (expand(q0)?, expand(a0)?);
            let map = basin_map(&params, *p, &qs, &as_, &options)?;
            let rows = qs
                .iter()
                .enumerate()
                .flat_map(|(i, &q)| {
                    let map = &map;
                    as_.iter().enumerate().map(move |(j, &a)| BasinRow {
                        q0: sig12(q),
                        a0: sig12(a),
                        label: map.labels[i][j].to_string(),
                    })
                })
                .collect();
            Report {
                table: Table::Basin(rows),
                jumps: None,
            }
        }
        Job::Interval => {
            let iv = bistable_interval(&params)?;
            let row = IntervalRow {
                p_cmin: sig12(iv.p_cmin),
                p_cmax: sig12(iv.p_cmax),
                clamped_upper: iv.clamped_upper,
            };
            println!(
                "p_cmin={} p_cmax={} clamped_upper={}",
                row.p_cmin, row.p_cmax, row.clamped_upper
            );
            if !iv.lower_branch_stable {
                eprintln!(
                    "warning: the lower fixed point is not stable everywhere inside the interval"
                );
            }
            Report {
                table: Table::Interval(vec![row]),
                jumps: None,
            }
        }
        Job::Sizescan { p, n, init, .. } => {
            let ns: Vec<usize> = expand(n)?.iter().map(|&x| x.round() as usize).collect();
            let r = size_scan(&params, *p, &ns, *init, &options)?;
            warn_unconverged(&r);
            let rows = ns
                .iter()
                .zip(&r.nbar)
                .zip(&r.outcomes)
                .map(|((&n, &nbar), o)| SizeRow {
                    n,
                    nbar: sig12(nbar),
                    converged: o.converged(),
                })
                .collect();
            Report {
                table: Table::Size(rows),
                jumps: jump_rows(&r),
            }
        }
        Job::Compare { p, init } => {
            let ps = integer_ratios(params.n_qubits, &expand(p)?);
            let c = compare_methods(&params, &ps, *init, &options)?;
            if c.exact.is_none() {
                eprintln!(
                    "note: N = {} is too large for the exact solver; nbar_exact left empty",
                    params.n_qubits
                );
            }
            let rows = (0..ps.len())
                .map(|i| CompareRow {
                    p: sig12(c.p[i]),
                    nbar_collective: sig12(c.collective[i]),
                    nbar_meanfield: sig12(c.meanfield[i]),
                    nbar_exact: c.exact.as_ref().map(|e| sig12(e[i])),
                })
                .collect();
            Report {
                table: Table::Compare(rows),
                jumps: None,
            }
        }
    };
    Ok(report)
}

/// Parses `argv`, runs it and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = build(&cli.command).and_then(|cfg| {
        let report = execute(&cfg)?;
        if !matches!(cfg.job, Job::Interval) || cfg.output.is_some() {
            report.write(&cfg)?;
        }
        eprint!("{}", report.summary());
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
