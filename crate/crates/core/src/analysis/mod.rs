//! Parameter sweeps, transition detection and the bistability maps built on
//! top of the individual solvers.

mod basin;
mod interval;

pub use basin::{basin_map, BasinGrid, BasinLabel, BASIN_TOL};
pub use interval::{bistable_interval, BistableInterval, SCAN_STEP};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collective::{self, CollectiveState};
use crate::cumulant::{self, CumulantState};
use crate::error::{Error, Result};
use crate::exact::{self, DensityMatrix, MAX_QUBITS};
use crate::exec::Execution;
use crate::meanfield::{self, MeanFieldState};
use crate::model::ModelParams;
use crate::ode::{Controls, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Collective,
    MeanField,
    Exact,
    Cumulant,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Collective => "collective",
            Method::MeanField => "meanfield",
            Method::Exact => "exact",
            Method::Cumulant => "cumulant",
        })
    }
}

/// Initial mean population and coherence. Each method starts from the
/// uncorrelated state with every qubit at `(q0, a0)`: the collective pair
/// directly, uniform per-qubit values for mean-field, the product density
/// matrix for the exact solver and product moments for the cumulant system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub q0: f64,
    pub a0: Complex64,
}

impl InitialState {
    pub fn new(q0: f64, a0: f64) -> Self {
        Self {
            q0,
            a0: Complex64::new(a0, 0.0),
        }
    }

    /// `⟨Q⟩₀ = ⟨A⟩₀ = 0.5`.
    pub fn half() -> Self {
        Self::new(0.5, 0.5)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
}

impl Default for InitialState {
    fn default() -> Self {
        Self::half()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub controls: Controls,
    /// Smallest drop in n̄ between neighbouring grid points that counts as a
    /// transition.
    pub jump_threshold: f64,
    /// Start each point from the previous steady state instead of the fixed
    /// initial condition. Forces sequential execution.
    pub hysteresis: bool,
    pub execution: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            controls: Controls::default(),
            jump_threshold: 0.05,
            hysteresis: false,
            execution: Execution::default(),
        }
    }
}

impl SweepOptions {
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_controls(mut self, controls: Controls) -> Self {
        self.controls = controls;
        self
    }

    pub fn with_hysteresis(mut self, on: bool) -> Self {
        self.hysteresis = on;
        self
    }

    pub fn with_jump_threshold(mut self, threshold: f64) -> Self {
        self.jump_threshold = threshold;
        self
    }

    fn validate(&self) -> Result<()> {
        self.controls.validate()?;
        if !(self.jump_threshold > 0.0 && self.jump_threshold.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "jump_threshold",
                reason: format!("must be positive, got {}", self.jump_threshold),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Midpoint of the two grid points bracketing the drop.
    pub location: f64,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Vec<f64>,
    pub nbar: Vec<f64>,
    pub outcomes: Vec<Outcome>,
    pub method: Method,
    pub jumps: Vec<JumpEvent>,
}

impl SweepResult {
    pub fn converged(&self) -> Vec<bool> {
        self.outcomes.iter().map(|o| o.converged()).collect()
    }
}

/// Drops of more than `threshold` between neighbouring points. Rises are
/// not transitions and are ignored.
pub fn detect_jumps(axis: &[f64], nbar: &[f64], threshold: f64) -> Vec<JumpEvent> {
    axis.windows(2)
        .zip(nbar.windows(2))
        .filter_map(|(x, y)| {
            let drop = y[0] - y[1];
            (drop > threshold).then(|| JumpEvent {
                location: 0.5 * (x[0] + x[1]),
                drop,
            })
        })
        .collect()
}

/// `start, start+step, …` up to `stop`, inclusive when the last point lands
/// within half a step of it.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::InvalidGrid("grid bounds must be finite".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "step must be positive, got {step}"
        )));
    }
    if stop < start {
        return Err(Error::InvalidGrid(format!(
            "stop {stop} is below start {start}"
        )));
    }
    let count = ((stop - start) / step + 0.5).floor() as usize;
    let mut points: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    if let Some(last) = points.last_mut() {
        if (*last - stop).abs() < 1e-9 * step {
            *last = stop;
        }
    }
    Ok(points)
}

fn check_axis(axis: &[f64], name: &str, range: Option<(f64, f64)>) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if axis
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidGrid(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    if let Some((lo, hi)) = range {
        if axis.iter().any(|x| !(*x >= lo && *x <= hi)) {
            return Err(Error::InvalidGrid(format!(
                "{name} grid must lie in [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Final state of one solver run, reusable as a warm start.
#[derive(Debug, Clone)]
enum SolverState {
    Collective(CollectiveState),
    MeanField(MeanFieldState),
    Exact(DensityMatrix),
    Cumulant(CumulantState),
}

enum Start<'a> {
    Fresh(InitialState),
    Warm(&'a SolverState),
}

struct Solved {
    nbar: f64,
    outcome: Outcome,
    state: SolverState,
}

fn solve(
    method: Method,
    params: &ModelParams,
    p: f64,
    start: Start<'_>,
    controls: &Controls,
) -> Result<Solved> {
    let params = params.with_inactive_ratio(p);
    match method {
        Method::Collective => {
            let init = match start {
                Start::Fresh(s) => CollectiveState::new(s.q0, s.a0),
                Start::Warm(SolverState::Collective(s)) => *s,
                Start::Warm(_) => unreachable!("warm start from another method"),
            };
            let (state, outcome) = collective::steady_state(&params, p, &init, controls)?;
            Ok(Solved {
                nbar: state.q,
                outcome,
                state: SolverState::Collective(state),
            })
        }
        Method::MeanField => {
            let init = match start {
                Start::Fresh(s) => MeanFieldState::uniform(&params, s.q0, s.a0)?,
                Start::Warm(SolverState::MeanField(s)) => MeanFieldState {
                    n_active: params.integer_split()?.n_active,
                    ..s.clone()
                },
                Start::Warm(_) => unreachable!("warm start from another method"),
            };
            let res = meanfield::integrate_meanfield(&params, &init, controls)?;
            Ok(Solved {
                nbar: res.nbar,
                outcome: res.outcome,
                state: SolverState::MeanField(res.state),
            })
        }
        Method::Exact => {
            let system = exact::build_system(&params)?;
            let rho0 = match start {
                Start::Fresh(s) => DensityMatrix::uniform_product(params.n_qubits, s.q0, s.a0)?,
                Start::Warm(SolverState::Exact(rho)) => rho.clone(),
                Start::Warm(_) => unreachable!("warm start from another method"),
            };
            let res = exact::evolve_exact(&system, &rho0, controls)?;
            Ok(Solved {
                nbar: res.steady_nbar,
                outcome: res.outcome,
                state: SolverState::Exact(res.rho),
            })
        }
        Method::Cumulant => {
            let init = match start {
                Start::Fresh(s) => CumulantState::product(params.n_qubits, s.q0, s.a0),
                Start::Warm(SolverState::Cumulant(s)) => *s,
                Start::Warm(_) => unreachable!("warm start from another method"),
            };
            let res = cumulant::integrate_cumulant(&params, p, &init, controls)?;
            Ok(Solved {
                nbar: res.nbar,
                outcome: res.outcome,
                state: SolverState::Cumulant(res.state),
            })
        }
    }
}

/// Steady n̄ of one method at one `p`.
pub fn steady_nbar(
    method: Method,
    params: &ModelParams,
    p: f64,
    init: InitialState,
    controls: &Controls,
) -> Result<(f64, Outcome)> {
    let s = solve(method, params, p, Start::Fresh(init), controls)?;
    Ok((s.nbar, s.outcome))
}

/// Runs `method` at every point of `axis`, built into parameters by
/// `at(x) -> (params, p)`.
fn run_sweep<F>(
    axis: &[f64],
    method: Method,
    init: InitialState,
    options: &SweepOptions,
    at: F,
) -> Result<SweepResult>
where
    F: Fn(f64) -> (ModelParams, f64) + Sync + Send,
{
    options.validate()?;
    let points: Vec<(f64, Outcome)> = if options.hysteresis {
        let mut out = Vec::with_capacity(axis.len());
        let mut last: Option<SolverState> = None;
        for &x in axis {
            let (params, p) = at(x);
            let start = match &last {
                Some(s) => Start::Warm(s),
                None => Start::Fresh(init),
            };
            let solved = solve(method, &params, p, start, &options.controls)?;
            out.push((solved.nbar, solved.outcome));
            last = Some(solved.state);
        }
        out
    } else {
        options.execution.try_map(axis, |&x| {
            let (params, p) = at(x);
            steady_nbar(method, &params, p, init, &options.controls)
        })?
    };
    let nbar: Vec<f64> = points.iter().map(|p| p.0).collect();
    Ok(SweepResult {
        jumps: detect_jumps(axis, &nbar, options.jump_threshold),
        axis: axis.to_vec(),
        nbar,
        outcomes: points.iter().map(|p| p.1).collect(),
        method,
    })
}

/// Steady n̄ along `p_grid`, every point started from `init` (or from its
/// predecessor in hysteresis mode).
pub fn sweep_p(
    params: &ModelParams,
    p_grid: &[f64],
    init: InitialState,
    method: Method,
    options: &SweepOptions,
) -> Result<SweepResult> {
    params.validate()?;
    check_axis(p_grid, "p", Some((0.0, 1.0)))?;
    let params = *params;
    run_sweep(p_grid, method, init, options, |p| (params, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Coherent coupling g.
    G,
    /// Drive Ω.
    Omega,
}

impl SweepAxis {
    pub fn apply(self, params: &ModelParams, x: f64) -> ModelParams {
        match self {
            SweepAxis::G => params.with_coherent_coupling(x),
            SweepAxis::Omega => params.with_drive(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep2d {
    pub x_axis: SweepAxis,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `nbar[i][j]` at `(x[i], p[j])`.
    pub nbar: Vec<Vec<f64>>,
    pub converged: Vec<Vec<bool>>,
}

/// Collective steady n̄ over `x_grid × p_grid` from `(0.5, 0.5)`.
pub fn sweep_2d(
    params: &ModelParams,
    x_axis: SweepAxis,
    x_grid: &[f64],
    p_grid: &[f64],
    options: &SweepOptions,
) -> Result<Sweep2d> {
    options.validate()?;
    params.validate()?;
    check_axis(x_grid, "x", None)?;
    check_axis(p_grid, "p", Some((0.0, 1.0)))?;
    let cells: Vec<(usize, usize)> = (0..x_grid.len())
        .flat_map(|i| (0..p_grid.len()).map(move |j| (i, j)))
        .collect();
    let values = options.execution.try_map(&cells, |&(i, j)| {
        let local = x_axis.apply(params, x_grid[i]);
        local.validate()?;
        steady_nbar(
            Method::Collective,
            &local,
            p_grid[j],
            InitialState::half(),
            &options.controls,
        )
    })?;
    Ok(Sweep2d {
        x_axis,
        x: x_grid.to_vec(),
        p: p_grid.to_vec(),
        nbar: values
            .chunks(p_grid.len())
            .map(|row| row.iter().map(|v| v.0).collect())
            .collect(),
        converged: values
            .chunks(p_grid.len())
            .map(|row| row.iter().map(|v| v.1.converged()).collect())
            .collect(),
    })
}

/// Collective steady n̄ against the network size at fixed `p`.
pub fn size_scan(
    params: &ModelParams,
    p: f64,
    n_grid: &[usize],
    init: InitialState,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if n_grid.contains(&0) {
        return Err(Error::InvalidGrid("qubit numbers must be positive".into()));
    }
    let axis: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_axis(&axis, "N", None)?;
    let params = *params;
    params.with_n_qubits(n_grid[0]).validate()?;
    run_sweep(&axis, Method::Collective, init, options, |n| {
        (params.with_n_qubits(n as usize), p)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub p: Vec<f64>,
    pub collective: Vec<f64>,
    pub meanfield: Vec<f64>,
    /// Present when the network is small enough for the exact solver.
    pub exact: Option<Vec<f64>>,
}

/// Collective, mean-field and (for `N ≤ 10`) exact steady n̄ on one grid.
/// Every `N·p` must be an integer.
pub fn compare_methods(
    params: &ModelParams,
    p_grid: &[f64],
    init: InitialState,
    options: &SweepOptions,
) -> Result<Comparison> {
    let run = |m| sweep_p(params, p_grid, init, m, options).map(|r| r.nbar);
    Ok(Comparison {
        p: p_grid.to_vec(),
        collective: run(Method::Collective)?,
        meanfield: run(Method::MeanField)?,
        exact: if params.n_qubits <= MAX_QUBITS {
            Some(run(Method::Exact)?)
        } else {
            None
        },
    })
}
