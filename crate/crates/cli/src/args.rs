use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

const UNITS: &str = "All rates and energies (Δ, Ω, g, V, κ) are in units of the single-qubit \
pump/decay rate κ, and times in units of 1/κ. Leave --kappa at 1 to keep that convention.";

#[derive(Debug, Parser)]
#[command(name = "qubit-aging", version, about = "Aging transitions in driven, coupled qubit networks", long_about = UNITS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady n̄ along a grid of inactive ratios p
    #[command(long_about = UNITS)]
    Sweep(SweepArgs),
    /// Collective steady n̄ over (g or Ω) × p
    #[command(long_about = UNITS)]
    Sweep2d(Sweep2dArgs),
    /// Basins of attraction of the upper and lower fixed points at one p
    #[command(long_about = UNITS)]
    Basin(BasinArgs),
    /// Range of p with three fixed points
    #[command(long_about = UNITS)]
    Interval(IntervalArgs),
    /// Collective steady n̄ against the number of qubits N at one p
    #[command(long_about = UNITS)]
    Sizescan(SizeScanArgs),
    /// Collective, mean-field and (N ≤ 10) exact n̄ on one p grid
    #[command(long_about = UNITS)]
    Compare(CompareArgs),
    /// Correlated moment equations along a p grid (needs V = 0)
    #[command(long_about = UNITS)]
    CumulantSweep(CumulantArgs),
}

/// `start:stop:step`, inclusive of `stop` within half a step, or one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [x] => {
                let x = num(x)?;
                Ok(Self {
                    start: x,
                    stop: x,
                    step: 1.0,
                })
            }
            [a, b, c] => Ok(Self {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            }),
            _ => Err(format!(
                "expected start:stop:step or a single value, got `{s}`"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Collective,
    #[value(name = "meanfield")]
    MeanField,
    Exact,
    Cumulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    G,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of qubits N
    #[arg(long = "n", default_value_t = 100)]
    pub n: usize,
    /// Detuning Δ
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Drive strength Ω
    #[arg(long, default_value_t = 3.2, allow_negative_numbers = true)]
    pub omega: f64,
    /// Coherent σzσz coupling g
    #[arg(long, default_value_t = 0.04, allow_negative_numbers = true)]
    pub g: f64,
    /// Dissipative coupling V [default: 0.2, or 0 for cumulant-sweep]
    #[arg(long, allow_negative_numbers = true)]
    pub v: Option<f64>,
    /// Single-qubit pump/decay rate κ (the unit of every other rate)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub kappa: f64,
}

#[derive(Debug, Clone, Args)]
pub struct InitArgs {
    /// Initial ⟨Q⟩ [default: 0.5, or 0 for cumulant-sweep]
    #[arg(long, allow_negative_numbers = true)]
    pub q0: Option<f64>,
    /// Initial ⟨A⟩, taken real [default: 0.5, or 0 for cumulant-sweep]
    #[arg(long, allow_negative_numbers = true)]
    pub a0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Integration horizon per point, in units of 1/κ
    #[arg(long, default_value_t = 500.0)]
    pub t_max: f64,
    /// Residual norm below which a state counts as steady
    #[arg(long, default_value_t = 1e-9)]
    pub steady_tol: f64,
    /// Absolute error tolerance of the adaptive integrator
    #[arg(long, default_value_t = 1e-10)]
    pub abs_tol: f64,
    /// Relative error tolerance of the adaptive integrator
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    /// Worker threads [default: all cores; 1 runs sequentially]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file [default: standard output]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct JumpArgs {
    /// Smallest drop in n̄ between neighbouring points reported as a jump
    #[arg(long, default_value_t = 0.05)]
    pub jump_threshold: f64,
    /// Start each point from the previous steady state (sequential)
    #[arg(long)]
    pub hysteresis: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inactive-ratio grid, start:stop:step
    #[arg(long, default_value = "0:1:0.002")]
    pub p: GridSpec,
    #[command(flatten)]
    pub init: InitArgs,
    /// Solver; meanfield and exact round each N·p to an integer
    #[arg(long, value_enum, default_value_t = MethodArg::Collective)]
    pub method: MethodArg,
    #[command(flatten)]
    pub jumps: JumpArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CumulantArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inactive-ratio grid, start:stop:step
    #[arg(long, default_value = "0:1:0.002")]
    pub p: GridSpec,
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub jumps: JumpArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct Sweep2dArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter on the first axis
    #[arg(long, value_enum, default_value_t = AxisArg::G)]
    pub axis: AxisArg,
    /// Grid of the first axis, start:stop:step
    #[arg(long, allow_hyphen_values = true)]
    pub x: GridSpec,
    /// Inactive-ratio grid, start:stop:step
    #[arg(long, default_value = "0:1:0.01")]
    pub p: GridSpec,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BasinArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inactive ratio p
    #[arg(long)]
    pub p: f64,
    /// Grid of initial ⟨Q⟩, start:stop:step
    #[arg(long, default_value = "0:1:0.01")]
    pub q0_grid: GridSpec,
    /// Grid of initial real ⟨A⟩, start:stop:step
    #[arg(long, default_value = "0:1:0.01", allow_hyphen_values = true)]
    pub a0_grid: GridSpec,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IntervalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Format of the file written with --output
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write the interval to this file
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SizeScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inactive ratio p
    #[arg(long)]
    pub p: f64,
    /// Qubit numbers, start:stop:step (integers)
    #[arg(long, default_value = "2:600:1")]
    pub n_grid: GridSpec,
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub jumps: JumpArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inactive-ratio grid, start:stop:step; each point is rounded to k/N
    #[arg(long, default_value = "0:1:0.1")]
    pub p: GridSpec,
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}
