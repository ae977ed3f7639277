//! Explicit Runge–Kutta integration with a built-in steady-state stop.
//!
//! All solvers flatten their state into a `Vec<f64>` and hand a right-hand
//! side to [`integrate`]. The default stepper is the Dormand–Prince 5(4)
//! pair with FSAL and PI step-size control; a fixed-step classical RK4 is
//! available as a fallback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stepper {
    /// Dormand–Prince 5(4) with error control.
    Adaptive,
    /// Classical RK4 with a constant step.
    FixedStep { dt: f64 },
}

/// Integration and steady-state settings shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Residual norm below which the state counts as steady.
    pub steady_tol: f64,
    /// Integration horizon, in units of 1/κ.
    pub t_max: f64,
    /// Spacing of recorded samples; the steady criterion must hold for one
    /// full interval.
    pub report_interval: f64,
    pub stepper: Stepper,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            steady_tol: 1e-9,
            t_max: 500.0,
            report_interval: 1.0,
            stepper: Stepper::Adaptive,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("steady_tol", self.steady_tol),
            ("t_max", self.t_max),
            ("report_interval", self.report_interval),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a positive finite number, got {value}"),
                });
            }
        }
        if let Stepper::FixedStep { dt } = self.stepper {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "dt",
                    reason: format!("fixed step must be positive, got {dt}"),
                });
            }
        }
        Ok(())
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_steady_tol(mut self, steady_tol: f64) -> Self {
        self.steady_tol = steady_tol;
        self
    }
}

/// How a steady-state run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Converged,
    /// `t_max` reached while still relaxing.
    TimeLimit,
    /// `t_max` reached with a sustained, non-decaying oscillation.
    LimitCycle,
    /// Fixed-horizon run that was not asked to stop at a steady state.
    Horizon,
}

impl Outcome {
    pub fn converged(self) -> bool {
        self == Outcome::Converged
    }
}

/// Which norm of the right-hand side measures the steady-state residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualNorm {
    Max,
    Euclidean,
}

impl ResidualNorm {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            ResidualNorm::Max => v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())),
            ResidualNorm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// What to stop on and what to record.
pub struct RunSpec<'a> {
    pub t_end: f64,
    pub stop_when_steady: bool,
    pub norm: ResidualNorm,
    /// Scalar tracked at every report time (limit-cycle detection and
    /// trajectory output).
    pub observable: &'a dyn Fn(&[f64]) -> f64,
    /// Keep full state snapshots at report times.
    pub record_states: bool,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub t: f64,
    pub y: Vec<f64>,
    pub outcome: Outcome,
    /// Residual norm of the final state.
    pub residual: f64,
    /// `(t, observable)` at t = 0 and every report time.
    pub observable: Vec<(f64, f64)>,
    /// Snapshots matching `observable` when recording was requested.
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (error estimate weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

fn combine(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (coef, k) in terms {
            acc += coef * k[i];
        }
        *o = y[i] + h * acc;
    }
}

/// One Dormand–Prince step from `(t, y)` with `ws.k[0] = f(t, y)`. Leaves the
/// 5th-order solution in `ws.y_new`, `f(t+h, y_new)` in `ws.k[6]`, and
/// returns the scaled error norm together with the spectral-radius estimate
/// `‖k7 − k6‖ / ‖y_new − y6‖` (zero when not measurable).
fn dopri_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    ws: &mut Workspace,
    controls: &Controls,
) -> (f64, f64) {
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    combine(tmp, y, h, &[(A21, k1)]);
    sys.rhs(t + C2 * h, tmp, k2);
    combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
    sys.rhs(t + C3 * h, tmp, k3);
    combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    sys.rhs(t + C4 * h, tmp, k4);
    combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    sys.rhs(t + C5 * h, tmp, k5);
    combine(
        tmp,
        y,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    );
    sys.rhs(t + h, tmp, k6);
    combine(
        y_new,
        y,
        h,
        &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
    );
    sys.rhs(t + h, y_new, k7);

    let n = y.len().max(1);
    let mut sum = 0.0;
    let mut dk = 0.0;
    let mut dy = 0.0;
    let mut yy = 0.0;
    for i in 0..y.len() {
        dk += (k7[i] - k6[i]).powi(2);
        dy += (y_new[i] - tmp[i]).powi(2);
        yy += y[i] * y[i];
        let err = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = controls.abs_tol + controls.rel_tol * y[i].abs().max(y_new[i].abs());
        sum += (err / scale).powi(2);
    }
    let rho = if dy.sqrt() > 1e-14 * (1.0 + yy.sqrt()) {
        (dk / dy).sqrt()
    } else {
        0.0
    };
    ((sum / n as f64).sqrt(), rho)
}

/// Steps are kept inside the stability region, `h·ρ ≤ STIFF_CAP`, where the
/// Dormand–Prince amplification stays below 0.9 for weakly damped modes.
/// Riding the stability boundary instead pins deviations from a fixed point
/// at the absolute-tolerance level.
const STIFF_CAP: f64 = 1.5;

/// Classical RK4 step; `ws.k[0] = f(t, y)` on entry, `ws.k[6] = f(t+h, y_new)`
/// on exit.
fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64, ws: &mut Workspace) {
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, _, _, k7] = k;
    combine(tmp, y, h, &[(0.5, k1)]);
    sys.rhs(t + 0.5 * h, tmp, k2);
    combine(tmp, y, h, &[(0.5, k2)]);
    sys.rhs(t + 0.5 * h, tmp, k3);
    combine(tmp, y, h, &[(1.0, k3)]);
    sys.rhs(t + h, tmp, k4);
    combine(
        y_new,
        y,
        h,
        &[
            (1.0 / 6.0, k1),
            (1.0 / 3.0, k2),
            (1.0 / 3.0, k3),
            (1.0 / 6.0, k4),
        ],
    );
    sys.rhs(t + h, y_new, k7);
}

fn initial_step(y: &[f64], f: &[f64], controls: &Controls) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f) {
        let scale = controls.abs_tol + controls.rel_tol * yi.abs();
        d0 += (yi / scale).powi(2);
        d1 += (fi / scale).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * (d0 / d1).sqrt()
    };
    h.min(controls.report_interval).max(1e-10)
}

/// Integrates from `(0, y0)` until `spec.t_end`, or until the residual stays
/// below `controls.steady_tol` for one report interval when
/// `spec.stop_when_steady` is set.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: Vec<f64>,
    controls: &Controls,
    spec: &RunSpec<'_>,
) -> Result<Run> {
    controls.validate()?;
    let n = y0.len();
    let mut ws = Workspace::new(n);
    let mut y = y0;
    let mut t = 0.0;
    sys.rhs(t, &y, &mut ws.k[0]);
    if !finite(&y) || !finite(&ws.k[0]) {
        return Err(Error::NonFinite { t });
    }

    let mut observable = vec![(t, (spec.observable)(&y))];
    let mut states = if spec.record_states {
        vec![y.clone()]
    } else {
        Vec::new()
    };

    let mut residual = spec.norm.apply(&ws.k[0]);
    let mut below_since = (residual < controls.steady_tol).then_some(t);
    let mut next_report = controls.report_interval.min(spec.t_end);
    let mut h = match controls.stepper {
        Stepper::Adaptive => initial_step(&y, &ws.k[0], controls),
        Stepper::FixedStep { dt } => dt,
    };
    let mut err_prev: f64 = 1.0;
    let mut steps = 0usize;

    while t < spec.t_end {
        let target = next_report.min(spec.t_end);
        let remaining = target - t;
        let step = match controls.stepper {
            Stepper::Adaptive => h.min(remaining),
            Stepper::FixedStep { dt } => dt.min(remaining),
        };
        if step <= 1e-14 * t.abs().max(1.0) {
            if remaining <= 1e-12 * t.abs().max(1.0) {
                // Round-off left us a hair short of the report time.
                t = target;
                record_report(&mut t, target, &y, spec, &mut observable, &mut states);
                next_report = (next_report + controls.report_interval).min(spec.t_end);
                continue;
            }
            return Err(Error::StepUnderflow { t });
        }

        let accepted = match controls.stepper {
            Stepper::Adaptive => {
                let (err, rho) = dopri_step(sys, t, &y, step, &mut ws, controls);
                if !err.is_finite() {
                    h = step * 0.2;
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::NonFinite { t });
                    }
                    continue;
                }
                if err <= 1.0 {
                    // PI controller (Hairer's DOPRI5 constants).
                    let fac = 0.9 * err.max(1e-10).powf(-0.17) * err_prev.powf(0.04);
                    let grow = fac.clamp(0.2, 10.0);
                    if step == h {
                        h *= grow;
                    } else {
                        // Step was shortened to land on a report time.
                        h = h.max(step * grow);
                    }
                    if rho > 0.0 {
                        h = h.min(STIFF_CAP / rho);
                    }
                    err_prev = err.max(1e-4);
                    true
                } else {
                    let fac = 0.9 * err.powf(-0.2);
                    h = step * fac.clamp(0.2, 1.0);
                    false
                }
            }
            Stepper::FixedStep { .. } => {
                rk4_step(sys, t, &y, step, &mut ws);
                true
            }
        };
        if !accepted {
            continue;
        }

        steps += 1;
        t += step;
        std::mem::swap(&mut y, &mut ws.y_new);
        ws.k.swap(0, 6);
        if !finite(&y) || !finite(&ws.k[0]) {
            return Err(Error::NonFinite { t });
        }

        if (t - target).abs() <= 1e-12 * t.abs().max(1.0) {
            t = target;
            record_report(&mut t, target, &y, spec, &mut observable, &mut states);
            next_report = (next_report + controls.report_interval).min(spec.t_end);
        }

        residual = spec.norm.apply(&ws.k[0]);
        if residual < controls.steady_tol {
            let since = *below_since.get_or_insert(t);
            if spec.stop_when_steady && t - since >= controls.report_interval {
                if observable.last().map(|o| o.0) != Some(t) {
                    observable.push((t, (spec.observable)(&y)));
                    if spec.record_states {
                        states.push(y.clone());
                    }
                }
                return Ok(Run {
                    t,
                    y,
                    outcome: Outcome::Converged,
                    residual,
                    observable,
                    states,
                    steps,
                });
            }
        } else {
            below_since = None;
        }
    }

    let outcome = if !spec.stop_when_steady {
        Outcome::Horizon
    } else if oscillating(&observable, spec.t_end) {
        Outcome::LimitCycle
    } else {
        Outcome::TimeLimit
    };
    Ok(Run {
        t,
        y,
        outcome,
        residual,
        observable,
        states,
        steps,
    })
}

fn record_report(
    t: &mut f64,
    target: f64,
    y: &[f64],
    spec: &RunSpec<'_>,
    observable: &mut Vec<(f64, f64)>,
    states: &mut Vec<Vec<f64>>,
) {
    *t = target;
    observable.push((target, (spec.observable)(y)));
    if spec.record_states {
        states.push(y.to_vec());
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A run is oscillating when, over the last tenth of the horizon, the
/// observable turns around repeatedly with a non-negligible peak-to-peak
/// amplitude that has not decayed relative to the tenth before it.
fn oscillating(samples: &[(f64, f64)], t_end: f64) -> bool {
    let window = t_end / 10.0;
    let stats = |lo: f64, hi: f64| {
        let xs: Vec<f64> = samples
            .iter()
            .filter(|(t, _)| *t > lo && *t <= hi)
            .map(|&(_, x)| x)
            .collect();
        if xs.len() < 4 {
            return None;
        }
        let (min, max) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        let turns = xs
            .windows(3)
            .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
            .count();
        Some((max - min, turns))
    };
    let (Some((last, turns)), Some((prev, _))) = (
        stats(t_end - window, t_end),
        stats(t_end - 2.0 * window, t_end - window),
    ) else {
        return false;
    };
    turns >= 2 && last > 1e-6 && last > 0.5 * prev
}
