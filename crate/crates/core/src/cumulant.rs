//! Collective moments with pair correlations kept (dissipative coupling
//! switched off).
//!
//! Besides `⟨Q⟩` and `⟨A⟩` the state tracks the pair moments
//! `B = (1/N) Σ_j Σ_{k≠j} σ₊ʲσ₋ᵏ`, `C = (1/N) Σ Σ σ₊ʲσ₊ᵏσ₋ᵏ`,
//! `D = (1/N) Σ Σ σ₊ʲσ₊ᵏ` and `E = (1/N) Σ Σ σ₊ʲσ₋ʲσ₊ᵏσ₋ᵏ`; three-qubit
//! expectations are closed by the second-order cumulant expansion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_ratio, ModelParams};
use crate::ode::{self, Controls, Outcome, ResidualNorm, RunSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CumulantState {
    pub q: f64,
    pub a: Complex64,
    pub b: f64,
    pub c: Complex64,
    pub d: Complex64,
    pub e: f64,
}

impl CumulantState {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Moments of the uncorrelated state in which every qubit has population
    /// `q` and coherence `a`.
    pub fn product(n_qubits: usize, q: f64, a: Complex64) -> Self {
        let pairs = n_qubits as f64 - 1.0;
        Self {
            q,
            a,
            b: pairs * a.norm_sqr(),
            c: pairs * a * q,
            d: pairs * a * a,
            e: pairs * q * q,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.q, self.a.re, self.a.im, self.b, self.c.re, self.c.im, self.d.re, self.d.im,
            self.e,
        ]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            q: y[0],
            a: Complex64::new(y[1], y[2]),
            b: y[3],
            c: Complex64::new(y[4], y[5]),
            d: Complex64::new(y[6], y[7]),
            e: y[8],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// Time derivative, plus the imaginary parts picked up by `dB/dt` and
/// `dE/dt` when they are evaluated in complex arithmetic (zero for a
/// consistent system).
fn derivative(s: &CumulantState, params: &ModelParams, p: f64) -> (CumulantState, f64) {
    let n = params.n_qubits as f64;
    let (delta, om, g, k) = (
        params.detuning,
        params.drive,
        params.coherent_coupling,
        params.kappa,
    );
    let (q, a, c, d) = (s.q, s.a, s.c, s.d);
    let b = Complex64::new(s.b, 0.0);
    let e = Complex64::new(s.e, 0.0);

    let dq = om * a.im - 2.0 * k * q + 2.0 * k * (1.0 - p);
    let da = I * om / 2.0 * (1.0 - 2.0 * q)
        + (I * (delta - 4.0 * g * (n - 1.0)) - k) * a
        + 8.0 * I * g * c;
    let db = I * om * (c - c.conj()) - I * om * (n - 1.0) / 2.0 * (a - a.conj()) - 2.0 * k * b;
    // The bracket keeps both C(2NQ − N + 2) and the separate 2NQ·C term.
    let dc = I * om * (n - 1.0) / 2.0 * q + 2.0 * k * n * (1.0 - p) * a + I * om / 2.0 * b
        - I * om / 2.0 * d
        - I * om * e
        + (I * delta + 4.0 * I * g - 3.0 * k) * c
        + 4.0
            * I
            * g
            * (c * (2.0 * n * q - n + 2.0) + 2.0 * n * q * c + 2.0 * n * a * e
                - 4.0 * n * n * a * q * q);
    let dd = I * om * (n - 1.0) * a - 2.0 * I * om * c
        + (2.0 * I * delta - 2.0 * k) * d
        + 8.0 * I * g * (d * (2.0 * n * q - n + 2.0) + 4.0 * n * a * c - 4.0 * n * n * a * a * q);
    let de = 4.0 * k * n * (1.0 - p) * q - I * om * (c - c.conj()) - 4.0 * k * e;

    let imag = db.im.abs().max(de.im.abs());
    (
        CumulantState {
            q: dq,
            a: da,
            b: db.re,
            c: dc,
            d: dd,
            e: de.re,
        },
        imag,
    )
}

fn require_zero_v(params: &ModelParams) -> Result<()> {
    let v = params.dissipative_coupling;
    if v != 0.0 {
        return Err(Error::RequiresZeroV { v });
    }
    Ok(())
}

pub fn cumulant_rhs(state: &CumulantState, params: &ModelParams, p: f64) -> Result<CumulantState> {
    require_zero_v(params)?;
    Ok(derivative(state, params, p).0)
}

/// Largest imaginary part produced by the `B` and `E` equations at `state`.
pub fn reality_residual(state: &CumulantState, params: &ModelParams, p: f64) -> Result<f64> {
    require_zero_v(params)?;
    Ok(derivative(state, params, p).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantSteady {
    pub state: CumulantState,
    pub nbar: f64,
    pub outcome: Outcome,
    pub residual: f64,
    /// Largest imaginary drift of `dB/dt`, `dE/dt` seen at report times.
    pub max_reality_residual: f64,
}

pub fn integrate_cumulant(
    params: &ModelParams,
    p: f64,
    init: &CumulantState,
    controls: &Controls,
) -> Result<CumulantSteady> {
    params.validate()?;
    require_zero_v(params)?;
    check_ratio(p)?;
    if !init.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let params = *params;
    let sys = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (d, _) = derivative(&CumulantState::from_slice(y), &params, p);
        dy.copy_from_slice(&d.to_vec());
    };
    let drift = std::cell::Cell::new(0.0_f64);
    let observable = |y: &[f64]| {
        let (_, imag) = derivative(&CumulantState::from_slice(y), &params, p);
        drift.set(drift.get().max(imag));
        y[0]
    };
    let spec = RunSpec {
        t_end: controls.t_max,
        stop_when_steady: true,
        norm: ResidualNorm::Max,
        observable: &observable,
        record_states: false,
    };
    let run = ode::integrate(&sys, init.to_vec(), controls, &spec)?;
    let state = CumulantState::from_slice(&run.y);
    Ok(CumulantSteady {
        state,
        nbar: state.q,
        outcome: run.outcome,
        residual: run.residual,
        max_reality_residual: drift.get(),
    })
}
