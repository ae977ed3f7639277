//! Per-qubit mean-field dynamics.
//!
//! The density matrix is approximated by a product of single-qubit states,
//! each described by its excited population `w_j` and coherence
//! `q_j = ⟨g|ρ_j|e⟩ = ⟨σ₊ʲ⟩`. Qubits `0..n_active` are pumped, the rest decay.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{self, Controls, Outcome, ResidualNorm, RunSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub w: Vec<f64>,
    pub q: Vec<Complex64>,
    pub n_active: usize,
}

impl MeanFieldState {
    /// Every qubit starts from the same `(w0, q0)`; the split comes from
    /// `params` and must be exact.
    pub fn uniform(params: &ModelParams, w0: f64, q0: Complex64) -> Result<Self> {
        let split = params.integer_split()?;
        let n = params.n_qubits;
        Ok(Self {
            w: vec![w0; n],
            q: vec![q0; n],
            n_active: split.n_active,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.w.len()
    }

    /// Mean excited population `(1/N) Σ w_j`.
    pub fn nbar(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }

    /// Mean coherence `(1/N) Σ q_j`.
    pub fn mean_coherence(&self) -> Complex64 {
        self.q.iter().sum::<Complex64>() / self.q.len() as f64
    }

    /// Largest violation of `|q_j|² ≤ w_j(1 − w_j)` (zero when every qubit is
    /// a valid single-qubit state).
    pub fn physicality_violation(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.q)
            .map(|(&w, q)| (q.norm_sqr() - w * (1.0 - w)).max(0.0))
            .fold(0.0, f64::max)
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        let n = params.n_qubits;
        for len in [self.w.len(), self.q.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if self.n_active > n {
            return Err(Error::InvalidParameter {
                name: "n_active",
                reason: format!("{} active qubits exceed N = {n}", self.n_active),
            });
        }
        Ok(())
    }

    /// Layout `[w_0.., Re q_0.., Im q_0..]`.
    fn to_vec(&self) -> Vec<f64> {
        let mut y = self.w.clone();
        y.extend(self.q.iter().map(|q| q.re));
        y.extend(self.q.iter().map(|q| q.im));
        y
    }

    fn from_slice(y: &[f64], n_active: usize) -> Self {
        let n = y.len() / 3;
        Self {
            w: y[..n].to_vec(),
            q: (0..n)
                .map(|j| Complex64::new(y[n + j], y[2 * n + j]))
                .collect(),
            n_active,
        }
    }
}

/// Time derivative of every `(w_j, q_j)`. Sums over the other qubits are
/// formed from the global totals minus the qubit's own term.
pub fn meanfield_rhs(state: &MeanFieldState, params: &ModelParams) -> Result<MeanFieldState> {
    state.check(params)?;
    let n = params.n_qubits;
    let mut dw = vec![0.0; n];
    let mut dq = vec![Complex64::new(0.0, 0.0); n];
    rhs_into(&state.w, &state.q, state.n_active, params, &mut dw, &mut dq);
    Ok(MeanFieldState {
        w: dw,
        q: dq,
        n_active: state.n_active,
    })
}

fn rhs_into(
    w: &[f64],
    q: &[Complex64],
    n_active: usize,
    params: &ModelParams,
    dw: &mut [f64],
    dq: &mut [Complex64],
) {
    let n = w.len() as f64;
    let ModelParams {
        detuning,
        drive,
        coherent_coupling: g,
        dissipative_coupling: v,
        kappa,
        ..
    } = *params;
    let gamma = params.loss_rate();
    let s_q: Complex64 = q.iter().sum();
    let s_w: f64 = w.iter().sum();
    for j in 0..w.len() {
        let others_q = s_q - q[j];
        // Σ'_k σz^k = Σ'_k (2w_k − 1)
        let others_z = 2.0 * (s_w - w[j]) - (n - 1.0);
        let mut d = drive * q[j].im - gamma * w[j] + 4.0 * v / n * (q[j] * others_q.conj()).re;
        if j < n_active {
            d += 2.0 * kappa;
        }
        dw[j] = d;
        dq[j] = I * (detuning + 4.0 * g * others_z) * q[j] + I * (drive / 2.0) * (1.0 - 2.0 * w[j])
            - kappa * q[j]
            - 4.0 * v / n * w[j] * others_q
            - 2.0 * v * (n - 1.0) / n * q[j]
            + 2.0 * v / n * others_q;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSteady {
    pub state: MeanFieldState,
    pub nbar: f64,
    pub outcome: Outcome,
    pub residual: f64,
}

/// Integrates to a steady state. `N·p` must be an integer and `init` must
/// carry the matching number of active qubits.
pub fn integrate_meanfield(
    params: &ModelParams,
    init: &MeanFieldState,
    controls: &Controls,
) -> Result<MeanFieldSteady> {
    params.validate()?;
    let split = params.integer_split()?;
    init.check(params)?;
    if init.n_active != split.n_active {
        return Err(Error::InvalidParameter {
            name: "n_active",
            reason: format!(
                "initial state has {} active qubits, parameters imply {}",
                init.n_active, split.n_active
            ),
        });
    }
    let y0 = init.to_vec();
    if !y0.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let n = params.n_qubits;
    let n_active = split.n_active;
    let params = *params;
    let sys = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let q: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(y[n + j], y[2 * n + j]))
            .collect();
        let mut dq = vec![Complex64::new(0.0, 0.0); n];
        let (dw, rest) = dy.split_at_mut(n);
        rhs_into(&y[..n], &q, n_active, &params, dw, &mut dq);
        let (re, im) = rest.split_at_mut(n);
        for j in 0..n {
            re[j] = dq[j].re;
            im[j] = dq[j].im;
        }
    };
    let observable = |y: &[f64]| y[..n].iter().sum::<f64>() / n as f64;
    let spec = RunSpec {
        t_end: controls.t_max,
        stop_when_steady: true,
        norm: ResidualNorm::Max,
        observable: &observable,
        record_states: false,
    };
    let run = ode::integrate(&sys, y0, controls, &spec)?;
    let state = MeanFieldState::from_slice(&run.y, n_active);
    Ok(MeanFieldSteady {
        nbar: state.nbar(),
        state,
        outcome: run.outcome,
        residual: run.residual,
    })
}

/// Correlation terms dropped by the product-state approximation. They are
/// exactly the gap between the collective equations evaluated at the
/// averaged state and the average of the per-qubit equations:
/// `m2` on the population line, `m1 + m3` on the coherence line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDiagnostics {
    pub m1: Complex64,
    pub m2: f64,
    pub m3: Complex64,
}

pub fn correlation_diagnostics(
    state: &MeanFieldState,
    params: &ModelParams,
) -> Result<CorrelationDiagnostics> {
    state.check(params)?;
    let n = params.n_qubits as f64;
    let g = params.coherent_coupling;
    let v = params.dissipative_coupling;
    let wq: Complex64 = state.w.iter().zip(&state.q).map(|(&w, &q)| w * q).sum();
    let qq: f64 = state.q.iter().map(|q| q.norm_sqr()).sum();
    Ok(CorrelationDiagnostics {
        m1: I * (8.0 * g / n) * wq,
        m2: 4.0 * v / (n * n) * qq,
        m3: -(4.0 * v / (n * n)) * wq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::{collective_rhs, steady_state, CollectiveState};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut StdRng, n: usize, n_active: usize) -> MeanFieldState {
        MeanFieldState {
            w: (0..n).map(|_| rng.random::<f64>()).collect(),
            q: (0..n)
                .map(|_| Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                .collect(),
            n_active,
        }
    }

    /// Double loop over ordered pairs, written term by term.
    fn brute_rhs(s: &MeanFieldState, p: &ModelParams) -> MeanFieldState {
        let n = s.w.len();
        let nf = n as f64;
        let (d, om, g, v, k) = (
            p.detuning,
            p.drive,
            p.coherent_coupling,
            p.dissipative_coupling,
            p.kappa,
        );
        let mut out = MeanFieldState {
            w: vec![0.0; n],
            q: vec![Complex64::default(); n],
            n_active: s.n_active,
        };
        for j in 0..n {
            let mut pump = 0.0;
            let mut field = 0.0;
            let mut sum_q = Complex64::default();
            for kk in 0..n {
                if kk == j {
                    continue;
                }
                pump += (s.q[j] * s.q[kk].conj() + s.q[j].conj() * s.q[kk]).re;
                field += 2.0 * s.w[kk] - 1.0;
                sum_q += s.q[kk];
            }
            out.w[j] = om * s.q[j].im - (2.0 * k + 4.0 * v * (nf - 1.0) / nf) * s.w[j]
                + 2.0 * v / nf * pump
                + if j < s.n_active { 2.0 * k } else { 0.0 };
            out.q[j] = I * (d + 4.0 * g * field) * s.q[j] + I * om / 2.0 * (1.0 - 2.0 * s.w[j])
                - k * s.q[j]
                - 4.0 * v / nf * s.w[j] * sum_q
                - 2.0 * v * (nf - 1.0) / nf * s.q[j]
                + 2.0 * v / nf * sum_q;
        }
        out
    }

    #[test]
    fn linear_sums_match_double_loop() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let params = ModelParams::default().with_n_qubits(7);
            let s = random_state(&mut rng, 7, 3);
            let fast = meanfield_rhs(&s, &params).unwrap();
            let slow = brute_rhs(&s, &params);
            for j in 0..7 {
                assert!((fast.w[j] - slow.w[j]).abs() < 1e-12);
                assert!((fast.q[j] - slow.q[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_coherences() {
        let params = ModelParams::default()
            .with_n_qubits(5)
            .with_dissipative_coupling(0.0);
        let s = MeanFieldState {
            w: vec![0.1, 0.2, 0.3, 0.4, 0.9],
            q: vec![Complex64::default(); 5],
            n_active: 2,
        };
        let d = meanfield_rhs(&s, &params).unwrap();
        for j in 0..5 {
            let pump = if j < 2 { 2.0 } else { 0.0 };
            assert!((d.w[j] - (pump - 2.0 * s.w[j])).abs() < 1e-14);
            let expect = I * params.drive / 2.0 * (1.0 - 2.0 * s.w[j]);
            assert!((d.q[j] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn block_symmetry_of_the_derivative() {
        let params = ModelParams::default().with_n_qubits(10);
        let (wa, wi) = (0.63, 0.21);
        let (qa, qi) = (Complex64::new(0.2, -0.1), Complex64::new(-0.05, 0.3));
        let s = MeanFieldState {
            w: (0..10).map(|j| if j < 6 { wa } else { wi }).collect(),
            q: (0..10).map(|j| if j < 6 { qa } else { qi }).collect(),
            n_active: 6,
        };
        let d = meanfield_rhs(&s, &params).unwrap();
        for j in 1..6 {
            assert_eq!(d.w[j], d.w[0]);
            assert_eq!(d.q[j], d.q[0]);
        }
        for j in 7..10 {
            assert_eq!(d.w[j], d.w[6]);
            assert_eq!(d.q[j], d.q[6]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let params = ModelParams::default().with_n_qubits(4);
        let s = MeanFieldState {
            w: vec![0.5; 3],
            q: vec![Complex64::default(); 3],
            n_active: 3,
        };
        assert!(matches!(
            meanfield_rhs(&s, &params),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn non_integer_split_is_rejected() {
        let params = ModelParams::default()
            .with_n_qubits(7)
            .with_inactive_ratio(0.5);
        assert!(matches!(
            MeanFieldState::uniform(&params, 0.5, Complex64::new(0.5, 0.0)),
            Err(Error::NonIntegerSplit { .. })
        ));
        let good = ModelParams::default()
            .with_n_qubits(8)
            .with_inactive_ratio(0.5);
        let init = MeanFieldState::uniform(&good, 0.5, Complex64::new(0.5, 0.0)).unwrap();
        assert!(matches!(
            integrate_meanfield(&params, &init, &Controls::default()),
            Err(Error::NonIntegerSplit { .. })
        ));
    }

    #[test]
    fn undriven_decoupled_qubits() {
        let params = ModelParams::default()
            .with_n_qubits(10)
            .with_drive(0.0)
            .with_coherent_coupling(0.0)
            .with_dissipative_coupling(0.0)
            .with_inactive_ratio(0.3);
        let init = MeanFieldState::uniform(&params, 0.5, Complex64::new(0.5, 0.0)).unwrap();
        let res = integrate_meanfield(&params, &init, &Controls::default()).unwrap();
        assert!(res.outcome.converged());
        assert!((res.nbar - 0.7).abs() < 1e-8);
        for j in 0..10 {
            let target = if j < 7 { 1.0 } else { 0.0 };
            assert!((res.state.w[j] - target).abs() < 1e-8);
        }
    }

    #[test]
    fn uncoupled_limit_matches_collective() {
        let base = ModelParams::default()
            .with_coherent_coupling(0.0)
            .with_dissipative_coupling(0.0);
        for p in [0.0, 0.37, 0.8] {
            let params = base.with_inactive_ratio(p);
            let init = MeanFieldState::uniform(&params, 0.5, Complex64::new(0.5, 0.0)).unwrap();
            let mf = integrate_meanfield(&params, &init, &Controls::default()).unwrap();
            let (coll, _) =
                steady_state(&params, p, &CollectiveState::half(), &Controls::default()).unwrap();
            assert!(
                (mf.nbar - coll.q).abs() < 1e-6,
                "p={p}: {} vs {}",
                mf.nbar,
                coll.q
            );
        }
    }

    #[test]
    fn integration_keeps_blocks_and_bounds() {
        let params = ModelParams::default()
            .with_n_qubits(20)
            .with_inactive_ratio(0.8);
        let init = MeanFieldState::uniform(&params, 0.5, Complex64::new(0.5, 0.0)).unwrap();
        let res =
            integrate_meanfield(&params, &init, &Controls::default().with_t_max(100.0)).unwrap();
        let s = &res.state;
        for j in 0..20 {
            let r = if j < s.n_active { 0 } else { s.n_active };
            assert!((s.w[j] - s.w[r]).abs() < 1e-8);
            assert!((s.q[j] - s.q[r]).norm() < 1e-8);
            assert!(s.w[j] > -1e-6 && s.w[j] < 1.0 + 1e-6);
        }
        assert!(s.physicality_violation() < 1e-6);
    }

    #[test]
    fn diagnostics_close_the_gap_to_the_collective_equations() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 9;
            let params = ModelParams::default().with_n_qubits(n);
            let s = random_state(&mut rng, n, 5);
            let p = (n - s.n_active) as f64 / n as f64;
            let d = meanfield_rhs(&s, &params).unwrap();
            let avg = MeanFieldState {
                w: vec![s.nbar()],
                q: vec![s.mean_coherence()],
                n_active: 0,
            };
            let davg_w = d.w.iter().sum::<f64>() / n as f64;
            let davg_q = d.q.iter().sum::<Complex64>() / n as f64;
            let coll = collective_rhs(&CollectiveState::new(avg.w[0], avg.q[0]), &params, p);
            let m = correlation_diagnostics(&s, &params).unwrap();
            assert!((coll.q - davg_w - m.m2).abs() < 1e-12);
            assert!((coll.a - davg_q - (m.m1 + m.m3)).norm() < 1e-12);
        }
    }

    #[test]
    fn diagnostics_match_direct_sums() {
        let mut rng = StdRng::seed_from_u64(3);
        let params = ModelParams::default().with_n_qubits(9);
        let s = random_state(&mut rng, 9, 4);
        let m = correlation_diagnostics(&s, &params).unwrap();
        let (mut m1, mut m2, mut m3) = (Complex64::default(), 0.0, Complex64::default());
        let nf = 9.0;
        for j in 0..9 {
            let sp = s.q[j];
            let pop = s.w[j];
            m1 += I * 8.0 * params.coherent_coupling / nf * sp * pop;
            m2 += 4.0 * params.dissipative_coupling / (nf * nf) * (sp * sp.conj()).re;
            m3 -= 4.0 * params.dissipative_coupling / (nf * nf) * sp * pop;
        }
        assert!((m.m1 - m1).norm() < 1e-12);
        assert!((m.m2 - m2).abs() < 1e-12);
        assert!((m.m3 - m3).norm() < 1e-12);

        let zero_v = correlation_diagnostics(&s, &params.with_dissipative_coupling(0.0)).unwrap();
        assert_eq!(zero_v.m2, 0.0);
        assert_eq!(zero_v.m3, Complex64::default());

        let quiet = MeanFieldState {
            q: vec![Complex64::default(); 9],
            ..s
        };
        let zero = correlation_diagnostics(&quiet, &params).unwrap();
        assert_eq!(
            (zero.m1, zero.m2, zero.m3),
            (Complex64::default(), 0.0, Complex64::default())
        );
    }
}
