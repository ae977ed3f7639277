//! Closed collective-motion equations for (⟨Q⟩, ⟨A⟩, ⟨A⟩*) and linear
//! stability of their fixed points.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_ratio, solve_fixed_points, FixedPoint, FixedPointSet, ModelParams};
use crate::ode::{self, Controls, Outcome, ResidualNorm, RunSpec};

/// Eigenvalue real parts within this margin of zero are marginal.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Mean excited-state population `q` = ⟨Q⟩ and mean coherence `a` = ⟨A⟩.
/// The third variable ⟨A⟩* is `a.conj()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveState {
    pub q: f64,
    pub a: Complex64,
}

impl CollectiveState {
    pub fn new(q: f64, a: Complex64) -> Self {
        Self { q, a }
    }

    /// The initial condition used throughout: ⟨Q⟩₀ = ⟨A⟩₀ = 0.5.
    pub fn half() -> Self {
        Self::new(0.5, Complex64::new(0.5, 0.0))
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.q, self.a.re, self.a.im]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new(y[0], Complex64::new(y[1], y[2]))
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.a.re.is_finite() && self.a.im.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.q.abs().max(self.a.re.abs()).max(self.a.im.abs())
    }
}

/// Time derivative of the collective state.
pub fn collective_rhs(state: &CollectiveState, params: &ModelParams, p: f64) -> CollectiveState {
    let CollectiveState { q, a } = *state;
    let i = Complex64::i();
    let n = params.n_qubits as f64;
    let kappa = params.kappa;
    let v = params.dissipative_coupling;
    let omega = params.drive;

    let dq =
        omega * a.im - params.loss_rate() * q + 2.0 * kappa * (1.0 - p) + 4.0 * v * a.norm_sqr();
    let phase = params.shifted_detuning() + 8.0 * params.coherent_coupling * n * q;
    let da = i * phase * a + i * omega / 2.0 * (1.0 - 2.0 * q) - (kappa + 4.0 * v * q) * a;
    CollectiveState::new(dq, da)
}

/// Analytic Jacobian of [`collective_rhs`] in the real coordinates
/// `(q, Re a, Im a)`.
pub fn jacobian(state: &CollectiveState, params: &ModelParams) -> Matrix3<f64> {
    let CollectiveState { q, a } = *state;
    let (x, y) = (a.re, a.im);
    let n = params.n_qubits as f64;
    let g = params.coherent_coupling;
    let v = params.dissipative_coupling;
    let omega = params.drive;
    let phase = params.shifted_detuning() + 8.0 * g * n * q;
    let damping = params.kappa + 4.0 * v * q;

    Matrix3::new(
        -params.loss_rate(),
        8.0 * v * x,
        omega + 8.0 * v * y,
        -8.0 * g * n * y - 4.0 * v * x,
        -damping,
        -phase,
        8.0 * g * n * x - 4.0 * v * y - omega,
        phase,
        -damping,
    )
}

/// The linearization in the perturbation variables (δ⟨Q⟩, δ⟨A⟩, δ⟨A⟩*)
/// around a fixed point. Similar to [`jacobian`]: `M = T J T⁻¹` with
/// `T = [[1,0,0],[0,1,i],[0,1,−i]]`.
pub fn linearization(params: &ModelParams, fp: &FixedPoint) -> Matrix3<Complex64> {
    let i = Complex64::i();
    let n = params.n_qubits as f64;
    let g = params.coherent_coupling;
    let v = params.dissipative_coupling;
    let omega = params.drive;
    let kappa = params.kappa;
    let shifted = params.shifted_detuning();
    let z = fp.coherence;
    let zc = z.conj();
    let q = fp.nbar;
    let c = |x: f64| Complex64::new(x, 0.0);

    Matrix3::new(
        c(-params.loss_rate()),
        -i * omega / 2.0 + 4.0 * v * zc,
        i * omega / 2.0 + 4.0 * v * z,
        -i * omega + (i * 8.0 * g * n - 4.0 * v) * z,
        i * shifted - kappa + (i * 8.0 * g * n - 4.0 * v) * q,
        c(0.0),
        i * omega - (i * 8.0 * g * n + 4.0 * v) * zc,
        c(0.0),
        -i * shifted - kappa - (i * 8.0 * g * n + 4.0 * v) * q,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Sorted by descending real part.
    pub eigenvalues: [Complex64; 3],
    pub max_real_part: f64,
    pub class: Stability,
    pub stable: bool,
}

impl StabilityReport {
    pub fn from_eigenvalues(mut eigenvalues: [Complex64; 3]) -> Self {
        eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re));
        let max_real_part = eigenvalues[0].re;
        let class = if max_real_part < -STABILITY_MARGIN {
            Stability::Stable
        } else if max_real_part <= STABILITY_MARGIN {
            Stability::Marginal
        } else {
            Stability::Unstable
        };
        Self {
            eigenvalues,
            max_real_part,
            class,
            stable: class == Stability::Stable,
        }
    }
}

/// Eigenvalues of the linearization at a fixed point and the resulting
/// stability class.
pub fn stability(params: &ModelParams, fp: &FixedPoint) -> StabilityReport {
    let state = CollectiveState::new(fp.nbar, fp.coherence);
    let ev = jacobian(&state, params).complex_eigenvalues();
    StabilityReport::from_eigenvalues([ev[0], ev[1], ev[2]])
}

/// [`solve_fixed_points`] with a stability report attached to every point.
pub fn classify_fixed_points(params: &ModelParams, p: f64) -> Result<FixedPointSet> {
    let mut set = solve_fixed_points(params, p)?;
    for fp in &mut set.points {
        fp.stability = Some(stability(params, fp));
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Report times (units 1/κ), plus the stopping time.
    pub times: Vec<f64>,
    pub states: Vec<CollectiveState>,
    pub outcome: Outcome,
    pub converged: bool,
    /// Final state when converged.
    pub steady: Option<CollectiveState>,
    pub final_state: CollectiveState,
    /// ‖RHS‖∞ at the final state.
    pub residual: f64,
}

impl Trajectory {
    /// Final ⟨Q⟩, whether or not the run converged.
    pub fn nbar(&self) -> f64 {
        self.final_state.q
    }
}

fn run(
    params: &ModelParams,
    p: f64,
    init: &CollectiveState,
    controls: &Controls,
    record: bool,
) -> Result<ode::Run> {
    params.validate()?;
    check_ratio(p)?;
    if !init.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let params = *params;
    let sys = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let d = collective_rhs(&CollectiveState::from_slice(y), &params, p);
        dy[0] = d.q;
        dy[1] = d.a.re;
        dy[2] = d.a.im;
    };
    let observable = |y: &[f64]| y[0];
    let spec = RunSpec {
        t_end: controls.t_max,
        stop_when_steady: true,
        norm: ResidualNorm::Max,
        observable: &observable,
        record_states: record,
    };
    ode::integrate(&sys, init.to_vec(), controls, &spec)
}

/// Integrates from `init` until the steady-state criterion holds or
/// `controls.t_max` is reached.
pub fn integrate_to_steady(
    params: &ModelParams,
    p: f64,
    init: &CollectiveState,
    controls: &Controls,
) -> Result<Trajectory> {
    let run = run(params, p, init, controls, true)?;
    let final_state = CollectiveState::from_slice(&run.y);
    let converged = run.outcome.converged();
    Ok(Trajectory {
        times: run.observable.iter().map(|o| o.0).collect(),
        states: run
            .states
            .iter()
            .map(|y| CollectiveState::from_slice(y))
            .collect(),
        outcome: run.outcome,
        converged,
        steady: converged.then_some(final_state),
        final_state,
        residual: run.residual,
    })
}

/// Steady state only, without recording the trajectory.
pub fn steady_state(
    params: &ModelParams,
    p: f64,
    init: &CollectiveState,
    controls: &Controls,
) -> Result<(CollectiveState, Outcome)> {
    let run = run(params, p, init, controls, false)?;
    Ok((CollectiveState::from_slice(&run.y), run.outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RootLabel;

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn fixed_points_are_stationary() {
        let params = reference();
        for p in [0.2, 0.5, 0.75, 0.8, 0.95] {
            for fp in solve_fixed_points(&params, p).unwrap().points {
                let d = collective_rhs(&CollectiveState::new(fp.nbar, fp.coherence), &params, p);
                assert!(d.max_abs() < 1e-8, "p = {p}, {:?}", fp.label);
            }
        }
    }

    #[test]
    fn undriven_uncoupled_balance() {
        let params = reference().with_drive(0.0).with_dissipative_coupling(0.0);
        let p = 0.3;
        let d = collective_rhs(
            &CollectiveState::new(1.0 - p, Complex64::new(0.0, 0.0)),
            &params,
            p,
        );
        assert!(d.max_abs() < 1e-15);
        let traj = integrate_to_steady(&params, p, &CollectiveState::half(), &Controls::default())
            .unwrap();
        assert!(traj.converged);
        assert!((traj.nbar() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn decoupled_eigenvalues() {
        let params = reference()
            .with_drive(0.0)
            .with_coherent_coupling(0.0)
            .with_dissipative_coupling(0.0);
        let set = classify_fixed_points(&params, 0.4).unwrap();
        let report = set.points[0].stability.unwrap();
        let mut ev = report.eigenvalues.to_vec();
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        let expected = [
            Complex64::new(-1.0, -3.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(-1.0, 3.0),
        ];
        for (got, want) in ev.iter().zip(expected) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
        assert!(report.stable);
    }

    #[test]
    fn complex_linearization_is_similar_to_real_jacobian() {
        let params = reference();
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let t = Matrix3::new(one, zero, zero, zero, one, i, zero, one, -i);
        let t_inv = t.try_inverse().unwrap();
        for p in [0.3, 0.8] {
            for fp in solve_fixed_points(&params, p).unwrap().points {
                let j = jacobian(&CollectiveState::new(fp.nbar, fp.coherence), &params)
                    .map(|x| Complex64::new(x, 0.0));
                let m = linearization(&params, &fp);
                let diff = (t * j * t_inv - m).norm();
                assert!(diff < 1e-12, "p = {p}: {diff}");
            }
        }
    }

    #[test]
    fn bistable_point_stability_pattern() {
        let set = classify_fixed_points(&reference(), 0.8).unwrap();
        let class = |label| set.get(label).unwrap().stability.unwrap().class;
        assert_eq!(class(RootLabel::N1), Stability::Stable);
        assert_eq!(class(RootLabel::N2), Stability::Stable);
        assert_eq!(class(RootLabel::N3), Stability::Unstable);
    }

    #[test]
    fn marginal_classification() {
        let z = Complex64::new(0.0, 1.0);
        let r = StabilityReport::from_eigenvalues([Complex64::new(-1.0, 0.0), z, z.conj()]);
        assert_eq!(r.class, Stability::Marginal);
        assert!(!r.stable);
    }

    /// The three lines with q complex and ⟨A⟩, ⟨A⟩* independent, written out
    /// directly from the equations of motion.
    fn unreduced_rhs(y: [Complex64; 3], params: &ModelParams, p: f64) -> [Complex64; 3] {
        let [q, a, b] = y;
        let i = Complex64::i();
        let n = params.n_qubits as f64;
        let (g, v, om, k) = (
            params.coherent_coupling,
            params.dissipative_coupling,
            params.drive,
            params.kappa,
        );
        let im_a = (a - b) / (2.0 * i);
        let dq = om * im_a - params.loss_rate() * q + 2.0 * k * (1.0 - p) + 4.0 * v * a * b;
        let phase = params.shifted_detuning() + 8.0 * g * n * q;
        let da = i * phase * a + i * om / 2.0 * (1.0 - 2.0 * q) - (k + 4.0 * v * q) * a;
        let db = -i * phase * b - i * om / 2.0 * (1.0 - 2.0 * q) - (k + 4.0 * v * q) * b;
        [dq, da, db]
    }

    #[test]
    fn flow_preserves_conjugation_symmetry() {
        let params = reference();
        let p = 0.8;
        let a0 = Complex64::new(0.5, 0.0);
        let mut y = [Complex64::new(0.5, 0.0), a0, a0.conj()];
        let dt = 1e-3;
        let add = |y: [Complex64; 3], k: [Complex64; 3], h: f64| {
            [y[0] + k[0] * h, y[1] + k[1] * h, y[2] + k[2] * h]
        };
        let mut max_im_q: f64 = 0.0;
        let mut max_conj: f64 = 0.0;
        for _ in 0..20_000 {
            let k1 = unreduced_rhs(y, &params, p);
            let k2 = unreduced_rhs(add(y, k1, dt / 2.0), &params, p);
            let k3 = unreduced_rhs(add(y, k2, dt / 2.0), &params, p);
            let k4 = unreduced_rhs(add(y, k3, dt), &params, p);
            for c in 0..3 {
                y[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (dt / 6.0);
            }
            max_im_q = max_im_q.max(y[0].im.abs());
            max_conj = max_conj.max((y[2] - y[1].conj()).norm());
        }
        assert!(max_im_q < 1e-10, "{max_im_q}");
        assert!(max_conj < 1e-10, "{max_conj}");

        // and the reduced solver lands on the same state at t = 20
        let controls = Controls::default().with_tolerances(1e-12, 1e-11);
        let sys = |_t: f64, s: &[f64], ds: &mut [f64]| {
            let d = collective_rhs(&CollectiveState::from_slice(s), &params, p);
            ds.copy_from_slice(&d.to_vec());
        };
        let observable = |s: &[f64]| s[0];
        let spec = RunSpec {
            t_end: 20.0,
            stop_when_steady: false,
            norm: ResidualNorm::Max,
            observable: &observable,
            record_states: false,
        };
        let run = ode::integrate(&sys, CollectiveState::half().to_vec(), &controls, &spec).unwrap();
        assert!((run.y[0] - y[0].re).abs() < 1e-7);
        assert!((Complex64::new(run.y[1], run.y[2]) - y[1]).norm() < 1e-7);
    }

    #[test]
    fn non_finite_init_rejected() {
        let bad = CollectiveState::new(f64::NAN, Complex64::new(0.0, 0.0));
        assert!(matches!(
            integrate_to_steady(&reference(), 0.5, &bad, &Controls::default()),
            Err(Error::NonFinite { .. })
        ));
    }
}
