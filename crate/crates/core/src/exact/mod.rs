//! Full master-equation evolution for small networks.
//!
//! The density matrix of all `N` qubits is propagated under
//! `dρ/dt = −i[H, ρ] + Σ_L rate·(2LρL† − {L†L, ρ})` with
//! `H = Σ_j (Δ/2)σzʲ + (Ω/2)σxʲ + g Σ_{j≠k} σzʲσzᵏ`, pumping `σ₊ʲ` on
//! active qubits, decay `σ₋ʲ` on inactive ones and `σ₋ʲ − σ₋ᵏ` at rate `V/N`
//! for every ordered pair `j ≠ k`.

pub mod sparse;

use std::cell::Cell;

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{self, Controls, Outcome, ResidualNorm, RunSpec};
use sparse::{Operator, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z};

pub const MAX_QUBITS: usize = 10;

const TRACE_TOL: f64 = 1e-8;
const HERMITICITY_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpKind {
    Pump { site: usize },
    Decay { site: usize },
    Pair { j: usize, k: usize },
}

#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub kind: JumpKind,
    pub op: Operator,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct LindbladSystem {
    pub n_qubits: usize,
    pub n_active: usize,
    pub hamiltonian: Operator,
    pub jump_ops: Vec<JumpOperator>,
    /// `H − i Σ rate·L†L`.
    h_eff: Operator,
    /// `(c, L)` such that the recycling part of the generator is
    /// `Σ c·LρL†`.
    sandwiches: Vec<(f64, Operator)>,
}

/// Assembles the Hamiltonian and jump operators. `N·p` must be an integer.
pub fn build_system(params: &ModelParams) -> Result<LindbladSystem> {
    params.validate()?;
    let n = params.n_qubits;
    if n > MAX_QUBITS {
        return Err(Error::TooLarge {
            n_qubits: n,
            max: MAX_QUBITS,
        });
    }
    let split = params.integer_split()?;
    let dim = 1usize << n;
    let nf = n as f64;
    let re = |x: f64| Complex64::new(x, 0.0);

    let sz: Vec<Operator> = (0..n)
        .map(|j| sparse::site_operator(n, j, &SIGMA_Z))
        .collect();
    let sm: Vec<Operator> = (0..n)
        .map(|j| sparse::site_operator(n, j, &SIGMA_MINUS))
        .collect();
    let sp: Vec<Operator> = (0..n)
        .map(|j| sparse::site_operator(n, j, &SIGMA_PLUS))
        .collect();

    let mut h = sparse::zero(dim);
    for (j, z) in sz.iter().enumerate() {
        let sx = sparse::site_operator(n, j, &SIGMA_X);
        h = sparse::add(&h, &sparse::scaled(z, re(params.detuning / 2.0)));
        h = sparse::add(&h, &sparse::scaled(&sx, re(params.drive / 2.0)));
    }
    if params.coherent_coupling != 0.0 {
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let zz = sparse::mul(&sz[j], &sz[k]);
                    h = sparse::add(&h, &sparse::scaled(&zz, re(params.coherent_coupling)));
                }
            }
        }
    }

    let mut jump_ops = Vec::new();
    for j in 0..n {
        if j < split.n_active {
            jump_ops.push(JumpOperator {
                kind: JumpKind::Pump { site: j },
                op: sp[j].clone(),
                rate: params.kappa,
            });
        } else {
            jump_ops.push(JumpOperator {
                kind: JumpKind::Decay { site: j },
                op: sm[j].clone(),
                rate: params.kappa,
            });
        }
    }
    let v = params.dissipative_coupling;
    if v > 0.0 {
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let op = sparse::add(&sm[j], &sparse::scaled(&sm[k], re(-1.0)));
                    jump_ops.push(JumpOperator {
                        kind: JumpKind::Pair { j, k },
                        op,
                        rate: v / nf,
                    });
                }
            }
        }
    }

    let mut h_eff = h.clone();
    for jump in &jump_ops {
        let ldl = sparse::mul(&sparse::adjoint(&jump.op), &jump.op);
        h_eff = sparse::add(
            &h_eff,
            &sparse::scaled(&ldl, Complex64::new(0.0, -jump.rate)),
        );
    }

    // Pair recycling terms summed over ordered pairs collapse to
    // (4V/N)·[N Σ_j σ₋ʲρσ₊ʲ − J₋ρJ₊].
    let mut sandwiches = Vec::new();
    for j in 0..n {
        if j < split.n_active {
            sandwiches.push((2.0 * params.kappa, sp[j].clone()));
        } else {
            sandwiches.push((2.0 * params.kappa, sm[j].clone()));
        }
    }
    if v > 0.0 {
        let mut collective = sparse::zero(dim);
        for op in &sm {
            sandwiches.push((4.0 * v, op.clone()));
            collective = sparse::add(&collective, op);
        }
        sandwiches.push((-4.0 * v / nf, collective));
    }

    Ok(LindbladSystem {
        n_qubits: n,
        n_active: split.n_active,
        hamiltonian: h,
        jump_ops,
        h_eff,
        sandwiches,
    })
}

impl LindbladSystem {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Applies the generator to a Hermitian `ρ`. The result is assembled as
    /// `Z + Z†`, so it is Hermitian to the last bit and the flow cannot seed
    /// anti-Hermitian drift.
    pub fn liouvillian<'a>(
        &self,
        rho: impl Into<DMatrixView<'a, Complex64>>,
    ) -> DMatrix<Complex64> {
        let rho = rho.into();
        // −i(H_eff ρ − ρ H_eff†) = −iX + (−iX)†
        let mut z = sparse::apply(&self.h_eff, rho) * (-I);
        let rho_adj = rho.adjoint();
        for (c, l) in &self.sandwiches {
            sparse::add_sandwich(&mut z, Complex64::new(0.5 * c, 0.0), l, &rho_adj, l);
        }
        let z_adj = z.adjoint();
        z + z_adj
    }

    /// Same generator, one dissipator per listed jump operator.
    pub fn liouvillian_unreduced(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let h = sparse::to_dense(&self.hamiltonian);
        let mut out = (&h * rho - rho * &h) * (-I);
        for jump in &self.jump_ops {
            let l = sparse::to_dense(&jump.op);
            let ld = l.adjoint();
            let ldl = &ld * &l;
            out += (&l * rho * &ld * Complex64::new(2.0, 0.0) - &ldl * rho - rho * &ldl)
                * Complex64::new(jump.rate, 0.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub n_qubits: usize,
    pub matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// `(I/2)^⊗N`: every qubit half excited with no coherence.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self {
            n_qubits,
            matrix: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Product of single-qubit states, each with population `w_j` and
    /// coherence `q_j = ⟨g|ρ_j|e⟩`.
    pub fn product(sites: &[(f64, Complex64)]) -> Result<Self> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &(w, q) in sites {
            if !(0.0..=1.0).contains(&w) || q.norm_sqr() > w * (1.0 - w) + 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "initial state",
                    reason: format!(
                        "w = {w}, q = {q} is not a valid qubit state (need |q|² ≤ w(1−w))"
                    ),
                });
            }
            let local = DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(1.0 - w, 0.0),
                    q,
                    q.conj(),
                    Complex64::new(w, 0.0),
                ],
            );
            m = m.kronecker(&local);
        }
        Ok(Self {
            n_qubits: sites.len(),
            matrix: m,
        })
    }

    pub fn uniform_product(n_qubits: usize, w: f64, q: Complex64) -> Result<Self> {
        Self::product(&vec![(w, q); n_qubits])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix.as_view())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    /// `(1/N) Σ_j ⟨σ₊ʲσ₋ʲ⟩`.
    pub fn nbar(&self) -> f64 {
        nbar(&self.matrix.as_view(), self.n_qubits)
    }

    /// Reduced populations `w_j` and coherences `q_j = ⟨σ₊ʲ⟩`.
    pub fn site_expectations(&self) -> (Vec<f64>, Vec<Complex64>) {
        let n = self.n_qubits;
        let mut w = vec![0.0; n];
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let mask = 1 << (n - 1 - j);
            for a in 0..self.dim() {
                if a & mask != 0 {
                    w[j] += self.matrix[(a, a)].re;
                } else {
                    q[j] += self.matrix[(a, a | mask)];
                }
            }
        }
        (w, q)
    }

    /// Physicality check with the given tolerances on trace, Hermiticity and
    /// smallest eigenvalue.
    pub fn check(&self) -> std::result::Result<(), String> {
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(format!("trace = {tr}"));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(format!("|ρ − ρ†| = {herm:e}"));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(format!("eigenvalue {min:e}"));
        }
        Ok(())
    }
}

fn hermiticity_error(m: &DMatrixView<'_, Complex64>) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn nbar(m: &DMatrixView<'_, Complex64>, n_qubits: usize) -> f64 {
    (0..m.nrows())
        .map(|a| m[(a, a)].re * a.count_ones() as f64)
        .sum::<f64>()
        / n_qubits as f64
}

#[derive(Debug, Clone)]
pub struct ExactRun {
    /// `(t, n̄(t))` at t = 0 and every report time.
    pub nbar_trajectory: Vec<(f64, f64)>,
    pub steady_nbar: f64,
    pub outcome: Outcome,
    /// Frobenius norm of `dρ/dt` at the end.
    pub residual: f64,
    pub rho: DensityMatrix,
    /// Largest trace and Hermiticity deviations seen at report times.
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

/// Integrates `ρ` until `‖dρ/dt‖_F < steady_tol` or `t_max`. Trace and
/// Hermiticity are checked at every report time.
pub fn evolve_exact(
    system: &LindbladSystem,
    rho0: &DensityMatrix,
    controls: &Controls,
) -> Result<ExactRun> {
    evolve(system, rho0, controls, true)
}

/// Fixed-horizon evolution to `controls.t_max`, ignoring the steady stop.
pub fn evolve_for(
    system: &LindbladSystem,
    rho0: &DensityMatrix,
    controls: &Controls,
) -> Result<ExactRun> {
    evolve(system, rho0, controls, false)
}

fn evolve(
    system: &LindbladSystem,
    rho0: &DensityMatrix,
    controls: &Controls,
    stop_when_steady: bool,
) -> Result<ExactRun> {
    let d = system.dim();
    if rho0.n_qubits != system.n_qubits || rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: system.n_qubits,
            found: rho0.n_qubits,
        });
    }
    rho0.check()
        .map_err(|reason| Error::NonPhysical { t: 0.0, reason })?;

    fn view(y: &[f64], d: usize) -> DMatrixView<'_, Complex64> {
        DMatrixView::from_slice(bytemuck::cast_slice::<f64, Complex64>(y), d, d)
    }
    let sys = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let out = system.liouvillian(view(y, d));
        dy.copy_from_slice(bytemuck::cast_slice(out.as_slice()));
    };

    let max_trace = Cell::new(0.0_f64);
    let max_herm = Cell::new(0.0_f64);
    let observable = |y: &[f64]| {
        let m = view(y, d);
        max_trace.set(max_trace.get().max((m.trace() - 1.0).norm()));
        max_herm.set(max_herm.get().max(hermiticity_error(&m)));
        nbar(&m, system.n_qubits)
    };
    let spec = RunSpec {
        t_end: controls.t_max,
        stop_when_steady,
        norm: ResidualNorm::Euclidean,
        observable: &observable,
        record_states: false,
    };
    let y0: Vec<f64> = bytemuck::cast_slice(rho0.matrix.as_slice()).to_vec();
    let run = ode::integrate(&sys, y0, controls, &spec)?;

    if max_trace.get() > TRACE_TOL || max_herm.get() > HERMITICITY_TOL {
        return Err(Error::NonPhysical {
            t: run.t,
            reason: format!(
                "trace error {:e}, hermiticity error {:e}",
                max_trace.get(),
                max_herm.get()
            ),
        });
    }
    let rho = DensityMatrix {
        n_qubits: system.n_qubits,
        matrix: DMatrix::from_column_slice(d, d, bytemuck::cast_slice(&run.y)),
    };
    Ok(ExactRun {
        steady_nbar: rho.nbar(),
        nbar_trajectory: run.observable,
        outcome: run.outcome,
        residual: run.residual,
        rho,
        max_trace_error: max_trace.get(),
        max_hermiticity_error: max_herm.get(),
    })
}
