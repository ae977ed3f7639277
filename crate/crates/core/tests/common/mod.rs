//! Independent reference implementations used by the integration suites.
#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;
use qubit_aging::collective::{collective_rhs, CollectiveState};
use qubit_aging::meanfield::MeanFieldState;
use qubit_aging::model::ModelParams;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Real roots of `a x³ + b x² + c x + d` by bisection between the critical
/// points. Requires `a != 0`.
pub fn cubic_roots_bisection(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let f = |x: f64| ((a * x + b) * x + c) * x + d;
    // Critical points of 3a x² + 2b x + c.
    let (qa, qb, qc) = (3.0 * a, 2.0 * b, c);
    let disc = qb * qb - 4.0 * qa * qc;
    let mut breaks = Vec::new();
    if disc > 0.0 {
        let s = disc.sqrt();
        let t = -0.5 * (qb + qb.signum() * s);
        let mut r = vec![t / qa, qc / t];
        r.sort_by(f64::total_cmp);
        breaks = r;
    }
    // Cauchy bound on root magnitude.
    let bound = 1.0 + [b, c, d].iter().map(|x| (x / a).abs()).fold(0.0, f64::max);
    let mut edges = vec![-bound];
    edges.extend(breaks.iter().copied().filter(|x| x.abs() < bound));
    edges.push(bound);
    let mut roots = Vec::new();
    for w in edges.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    roots
}

/// Central finite-difference Jacobian of the collective flow in
/// `(q, Re a, Im a)`.
pub fn fd_jacobian(state: &CollectiveState, params: &ModelParams, p: f64) -> Matrix3<f64> {
    let base = [state.q, state.a.re, state.a.im];
    let mut j = Matrix3::zeros();
    for col in 0..3 {
        let h = 1e-6 * (1.0 + base[col].abs());
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let fp = collective_rhs(
            &CollectiveState::new(plus[0], Complex64::new(plus[1], plus[2])),
            params,
            p,
        );
        let fm = collective_rhs(
            &CollectiveState::new(minus[0], Complex64::new(minus[1], minus[2])),
            params,
            p,
        );
        let d = [fp.q - fm.q, fp.a.re - fm.a.re, fp.a.im - fm.a.im];
        for row in 0..3 {
            j[(row, col)] = d[row] / (2.0 * h);
        }
    }
    j
}

/// Mean-field derivative with explicit sums over every other qubit.
pub fn meanfield_rhs_brute(s: &MeanFieldState, p: &ModelParams) -> (Vec<f64>, Vec<Complex64>) {
    let n = s.w.len();
    let nf = n as f64;
    let mut dw = vec![0.0; n];
    let mut dq = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let mut cross = 0.0;
        let mut field = 0.0;
        let mut others = Complex64::new(0.0, 0.0);
        for k in (0..n).filter(|&k| k != j) {
            cross += 2.0 * (s.q[j] * s.q[k].conj()).re;
            field += 2.0 * s.w[k] - 1.0;
            others += s.q[k];
        }
        let gain = if j < s.n_active { 2.0 * p.kappa } else { 0.0 };
        dw[j] = p.drive * s.q[j].im
            - (2.0 * p.kappa + 4.0 * p.dissipative_coupling * (nf - 1.0) / nf) * s.w[j]
            + gain
            + 2.0 * p.dissipative_coupling / nf * cross;
        dq[j] = I * (p.detuning + 4.0 * p.coherent_coupling * field) * s.q[j]
            + I * p.drive / 2.0 * (1.0 - 2.0 * s.w[j])
            - p.kappa * s.q[j]
            - 4.0 * p.dissipative_coupling / nf * s.w[j] * others
            - 2.0 * p.dissipative_coupling * (nf - 1.0) / nf * s.q[j]
            + 2.0 * p.dissipative_coupling / nf * others;
    }
    (dw, dq)
}

type M4 = Matrix4<Complex64>;

/// Two-qubit master equation written out with explicit 4×4 matrices, qubit
/// 1 pumped and qubit 2 decaying, integrated with classical RK4 at step `dt`.
/// Returns n̄ at every integer time up to `t_end`.
pub struct TwoQubitOracle {
    h: M4,
    jumps: Vec<(M4, f64)>,
    n_op: M4,
}

impl TwoQubitOracle {
    pub fn new(p: &ModelParams) -> Self {
        let c = |x: f64| Complex64::new(x, 0.0);
        let o = c(0.0);
        let l = c(1.0);
        // Basis |s1 s2⟩ with s = 0 (ground), 1 (excited); index 2·s1 + s2.
        let sz1 = M4::from_diagonal(&[c(-1.0), c(-1.0), l, l].into());
        let sz2 = M4::from_diagonal(&[c(-1.0), l, c(-1.0), l].into());
        #[rustfmt::skip]
        let sm1 = M4::new(
            o, o, l, o,
            o, o, o, l,
            o, o, o, o,
            o, o, o, o,
        );
        #[rustfmt::skip]
        let sm2 = M4::new(
            o, l, o, o,
            o, o, o, o,
            o, o, o, l,
            o, o, o, o,
        );
        let sp1 = sm1.adjoint();
        let sp2 = sm2.adjoint();
        let half = c(0.5);
        let h = (sz1 + sz2) * c(p.detuning) * half
            + (sp1 + sm1 + sp2 + sm2) * c(p.drive) * half
            + sz1 * sz2 * c(2.0 * p.coherent_coupling);
        let r = p.dissipative_coupling / 2.0;
        let jumps = vec![
            (sp1, p.kappa),
            (sm2, p.kappa),
            (sm1 - sm2, r),
            (sm2 - sm1, r),
        ];
        let n_op = (sp1 * sm1 + sp2 * sm2) * half;
        Self { h, jumps, n_op }
    }

    fn deriv(&self, rho: &M4) -> M4 {
        let mut out = (self.h * rho - rho * self.h) * (-I);
        for (l, rate) in &self.jumps {
            let ld = l.adjoint();
            out += (l * rho * ld * Complex64::new(2.0, 0.0) - ld * l * rho - rho * ld * l)
                * Complex64::new(*rate, 0.0);
        }
        out
    }

    pub fn nbar(&self, rho: &M4) -> f64 {
        (self.n_op * rho).trace().re
    }

    pub fn run(&self, rho0: M4, t_end: usize, dt: f64) -> Vec<f64> {
        let steps_per_unit = (1.0 / dt).round() as usize;
        let h = Complex64::new(dt, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let mut rho = rho0;
        let mut out = vec![self.nbar(&rho)];
        for _ in 0..t_end {
            for _ in 0..steps_per_unit {
                let k1 = self.deriv(&rho);
                let k2 = self.deriv(&(rho + k1 * h / two));
                let k3 = self.deriv(&(rho + k2 * h / two));
                let k4 = self.deriv(&(rho + k3 * h));
                rho += (k1 + k2 * two + k3 * two + k4) * h / Complex64::new(6.0, 0.0);
            }
            out.push(self.nbar(&rho));
        }
        out
    }
}

/// `(I/2) ⊗ (I/2)`.
pub fn two_qubit_mixed() -> M4 {
    M4::identity() * Complex64::new(0.25, 0.0)
}
