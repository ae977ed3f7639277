//! Sparse many-qubit operators on `(C²)^⊗N`.
//!
//! Qubit 0 is the leftmost tensor factor, so it owns the most significant bit
//! of a basis index. Per qubit, bit 0 is the ground state and bit 1 the
//! excited state.

use nalgebra::{DMatrix, DMatrixView};
use nalgebra_sparse::ops::serial::spmm_csr_dense;
use nalgebra_sparse::ops::Op;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

pub type Operator = CsrMatrix<Complex64>;

pub type Local = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const SIGMA_PLUS: Local = [[ZERO, ZERO], [ONE, ZERO]];
pub const SIGMA_MINUS: Local = [[ZERO, ONE], [ZERO, ZERO]];
pub const SIGMA_X: Local = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Z: Local = [[Complex64::new(-1.0, 0.0), ZERO], [ZERO, ONE]];

fn bit(n_qubits: usize, site: usize) -> usize {
    1 << (n_qubits - 1 - site)
}

/// `I ⊗ … ⊗ local ⊗ … ⊗ I` with `local` acting on `site`.
pub fn site_operator(n_qubits: usize, site: usize, local: &Local) -> Operator {
    let dim = 1 << n_qubits;
    let mask = bit(n_qubits, site);
    let mut coo = CooMatrix::new(dim, dim);
    for col in 0..dim {
        let s = usize::from(col & mask != 0);
        for (r, row_entries) in local.iter().enumerate() {
            let v = row_entries[s];
            if v != ZERO {
                let row = if r == 1 { col | mask } else { col & !mask };
                coo.push(row, col, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn zero(dim: usize) -> Operator {
    CsrMatrix::zeros(dim, dim)
}

pub fn scaled(op: &Operator, c: Complex64) -> Operator {
    let mut out = op.clone();
    for v in out.values_mut() {
        *v *= c;
    }
    out
}

pub fn add(a: &Operator, b: &Operator) -> Operator {
    a + b
}

pub fn mul(a: &Operator, b: &Operator) -> Operator {
    a * b
}

pub fn adjoint(op: &Operator) -> Operator {
    let mut t = op.transpose();
    for v in t.values_mut() {
        *v = v.conj();
    }
    t
}

/// `op · m` for a dense `m`.
pub fn apply<'a>(op: &Operator, m: impl Into<DMatrixView<'a, Complex64>>) -> DMatrix<Complex64> {
    let m = m.into();
    let mut out = DMatrix::zeros(op.nrows(), m.ncols());
    spmm_csr_dense(ZERO, &mut out, ONE, Op::NoOp(op), Op::NoOp(m));
    out
}

/// Adds `c · a ρ b` to `out`, where `b_adj = b†`. Uses `ρ b = (b† ρ†)†`.
pub fn add_sandwich(
    out: &mut DMatrix<Complex64>,
    c: Complex64,
    a: &Operator,
    rho_adj: &DMatrix<Complex64>,
    b_adj: &Operator,
) {
    let right = apply(b_adj, rho_adj).adjoint();
    spmm_csr_dense(ONE, out, c, Op::NoOp(a), Op::NoOp(&right));
}

/// Dense copy, for tests and small-system inspection.
pub fn to_dense(op: &Operator) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(op.nrows(), op.ncols());
    for (i, j, v) in op.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_dense(l: &Local) -> DMatrix<Complex64> {
        DMatrix::from_fn(2, 2, |i, j| l[i][j])
    }

    #[test]
    fn site_operator_is_a_kronecker_embedding() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let x = local_dense(&SIGMA_PLUS);
        let expect = id.kronecker(&x).kronecker(&id);
        assert_eq!(to_dense(&site_operator(3, 1, &SIGMA_PLUS)), expect);
        let expect = local_dense(&SIGMA_Z).kronecker(&id).kronecker(&id);
        assert_eq!(to_dense(&site_operator(3, 0, &SIGMA_Z)), expect);
    }

    #[test]
    fn ladder_algebra() {
        let sp = site_operator(2, 0, &SIGMA_PLUS);
        let sm = site_operator(2, 0, &SIGMA_MINUS);
        let sz = site_operator(2, 0, &SIGMA_Z);
        let comm = add(&mul(&sp, &sm), &scaled(&mul(&sm, &sp), -ONE));
        assert_eq!(to_dense(&comm), to_dense(&sz));
        assert_eq!(to_dense(&adjoint(&sp)), to_dense(&sm));
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let a = add(
            &site_operator(2, 0, &SIGMA_MINUS),
            &site_operator(2, 1, &SIGMA_X),
        );
        let b = site_operator(2, 1, &SIGMA_PLUS);
        let rho = DMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i + 2 * j) as f64, i as f64 - j as f64)
        });
        let mut out = DMatrix::zeros(4, 4);
        add_sandwich(
            &mut out,
            Complex64::new(0.5, -1.0),
            &a,
            &rho.adjoint(),
            &adjoint(&b),
        );
        let expect = (to_dense(&a) * &rho * to_dense(&b)) * Complex64::new(0.5, -1.0);
        assert!((out - expect).norm() < 1e-12);
    }
}
