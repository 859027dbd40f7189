//! Dense-matrix reference implementations, built from Kronecker products and
//! matrix exponentials instead of the in-place state-vector kernels.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};

pub type C = Complex<f64>;
pub type C1 = DVector<C>;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn pauli_z() -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

pub fn pauli_x() -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn hadamard() -> DMatrix<C> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
}

/// `op` on qubit `q` of `n` (qubit 0 is the leftmost tensor factor).
pub fn embed(op: &DMatrix<C>, q: usize, n: usize) -> DMatrix<C> {
    let mut out = DMatrix::<C>::identity(1, 1);
    for k in 0..n {
        let f = if k == q {
            op.clone()
        } else {
            DMatrix::identity(2, 2)
        };
        out = out.kronecker(&f);
    }
    out
}

pub fn layer(op: &DMatrix<C>, n: usize) -> DMatrix<C> {
    let mut out = DMatrix::<C>::identity(1, 1);
    for _ in 0..n {
        out = out.kronecker(op);
    }
    out
}

pub fn expm_i(h: &DMatrix<C>, t: f64) -> DMatrix<C> {
    (h * C::new(0.0, t)).exp()
}

/// `sum_{i<j} J_ij Z_i Z_j + sum_k b_k Z_k` as a dense matrix. `couplings` is
/// the packed strict upper triangle in row order.
pub fn ising_hamiltonian(n: usize, couplings: &[f64], biases: &[f64]) -> DMatrix<C> {
    let dim = 1 << n;
    let mut h = DMatrix::<C>::zeros(dim, dim);
    let zs: Vec<_> = (0..n).map(|q| embed(&pauli_z(), q, n)).collect();
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            h += &zs[i] * &zs[j] * c(couplings[idx]);
            idx += 1;
        }
        h += &zs[i] * c(biases[i]);
    }
    h
}

/// Born probabilities of `exp(-i gamma sum X) exp(i H_C) H^n |0>`.
pub fn born_oracle(n: usize, couplings: &[f64], biases: &[f64], gamma: f64) -> Vec<f64> {
    let dim = 1 << n;
    let mut zero = DVector::<C>::zeros(dim);
    zero[0] = c(1.0);
    let mut xsum = DMatrix::<C>::zeros(dim, dim);
    for q in 0..n {
        xsum += embed(&pauli_x(), q, n);
    }
    let u = expm_i(&xsum, -gamma)
        * expm_i(&ising_hamiltonian(n, couplings, biases), 1.0)
        * layer(&hadamard(), n);
    (u * zero).iter().map(|a| a.norm_sqr()).collect()
}

/// `U_phi H U_phi H |0>` with `U_phi = exp(i (sum phi_k Z_k + sum phi_lm Z_l Z_m))`.
pub fn feature_state_oracle(single: &[f64], pair: &[f64]) -> DVector<C> {
    let n = single.len();
    let dim = 1 << n;
    let mut packed = Vec::new();
    for l in 0..n {
        for m in l + 1..n {
            packed.push(pair[l] * pair[m]);
        }
    }
    let u = expm_i(&ising_hamiltonian(n, &packed, single), 1.0);
    let h = layer(&hadamard(), n);
    let mut zero = DVector::<C>::zeros(dim);
    zero[0] = c(1.0);
    &u * &h * &u * &h * zero
}

pub fn fidelity(a: &DVector<C>, b: &DVector<C>) -> f64 {
    a.dotc(b).norm_sqr()
}
