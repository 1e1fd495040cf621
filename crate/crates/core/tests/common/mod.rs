#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use teleqkd::gaussian::{CMatrix, CVector};
use teleqkd::{Basis, ProtocolParams, QuadraticForm};

/// Random form with Re(A) eigenvalues in [0.2, 5], a small imaginary part
/// on A and |b| ≤ 4.
pub fn random_form(rng: &mut ChaCha8Rng, dim: usize) -> QuadraticForm {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let eig = DVector::from_fn(dim, |_, _| rng.random_range(0.2..5.0));
    let re = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let im: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.3..0.3));
    let im: DMatrix<f64> = (&im + im.transpose()) * 0.5;
    let a = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
    let mut b = CVector::from_fn(dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let scale = rng.random_range(0.0..4.0) / b.norm();
    b *= Complex64::new(scale, 0.0);
    QuadraticForm::new(a, b, Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0))).unwrap()
}

/// The published r = 1.1 row: α = 2.9, cos²θ = 0.190.
pub fn table_params(eta: f64, beta: f64) -> ProtocolParams {
    ProtocolParams::matched(2.9, Basis::Real, 1.1, 0.190f64.sqrt().acos(), eta, beta).unwrap()
}
