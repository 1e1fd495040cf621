mod common;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use common::random_form;
use teleqkd::gaussian::{CMatrix, CVector};
use teleqkd::quadrature::quadrature_oracle;
use teleqkd::{Error, QuadraticForm};

#[test]
fn random_forms_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..30 {
        let dim = 1 + k % 3;
        let f = random_form(&mut rng, dim);
        let closed = f.integrate_all().unwrap();
        let numeric = quadrature_oracle(&f, 1e-8).unwrap();
        let rel = (closed - numeric).norm() / closed.norm();
        assert!(rel < 1e-6, "form {k} (dim {dim}): rel {rel:.2e}");
    }
}

#[test]
fn oscillating_linear_term() {
    let f = QuadraticForm::new(
        CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        CVector::from_element(1, Complex64::new(0.0, 2.0)),
        Complex64::new(0.0, 0.0),
    )
    .unwrap();
    let expect = PI.sqrt() * (-1.0f64).exp();
    assert!((f.integrate_all().unwrap() - expect).norm() < 1e-14);
    assert!((quadrature_oracle(&f, 1e-9).unwrap() - expect).norm() < 1e-8 * expect);
}

#[test]
fn coupled_marginal_matches_quadrature() {
    let f = QuadraticForm::from_real(&[&[1.0, 0.3], &[0.3, 0.8]], &[0.4, -0.2], 0.1).unwrap();
    let m = f.marginalize(&[1]).unwrap();
    for y in [-1.0, 0.0, 0.7] {
        let slice = f.fix(&[1], &[y]).unwrap();
        let numeric = quadrature_oracle(&slice, 1e-10).unwrap();
        assert!((m.value_at(&[y]) - numeric).norm() < 1e-9 * numeric.norm());
    }
}

#[test]
fn semidefinite_real_part_is_rejected() {
    let f = QuadraticForm::new(
        CMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.5)]),
        CVector::zeros(2),
        Complex64::new(0.0, 0.0),
    )
    .unwrap();
    assert!(matches!(f.integrate_all(), Err(Error::NonPositiveDefinite { .. })));
}

fn arb_form(dim: usize) -> impl Strategy<Value = QuadraticForm> {
    (any::<u64>()).prop_map(move |seed| random_form(&mut ChaCha8Rng::seed_from_u64(seed), dim))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_leaves_integral_unchanged(f in arb_form(3), shift in prop::collection::vec(-2.0f64..2.0, 3)) {
        let moved = f.substitute(&DMatrix::identity(3, 3), &DVector::from_vec(shift)).unwrap();
        let (a, b) = (f.integrate_all().unwrap(), moved.integrate_all().unwrap());
        prop_assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn scaling_law(f in arb_form(2), s in 0.2f64..5.0) {
        let scaled = QuadraticForm::new(
            f.a() * Complex64::new(s, 0.0),
            f.b() * Complex64::new(s.sqrt(), 0.0),
            f.c(),
        ).unwrap();
        let expect = f.integrate_all().unwrap() * s.powf(-1.0);
        let got = scaled.integrate_all().unwrap();
        prop_assert!((got - expect).norm() <= 1e-12 * expect.norm());
    }

    #[test]
    fn marginalizing_any_subset_preserves_integral(f in arb_form(3), mask in 0usize..8) {
        let keep: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let total = f.integrate_all().unwrap();
        let m = f.marginalize(&keep).unwrap();
        let got = if keep.is_empty() { m.c().exp() } else { m.integrate_all().unwrap() };
        prop_assert!((got - total).norm() <= 1e-11 * total.norm());
    }

    #[test]
    fn product_with_conjugate_is_real_and_positive(f in arb_form(2)) {
        let v = f.conj().times(&f).unwrap().integrate_all().unwrap();
        prop_assert!(v.re > 0.0);
        prop_assert!(v.im.abs() <= 1e-12 * v.re);
    }
}
