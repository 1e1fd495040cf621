//! Closed-form Gaussian integrals next to brute-force quadrature.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use teleqkd::quadrature::quadrature_oracle;
use teleqkd::QuadraticForm;

fn main() -> teleqkd::Result<()> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.3), c(0.3, -0.1), c(0.3, -0.1), c(2.0, 0.5)]);
    let b = DVector::from_row_slice(&[c(0.5, 1.0), c(-1.0, 0.2)]);
    let form = QuadraticForm::new(a, b, c(0.0, 0.0))?;

    let closed = form.integrate_all()?;
    let numeric = quadrature_oracle(&form, 1e-9)?;
    println!("closed form   {closed:.12}");
    println!("quadrature    {numeric:.12}");
    println!("relative gap  {:.2e}", (closed - numeric).norm() / closed.norm());

    // Integrating out the second variable leaves a one-variable form.
    let marginal = form.marginalize(&[0])?;
    println!("marginal A = {:.6}, b = {:.6}", marginal.a()[(0, 0)], marginal.b()[0]);
    println!("its integral  {:.12}", marginal.integrate_all()?);
    Ok(())
}
