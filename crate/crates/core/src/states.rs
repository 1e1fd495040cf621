//! Position-basis kernels of coherent and two-mode squeezed states.
//!
//! Quadratures follow `x̂ = (â + â†)/2`, `p̂ = (â - â†)/2i`, so `[x̂, p̂] = i/2`
//! and the vacuum has `Var(x) = 1/4`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::error::{invalid, Result};
use crate::gaussian::{CMatrix, CVector, QuadraticForm};

/// `|α e^{iξ}⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentState {
    pub amplitude: f64,
    pub phase: f64,
}

impl CoherentState {
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(invalid("coherent amplitude", format!("{amplitude} must be finite and >= 0")));
        }
        if !phase.is_finite() {
            return Err(invalid("coherent phase", format!("{phase}")));
        }
        Ok(Self { amplitude, phase })
    }

    pub fn vacuum() -> Self {
        Self {
            amplitude: 0.0,
            phase: 0.0,
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self {
            amplitude: z.norm(),
            phase: if z.norm() == 0.0 { 0.0 } else { z.arg() },
        }
    }

    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// `⟨x⟩ = Re(α e^{iξ})`.
    pub fn mean_position(&self) -> f64 {
        self.complex_amplitude().re
    }

    pub fn kernel(&self) -> QuadraticForm {
        coherent_kernel(self)
    }
}

/// `(2/π)^{1/4} exp(-x² + 2βx - |β|²/2 - β²/2)` with `β = α e^{iξ}`.
pub fn coherent_kernel(state: &CoherentState) -> QuadraticForm {
    coherent_kernel_at(state.complex_amplitude())
}

pub(crate) fn coherent_kernel_at(beta: Complex64) -> QuadraticForm {
    QuadraticForm::from_parts(
        CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        CVector::from_element(1, 2.0 * beta),
        Complex64::new(0.25 * (2.0 / PI).ln() - 0.5 * beta.norm_sqr(), 0.0) - 0.5 * beta * beta,
    )
}

/// The coherent kernel as a joint form over `(x, Re β, Im β)`, so that an
/// amplitude depending linearly on other variables can be substituted in.
pub fn coherent_kernel_parametric() -> QuadraticForm {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    // -x² + 2ux + 2ivx - u² - iuv
    let a = CMatrix::from_row_slice(
        3,
        3,
        &[one, -one, -i, -one, one, 0.5 * i, -i, 0.5 * i, zero],
    );
    QuadraticForm::from_parts(a, CVector::zeros(3), Complex64::new(0.25 * (2.0 / PI).ln(), 0.0))
}

/// Two-mode squeezed vacuum with squeezing parameter `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeSqueezed {
    pub r: f64,
}

impl TwoModeSqueezed {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("squeezing r", format!("{r} must be finite and >= 0")));
        }
        Ok(Self { r })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        if !(db >= 0.0 && db.is_finite()) {
            return Err(invalid("squeezing dB", format!("{db} must be finite and >= 0")));
        }
        Self::new(db_to_squeezing(db))
    }

    pub fn kernel(&self) -> QuadraticForm {
        tmss_kernel(self)
    }
}

/// `√(2/π) exp(-e^{-2r}(x₂+x₃)²/2 - e^{2r}(x₂-x₃)²/2)` over `(x₂, x₃)`.
pub fn tmss_kernel(channel: &TwoModeSqueezed) -> QuadraticForm {
    let ch = Complex64::new((2.0 * channel.r).cosh(), 0.0);
    let sh = Complex64::new((2.0 * channel.r).sinh(), 0.0);
    QuadraticForm::from_parts(
        CMatrix::from_row_slice(2, 2, &[ch, -sh, -sh, ch]),
        CVector::zeros(2),
        Complex64::new(0.5 * (2.0 / PI).ln(), 0.0),
    )
}

/// `20 r log₁₀ e`.
pub fn squeezing_to_db(r: f64) -> f64 {
    20.0 * r * E.log10()
}

pub fn db_to_squeezing(db: f64) -> f64 {
    db / (20.0 * E.log10())
}

/// Applies `D(λ)` to a single-mode kernel:
/// `(D(λ)ψ)(y) = e^{-i Reλ Imλ} e^{2i Imλ y} ψ(y - Reλ)`.
pub fn displace_kernel(kernel: &QuadraticForm, lambda: Complex64) -> Result<QuadraticForm> {
    if kernel.dim() != 1 {
        return Err(crate::error::Error::DimensionMismatch {
            expected: 1,
            got: kernel.dim(),
        });
    }
    let shifted = kernel.substitute(&DMatrix::from_element(1, 1, 1.0), &DVector::from_element(1, -lambda.re))?;
    Ok(shifted
        .add_exponent(
            &CMatrix::zeros(1, 1),
            &CVector::from_element(1, Complex64::new(0.0, 2.0 * lambda.im)),
        )
        .shift_log(Complex64::new(0.0, -lambda.re * lambda.im)))
}

/// `∫ bra*(x) ket(x) dx` for single-mode kernels.
pub fn overlap(bra: &QuadraticForm, ket: &QuadraticForm) -> Result<Complex64> {
    bra.conj().times(ket)?.integrate_all()
}

/// `∫ |ψ|²` of a kernel over any number of variables.
pub fn norm_sqr(kernel: &QuadraticForm) -> Result<f64> {
    Ok(kernel.conj().times(kernel)?.integrate_all()?.re)
}
