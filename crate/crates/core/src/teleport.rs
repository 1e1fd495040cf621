//! The modified continuous-variable teleportation.
//!
//! Alice mixes the input (mode 1) with her half of the two-mode squeezed
//! state (mode 2) on a beam splitter of transmittance `cos²θ`, measures `x`
//! on output `u` and `p` on output `v`, and Bob displaces mode 3 by
//! `λ = g_u x̃_u + i g_v p̃_v`. Everything is carried as quadratic forms with
//! the outcomes kept as free variables where convenient, so the outcome
//! density and the unconditional averages stay closed form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{CMatrix, CVector, QuadraticForm};
use crate::optimize::{Bounds, GridSearch, NelderMead};
use crate::states::{displace_kernel, overlap, CoherentState, TwoModeSqueezed};

/// Optimizers keep `θ` inside `[THETA_MARGIN, π/2 - THETA_MARGIN]`.
pub const THETA_MARGIN: f64 = 1e-4;
/// Upper end of the squeezing search range (≈ 26 dB).
pub const R_MAX: f64 = 3.0;

/// Log-density below which an outcome is treated as impossible.
const MIN_LOG_DENSITY: f64 = -690.775_527_898_213_7; // ln 1e-300

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Real,
    Imaginary,
}

impl Basis {
    pub fn other(self) -> Self {
        match self {
            Basis::Real => Basis::Imaginary,
            Basis::Imaginary => Basis::Real,
        }
    }

    /// Bob's last displacement on this branch: `α` or `iα`.
    pub fn final_displacement(self, alpha: f64) -> Complex64 {
        match self {
            Basis::Real => Complex64::new(alpha, 0.0),
            Basis::Imaginary => Complex64::new(0.0, alpha),
        }
    }

    /// Alice's beam-splitter angle for this basis, given the real-basis one.
    pub fn theta_from_real(self, theta_real: f64) -> f64 {
        match self {
            Basis::Real => theta_real,
            Basis::Imaginary => FRAC_PI_2 - theta_real,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// One of the four key states: `{-α, -iα} → 0`, `{α, iα} → 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisChoice {
    pub basis: Basis,
    pub sign: Sign,
}

impl BasisChoice {
    pub fn new(basis: Basis, sign: Sign) -> Self {
        Self { basis, sign }
    }

    pub fn bit(&self) -> u8 {
        match self.sign {
            Sign::Minus => 0,
            Sign::Plus => 1,
        }
    }

    pub fn input_state(&self, alpha: f64) -> CoherentState {
        let phase = match (self.basis, self.sign) {
            (Basis::Real, Sign::Plus) => 0.0,
            (Basis::Imaginary, Sign::Plus) => 0.5 * PI,
            (Basis::Real, Sign::Minus) => PI,
            (Basis::Imaginary, Sign::Minus) => 1.5 * PI,
        };
        CoherentState {
            amplitude: alpha,
            phase,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub x_u: f64,
    pub p_v: f64,
}

impl MeasurementOutcome {
    pub fn new(x_u: f64, p_v: f64) -> Self {
        Self { x_u, p_v }
    }

    /// Bob's first displacement `g_u x̃_u + i g_v p̃_v`.
    pub fn displacement(&self, g_u: f64, g_v: f64) -> Complex64 {
        Complex64::new(g_u * self.x_u, g_v * self.p_v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportSettings {
    pub theta: f64,
    pub g_u: f64,
    pub g_v: f64,
}

impl TeleportSettings {
    pub fn new(theta: f64, g_u: f64, g_v: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(g_u.is_finite() && g_v.is_finite()) {
            return Err(invalid("gains", format!("({g_u}, {g_v})")));
        }
        Ok(Self { theta, g_u, g_v })
    }

    /// Settings with the gains from [`optimal_gains`].
    pub fn optimal(r: f64, theta: f64) -> Result<Self> {
        check_r(r)?;
        let (g_u, g_v) = optimal_gains(r, theta);
        Self::new(theta, g_u, g_v)
    }

    pub fn transmittance(&self) -> f64 {
        self.theta.cos().powi(2)
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(invalid("theta", format!("{theta} must lie in (0, π/2)")))
    }
}

pub(crate) fn check_r(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid("r", format!("{r} must be finite and >= 0")))
    }
}

/// `Ψ'(x̃_u, p̃_v, x₃)`: the three-mode amplitude after the beam splitter,
/// with mode `v` written in the momentum basis. Variables are ordered
/// `(x_u, p_v, x₃)`; `∫|Ψ'|² = 1`.
pub fn post_measurement_amplitude(input: &CoherentState, r: f64, theta: f64) -> Result<QuadraticForm> {
    check_r(r)?;
    check_theta(theta)?;
    let (s, c) = theta.sin_cos();
    // z = (x_v, x_u, p_v, x₃)
    let input_part = input
        .kernel()
        .substitute(&DMatrix::from_row_slice(1, 4, &[s, c, 0.0, 0.0]), &DVector::zeros(1))?;
    let resource = TwoModeSqueezed::new(r)?.kernel().substitute(
        &DMatrix::from_row_slice(2, 4, &[c, -s, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        &DVector::zeros(2),
    )?;
    // e^{-2i x_v p_v} / √π
    let mut fourier = CMatrix::zeros(4, 4);
    fourier[(0, 2)] = Complex64::i();
    fourier[(2, 0)] = Complex64::i();
    let integrand = input_part
        .times(&resource)?
        .add_exponent(&fourier, &CVector::zeros(4))
        .shift_log(Complex64::new(-0.5 * PI.ln(), 0.0));
    integrand.marginalize(&[1, 2, 3])
}

/// The outcome density `𝕡(x̃_u, p̃_v)` as a real form over `(x_u, p_v)`.
pub fn outcome_density_form(input: &CoherentState, r: f64, theta: f64) -> Result<QuadraticForm> {
    let psi = post_measurement_amplitude(input, r, theta)?;
    density_from_amplitude(&psi)
}

pub(crate) fn density_from_amplitude(psi: &QuadraticForm) -> Result<QuadraticForm> {
    psi.conj().times(psi)?.marginalize(&[0, 1])
}

/// `𝕡(p̃_v, x̃_u)`, the joint density of Alice's two homodyne results.
pub fn outcome_density(input: &CoherentState, r: f64, theta: f64, outcome: &MeasurementOutcome) -> Result<f64> {
    let form = outcome_density_form(input, r, theta)?;
    Ok(form.value_at(&[outcome.x_u, outcome.p_v]).re.max(0.0))
}

/// Mean and covariance of Alice's outcomes, read off the density form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl OutcomeDistribution {
    pub fn new(input: &CoherentState, r: f64, theta: f64) -> Result<Self> {
        Self::from_density_form(&outcome_density_form(input, r, theta)?)
    }

    pub fn from_density_form(form: &QuadraticForm) -> Result<Self> {
        let (m, c) = form.envelope_moments()?;
        Ok(Self {
            mean: [m[0], m[1]],
            cov: [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
        })
    }
}

/// `χ'(x₃)`: Bob's normalized state right after Alice's measurement, before
/// any displacement.
pub fn pre_displacement_kernel(
    input: &CoherentState,
    r: f64,
    theta: f64,
    outcome: &MeasurementOutcome,
) -> Result<QuadraticForm> {
    let psi = post_measurement_amplitude(input, r, theta)?;
    conditional_kernel(&psi, outcome)
}

pub(crate) fn conditional_kernel(psi: &QuadraticForm, outcome: &MeasurementOutcome) -> Result<QuadraticForm> {
    let log_p = density_from_amplitude(psi)?
        .exponent_at(&[outcome.x_u, outcome.p_v])
        .re;
    if log_p < MIN_LOG_DENSITY {
        return Err(Error::ZeroProbabilityOutcome { density: log_p.exp() });
    }
    Ok(psi
        .fix(&[0, 1], &[outcome.x_u, outcome.p_v])?
        .shift_log(Complex64::new(-0.5 * log_p, 0.0)))
}

/// `χ(x₃)`: Bob's normalized output after `D(g_u x̃_u + i g_v p̃_v)`.
pub fn bob_kernel(
    input: &CoherentState,
    r: f64,
    settings: &TeleportSettings,
    outcome: &MeasurementOutcome,
) -> Result<QuadraticForm> {
    let chi = pre_displacement_kernel(input, r, settings.theta, outcome)?;
    displace_kernel(&chi, outcome.displacement(settings.g_u, settings.g_v))
}

/// `|⟨φ|χ⟩|²` for a pure output kernel.
pub fn fidelity_numeric(input: &CoherentState, bob: &QuadraticForm) -> Result<f64> {
    Ok(overlap(&input.kernel(), bob)?.norm_sqr())
}

/// Gains that make the fidelity for `|±α⟩` sign-independent and maximal:
///
/// `g_u = sinh 2r sin θ / (cosh²r - cos 2θ sinh²r)`,
/// `g_v = sinh 2r cos θ / (cosh²r + cos 2θ sinh²r)`.
///
/// The `g_v` expression is the `coth` form multiplied through by `sinh²r`,
/// which stays finite (and zero) at `r = 0`.
pub fn optimal_gains(r: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let c2 = (2.0 * theta).cos();
    let (sh, ch) = (r.sinh(), r.cosh());
    let s2r = (2.0 * r).sinh();
    let g_u = s2r * s / (ch * ch - c2 * sh * sh);
    let g_v = s2r * c / (ch * ch + c2 * sh * sh);
    (g_u, g_v)
}

fn fidelity_prefactor(r: f64, theta: f64) -> f64 {
    let c2 = (2.0 * theta).cos();
    (1.0 - c2 * c2 * r.tanh().powi(4)).sqrt()
}

/// Optimal-gain fidelity for a real input `|±α⟩`.
pub fn fidelity_real_closed(alpha: f64, r: f64, theta: f64) -> f64 {
    let (c2, s2) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    let (sh, ch, th) = (r.sinh(), r.cosh(), r.tanh());
    let num = ch - sh * (c2 * th + s2);
    let den = ch * ch - c2 * sh * sh;
    fidelity_prefactor(r, theta) * (-alpha * alpha * num * num / den).exp()
}

/// Optimal-gain fidelity for an imaginary input `|±iα⟩`.
pub fn fidelity_imag_closed(alpha: f64, r: f64, theta: f64) -> f64 {
    let (c2, s2) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    let (sh, ch, th) = (r.sinh(), r.cosh(), r.tanh());
    let num = ch + sh * (c2 * th - s2);
    let den = ch * ch + c2 * sh * sh;
    fidelity_prefactor(r, theta) * (-alpha * alpha * num * num / den).exp()
}

/// `Π = F_match (1 - F_cross)`: high fidelity on the matched basis and low
/// fidelity on the other.
pub fn pi_objective(alpha: f64, r: f64, theta: f64, basis: Basis) -> f64 {
    let (fr, fi) = (fidelity_real_closed(alpha, r, theta), fidelity_imag_closed(alpha, r, theta));
    match basis {
        Basis::Real => fr * (1.0 - fi),
        Basis::Imaginary => fi * (1.0 - fr),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalSettings {
    pub alpha: f64,
    pub basis: Basis,
    pub r: f64,
    pub theta: f64,
    pub g_u: f64,
    pub g_v: f64,
    /// Fidelity for inputs of the matched basis.
    pub f_match: f64,
    /// Fidelity for inputs of the other basis under the same settings.
    pub f_cross: f64,
    pub objective: f64,
}

/// Maximizes [`pi_objective`] over `r ∈ [0, R_MAX]`, `θ ∈ (0, π/2)`.
///
/// A 13 × 21 grid seeds eight Nelder–Mead restarts. The θ grid is symmetric
/// under `θ → π/2 - θ`, so the two bases explore mirrored starting points.
pub fn optimize_settings(alpha: f64, basis: Basis) -> Result<OptimalSettings> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("{alpha} must be > 0")));
    }
    let bounds = Bounds::new(vec![0.0, THETA_MARGIN], vec![R_MAX, FRAC_PI_2 - THETA_MARGIN]);
    let search = GridSearch {
        axes: vec![bounds.grid_axis(0, 13), bounds.grid_axis(1, 21)],
        bounds,
        restarts: 8,
        simplex: NelderMead {
            max_evaluations: 4000,
            ftol: 1e-8,
            xtol: 1e-10,
        },
    };
    let best = search.maximize(|x| pi_objective(alpha, x[0], x[1], basis))?;
    let (r, theta) = (best.x[0], best.x[1]);
    let (g_u, g_v) = optimal_gains(r, theta);
    let (fr, fi) = (fidelity_real_closed(alpha, r, theta), fidelity_imag_closed(alpha, r, theta));
    let (f_match, f_cross) = match basis {
        Basis::Real => (fr, fi),
        Basis::Imaginary => (fi, fr),
    };
    Ok(OptimalSettings {
        alpha,
        basis,
        r,
        theta,
        g_u,
        g_v,
        f_match,
        f_cross,
        objective: best.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use approx::assert_relative_eq;

    fn real(alpha: f64) -> CoherentState {
        CoherentState::new(alpha, 0.0).unwrap()
    }

    fn cos2_to_theta(c2: f64) -> f64 {
        c2.sqrt().acos()
    }

    /// Brute-force 2-D integral of a function of the outcomes.
    fn outcome_integral(dist: &OutcomeDistribution, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (sx, sp) = (dist.cov[0][0].sqrt(), dist.cov[1][1].sqrt());
        let (mx, mp) = (dist.mean[0], dist.mean[1]);
        integrate_adaptive(
            |x| {
                let inner = integrate_adaptive(
                    |p| Complex64::new(f(x, p), 0.0),
                    mp - 10.0 * sp,
                    mp + 10.0 * sp,
                    1e-13,
                    1e-11,
                )
                .unwrap();
                inner.value
            },
            mx - 10.0 * sx,
            mx + 10.0 * sx,
            1e-12,
            1e-11,
        )
        .unwrap()
        .value
        .re
    }

    #[test]
    fn density_is_normalized_for_assorted_inputs() {
        for &(alpha, xi, r, theta) in &[
            (0.0, 0.0, 0.0, 0.25 * PI),
            (2.3, 0.0, 0.5, cos2_to_theta(0.182)),
            (1.2, 0.5 * PI, 1.1, 0.3),
            (2.9, PI, 2.5, 1.4),
        ] {
            let input = CoherentState::new(alpha, xi).unwrap();
            let form = outcome_density_form(&input, r, theta).unwrap();
            assert!((form.integrate_all().unwrap().re - 1.0).abs() < 1e-10);
            let dist = OutcomeDistribution::from_density_form(&form).unwrap();
            let total = outcome_integral(&dist, |x, p| outcome_density(&input, r, theta, &MeasurementOutcome::new(x, p)).unwrap());
            assert!((total - 1.0).abs() < 1e-8, "total {total}");
        }
    }

    #[test]
    fn vacuum_density_is_isotropic_and_centred() {
        let form = outcome_density_form(&CoherentState::vacuum(), 0.0, 0.25 * PI).unwrap();
        let d = OutcomeDistribution::from_density_form(&form).unwrap();
        assert!(d.mean[0].abs() < 1e-14 && d.mean[1].abs() < 1e-14);
        assert!(d.cov[0][1].abs() < 1e-14);
        assert_relative_eq!(d.cov[0][0], d.cov[1][1], max_relative = 1e-12);
    }

    #[test]
    fn first_moment_of_x_u_matches_quadrature() {
        let theta = cos2_to_theta(0.182);
        let input = real(2.3);
        let d = OutcomeDistribution::new(&input, 0.5, theta).unwrap();
        let total = outcome_integral(&d, |x, p| {
            x * outcome_density(&input, 0.5, theta, &MeasurementOutcome::new(x, p)).unwrap()
        });
        assert!((total - d.mean[0]).abs() < 1e-8, "{total} vs {}", d.mean[0]);
        // x_u = x₁ cos θ - x₂ sin θ and ⟨x₂⟩ = 0
        assert!((d.mean[0] - 2.3 * theta.cos()).abs() < 1e-10);
    }

    #[test]
    fn bob_kernel_without_entanglement_is_vacuum() {
        let settings = TeleportSettings::new(0.7, 0.0, 0.0).unwrap();
        for o in [MeasurementOutcome::new(0.0, 0.0), MeasurementOutcome::new(1.3, -0.4)] {
            let chi = bob_kernel(&real(1.7), 0.0, &settings, &o).unwrap();
            let vac = CoherentState::vacuum().kernel();
            assert!((overlap(&vac, &chi).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bob_kernel_is_normalized() {
        let theta = cos2_to_theta(0.190);
        let settings = TeleportSettings::optimal(1.1, theta).unwrap();
        let chi = bob_kernel(&real(2.9), 1.1, &settings, &MeasurementOutcome::new(0.7, -0.3)).unwrap();
        assert!((crate::states::norm_sqr(&chi).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn improbable_outcome_is_rejected() {
        let r = pre_displacement_kernel(&real(1.0), 0.3, 0.6, &MeasurementOutcome::new(200.0, 0.0));
        assert!(matches!(r, Err(Error::ZeroProbabilityOutcome { .. })));
    }

    #[test]
    fn fidelity_of_identical_and_vacuum_outputs() {
        let input = real(1.0);
        assert_relative_eq!(fidelity_numeric(&input, &input.kernel()).unwrap(), 1.0, max_relative = 1e-12);
        let f = fidelity_numeric(&input, &CoherentState::vacuum().kernel()).unwrap();
        assert_relative_eq!(f, (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn optimal_fidelity_is_outcome_independent() {
        let theta = cos2_to_theta(0.190);
        let settings = TeleportSettings::optimal(1.1, theta).unwrap();
        let closed = fidelity_real_closed(2.9, 1.1, theta);
        for (x, p) in [(0.0, 0.0), (1.0, -2.0), (3.0, 3.0)] {
            let chi = bob_kernel(&real(2.9), 1.1, &settings, &MeasurementOutcome::new(x, p)).unwrap();
            let f = fidelity_numeric(&real(2.9), &chi).unwrap();
            assert!((f - closed).abs() < 1e-9, "({x},{p}): {f} vs {closed}");
        }
    }

    #[test]
    fn table_gains() {
        let rows = [
            (0.2, 0.147, 0.355, 0.156),
            (0.3, 0.169, 0.503, 0.254),
            (0.5, 0.182, 0.736, 0.456),
            (0.7, 0.176, 0.887, 0.664),
            (0.9, 0.178, 0.976, 0.903),
            (1.1, 0.190, 1.031, 1.158),
        ];
        for (r, c2, gu, gv) in rows {
            let (a, b) = optimal_gains(r, cos2_to_theta(c2));
            assert!((a - gu).abs() < 1e-3 && (b - gv).abs() < 1e-3, "r={r}: ({a}, {b})");
        }
        assert_eq!(optimal_gains(0.0, 0.4), (0.0, 0.0));
    }

    #[test]
    fn safe_g_v_matches_coth_form() {
        for i in 0..40 {
            let r = 0.05 + 0.07 * i as f64;
            for j in 1..10 {
                let theta = j as f64 * FRAC_PI_2 / 10.0;
                let coth = 1.0 / r.tanh();
                let literal = 2.0 * coth * theta.cos() / (coth * coth + (2.0 * theta).cos());
                let (_, safe) = optimal_gains(r, theta);
                assert!((safe - literal).abs() <= 1e-12 * literal.abs(), "r={r} θ={theta}");
            }
        }
    }

    #[test]
    fn closed_form_limits() {
        for r in [0.0, 0.4, 1.3, 2.7] {
            assert!((fidelity_real_closed(0.0, r, 0.25 * PI) - 1.0).abs() < 1e-15);
        }
        assert_relative_eq!(fidelity_real_closed(1.0, 0.0, 0.25 * PI), (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn sign_symmetry_of_numeric_fidelity() {
        let (r, theta) = (0.8, 0.9);
        let settings = TeleportSettings::optimal(r, theta).unwrap();
        let o = MeasurementOutcome::new(0.4, -1.1);
        let f = |a: f64| {
            let input = CoherentState::from_complex(Complex64::new(a, 0.0));
            fidelity_numeric(&input, &bob_kernel(&input, r, &settings, &o).unwrap()).unwrap()
        };
        assert!((f(1.7) - f(-1.7)).abs() < 1e-12);
    }

    #[test]
    fn optimize_settings_mirror_relations() {
        let re = optimize_settings(2.0, Basis::Real).unwrap();
        let im = optimize_settings(2.0, Basis::Imaginary).unwrap();
        assert!((re.theta - (FRAC_PI_2 - im.theta)).abs() < 1e-6);
        assert!((re.r - im.r).abs() < 1e-6);
        assert!((re.g_v - im.g_u).abs() < 1e-6);
        assert!((re.g_u - im.g_v).abs() < 1e-6);
        assert!((re.objective - im.objective).abs() < 1e-10);
        assert!(re.f_match > re.f_cross);
    }

    #[test]
    fn optimize_settings_small_alpha_stays_finite() {
        let s = optimize_settings(1e-6, Basis::Real).unwrap();
        assert!(s.r.is_finite() && s.theta.is_finite());
        // Π → F(1 - F) with F the prefactor alone, maximal at 1/4.
        assert!((s.objective - 0.25).abs() < 1e-6);
        assert!(optimize_settings(0.0, Basis::Real).is_err());
    }
}
