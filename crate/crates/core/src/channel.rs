//! The lossy line between Alice's station and Bob, modelled as a beam
//! splitter of transmittance `η` whose reflected port goes to Eve.
//!
//! The beam splitter acts on Bob's mode before his displacements, so both
//! parties receive a mixed single-mode state. Vacuum detection after
//! displacing by `λ + γ` is the coherent-state expectation
//! `Q₀ = ⟨-λ-γ|ρ'|-λ-γ⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::QuadraticForm;
use crate::params::ProtocolParams;
use crate::quadrature::integrate_adaptive;
use crate::states::{coherent_kernel_at, coherent_kernel_parametric, CoherentState};
use crate::teleport::{
    conditional_kernel, density_from_amplitude, post_measurement_amplitude, MeasurementOutcome, OutcomeDistribution,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bob,
    Eve,
}

impl Side {
    /// Fraction of the signal reaching this party: `η` for Bob, `1 - η` for Eve.
    pub fn transmittance(self, eta: f64) -> f64 {
        match self {
            Side::Bob => eta,
            Side::Eve => 1.0 - eta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    pub eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self { eta })
    }

    pub fn lossless() -> Self {
        Self { eta: 1.0 }
    }

    pub fn transmittance(&self, side: Side) -> f64 {
        side.transmittance(self.eta)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(invalid("eta", format!("{eta} must lie in [0, 1]")))
    }
}

/// A single-mode density matrix `ρ(x, x') = ⟨x|ρ|x'⟩` with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityKernel {
    form: QuadraticForm,
}

fn swap2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

impl DensityKernel {
    /// Wraps a two-variable form, rescaling it to unit trace.
    pub fn new(form: QuadraticForm) -> Result<Self> {
        if form.dim() != 2 {
            return Err(crate::Error::DimensionMismatch {
                expected: 2,
                got: form.dim(),
            });
        }
        let log_trace = diagonal(&form)?.log_integral()?;
        Ok(Self {
            form: form.shift_log(Complex64::new(-log_trace.re, 0.0)),
        })
    }

    /// `|ψ⟩⟨ψ|` for a single-mode kernel.
    pub fn pure(kernel: &QuadraticForm) -> Result<Self> {
        Self::new(kernel.embed(&[0], 2)?.times(&kernel.conj().embed(&[1], 2)?)?)
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    pub fn value_at(&self, x: f64, x_prime: f64) -> Complex64 {
        self.form.value_at(&[x, x_prime])
    }

    pub fn trace(&self) -> Result<f64> {
        Ok(diagonal(&self.form)?.integrate_all()?.re)
    }

    /// `tr ρ² = ∬ ρ(x, x') ρ(x', x)`.
    pub fn purity(&self) -> Result<f64> {
        let swapped = self.form.substitute(&swap2(), &DVector::zeros(2))?;
        Ok(self.form.times(&swapped)?.integrate_all()?.re)
    }

    /// Largest coefficient difference between `ρ(x, x')` and `ρ*(x', x)`.
    pub fn hermiticity_gap(&self) -> Result<f64> {
        let adjoint = self.form.conj().substitute(&swap2(), &DVector::zeros(2))?;
        Ok(self.form.max_coefficient_gap(&adjoint))
    }

    /// `⟨β|ρ|β⟩`.
    pub fn coherent_expectation(&self, beta: Complex64) -> Result<f64> {
        let k = coherent_kernel_at(beta);
        let sandwich = k.conj().embed(&[0], 2)?.times(&k.embed(&[1], 2)?)?;
        Ok(self.form.times(&sandwich)?.integrate_all()?.re.clamp(0.0, 1.0))
    }
}

fn diagonal(form: &QuadraticForm) -> Result<QuadraticForm> {
    form.substitute(&DMatrix::from_element(2, 1, 1.0), &DVector::zeros(2))
}

/// The state left in one output port when `kernel` enters a beam splitter
/// of the given transmittance with vacuum in the other input.
pub fn transmitted_density(kernel: &QuadraticForm, transmittance: f64) -> Result<DensityKernel> {
    check_eta(transmittance)?;
    let (t, s) = (transmittance.sqrt(), (1.0 - transmittance).sqrt());
    // (x, x', x₄): ψ(t x + s x₄) ψ*(t x' + s x₄) 0(t x₄ - s x) 0*(t x₄ - s x')
    let zero = DVector::zeros(1);
    let row = |coef: [f64; 3]| DMatrix::from_row_slice(1, 3, &coef);
    let vac = CoherentState::vacuum().kernel();
    let joint = kernel
        .substitute(&row([t, 0.0, s]), &zero)?
        .times(&kernel.conj().substitute(&row([0.0, t, s]), &zero)?)?
        .times(&vac.substitute(&row([-s, 0.0, t]), &zero)?)?
        .times(&vac.conj().substitute(&row([0.0, -s, t]), &zero)?)?;
    DensityKernel::new(joint.marginalize(&[0, 1])?)
}

/// Bob's state `ρ'_B` before his displacements, given Alice's outcome.
pub fn bob_density(
    input: &CoherentState,
    r: f64,
    theta: f64,
    outcome: &MeasurementOutcome,
    eta: f64,
) -> Result<DensityKernel> {
    party_density(input, r, theta, outcome, LossChannel::new(eta)?.transmittance(Side::Bob))
}

/// Eve's state `ρ'_E`: the same construction with `η → 1 - η`.
pub fn eve_density(
    input: &CoherentState,
    r: f64,
    theta: f64,
    outcome: &MeasurementOutcome,
    eta: f64,
) -> Result<DensityKernel> {
    party_density(input, r, theta, outcome, LossChannel::new(eta)?.transmittance(Side::Eve))
}

fn party_density(
    input: &CoherentState,
    r: f64,
    theta: f64,
    outcome: &MeasurementOutcome,
    transmittance: f64,
) -> Result<DensityKernel> {
    let psi = post_measurement_amplitude(input, r, theta)?;
    transmitted_density(&conditional_kernel(&psi, outcome)?, transmittance)
}

/// The coherent amplitude whose projector is the vacuum test after the
/// displacements: `-λ - γ`.
pub fn vacuum_probe(params: &ProtocolParams, outcome: &MeasurementOutcome) -> Complex64 {
    -outcome.displacement(params.g_u, params.g_v) - params.gamma
}

/// `Q₀`: probability that `side` sees no light for this outcome.
pub fn vacuum_prob_conditional(
    params: &ProtocolParams,
    input: &CoherentState,
    outcome: &MeasurementOutcome,
    side: Side,
) -> Result<f64> {
    params.validate()?;
    let rho = party_density(input, params.r, params.theta, outcome, side.transmittance(params.eta))?;
    rho.coherent_expectation(vacuum_probe(params, outcome))
}

/// `∫ 𝕡(x̃_u, p̃_v) Q₀(x̃_u, p̃_v)` as one Gaussian form over
/// `(x̃_u, p̃_v, x, x', x₄)`.
pub(crate) fn joint_vacuum_form(
    psi: &QuadraticForm,
    params: &ProtocolParams,
    transmittance: f64,
) -> Result<QuadraticForm> {
    check_eta(transmittance)?;
    let (t, s) = (transmittance.sqrt(), (1.0 - transmittance).sqrt());
    let row3 = |x3: [f64; 5]| DMatrix::from_row_slice(3, 5, &[[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0], x3].concat());
    let zero3 = DVector::zeros(3);
    let amplitude = psi.substitute(&row3([0.0, 0.0, t, 0.0, s]), &zero3)?;
    let amplitude_c = psi.conj().substitute(&row3([0.0, 0.0, 0.0, t, s]), &zero3)?;

    let vac = CoherentState::vacuum().kernel();
    let zero1 = DVector::zeros(1);
    let environment = vac
        .substitute(&DMatrix::from_row_slice(1, 5, &[0.0, 0.0, -s, 0.0, t]), &zero1)?
        .times(&vac.conj().substitute(&DMatrix::from_row_slice(1, 5, &[0.0, 0.0, 0.0, -s, t]), &zero1)?)?;

    // φ_{-λ-γ}: Re = -g_u x̃_u - Re γ, Im = -g_v p̃_v - Im γ
    let probe = |mode: usize| {
        let mut m = DMatrix::zeros(3, 5);
        m[(0, mode)] = 1.0;
        m[(1, 0)] = -params.g_u;
        m[(2, 1)] = -params.g_v;
        (m, DVector::from_row_slice(&[0.0, -params.gamma.re, -params.gamma.im]))
    };
    let (m_bra, o_bra) = probe(2);
    let (m_ket, o_ket) = probe(3);
    let coherent = coherent_kernel_parametric();
    let projector = coherent
        .conj()
        .substitute(&m_bra, &o_bra)?
        .times(&coherent.substitute(&m_ket, &o_ket)?)?;

    amplitude.times(&amplitude_c)?.times(&environment)?.times(&projector)
}

/// `q₀`: the outcome-averaged vacuum probability, in closed form.
pub fn vacuum_prob_unconditional(params: &ProtocolParams, input: &CoherentState, side: Side) -> Result<f64> {
    params.validate()?;
    let psi = post_measurement_amplitude(input, params.r, params.theta)?;
    vacuum_prob_from_amplitude(&psi, params, side)
}

pub(crate) fn vacuum_prob_from_amplitude(psi: &QuadraticForm, params: &ProtocolParams, side: Side) -> Result<f64> {
    let joint = joint_vacuum_form(psi, params, side.transmittance(params.eta))?;
    Ok(joint.integrate_all()?.re.clamp(0.0, 1.0))
}

/// Numerical average of [`vacuum_prob_conditional`] over Alice's outcomes.
/// Much slower than [`vacuum_prob_unconditional`]; kept as a cross-check.
pub fn vacuum_prob_unconditional_quadrature(
    params: &ProtocolParams,
    input: &CoherentState,
    side: Side,
    tol: f64,
) -> Result<f64> {
    params.validate()?;
    let psi = post_measurement_amplitude(input, params.r, params.theta)?;
    let density = density_from_amplitude(&psi)?;
    let dist = OutcomeDistribution::from_density_form(&density)?;
    let transmittance = side.transmittance(params.eta);
    let span = |i: usize| {
        let s = dist.cov[i][i].sqrt();
        (dist.mean[i] - 9.0 * s, dist.mean[i] + 9.0 * s)
    };
    let ((xlo, xhi), (plo, phi)) = (span(0), span(1));
    let mut failure = None;
    let integrand = |x: f64, p: f64| -> Result<f64> {
        let o = MeasurementOutcome::new(x, p);
        let weight = density.value_at(&[x, p]).re;
        if weight < 1e-300 {
            return Ok(0.0);
        }
        let rho = transmitted_density(&conditional_kernel(&psi, &o)?, transmittance)?;
        Ok(weight * rho.coherent_expectation(vacuum_probe(params, &o))?)
    };
    let outer = integrate_adaptive(
        |x| {
            let inner = integrate_adaptive(
                |p| match integrand(x, p) {
                    Ok(v) => Complex64::new(v, 0.0),
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                },
                plo,
                phi,
                0.1 * tol / (xhi - xlo),
                0.0,
            );
            match inner {
                Ok(est) => est.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        xlo,
        xhi,
        0.5 * tol,
        0.0,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer.value.re)
}

/// Precomputed `Q₀(x̃_u, p̃_v)` for repeated evaluation at sampled outcomes.
///
/// Holds the outcome density and the outcome-resolved numerator `𝕡·Q₀`, so
/// each evaluation is two quadratic exponents.
#[derive(Clone, Debug)]
pub struct ConditionalVacuum {
    density: QuadraticForm,
    numerator: QuadraticForm,
    distribution: OutcomeDistribution,
}

impl ConditionalVacuum {
    pub fn new(params: &ProtocolParams, input: &CoherentState, side: Side) -> Result<Self> {
        params.validate()?;
        let psi = post_measurement_amplitude(input, params.r, params.theta)?;
        let density = density_from_amplitude(&psi)?;
        let numerator = joint_vacuum_form(&psi, params, side.transmittance(params.eta))?.marginalize(&[0, 1])?;
        let distribution = OutcomeDistribution::from_density_form(&density)?;
        Ok(Self {
            density,
            numerator,
            distribution,
        })
    }

    pub fn distribution(&self) -> &OutcomeDistribution {
        &self.distribution
    }

    pub fn density_form(&self) -> &QuadraticForm {
        &self.density
    }

    pub fn probability(&self, outcome: &MeasurementOutcome) -> f64 {
        let x = [outcome.x_u, outcome.p_v];
        let log_ratio = self.numerator.exponent_at(&x).re - self.density.exponent_at(&x).re;
        log_ratio.exp().clamp(0.0, 1.0)
    }

    /// `q₀`, the outcome average.
    pub fn average(&self) -> Result<f64> {
        Ok(self.numerator.integrate_all()?.re.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teleport::{bob_kernel, pre_displacement_kernel, Basis, Sign, TeleportSettings};
    use crate::states::overlap;
    use std::f64::consts::FRAC_PI_2;

    fn table_params(eta: f64) -> ProtocolParams {
        let theta = 0.190f64.sqrt().acos();
        ProtocolParams::matched(2.9, Basis::Real, 1.1, theta, eta, 0.8).unwrap()
    }

    fn outcomes() -> [MeasurementOutcome; 3] {
        [
            MeasurementOutcome::new(0.0, 0.0),
            MeasurementOutcome::new(-1.2, 0.5),
            MeasurementOutcome::new(0.8, 1.7),
        ]
    }

    #[test]
    fn lossless_density_is_pure_projector() {
        let p = table_params(1.0);
        let input = p.key_state(Sign::Minus);
        let o = MeasurementOutcome::new(-0.4, 0.3);
        let rho = bob_density(&input, p.r, p.theta, &o, 1.0).unwrap();
        let chi = pre_displacement_kernel(&input, p.r, p.theta, &o).unwrap();
        for x in [-2.0, -1.0, 0.0, 0.5, 1.5] {
            for y in [-1.5, 0.0, 1.0] {
                let expect = chi.value_at(&[x]) * chi.value_at(&[y]).conj();
                assert!((rho.value_at(x, y) - expect).norm() < 1e-10);
            }
        }
        assert!((rho.purity().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_loss_leaves_vacuum() {
        let p = table_params(0.0);
        let o = MeasurementOutcome::new(0.4, -0.9);
        let rho = bob_density(&p.key_state(Sign::Plus), p.r, p.theta, &o, 0.0).unwrap();
        let vac = DensityKernel::pure(&CoherentState::vacuum().kernel()).unwrap();
        assert!(rho.form().max_coefficient_gap(vac.form()) < 1e-10);
        assert!((rho.trace().unwrap() - 1.0).abs() < 1e-9);
        assert!((rho.purity().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_loss_is_mixed_and_hermitian() {
        let p = table_params(0.5);
        let o = MeasurementOutcome::new(0.4, -0.9);
        let rho = bob_density(&p.key_state(Sign::Minus), p.r, p.theta, &o, 0.5).unwrap();
        assert!((rho.trace().unwrap() - 1.0).abs() < 1e-9);
        assert!(rho.purity().unwrap() < 1.0 - 1e-3);
        assert!(rho.hermiticity_gap().unwrap() < 1e-12);
    }

    #[test]
    fn eve_is_bob_with_complementary_loss() {
        let p = table_params(0.3);
        let input = p.key_state(Sign::Minus);
        let o = MeasurementOutcome::new(0.2, 0.6);
        let eve = eve_density(&input, p.r, p.theta, &o, 0.3).unwrap();
        let bob = bob_density(&input, p.r, p.theta, &o, 0.7).unwrap();
        assert!(eve.form().max_coefficient_gap(bob.form()) < 1e-12);
        assert!((eve.purity().unwrap() - bob.purity().unwrap()).abs() < 1e-9);
        let eve_vac = eve_density(&input, p.r, p.theta, &o, 1.0).unwrap();
        assert!((eve_vac.coherent_expectation(Complex64::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conditional_vacuum_is_outcome_independent_when_lossless() {
        let p = table_params(1.0);
        let input = p.key_state(Sign::Minus);
        let q: Vec<f64> = outcomes()
            .iter()
            .map(|o| vacuum_prob_conditional(&p, &input, o, Side::Bob).unwrap())
            .collect();
        assert!((q[0] - q[1]).abs() < 1e-9 && (q[0] - q[2]).abs() < 1e-9, "{q:?}");
    }

    #[test]
    fn full_loss_vacuum_prob_is_displaced_vacuum_overlap() {
        let p = table_params(0.0);
        for o in outcomes() {
            let q = vacuum_prob_conditional(&p, &p.key_state(Sign::Plus), &o, Side::Bob).unwrap();
            let probe = vacuum_probe(&p, &o);
            assert!((q - (-probe.norm_sqr()).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn lossless_matches_teleported_overlap() {
        let p = table_params(1.0);
        let settings = TeleportSettings::new(p.theta, p.g_u, p.g_v).unwrap();
        for sign in [Sign::Minus, Sign::Plus] {
            let input = p.key_state(sign);
            for o in outcomes() {
                let chi = bob_kernel(&input, p.r, &settings, &o).unwrap();
                let direct = overlap(&coherent_kernel_at(-p.gamma), &chi).unwrap().norm_sqr();
                let q = vacuum_prob_conditional(&p, &input, &o, Side::Bob).unwrap();
                assert!((q - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unconditional_matches_lossless_conditional() {
        let p = table_params(1.0);
        let input = p.key_state(Sign::Minus);
        let q = vacuum_prob_unconditional(&p, &input, Side::Bob).unwrap();
        let c = vacuum_prob_conditional(&p, &input, &outcomes()[1], Side::Bob).unwrap();
        assert!((q - c).abs() < 1e-8);
    }

    #[test]
    fn unconditional_matches_quadrature_average() {
        for eta in [0.7, 0.2] {
            let p = table_params(eta);
            let input = p.key_state(Sign::Minus);
            let closed = vacuum_prob_unconditional(&p, &input, Side::Bob).unwrap();
            let numeric = vacuum_prob_unconditional_quadrature(&p, &input, Side::Bob, 1e-8).unwrap();
            assert!((closed - numeric).abs() < 1e-6, "η={eta}: {closed} vs {numeric}");
        }
    }

    #[test]
    fn bob_and_eve_swap_under_complementary_loss() {
        for eta in [0.1, 0.3, 0.7] {
            let p = table_params(eta);
            let q = table_params(1.0 - eta);
            for sign in [Sign::Minus, Sign::Plus] {
                let b = vacuum_prob_unconditional(&p, &p.key_state(sign), Side::Bob).unwrap();
                let e = vacuum_prob_unconditional(&q, &q.key_state(sign), Side::Eve).unwrap();
                assert!((b - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn wrong_branch_cannot_tell_signs_apart() {
        let p = table_params(1.0).mirrored();
        let real = |sign| crate::teleport::BasisChoice::new(Basis::Real, sign).input_state(2.9);
        let minus = vacuum_prob_unconditional(&p, &real(Sign::Minus), Side::Bob).unwrap();
        let plus = vacuum_prob_unconditional(&p, &real(Sign::Plus), Side::Bob).unwrap();
        assert!((minus - plus).abs() < 1e-6, "{minus} vs {plus}");
        assert!(p.theta > 0.0 && p.theta < FRAC_PI_2);
    }

    #[test]
    fn precomputed_conditional_agrees_with_density_route() {
        let p = table_params(0.7);
        let input = p.key_state(Sign::Minus);
        let cv = ConditionalVacuum::new(&p, &input, Side::Bob).unwrap();
        for o in outcomes() {
            let direct = vacuum_prob_conditional(&p, &input, &o, Side::Bob).unwrap();
            assert!((cv.probability(&o) - direct).abs() < 1e-10);
        }
        let q = vacuum_prob_unconditional(&p, &input, Side::Bob).unwrap();
        assert!((cv.average().unwrap() - q).abs() < 1e-12);
    }
}
