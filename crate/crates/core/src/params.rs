use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Result};
use crate::states::CoherentState;
use crate::teleport::{optimal_gains, Basis, BasisChoice, Sign, THETA_MARGIN};

/// Every tunable quantity of one protocol configuration.
///
/// `basis` is the matching condition under analysis: Alice's basis, which
/// equals Bob's displacement branch on sifted rounds. `gamma` is Bob's final
/// displacement (`α` or `iα`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: f64,
    pub basis: Basis,
    pub r: f64,
    pub theta: f64,
    pub g_u: f64,
    pub g_v: f64,
    pub gamma: Complex64,
    pub eta: f64,
    pub beta: f64,
}

impl ProtocolParams {
    pub const DEFAULT_BETA: f64 = 0.8;

    /// Matched-branch parameters with gains from [`optimal_gains`] and the
    /// branch's final displacement.
    pub fn matched(alpha: f64, basis: Basis, r: f64, theta: f64, eta: f64, beta: f64) -> Result<Self> {
        let (g_u, g_v) = optimal_gains(r, theta);
        let p = Self {
            alpha,
            basis,
            r,
            theta,
            g_u,
            g_v,
            gamma: basis.final_displacement(alpha),
            eta,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("{} must be > 0", self.alpha)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(invalid("r", format!("{} must be >= 0", self.r)));
        }
        if !(self.theta > 0.0 && self.theta < FRAC_PI_2) {
            return Err(invalid("theta", format!("{} must lie in (0, π/2)", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("{} must lie in [0, 1]", self.eta)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("{} must lie in (0, 1]", self.beta)));
        }
        if !(self.g_u.is_finite() && self.g_v.is_finite() && self.gamma.is_finite()) {
            return Err(invalid("gains", "non-finite gain or displacement"));
        }
        Ok(())
    }

    /// Same configuration with `(r, θ)` replaced and gains re-derived.
    pub fn with_settings(&self, r: f64, theta: f64) -> Self {
        let (g_u, g_v) = optimal_gains(r, theta);
        Self {
            r,
            theta,
            g_u,
            g_v,
            ..self.clone()
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            gamma: self.basis.final_displacement(alpha),
            ..self.clone()
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..self.clone() }
    }

    /// The key state Alice teleports for `sign` in this basis.
    pub fn key_state(&self, sign: Sign) -> CoherentState {
        BasisChoice::new(self.basis, sign).input_state(self.alpha)
    }

    /// The equivalent configuration for the other matching condition:
    /// `θ → π/2 - θ`, `g_u ↔ g_v`, `γ → iγ` (or back), same `r`.
    pub fn mirrored(&self) -> Self {
        let basis = self.basis.other();
        Self {
            basis,
            theta: (FRAC_PI_2 - self.theta).clamp(THETA_MARGIN, FRAC_PI_2 - THETA_MARGIN),
            g_u: self.g_v,
            g_v: self.g_u,
            gamma: basis.final_displacement(self.alpha),
            ..self.clone()
        }
    }
}
