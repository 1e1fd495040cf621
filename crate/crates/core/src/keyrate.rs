//! Binary-channel statistics, mutual information and the direct
//! reconciliation key rate `K = max(0, β I_AB - I_AE)`, with the optimizers
//! and parameter sweeps built on it.
//!
//! Key bits are decoded from vacuum detection: no light means 0. `q₀` is the
//! probability of seeing vacuum when Alice sent the bit-0 state, `q₁` the
//! probability of seeing light when she sent the bit-1 state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::channel::{vacuum_prob_from_amplitude, Side};
use crate::error::{invalid, Result};
use crate::optimize::{points_for_pitch, Bounds, GridSearch, NelderMead};
use crate::params::ProtocolParams;
use crate::teleport::{optimize_settings, post_measurement_amplitude, Sign, R_MAX, THETA_MARGIN};

/// Grid pitches of the key-rate optimizers.
pub const ALPHA_PITCH: f64 = 0.05;
pub const THETA_PITCH: f64 = PI / 200.0;
pub const R_PITCH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub q0: f64,
    pub q1: f64,
}

impl ChannelStats {
    pub fn new(q0: f64, q1: f64) -> Result<Self> {
        for (name, q) in [("q0", q0), ("q1", q1)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid(name, format!("{q} must lie in [0, 1]")));
            }
        }
        Ok(Self { q0, q1 })
    }

    /// Probability that the party decodes the wrong bit, uniform prior.
    pub fn error_rate(&self) -> f64 {
        0.5 * (1.0 - self.q0) + 0.5 * (1.0 - self.q1)
    }
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

fn neg_entropy(q: f64) -> f64 {
    xlog2x(q) + xlog2x(1.0 - q)
}

/// Mutual information in bits between Alice's uniform bit and the decoded
/// bit of a binary channel with the given statistics.
pub fn mutual_information(stats: &ChannelStats) -> f64 {
    let (q0, q1) = (stats.q0, stats.q1);
    let mix = |a: f64, b: f64| xlog2x((1.0 + a - b).clamp(1e-300, 2.0));
    let i = 1.0 + 0.5 * (neg_entropy(q0) + neg_entropy(q1) - mix(q0, q1) - mix(q1, q0));
    i.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub i_ab: f64,
    pub i_ae: f64,
    pub delta_i: f64,
    pub k: f64,
    pub bob: ChannelStats,
    pub eve: ChannelStats,
    pub params: ProtocolParams,
}

/// Detection statistics of one party for the branch in `params`.
pub fn channel_stats(params: &ProtocolParams, side: Side) -> Result<ChannelStats> {
    params.validate()?;
    let zero = post_measurement_amplitude(&params.key_state(Sign::Minus), params.r, params.theta)?;
    let one = post_measurement_amplitude(&params.key_state(Sign::Plus), params.r, params.theta)?;
    ChannelStats::new(
        vacuum_prob_from_amplitude(&zero, params, side)?,
        1.0 - vacuum_prob_from_amplitude(&one, params, side)?,
    )
}

pub fn key_rate(params: &ProtocolParams) -> Result<KeyRateReport> {
    params.validate()?;
    let zero = post_measurement_amplitude(&params.key_state(Sign::Minus), params.r, params.theta)?;
    let one = post_measurement_amplitude(&params.key_state(Sign::Plus), params.r, params.theta)?;
    let stats = |side| -> Result<ChannelStats> {
        ChannelStats::new(
            vacuum_prob_from_amplitude(&zero, params, side)?,
            1.0 - vacuum_prob_from_amplitude(&one, params, side)?,
        )
    };
    let (bob, eve) = (stats(Side::Bob)?, stats(Side::Eve)?);
    let i_ab = mutual_information(&bob);
    let i_ae = mutual_information(&eve);
    let delta_i = params.beta * i_ab - i_ae;
    Ok(KeyRateReport {
        i_ab,
        i_ae,
        delta_i,
        k: delta_i.max(0.0),
        bob,
        eve,
        params: params.clone(),
    })
}

fn delta_i_or_nan(params: &ProtocolParams) -> f64 {
    key_rate(params).map(|r| r.delta_i).unwrap_or(f64::NAN)
}

fn theta_bounds() -> (f64, f64) {
    (THETA_MARGIN, FRAC_PI_2 - THETA_MARGIN)
}

fn search(bounds: Bounds, pitches: &[f64], restarts: usize) -> GridSearch {
    let axes = pitches
        .iter()
        .enumerate()
        .map(|(d, &p)| bounds.grid_axis(d, points_for_pitch(bounds.lo[d], bounds.hi[d], p)))
        .collect();
    GridSearch {
        bounds,
        axes,
        restarts,
        simplex: NelderMead::default(),
    }
}

fn real_template(alpha: f64, r: f64, eta: f64, beta: f64) -> Result<ProtocolParams> {
    ProtocolParams::matched(alpha, crate::teleport::Basis::Real, r, 0.25 * PI, eta, beta)
}

/// Maximizes `ΔI` over `θ` at fixed `(r, α)`, gains slaved to `θ`.
pub fn optimize_theta(r: f64, alpha: f64, eta: f64, beta: f64) -> Result<(f64, KeyRateReport)> {
    let template = real_template(alpha, r, eta, beta)?;
    optimize_theta_from(&template)
}

pub fn optimize_theta_from(template: &ProtocolParams) -> Result<(f64, KeyRateReport)> {
    template.validate()?;
    let (lo, hi) = theta_bounds();
    let best = search(Bounds::new(vec![lo], vec![hi]), &[THETA_PITCH], 4)
        .maximize(|x| delta_i_or_nan(&template.with_settings(template.r, x[0])))?;
    let report = key_rate(&template.with_settings(template.r, best.x[0]))?;
    Ok((best.x[0], report))
}

/// Joint maximum of `ΔI` over `α ∈ alpha_range` and `θ` at fixed `r`.
pub fn optimize_alpha_theta(r: f64, eta: f64, beta: f64, alpha_range: (f64, f64)) -> Result<(f64, f64, KeyRateReport)> {
    let (alo, ahi) = alpha_range;
    if !(alo > 0.0 && ahi <= 5.0 && alo < ahi) {
        return Err(invalid("alpha range", format!("[{alo}, {ahi}] must lie in (0, 5]")));
    }
    let template = real_template(alo, r, eta, beta)?;
    let (lo, hi) = theta_bounds();
    let best = search(Bounds::new(vec![alo, lo], vec![ahi, hi]), &[ALPHA_PITCH, THETA_PITCH], 6)
        .maximize(|x| delta_i_or_nan(&template.with_alpha(x[0]).with_settings(r, x[1])))?;
    let (alpha, theta) = (best.x[0], best.x[1]);
    let report = key_rate(&template.with_alpha(alpha).with_settings(r, theta))?;
    Ok((alpha, theta, report))
}

/// Joint maximum of `ΔI` over `r ∈ [0, R_MAX]` and `θ` at fixed `α`.
pub fn optimize_r_theta(alpha: f64, eta: f64, beta: f64) -> Result<(f64, f64, KeyRateReport)> {
    let template = real_template(alpha, 0.0, eta, beta)?;
    optimize_r_theta_from(&template)
}

pub fn optimize_r_theta_from(template: &ProtocolParams) -> Result<(f64, f64, KeyRateReport)> {
    template.validate()?;
    let (lo, hi) = theta_bounds();
    let best = search(Bounds::new(vec![0.0, lo], vec![R_MAX, hi]), &[R_PITCH, THETA_PITCH], 6)
        .maximize(|x| delta_i_or_nan(&template.with_settings(x[0], x[1])))?;
    let (r, theta) = (best.x[0], best.x[1]);
    let report = key_rate(&template.with_settings(r, theta))?;
    Ok((r, theta, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Alpha,
    Eta,
    R,
    Theta,
}

/// How `(r, θ)` are chosen at each sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SettingsMode {
    /// Keep the template's `(r, θ)`.
    Fixed,
    /// Maximize the fidelity contrast `Π` for the point's `α`.
    PiOptimal,
    /// Maximize `ΔI` over `θ` at the template's `r`.
    ThetaOptimal,
    /// Maximize `ΔI` over `(r, θ)`.
    JointOptimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub r: f64,
    pub theta: f64,
    pub g_u: f64,
    pub g_v: f64,
    pub q0_bob: f64,
    pub q1_bob: f64,
    pub q0_eve: f64,
    pub q1_eve: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub delta_i: f64,
    pub k: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 13] = [
        "value", "r", "theta", "g_u", "g_v", "q0_bob", "q1_bob", "q0_eve", "q1_eve", "i_ab", "i_ae", "delta_i", "k",
    ];

    pub fn from_report(value: f64, report: &KeyRateReport) -> Self {
        let p = &report.params;
        Self {
            value,
            r: p.r,
            theta: p.theta,
            g_u: p.g_u,
            g_v: p.g_v,
            q0_bob: report.bob.q0,
            q1_bob: report.bob.q1,
            q0_eve: report.eve.q0,
            q1_eve: report.eve.q1,
            i_ab: report.i_ab,
            i_ae: report.i_ae,
            delta_i: report.delta_i,
            k: report.k,
        }
    }

    pub fn values(&self) -> [f64; 13] {
        [
            self.value,
            self.r,
            self.theta,
            self.g_u,
            self.g_v,
            self.q0_bob,
            self.q1_bob,
            self.q0_eve,
            self.q1_eve,
            self.i_ab,
            self.i_ae,
            self.delta_i,
            self.k,
        ]
    }
}

/// The configuration actually evaluated at one sweep point.
pub fn sweep_point(template: &ProtocolParams, axis: Axis, value: f64, mode: SettingsMode) -> Result<KeyRateReport> {
    let p = match axis {
        Axis::Alpha => template.with_alpha(value),
        Axis::Eta => template.with_eta(value),
        Axis::R => template.with_settings(value, template.theta),
        Axis::Theta => template.with_settings(template.r, value),
    };
    p.validate()?;
    match mode {
        SettingsMode::Fixed => key_rate(&p),
        SettingsMode::PiOptimal => {
            let s = optimize_settings(p.alpha, p.basis)?;
            key_rate(&p.with_settings(s.r, s.theta))
        }
        SettingsMode::ThetaOptimal => Ok(optimize_theta_from(&p)?.1),
        SettingsMode::JointOptimal => Ok(optimize_r_theta_from(&p)?.2),
    }
}

/// Evaluates the key rate along one axis. Rows follow the order of `grid`.
pub fn sweep(template: &ProtocolParams, axis: Axis, grid: &[f64], mode: SettingsMode) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(invalid("grid", "no sweep points"));
    }
    let conflict = match mode {
        SettingsMode::Fixed => false,
        SettingsMode::ThetaOptimal => axis == Axis::Theta,
        SettingsMode::PiOptimal | SettingsMode::JointOptimal => matches!(axis, Axis::R | Axis::Theta),
    };
    if conflict {
        return Err(invalid("settings", format!("{mode:?} settings cannot be swept along {axis:?}")));
    }
    grid.par_iter()
        .map(|&v| sweep_point(template, axis, v, mode).map(|rep| SweepRow::from_report(v, &rep)))
        .collect()
}

/// `n` equally spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teleport::Basis;

    fn table_params(eta: f64, beta: f64) -> ProtocolParams {
        ProtocolParams::matched(2.9, Basis::Real, 1.1, 0.190f64.sqrt().acos(), eta, beta).unwrap()
    }

    #[test]
    fn mutual_information_reference_values() {
        assert_eq!(mutual_information(&ChannelStats::new(1.0, 1.0).unwrap()), 1.0);
        assert!(mutual_information(&ChannelStats::new(0.5, 0.5).unwrap()).abs() < 1e-15);
        let q = 0.9;
        let h2 = -(q * f64::log2(q) + (1.0 - q) * f64::log2(1.0 - q));
        let i = mutual_information(&ChannelStats::new(q, q).unwrap());
        assert!((i - (1.0 - h2)).abs() < 1e-12);
        assert!((i - 0.5310).abs() < 1e-4);
        assert_eq!(mutual_information(&ChannelStats::new(0.0, 0.0).unwrap()), 1.0);
    }

    #[test]
    fn mutual_information_is_symmetric() {
        for (a, b) in [(0.1, 0.7), (0.93, 0.2), (1.0, 0.0), (0.5, 0.999)] {
            let x = mutual_information(&ChannelStats::new(a, b).unwrap());
            let y = mutual_information(&ChannelStats::new(b, a).unwrap());
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn table_row_key_rate() {
        let rep = key_rate(&table_params(0.0, 0.8)).unwrap();
        assert!((rep.k - 0.0559).abs() < 0.003, "K = {}", rep.k);
        assert_eq!(rep.k, rep.delta_i.max(0.0));
    }

    #[test]
    fn balanced_splitting_has_no_key() {
        let rep = key_rate(&table_params(0.5, 1.0)).unwrap();
        assert!(rep.delta_i.abs() < 1e-10);
        assert_eq!(key_rate(&table_params(0.5, 0.8)).unwrap().k, 0.0);
    }

    #[test]
    fn roles_swap_under_complementary_loss() {
        for eta in [0.1, 0.35, 0.8] {
            let a = key_rate(&table_params(eta, 0.8)).unwrap();
            let b = key_rate(&table_params(1.0 - eta, 0.8)).unwrap();
            assert!((a.i_ab - b.i_ae).abs() < 1e-9 && (a.i_ae - b.i_ab).abs() < 1e-9);
        }
    }

    #[test]
    fn imaginary_branch_mirrors_real_branch() {
        let p = table_params(0.3, 0.8);
        let a = key_rate(&p).unwrap();
        let b = key_rate(&p.mirrored()).unwrap();
        assert!((a.delta_i - b.delta_i).abs() < 1e-9);
    }

    #[test]
    fn theta_optimum_reproduces_table_row() {
        let (theta, rep) = optimize_theta(1.1, 2.9, 0.0, 0.8).unwrap();
        assert!((theta.cos().powi(2) - 0.190).abs() < 0.01);
        assert!((rep.k - 0.0559).abs() < 0.003);
    }

    #[test]
    fn sweep_rows_follow_grid_and_reject_conflicts() {
        let p = table_params(0.0, 0.8);
        let grid = [0.4, 0.3];
        let rows = sweep(&p, Axis::Eta, &grid, SettingsMode::Fixed).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].value, 0.4);
        assert!(rows[1].k >= rows[0].k);
        assert!(sweep(&p, Axis::Theta, &grid, SettingsMode::ThetaOptimal).is_err());
        assert!(sweep(&p, Axis::Alpha, &[], SettingsMode::Fixed).is_err());
    }

    #[test]
    fn single_point_sweep_equals_key_rate() {
        let p = table_params(0.2, 0.8);
        let row = sweep(&p, Axis::Alpha, &[2.9], SettingsMode::Fixed).unwrap()[0];
        let rep = key_rate(&p).unwrap();
        assert_eq!(row.k, rep.k);
        assert_eq!(row.i_ab, rep.i_ab);
    }
}
