//! Monte Carlo execution of the protocol rounds, sifting and the
//! robustness envelopes under parameter noise.
//!
//! Every round draws from its own ChaCha8 stream: the generator is seeded
//! with the session seed and `set_stream(round)` selects the round. Rounds
//! can therefore run on any number of threads and still produce the same
//! records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::channel::{vacuum_prob_unconditional, ConditionalVacuum, Side};
use crate::error::{invalid, Error, Result};
use crate::keyrate::{channel_stats, ChannelStats};
use crate::params::ProtocolParams;
use crate::states::CoherentState;
use crate::teleport::{optimize_settings, Basis, BasisChoice, MeasurementOutcome, OutcomeDistribution, Sign, THETA_MARGIN};

/// Draws Alice's homodyne pair from its exact bivariate normal law.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    mean: [f64; 2],
    // lower Cholesky factor of the covariance
    l: [[f64; 2]; 2],
}

impl OutcomeSampler {
    pub fn new(dist: &OutcomeDistribution) -> Result<Self> {
        let c = dist.cov;
        let l00 = c[0][0].sqrt();
        let l10 = c[1][0] / l00;
        let l11 = (c[1][1] - l10 * l10).sqrt();
        if !(l00 > 0.0 && l11 > 0.0) {
            return Err(Error::NonPositiveDefinite {
                min_eigenvalue: (c[1][1] - l10 * l10).min(c[0][0]),
            });
        }
        Ok(Self {
            mean: dist.mean,
            l: [[l00, 0.0], [l10, l11]],
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementOutcome {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        MeasurementOutcome::new(
            self.mean[0] + self.l[0][0] * z0,
            self.mean[1] + self.l[1][0] * z0 + self.l[1][1] * z1,
        )
    }
}

pub fn sample_outcome<R: Rng + ?Sized>(
    input: &CoherentState,
    r: f64,
    theta: f64,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    Ok(OutcomeSampler::new(&OutcomeDistribution::new(input, r, theta)?)?.sample(rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub round: u64,
    pub alice_basis: BasisChoice,
    pub alice_bit: u8,
    pub bob_branch: Basis,
    pub outcome: MeasurementOutcome,
    pub detected_vacuum: bool,
    pub bob_bit: u8,
    pub sifted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub seed: u64,
    pub n_rounds: u64,
    pub n_sifted: u64,
    pub sift_fraction: f64,
    /// Sifted rounds where Alice sent bit 0 / bit 1.
    pub n_bit0: u64,
    pub n_bit1: u64,
    pub q0_hat: f64,
    pub q1_hat: f64,
    pub bit_error_rate: f64,
    /// Analytic Bob statistics at the session's `η`.
    pub expected: ChannelStats,
    /// `(empirical - expected) / binomial σ` for q̂0, q̂1 and the sift fraction.
    pub q0_z: f64,
    pub q1_z: f64,
    pub sift_z: f64,
}

fn z_score(hits: u64, n: u64, p: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let diff = hits as f64 / n as f64 - p;
    if sigma > 0.0 {
        diff / sigma
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Per-round settings for one basis, and the conditional vacuum
/// probabilities for each of Bob's branches.
struct BasisTables {
    samplers: [OutcomeSampler; 2],
    // [sign][bob branch]
    vacuum: [[ConditionalVacuum; 2]; 2],
}

fn branch_index(b: Basis) -> usize {
    match b {
        Basis::Real => 0,
        Basis::Imaginary => 1,
    }
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Minus => 0,
        Sign::Plus => 1,
    }
}

fn tables(settings: &ProtocolParams) -> Result<BasisTables> {
    let states = [settings.key_state(Sign::Minus), settings.key_state(Sign::Plus)];
    let sampler = |s: &CoherentState| -> Result<OutcomeSampler> {
        OutcomeSampler::new(&OutcomeDistribution::new(s, settings.r, settings.theta)?)
    };
    let vacuum = |s: &CoherentState, branch: Basis| {
        let p = ProtocolParams {
            gamma: branch.final_displacement(settings.alpha),
            ..settings.clone()
        };
        ConditionalVacuum::new(&p, s, Side::Bob)
    };
    Ok(BasisTables {
        samplers: [sampler(&states[0])?, sampler(&states[1])?],
        vacuum: [
            [vacuum(&states[0], Basis::Real)?, vacuum(&states[0], Basis::Imaginary)?],
            [vacuum(&states[1], Basis::Real)?, vacuum(&states[1], Basis::Imaginary)?],
        ],
    })
}

fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Runs `n_rounds` rounds of the protocol.
///
/// `params` gives the real-basis configuration; rounds in the imaginary
/// basis use its mirror. Alice's basis and sign and Bob's branch are
/// independent fair coins. Bob's detector fires with probability
/// `1 - Q₀` at the sampled outcome.
pub fn run_session(params: &ProtocolParams, n_rounds: u64, seed: u64) -> Result<(Vec<RunRecord>, SessionSummary)> {
    if n_rounds == 0 {
        return Err(invalid("n_rounds", "must be >= 1"));
    }
    params.validate()?;
    let real = if params.basis == Basis::Real {
        params.clone()
    } else {
        params.mirrored()
    };
    let by_basis = [tables(&real)?, tables(&real.mirrored())?];

    let records: Vec<RunRecord> = (0..n_rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = round_rng(seed, round);
            let basis = if rng.random_bool(0.5) { Basis::Imaginary } else { Basis::Real };
            let sign = if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
            let bob_branch = if rng.random_bool(0.5) { Basis::Imaginary } else { Basis::Real };
            let t = &by_basis[branch_index(basis)];
            let outcome = t.samplers[sign_index(sign)].sample(&mut rng);
            let q0 = t.vacuum[sign_index(sign)][branch_index(bob_branch)].probability(&outcome);
            let detected_vacuum = rng.random::<f64>() < q0;
            let alice_basis = BasisChoice::new(basis, sign);
            RunRecord {
                round,
                alice_basis,
                alice_bit: alice_basis.bit(),
                bob_branch,
                outcome,
                detected_vacuum,
                bob_bit: if detected_vacuum { 0 } else { 1 },
                sifted: basis == bob_branch,
            }
        })
        .collect();

    let expected = channel_stats(&real, Side::Bob)?;
    let summary = summarize(&records, seed, expected);
    Ok((records, summary))
}

pub fn summarize(records: &[RunRecord], seed: u64, expected: ChannelStats) -> SessionSummary {
    let sifted = sift(records);
    let count = |bit: u8| sifted.iter().filter(|r| r.alice_bit == bit).count() as u64;
    let (n_bit0, n_bit1) = (count(0), count(1));
    let vac0 = sifted.iter().filter(|r| r.alice_bit == 0 && r.detected_vacuum).count() as u64;
    let light1 = sifted.iter().filter(|r| r.alice_bit == 1 && !r.detected_vacuum).count() as u64;
    let errors = sifted.iter().filter(|r| r.alice_bit != r.bob_bit).count() as u64;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let n_rounds = records.len() as u64;
    let n_sifted = sifted.len() as u64;
    SessionSummary {
        seed,
        n_rounds,
        n_sifted,
        sift_fraction: ratio(n_sifted, n_rounds),
        n_bit0,
        n_bit1,
        q0_hat: ratio(vac0, n_bit0),
        q1_hat: ratio(light1, n_bit1),
        bit_error_rate: ratio(errors, n_sifted),
        expected,
        q0_z: z_score(vac0, n_bit0, expected.q0),
        q1_z: z_score(light1, n_bit1, expected.q1),
        sift_z: z_score(n_sifted, n_rounds, 0.5),
    }
}

/// Keeps the rounds whose basis matches Bob's branch, in order.
pub fn sift(records: &[RunRecord]) -> Vec<RunRecord> {
    records.iter().filter(|r| r.alice_basis.basis == r.bob_branch).cloned().collect()
}

/// Spread of Bob's `q₀` for the two key states under random parameter noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEnvelope {
    pub alpha: f64,
    pub rel_noise: f64,
    /// Unperturbed `q₀` for inputs `-α` and `+α`.
    pub nominal_minus: f64,
    pub nominal_plus: f64,
    pub min_minus: f64,
    pub max_minus: f64,
    pub min_plus: f64,
    pub max_plus: f64,
}

impl RobustnessEnvelope {
    /// True when the `-α` and `+α` bands do not overlap.
    pub fn separated(&self) -> bool {
        self.min_minus > self.max_plus || self.min_plus > self.max_minus
    }

    /// Distance between the bands (negative when they overlap).
    pub fn gap(&self) -> f64 {
        (self.min_minus - self.max_plus).max(self.min_plus - self.max_minus)
    }
}

/// Perturbs the input amplitude, `r`, `θ`, `g_u`, `g_v` and `γ` by
/// independent uniform relative noise in `[-rel_noise, rel_noise]` and
/// records the range of `q₀` for both key states.
pub fn perturb_robustness(
    params: &ProtocolParams,
    rel_noise: f64,
    n_trials: usize,
    seed: u64,
) -> Result<RobustnessEnvelope> {
    if !(0.0..=0.2).contains(&rel_noise) {
        return Err(invalid("rel_noise", format!("{rel_noise} must lie in [0, 0.2]")));
    }
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be >= 1"));
    }
    params.validate()?;
    let q0 = |p: &ProtocolParams, state: &CoherentState| vacuum_prob_unconditional(p, state, Side::Bob);
    let nominal_minus = q0(params, &params.key_state(Sign::Minus))?;
    let nominal_plus = q0(params, &params.key_state(Sign::Plus))?;

    let trials: Vec<(f64, f64)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = round_rng(seed, trial);
            let mut jitter = |x: f64| x * (1.0 + rel_noise * (2.0 * rng.random::<f64>() - 1.0));
            let amplitude = jitter(params.alpha);
            let p = ProtocolParams {
                r: jitter(params.r),
                theta: jitter(params.theta).clamp(THETA_MARGIN, FRAC_PI_2 - THETA_MARGIN),
                g_u: jitter(params.g_u),
                g_v: jitter(params.g_v),
                gamma: params.gamma * jitter(1.0),
                ..params.clone()
            };
            let state = |sign| BasisChoice::new(p.basis, sign).input_state(amplitude);
            Ok((q0(&p, &state(Sign::Minus))?, q0(&p, &state(Sign::Plus))?))
        })
        .collect::<Result<_>>()?;

    let fold = |pick: fn(&(f64, f64)) -> f64| {
        trials.iter().map(pick).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (min_minus, max_minus) = fold(|t| t.0);
    let (min_plus, max_plus) = fold(|t| t.1);
    Ok(RobustnessEnvelope {
        alpha: params.alpha,
        rel_noise,
        nominal_minus,
        nominal_plus,
        min_minus,
        max_minus,
        min_plus,
        max_plus,
    })
}

/// [`perturb_robustness`] along an `α` grid, each point at its
/// fidelity-contrast optimal settings.
pub fn robustness_curve(
    alphas: &[f64],
    eta: f64,
    rel_noise: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<RobustnessEnvelope>> {
    alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let s = optimize_settings(alpha, Basis::Real)?;
            let p = ProtocolParams::matched(alpha, Basis::Real, s.r, s.theta, eta, ProtocolParams::DEFAULT_BETA)?;
            perturb_robustness(&p, rel_noise, n_trials, seed.wrapping_add(i as u64))
        })
        .collect()
}
