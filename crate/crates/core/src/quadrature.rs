//! Adaptive Gauss–Kronrod quadrature, and the nested-quadrature oracle used
//! to cross-check the closed-form Gaussian engine.
//!
//! Nothing here touches determinants or matrix inverses of the complex
//! coefficients: the oracle only evaluates the integrand pointwise, so it
//! stays independent of [`QuadraticForm::integrate_all`].

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::gaussian::QuadraticForm;

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 2000;

#[derive(Clone, Copy, Debug)]
pub struct QuadEstimate {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
    // Below this error the estimate is dominated by rounding.
    floor: f64,
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = fc.norm() * WGK[7];
    let mut fv1 = [Complex64::new(0.0, 0.0); 7];
    let mut fv2 = [Complex64::new(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((resk - resg) * half).norm();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    Segment {
        lo,
        hi,
        value,
        error: error.max(floor),
        floor,
    }
}

/// Globally adaptive bisection with the 15-point Gauss–Kronrod rule.
///
/// Stops when the summed error estimate is below `max(epsabs, epsrel·|I|)`,
/// or when every remaining segment is at its rounding floor.
pub fn integrate_adaptive<F>(mut f: F, lo: f64, hi: f64, epsabs: f64, epsrel: f64) -> Result<QuadEstimate>
where
    F: FnMut(f64) -> Complex64,
{
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(invalid("quadrature interval", format!("[{lo}, {hi}]")));
    }
    let mut segments = vec![gk15(&mut f, lo, hi)];
    let mut evaluations = 15;
    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let floor: f64 = segments.iter().map(|s| s.floor).sum();
        let target = epsabs.max(epsrel * value.norm());
        if error <= target || error <= floor * 1.000_001 {
            return Ok(QuadEstimate {
                value,
                error,
                evaluations,
            });
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence(format!(
                "{MAX_INTERVALS} subintervals on [{lo}, {hi}], error {error:.3e} > target {target:.3e}"
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.error > s.floor)
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("some segment is above its rounding floor");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        segments.push(gk15(&mut f, s.lo, mid));
        segments.push(gk15(&mut f, mid, s.hi));
        evaluations += 30;
    }
}

/// Nested adaptive quadrature of a form over a box, with an absolute error
/// budget split between levels.
struct Nested<'a> {
    form: &'a QuadraticForm,
    bounds: Vec<(f64, f64)>,
    evaluations: usize,
}

impl Nested<'_> {
    fn integrate(&mut self, modulus: bool, budget: f64) -> Result<Complex64> {
        let mut x = vec![0.0; self.form.dim()];
        self.level(0, &mut x, modulus, budget)
    }

    fn level(&mut self, k: usize, x: &mut Vec<f64>, modulus: bool, budget: f64) -> Result<Complex64> {
        let n = self.form.dim();
        let (lo, hi) = self.bounds[k];
        // Inner errors accumulate over this level's width; give them half.
        let inner_budget = 0.5 * budget / (hi - lo);
        let mut failure = None;
        let est = {
            let this = &mut *self;
            let x = &mut *x;
            integrate_adaptive(
                |t| {
                    x[k] = t;
                    if k + 1 == n {
                        this.evaluations += 1;
                        let v = this.form.value_at(x);
                        if modulus {
                            Complex64::new(v.norm(), 0.0)
                        } else {
                            v
                        }
                    } else {
                        match this.level(k + 1, x, modulus, inner_budget) {
                            Ok(v) => v,
                            Err(e) => {
                                failure.get_or_insert(e);
                                Complex64::new(0.0, 0.0)
                            }
                        }
                    }
                },
                lo,
                hi,
                0.5 * budget,
                0.0,
            )
        };
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(est?.value)
    }
}

/// Independent numerical value of `∫ exp(-xᵀAx + bᵀx + c) dⁿx` for `n ≤ 4`.
///
/// Each variable is integrated over `[μᵢ - 10σᵢ, μᵢ + 10σᵢ]`, with `μ`, `σ`
/// the mean and marginal standard deviations of the real-part envelope.
/// The absolute error budget is tightened until two successive refinements
/// agree to relative `tol`.
pub fn quadrature_oracle(form: &QuadraticForm, tol: f64) -> Result<Complex64> {
    let n = form.dim();
    if n > 4 {
        return Err(invalid("oracle dimension", format!("{n} > 4")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tol", format!("{tol} not in (0, 1)")));
    }
    if n == 0 {
        return Ok(form.c().exp());
    }
    let (mean, cov) = form.envelope_moments()?;
    let bounds = (0..n)
        .map(|i| {
            let s = cov[(i, i)].sqrt();
            (mean[i] - 10.0 * s, mean[i] + 10.0 * s)
        })
        .collect();
    let mut nested = Nested {
        form,
        bounds,
        evaluations: 0,
    };

    // The envelope integral sets the absolute scale; cancellations in the
    // oscillating integrand can make the answer much smaller than it.
    let scale = nested.integrate(true, f64::INFINITY)?.re;
    let scale = {
        let rough = nested.integrate(true, 1e-3 * scale)?.re;
        if rough > 0.0 { rough } else { scale }
    };
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NoConvergence(format!("envelope integral {scale}")));
    }

    let mut budget = tol * scale;
    let mut previous = nested.integrate(false, budget)?;
    for _ in 0..6 {
        budget = (budget / 16.0).min(0.1 * tol * previous.norm());
        let refined = nested.integrate(false, budget)?;
        if (refined - previous).norm() <= tol * refined.norm() && budget <= tol * refined.norm() {
            return Ok(refined);
        }
        previous = refined;
    }
    Err(Error::NoConvergence(format!(
        "refinements stalled above tol {tol:.1e} after {} evaluations",
        nested.evaluations
    )))
}
