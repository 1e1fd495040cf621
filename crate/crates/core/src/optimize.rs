//! Derivative-free maximization on boxes: a coarse grid scan followed by
//! Nelder–Mead restarts from the best grid cells.
//!
//! Grid points and restarts are evaluated in parallel, but results are
//! always merged in index order so the outcome does not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub max_evaluations: usize,
    /// Spread of objective values across the simplex.
    pub ftol: f64,
    /// Largest vertex distance from the best vertex, per coordinate.
    pub xtol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evaluations: 4000,
            ftol: 1e-8,
            xtol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0` with an initial simplex of per-axis `step`s.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: &[f64]) -> Optimum {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step[i];
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut converged = false;
        while evals < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.ftol && size <= self.xtol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x0 = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = x0.iter().zip(&vertex.0).map(|(a, b)| a + sigma * (b - a)).collect();
                let v = eval(&x, &mut evals);
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Optimum {
            x,
            value,
            evaluations: evals,
            converged,
        }
    }
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// `points` equally spaced values per axis, endpoints included.
    pub fn grid_axis(&self, axis: usize, points: usize) -> Vec<f64> {
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        if points < 2 || lo == hi {
            return vec![lo];
        }
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    }
}

/// Smallest number of grid points on `[lo, hi]` with spacing at most `pitch`.
pub fn points_for_pitch(lo: f64, hi: f64, pitch: f64) -> usize {
    (((hi - lo) / pitch).ceil() as usize).max(1) + 1
}

/// Prefers the larger value; near-equal values fall back to the
/// lexicographically smaller point.
fn better(a: &Optimum, b: &Optimum) -> bool {
    let scale = 1e-13 * a.value.abs().max(b.value.abs()).max(1e-300);
    if (a.value - b.value).abs() > scale {
        return a.value > b.value;
    }
    for (xa, xb) in a.x.iter().zip(&b.x) {
        if xa != xb {
            return xa < xb;
        }
    }
    false
}

#[derive(Clone, Debug)]
pub struct GridSearch {
    pub bounds: Bounds,
    /// Grid values per axis (1 or 2 axes).
    pub axes: Vec<Vec<f64>>,
    pub restarts: usize,
    pub simplex: NelderMead,
}

impl GridSearch {
    /// Maximizes `f` over the box: evaluates the full grid, then runs a
    /// Nelder–Mead restart (with an initial simplex of one grid pitch) from
    /// each of the best `restarts` local maxima of the grid. Iterates are
    /// clamped to the box before every evaluation.
    pub fn maximize<F>(&self, f: F) -> Result<Optimum>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dims: Vec<usize> = self.axes.iter().map(|a| a.len()).collect();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::OptimizerFailure("empty search grid".into()));
        }
        let total: usize = dims.iter().product();
        let point = |mut flat: usize| -> Vec<f64> {
            let mut x = vec![0.0; dims.len()];
            for (d, axis) in self.axes.iter().enumerate().rev() {
                x[d] = axis[flat % axis.len()];
                flat /= axis.len();
            }
            x
        };
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|k| {
                let v = f(&point(k));
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect();
        if values.iter().all(|v| !v.is_finite()) {
            return Err(Error::OptimizerFailure("objective is not finite anywhere on the grid".into()));
        }

        let starts = self.local_maxima(&dims, &values);
        let steps: Vec<f64> = self
            .axes
            .iter()
            .enumerate()
            .map(|(d, a)| {
                if a.len() > 1 {
                    (a[1] - a[0]).abs()
                } else {
                    0.1 * (self.bounds.hi[d] - self.bounds.lo[d]).max(1e-3)
                }
            })
            .collect();

        let runs: Vec<Optimum> = starts
            .par_iter()
            .map(|&k| {
                let x0 = point(k);
                let neg = |x: &[f64]| -f(&self.bounds.clamp(x));
                let mut run = self.simplex.minimize(neg, &x0, &steps);
                // A fresh simplex at the found point guards against collapse.
                let small: Vec<f64> = steps.iter().map(|s| 0.05 * s).collect();
                let again = self.simplex.minimize(neg, &self.bounds.clamp(&run.x), &small);
                let evaluations = run.evaluations + again.evaluations;
                if again.value <= run.value {
                    run = again;
                }
                run.evaluations = evaluations;
                Optimum {
                    x: self.bounds.clamp(&run.x),
                    value: -run.value,
                    evaluations: run.evaluations,
                    converged: run.converged,
                }
            })
            .collect();

        let mut best: Option<Optimum> = None;
        for run in runs {
            if !run.value.is_finite() {
                continue;
            }
            match &best {
                Some(b) if !better(&run, b) => {}
                _ => best = Some(run),
            }
        }
        let mut best = best.ok_or_else(|| Error::OptimizerFailure("every restart diverged".into()))?;
        if !best.converged {
            return Err(Error::OptimizerFailure(format!(
                "simplex did not converge within {} evaluations",
                self.simplex.max_evaluations
            )));
        }
        best.evaluations += total;
        Ok(best)
    }

    fn local_maxima(&self, dims: &[usize], values: &[f64]) -> Vec<usize> {
        let neighbours = |k: usize| -> Vec<usize> {
            let mut idx = vec![0usize; dims.len()];
            let mut rest = k;
            for d in (0..dims.len()).rev() {
                idx[d] = rest % dims[d];
                rest /= dims[d];
            }
            let mut out = Vec::new();
            for d in 0..dims.len() {
                for delta in [-1i64, 1] {
                    let v = idx[d] as i64 + delta;
                    if v < 0 || v >= dims[d] as i64 {
                        continue;
                    }
                    let mut j = idx.clone();
                    j[d] = v as usize;
                    out.push(j.iter().zip(dims).fold(0, |acc, (i, n)| acc * n + i));
                }
            }
            out
        };
        let mut peaks: Vec<usize> = (0..values.len())
            .filter(|&k| values[k].is_finite() && neighbours(k).iter().all(|&j| values[j] <= values[k]))
            .collect();
        // Plateaus yield runs of equal "peaks"; keep grid order as tie-break.
        peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        peaks.truncate(self.restarts.max(1));
        if peaks.is_empty() {
            let best = (0..values.len())
                .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            peaks.push(best);
        }
        peaks
    }
}
