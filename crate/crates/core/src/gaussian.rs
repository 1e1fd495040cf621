//! Closed-form Gaussian integrals with complex quadratic exponents.
//!
//! A [`QuadraticForm`] over `n` real variables stands for the function
//! `exp(-xᵀAx + bᵀx + c)` with complex symmetric `A`, complex `b` and
//! complex `c`. Wavefunctions, density kernels and their products are all
//! of this shape, so products are coefficient sums, linear changes of
//! variables are congruences, and integrals are closed form:
//!
//! ```text
//! ∫ exp(-xᵀAx + bᵀx + c) dⁿx = π^{n/2} det(A)^{-1/2} exp(¼ bᵀA⁻¹b + c)
//! ```
//!
//! valid whenever `Re(A)` is positive definite. The square root of the
//! determinant is taken on the branch continuous from the real positive
//! definite limit: with `Re(A) ≻ 0` every pivot of the symmetric
//! (unconjugated) `LDLᵀ` factorization has positive real part, so the
//! product of principal square roots of the pivots is that branch.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of `Re(A)` for integration.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Largest admissible `|A_ij - A_ji|` accepted by [`QuadraticForm::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-14;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    a: CMatrix,
    b: CVector,
    c: Complex64,
}

impl QuadraticForm {
    pub fn new(a: CMatrix, b: CVector, c: Complex64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                let gap = (a[(i, j)] - a[(j, i)]).norm();
                if gap > SYMMETRY_TOLERANCE {
                    return Err(crate::error::invalid(
                        "quadratic coefficients",
                        format!("A is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap:.3e}"),
                    ));
                }
            }
        }
        if !c.is_finite() || a.iter().chain(b.iter()).any(|z| !z.is_finite()) {
            return Err(crate::error::invalid(
                "quadratic form",
                "non-finite coefficient",
            ));
        }
        Ok(Self::from_parts(a, b, c))
    }

    /// Builds a form from real coefficient arrays. Handy for tests and
    /// hand-written kernels.
    pub fn from_real(a: &[&[f64]], b: &[f64], c: f64) -> Result<Self> {
        let n = b.len();
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let am = CMatrix::from_fn(n, n, |i, j| Complex64::new(a[i][j], 0.0));
        let bv = CVector::from_iterator(n, b.iter().map(|&v| Complex64::new(v, 0.0)));
        Self::new(am, bv, Complex64::new(c, 0.0))
    }

    /// Internal constructor: symmetrizes `A` so roundoff from congruences
    /// never accumulates into asymmetry.
    pub(crate) fn from_parts(a: CMatrix, b: CVector, c: Complex64) -> Self {
        let a = (&a + a.transpose()) * Complex64::new(0.5, 0.0);
        Self { a, b, c }
    }

    /// The constant function `exp(c)` over zero variables.
    pub fn constant(c: Complex64) -> Self {
        Self {
            a: CMatrix::zeros(0, 0),
            b: CVector::zeros(0),
            c,
        }
    }

    /// The constant function 1 over `dim` variables.
    pub fn unit(dim: usize) -> Self {
        Self {
            a: CMatrix::zeros(dim, dim),
            b: CVector::zeros(dim),
            c: ZERO,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CVector {
        &self.b
    }

    pub fn c(&self) -> Complex64 {
        self.c
    }

    /// Complex conjugate of the represented function (variables are real).
    pub fn conj(&self) -> Self {
        Self {
            a: self.a.map(|z| z.conj()),
            b: self.b.map(|z| z.conj()),
            c: self.c.conj(),
        }
    }

    /// Pointwise product of two forms over the same variables.
    pub fn times(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            c: self.c + other.c,
        })
    }

    /// Multiplies the represented function by `exp(delta)`.
    pub fn shift_log(mut self, delta: Complex64) -> Self {
        self.c += delta;
        self
    }

    /// Adds `-xᵀ·extra·x` (plus `extra_b` linear terms) to the exponent.
    pub(crate) fn add_exponent(mut self, extra_a: &CMatrix, extra_b: &CVector) -> Self {
        self.a += extra_a;
        self.b += extra_b;
        self.a = (&self.a + self.a.transpose()) * Complex64::new(0.5, 0.0);
        self
    }

    /// Change of variables `y = M z + offset`: returns `g(z) = f(M z + offset)`
    /// as a form over `z` (`M` is `self.dim() × m.ncols()`).
    pub fn substitute(&self, m: &DMatrix<f64>, offset: &DVector<f64>) -> Result<Self> {
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        if offset.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: offset.len(),
            });
        }
        let mc = m.map(|v| Complex64::new(v, 0.0));
        let oc = offset.map(|v| Complex64::new(v, 0.0));
        let a_o = &self.a * &oc;
        let a = mc.transpose() * &self.a * &mc;
        let b = mc.transpose() * (&self.b - a_o.scale(2.0));
        let c = self.c - oc.dot(&a_o) + self.b.dot(&oc);
        Ok(Self::from_parts(a, b, c))
    }

    /// Re-labels variables: variable `i` of `self` becomes variable
    /// `targets[i]` of a form over `dim` variables. The result does not
    /// depend on the remaining variables.
    pub fn embed(&self, targets: &[usize], dim: usize) -> Result<Self> {
        if targets.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: targets.len(),
            });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= dim) {
            return Err(crate::error::invalid(
                "embedding",
                format!("target index {t} outside {dim} variables"),
            ));
        }
        let m = DMatrix::from_fn(self.dim(), dim, |i, j| if targets[i] == j { 1.0 } else { 0.0 });
        self.substitute(&m, &DVector::zeros(self.dim()))
    }

    /// Fixes the listed variables to the given values; the remaining
    /// variables keep their relative order.
    pub fn fix(&self, indices: &[usize], values: &[f64]) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: values.len(),
            });
        }
        let n = self.dim();
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return Err(crate::error::invalid(
                "fixed variable",
                format!("index {i} outside {n} variables"),
            ));
        }
        let free: Vec<usize> = (0..n).filter(|i| !indices.contains(i)).collect();
        let m = DMatrix::from_fn(n, free.len(), |i, j| if free[j] == i { 1.0 } else { 0.0 });
        let mut offset = DVector::zeros(n);
        for (&i, &v) in indices.iter().zip(values) {
            offset[i] = v;
        }
        self.substitute(&m, &offset)
    }

    /// The exponent `-xᵀAx + bᵀx + c` at `x`.
    pub fn exponent_at(&self, x: &[f64]) -> Complex64 {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let mut acc = self.c;
        for i in 0..n {
            let mut row = self.a[(i, i)] * x[i];
            for j in 0..i {
                row += self.a[(i, j)] * (2.0 * x[j]);
            }
            acc += (self.b[i] - row) * x[i];
        }
        acc
    }

    pub fn value_at(&self, x: &[f64]) -> Complex64 {
        self.exponent_at(x).exp()
    }

    /// Smallest eigenvalue of `Re(A)`; errors when it is not above
    /// [`PD_TOLERANCE`].
    pub fn check_positive_definite(&self) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(f64::INFINITY);
        }
        let re = self.a.map(|z| z.re);
        let min = SymmetricEigen::new(re)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min.is_nan() || min <= PD_TOLERANCE {
            return Err(Error::NonPositiveDefinite { min_eigenvalue: min });
        }
        Ok(min)
    }

    /// Logarithm of [`Self::integrate_all`], with the imaginary part on the
    /// continuous branch. Use this when the integral may under- or overflow.
    pub fn log_integral(&self) -> Result<Complex64> {
        self.check_positive_definite()?;
        let n = self.dim();
        if n == 0 {
            return Ok(self.c);
        }
        let f = Ldlt::factor(&self.a);
        let y = f.solve(&self.b);
        Ok(0.5 * n as f64 * PI.ln() - 0.5 * f.log_det() + 0.25 * self.b.dot(&y) + self.c)
    }

    /// Integral of the represented function over all of ℝⁿ.
    pub fn integrate_all(&self) -> Result<Complex64> {
        Ok(self.log_integral()?.exp())
    }

    /// Integrates out every variable not listed in `keep`. The result is a
    /// form over the kept variables, in the order given.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Self> {
        let n = self.dim();
        for (k, &i) in keep.iter().enumerate() {
            if i >= n || keep[..k].contains(&i) {
                return Err(crate::error::invalid(
                    "kept variables",
                    format!("index {i} is out of range or repeated"),
                ));
            }
        }
        let drop: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        if drop.is_empty() {
            return self.embed_order(keep);
        }
        let sub = |rows: &[usize], cols: &[usize]| {
            CMatrix::from_fn(rows.len(), cols.len(), |i, j| self.a[(rows[i], cols[j])])
        };
        let a_dd = sub(&drop, &drop);
        let a_kd = sub(keep, &drop);
        let a_kk = sub(keep, keep);
        let b_d = CVector::from_iterator(drop.len(), drop.iter().map(|&i| self.b[i]));
        let b_k = CVector::from_iterator(keep.len(), keep.iter().map(|&i| self.b[i]));

        let block = Self {
            a: a_dd.clone(),
            b: b_d.clone(),
            c: ZERO,
        };
        block.check_positive_definite()?;
        let f = Ldlt::factor(&a_dd);
        let y = f.solve(&b_d);
        let x = f.solve_matrix(&a_kd.transpose());

        let a = a_kk - &a_kd * x;
        let b = b_k - &a_kd * &y;
        let c = self.c + 0.25 * b_d.dot(&y) + 0.5 * drop.len() as f64 * PI.ln() - 0.5 * f.log_det();
        Ok(Self::from_parts(a, b, c))
    }

    fn embed_order(&self, keep: &[usize]) -> Result<Self> {
        let a = CMatrix::from_fn(keep.len(), keep.len(), |i, j| self.a[(keep[i], keep[j])]);
        let b = CVector::from_iterator(keep.len(), keep.iter().map(|&i| self.b[i]));
        Ok(Self::from_parts(a, b, self.c))
    }

    /// Mean and covariance of the envelope `|f| / ∫|f|`, the real Gaussian
    /// `exp(-xᵀRe(A)x + Re(b)ᵀx)`: mean `½Re(A)⁻¹Re(b)`, covariance
    /// `½Re(A)⁻¹`. For a real form this is the distribution it describes.
    pub fn envelope_moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_positive_definite()?;
        let re_a = self.a.map(|z| z.re);
        let re_b = self.b.map(|z| z.re);
        let chol = nalgebra::Cholesky::new(re_a)
            .ok_or(Error::NonPositiveDefinite { min_eigenvalue: 0.0 })?;
        let inv = chol.inverse();
        let mean = &inv * re_b * 0.5;
        Ok((mean, inv * 0.5))
    }

    /// Largest absolute coefficient gap between `self` and `other`.
    pub fn max_coefficient_gap(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let da = (&self.a - &other.a).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let db = (&self.b - &other.b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        da.max(db).max((self.c - other.c).norm())
    }
}

/// Unpivoted `A = L D Lᵀ` for complex symmetric `A` with `Re(A) ≻ 0`.
struct Ldlt {
    l: CMatrix,
    d: CVector,
}

impl Ldlt {
    fn factor(a: &CMatrix) -> Self {
        let n = a.nrows();
        let mut l = CMatrix::identity(n, n);
        let mut d = CVector::zeros(n);
        for j in 0..n {
            let mut dj = a[(j, j)];
            for k in 0..j {
                dj -= l[(j, k)] * l[(j, k)] * d[k];
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)] * d[k];
                }
                l[(i, j)] = v / dj;
            }
        }
        Self { l, d }
    }

    fn solve(&self, rhs: &CVector) -> CVector {
        let n = self.d.len();
        let mut x = rhs.clone();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[(i, k)] * x[k];
                x[i] -= t;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.l[(k, i)] * x[k];
                x[i] -= t;
            }
        }
        x
    }

    fn solve_matrix(&self, rhs: &CMatrix) -> CMatrix {
        let mut out = rhs.clone();
        for j in 0..rhs.ncols() {
            let col = self.solve(&rhs.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    /// Sum of principal logs of the pivots: the continuous branch of
    /// `log det A` when every pivot lies in the right half-plane.
    fn log_det(&self) -> Complex64 {
        self.d.iter().map(|z| z.ln()).sum()
    }
}
