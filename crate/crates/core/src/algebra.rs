//! The coefficient algebra `A = M_n(ℂ)`: arithmetic, positivity, square roots,
//! inverses and the Loewner order.
//!
//! Positivity is decided on eigenvalues of the Hermitized matrix against
//! tolerances relative to `max(1, ‖X‖)`. Between the certification floor and
//! the falsification threshold the answer is [`Status::Undetermined`].

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, input, Result};
use crate::linalg::{self, CMat, C64};
use crate::verdict::{Status, Verdict, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Hermitian-deviation tolerance.
    pub tol_h: f64,
    /// Eigenvalue floor for certification.
    pub tol_psd: f64,
    /// Eigenvalue threshold for falsification; strictly above `tol_psd`.
    pub tol_falsify: f64,
    /// Least-squares and reconstruction residual threshold.
    pub tol_residual: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            tol_h: 1e-10,
            tol_psd: 1e-9,
            tol_falsify: 1e-6,
            tol_residual: 1e-8,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tol_h, self.tol_psd, self.tol_falsify, self.tol_residual];
        if all.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(input("tolerances must be finite and non-negative"));
        }
        if self.tol_falsify <= self.tol_psd {
            return Err(input("tol_falsify must exceed tol_psd"));
        }
        Ok(())
    }

    /// Multiply every tolerance by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ToleranceConfig {
            tol_h: self.tol_h * factor,
            tol_psd: self.tol_psd * factor,
            tol_falsify: self.tol_falsify * factor,
            tol_residual: self.tol_residual * factor,
        }
    }
}

/// An element of `M_n(ℂ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement(CMat);

impl AlgebraElement {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(input(format!(
                "algebra element must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(AlgebraElement(m))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(input("rows must all have length n"));
        }
        Self::new(CMat::from_fn(n, n, |i, j| linalg::real(rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        AlgebraElement(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        AlgebraElement(CMat::zeros(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        AlgebraElement(CMat::from_fn(n, n, |i, j| {
            if i == j {
                linalg::real(values[i])
            } else {
                linalg::ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        AlgebraElement(self.0.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraElement(self.0.scale(s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        AlgebraElement(&self.0 * s)
    }

    /// `‖X‖`, the largest singular value.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.0)
    }

    pub fn hermitian_part(&self) -> Self {
        AlgebraElement(linalg::hermitian_part(&self.0))
    }

    pub fn is_hermitian(&self, cfg: &ToleranceConfig) -> bool {
        is_hermitian_matrix(&self.0, cfg)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(AlgebraElement(&self.0 + &other.0))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(AlgebraElement(&self.0 - &other.0))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(AlgebraElement(&self.0 * &other.0))
    }

    /// `X⁻¹`; requires `λ_min(|X|) > tol_psd`.
    pub fn inverse(&self, cfg: &ToleranceConfig) -> Result<Self> {
        let smallest = linalg::singular_values(&self.0).last().copied().unwrap_or(0.0);
        if smallest <= cfg.tol_psd {
            return Err(domain(format!(
                "element is not invertible: smallest singular value {smallest:.3e}"
            )));
        }
        let inv = self
            .0
            .clone()
            .try_inverse()
            .ok_or_else(|| domain("LU inverse failed"))?;
        let n = self.dim();
        let residual = linalg::op_norm(&(&self.0 * &inv - CMat::identity(n, n)));
        if residual > cfg.tol_residual {
            return Err(domain(format!(
                "inverse residual {residual:.3e} exceeds tolerance"
            )));
        }
        Ok(AlgebraElement(inv))
    }
}

fn same_dim(a: &AlgebraElement, b: &AlgebraElement) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        AlgebraElement(&self.0 + &rhs.0)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        AlgebraElement(&self.0 - &rhs.0)
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: Self) -> AlgebraElement {
        AlgebraElement(&self.0 * &rhs.0)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement(-&self.0)
    }
}

pub(crate) fn is_hermitian_matrix(m: &CMat, cfg: &ToleranceConfig) -> bool {
    let dev = linalg::max_abs(&(m - m.adjoint()));
    dev <= cfg.tol_h * linalg::op_norm(m).max(1.0)
}

/// Positivity verdict for any square complex matrix.
///
/// The Falsified witness is a unit eigenvector for the smallest eigenvalue of
/// `Herm(m)`.
pub fn psd_verdict(m: &CMat, cfg: &ToleranceConfig) -> Verdict {
    let scale = linalg::op_norm(m).max(1.0);
    let hermitian = linalg::max_abs(&(m - m.adjoint())) <= cfg.tol_h * scale;
    let (values, vectors) = linalg::eigh(m);
    let lambda_min = values.first().copied().unwrap_or(0.0);
    if lambda_min < -cfg.tol_falsify * scale {
        let mut w = Witness::vector(vectors.column(0).into_owned());
        w.violation = Some(linalg::hermitian_part(m));
        return Verdict::falsified(lambda_min, scale, w);
    }
    if hermitian && lambda_min >= -cfg.tol_psd * scale {
        Verdict::certified(lambda_min, scale)
    } else {
        Verdict::undetermined(lambda_min, scale)
    }
}

pub fn is_psd(x: &AlgebraElement, cfg: &ToleranceConfig) -> Verdict {
    psd_verdict(&x.0, cfg)
}

/// `X ⪯ Y`, decided as `is_psd(Y − X)`.
pub fn loewner_leq(x: &AlgebraElement, y: &AlgebraElement, cfg: &ToleranceConfig) -> Result<Verdict> {
    same_dim(x, y)?;
    loewner_leq_matrix(&x.0, &y.0, cfg)
}

pub(crate) fn loewner_leq_matrix(x: &CMat, y: &CMat, cfg: &ToleranceConfig) -> Result<Verdict> {
    if x.shape() != y.shape() {
        return Err(input("Loewner comparison of differently sized matrices"));
    }
    if !is_hermitian_matrix(x, cfg) || !is_hermitian_matrix(y, cfg) {
        return Err(input("Loewner comparison needs Hermitian operands"));
    }
    Ok(psd_verdict(&(y - x), cfg))
}

/// Principal square root of a PSD element; negative rounding-level
/// eigenvalues are clamped to zero.
pub fn sqrt_psd(x: &AlgebraElement, cfg: &ToleranceConfig) -> Result<AlgebraElement> {
    let v = is_psd(x, cfg);
    if v.status != Status::Certified {
        return Err(domain(format!(
            "square root needs a PSD element (λ_min = {:.3e})",
            v.margin
        )));
    }
    let r = linalg::sqrt_psd_clamped(&x.0);
    let residual = linalg::op_norm(&(&r * &r - &x.0));
    if residual > cfg.tol_residual * x.norm().max(1.0) {
        return Err(domain(format!("square root residual {residual:.3e}")));
    }
    Ok(AlgebraElement(r))
}

/// `|X| = (X*X)^{1/2}`.
pub fn abs(x: &AlgebraElement) -> AlgebraElement {
    AlgebraElement(linalg::sqrt_psd_clamped(&(x.0.adjoint() * &x.0)))
}

#[derive(Debug, Clone)]
pub struct ExtremalEigs {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub v_min: linalg::CVec,
    pub v_max: linalg::CVec,
}

pub fn extremal_eigs(x: &AlgebraElement, cfg: &ToleranceConfig) -> Result<ExtremalEigs> {
    if !x.is_hermitian(cfg) {
        return Err(input("extremal eigenvalues need a Hermitian element"));
    }
    Ok(extremal_eigs_matrix(&x.0))
}

pub(crate) fn extremal_eigs_matrix(m: &CMat) -> ExtremalEigs {
    let (values, vectors) = linalg::eigh(m);
    let last = values.len() - 1;
    ExtremalEigs {
        lambda_min: values[0],
        lambda_max: values[last],
        v_min: vectors.column(0).into_owned(),
        v_max: vectors.column(last).into_owned(),
    }
}
