//! Ultrahyperbolic operators by finite differences.
//!
//! The John operator ∂²/∂X₁₁∂X₂₂ − ∂²/∂X₁₂∂X₂₁ acts on chart fields, the
//! diagonal form ∂₁² + ∂₂² − ∂₃² − ∂₄² on functions of ℝ^{2,2}, and the
//! coupled operator replaces ∂ᵢ by ∂ᵢ + Aᵢ. All second derivatives use
//! central stencils (cross stencil for mixed partials) with optional
//! Richardson extrapolation over h and h/2.

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instanton::Connection;
use crate::xray::{ChartPoint, MomentField};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Signs of the split metric diag(+1, +1, −1, −1).
pub const SPLIT_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSpec {
    h: f64,
    richardson: bool,
}

impl FdSpec {
    pub fn new(h: f64, richardson: bool) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Invalid(format!(
                "finite-difference step must be positive, got {h}"
            )));
        }
        Ok(Self { h, richardson })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn richardson(&self) -> bool {
        self.richardson
    }

    /// Applies a second-order accurate stencil at h (and h/2 when Richardson
    /// is on, combining (4·D(h/2) − D(h))/3).
    fn apply<T: FdValue>(&self, mut stencil: impl FnMut(f64) -> Result<T>) -> Result<T> {
        let coarse = stencil(self.h)?;
        if !self.richardson {
            return Ok(coarse);
        }
        let fine = stencil(self.h / 2.0)?;
        Ok(fine.scale(4.0 / 3.0).add_scaled(-1.0 / 3.0, &coarse))
    }
}

impl Default for FdSpec {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            richardson: true,
        }
    }
}

/// Values finite differences can combine.
pub trait FdValue: Clone {
    fn scale(&self, a: f64) -> Self;
    /// self + a·other
    fn add_scaled(&self, a: f64, other: &Self) -> Self;
}

impl FdValue for f64 {
    fn scale(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self + a * other
    }
}

impl FdValue for Complex64 {
    fn scale(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self + other * a
    }
}

impl FdValue for DVector<Complex64> {
    fn scale(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }
    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self.zip_map(other, |x, y| x + y * a)
    }
}

impl FdValue for Vec<f64> {
    fn scale(&self, a: f64) -> Self {
        self.iter().map(|x| x * a).collect()
    }
    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self.iter().zip(other).map(|(x, y)| x + a * y).collect()
    }
}

fn shifted(x: &[f64; 4], moves: &[(usize, f64)]) -> [f64; 4] {
    let mut y = *x;
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Central first difference (f(x + h eᵢ) − f(x − h eᵢ)) / 2h.
pub fn first_partial<T, F>(f: &F, x: &[f64; 4], i: usize, fd: &FdSpec) -> Result<T>
where
    T: FdValue,
    F: Fn(&[f64; 4]) -> Result<T> + ?Sized,
{
    fd.apply(|h| {
        let p = f(&shifted(x, &[(i, h)]))?;
        let m = f(&shifted(x, &[(i, -h)]))?;
        Ok(p.add_scaled(-1.0, &m).scale(0.5 / h))
    })
}

/// ∂²f/∂xᵢ∂xⱼ: three-point stencil on the diagonal, four-point cross
/// stencil otherwise.
pub fn second_partial<T, F>(f: &F, x: &[f64; 4], i: usize, j: usize, fd: &FdSpec) -> Result<T>
where
    T: FdValue,
    F: Fn(&[f64; 4]) -> Result<T> + ?Sized,
{
    if i == j {
        let center = f(x)?;
        fd.apply(|h| {
            let p = f(&shifted(x, &[(i, h)]))?;
            let m = f(&shifted(x, &[(i, -h)]))?;
            Ok(p.add_scaled(-2.0, &center).add_scaled(1.0, &m).scale(1.0 / (h * h)))
        })
    } else {
        fd.apply(|h| {
            let pp = f(&shifted(x, &[(i, h), (j, h)]))?;
            let pm = f(&shifted(x, &[(i, h), (j, -h)]))?;
            let mp = f(&shifted(x, &[(i, -h), (j, h)]))?;
            let mm = f(&shifted(x, &[(i, -h), (j, -h)]))?;
            Ok(pp
                .add_scaled(-1.0, &pm)
                .add_scaled(-1.0, &mp)
                .add_scaled(1.0, &mm)
                .scale(0.25 / (h * h)))
        })
    }
}

/// Chart matrix as the flat array (X₁₁, X₁₂, X₂₁, X₂₂).
pub fn chart_to_array(x: &ChartPoint) -> [f64; 4] {
    [x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]]
}

pub fn array_to_chart(a: &[f64; 4]) -> ChartPoint {
    Matrix2::new(a[0], a[1], a[2], a[3])
}

/// ∂²φ/∂X₁₁∂X₂₂ − ∂²φ/∂X₁₂∂X₂₁.
pub fn john_operator<T, F>(phi: &F, x: &ChartPoint, fd: &FdSpec) -> Result<T>
where
    T: FdValue,
    F: Fn(&ChartPoint) -> Result<T> + ?Sized,
{
    let flat = |a: &[f64; 4]| phi(&array_to_chart(a));
    let a = chart_to_array(x);
    let d1122: T = second_partial(&flat, &a, 0, 3, fd)?;
    let d1221: T = second_partial(&flat, &a, 1, 2, fd)?;
    Ok(d1122.add_scaled(-1.0, &d1221))
}

/// X₁₁ = x₁ + x₄, X₂₂ = x₁ − x₄, X₁₂ = x₂ + x₃, X₂₁ = x₂ − x₃ (inverse direction).
/// Under this change the John operator is ¼(∂₁² + ∂₃² − ∂₂² − ∂₄²).
pub fn chart_to_diag(x: &ChartPoint) -> [f64; 4] {
    let (x11, x12, x21, x22) = (x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
    [
        0.5 * (x11 + x22),
        0.5 * (x12 + x21),
        0.5 * (x12 - x21),
        0.5 * (x11 - x22),
    ]
}

pub fn diag_to_chart(x: &[f64; 4]) -> ChartPoint {
    Matrix2::new(x[0] + x[3], x[1] + x[2], x[1] - x[2], x[0] - x[3])
}

/// [`chart_to_diag`] followed by the relabeling x₂ ↔ x₃, so that the John
/// operator becomes exactly ¼ of [`box_diag`] in the new coordinates.
pub fn chart_to_box_coords(x: &ChartPoint) -> [f64; 4] {
    let [a, b, c, d] = chart_to_diag(x);
    [a, c, b, d]
}

pub fn box_coords_to_chart(y: &[f64; 4]) -> ChartPoint {
    diag_to_chart(&[y[0], y[2], y[1], y[3]])
}

/// Σᵢ sᵢ ∂ᵢ² for any value type.
pub fn split_box<T, F>(psi: &F, x: &[f64; 4], fd: &FdSpec) -> Result<T>
where
    T: FdValue,
    F: Fn(&[f64; 4]) -> Result<T> + ?Sized,
{
    let mut acc: Option<T> = None;
    for (i, s) in SPLIT_SIGNS.iter().enumerate() {
        let d: T = second_partial(psi, x, i, i, fd)?;
        acc = Some(match acc {
            None => d.scale(*s),
            Some(a) => a.add_scaled(*s, &d),
        });
    }
    Ok(acc.expect("four axes"))
}

/// ∂₁²ψ + ∂₂²ψ − ∂₃²ψ − ∂₄²ψ.
pub fn box_diag<F>(psi: &F, x: &[f64; 4], fd: &FdSpec) -> Result<f64>
where
    F: Fn(&[f64; 4]) -> Result<f64> + ?Sized,
{
    split_box(psi, x, fd)
}

/// Σᵢ sᵢ (∂ᵢ + Aᵢ)²ψ with s = (+, +, −, −).
///
/// Expanded as ∂ᵢ²ψ + (∂ᵢAᵢ)ψ + 2Aᵢ∂ᵢψ + Aᵢ²ψ: the second derivatives come
/// from the same stencil as [`box_diag`], ∂ᵢAᵢ from the connection's
/// analytic partials when it has them.
pub fn coupled_box<C, F>(a: &C, psi: &F, x: &[f64; 4], fd: &FdSpec) -> Result<DVector<Complex64>>
where
    C: Connection + ?Sized,
    F: Fn(&[f64; 4]) -> Result<DVector<Complex64>> + ?Sized,
{
    let value = psi(x)?;
    if value.len() != a.rank() {
        return Err(Error::Dimension(format!(
            "section has {} components but the bundle has rank {}",
            value.len(),
            a.rank()
        )));
    }
    let mut out: DVector<Complex64> = split_box(psi, x, fd)?;
    let pot = a.potential(x)?;
    let div = a.derivatives(x, fd)?;
    for (i, s) in SPLIT_SIGNS.iter().enumerate() {
        let d: DVector<Complex64> = first_partial(psi, x, i, fd)?;
        let ai = &pot[i];
        let term = &div[i][i] * &value + (ai * &d) * Complex64::from(2.0) + ai * (ai * &value);
        out += term * Complex64::from(*s);
    }
    Ok(out)
}

/// max over j ∈ {1, 2}, k < n of |∂φ_k/∂X₂ⱼ − ∂φ_{k+1}/∂X₁ⱼ|.
pub fn dn_residual(m: &MomentField, x: &ChartPoint, fd: &FdSpec) -> Result<f64> {
    let n = m.n() as usize;
    if n == 0 {
        return Err(Error::Invalid(
            "helicity 0 has no moment relations; use the John operator".into(),
        ));
    }
    let flat = |a: &[f64; 4]| m.components(&array_to_chart(a));
    let a = chart_to_array(x);
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        // flat indices: X₁ⱼ → j, X₂ⱼ → 2 + j
        let d_row1: Vec<f64> = first_partial(&flat, &a, j, fd)?;
        let d_row2: Vec<f64> = first_partial(&flat, &a, 2 + j, fd)?;
        for k in 0..n {
            worst = worst.max((d_row2[k] - d_row1[k + 1]).abs());
        }
    }
    Ok(worst)
}
