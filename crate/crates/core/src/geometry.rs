//! Split twistor correspondence spaces as coordinate objects.
//!
//! Points of ℝP³ and ℂP³ are unit-normalized representatives, points of the
//! Grassmannian are ordered frames (the order carries the orientation, i.e. a
//! point of the double cover), and the incidence spaces F and G are pairs
//! checked on construction. Unordered-plane comparisons go through Plücker
//! coordinates up to a signed overall scale.

use nalgebra::{Matrix2, Matrix4x2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RVec4 = Vector4<f64>;
pub type CVec4 = Vector4<Complex64>;

/// Default tolerance for projective equality and incidence.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Frames whose singular-value ratio falls below this are rejected.
pub const DEGENERACY_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealProjectivePoint {
    rep: RVec4,
}

impl RealProjectivePoint {
    pub fn new(rep: RVec4) -> Result<Self> {
        let n = rep.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("zero vector has no projective class".into()));
        }
        Ok(Self { rep: rep / n })
    }

    pub fn rep(&self) -> &RVec4 {
        &self.rep
    }

    /// `min(|a − b|, |a + b|)` between unit representatives.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.rep - other.rep).norm().min((self.rep + other.rep).norm())
    }

    pub fn projectively_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance(other) < tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexProjectivePoint {
    rep: CVec4,
}

impl ComplexProjectivePoint {
    pub fn new(rep: CVec4) -> Result<Self> {
        let n = rep.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("zero vector has no projective class".into()));
        }
        Ok(Self { rep: rep.unscale(n) })
    }

    pub fn from_parts(re: RVec4, im: RVec4) -> Result<Self> {
        Self::new(CVec4::from_fn(|i, _| Complex64::new(re[i], im[i])))
    }

    pub fn from_real(p: &RealProjectivePoint) -> Self {
        Self {
            rep: p.rep.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn rep(&self) -> &CVec4 {
        &self.rep
    }

    pub fn re(&self) -> RVec4 {
        self.rep.map(|z| z.re)
    }

    pub fn im(&self) -> RVec4 {
        self.rep.map(|z| z.im)
    }

    pub fn conj(&self) -> Self {
        Self {
            rep: self.rep.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, lambda: Complex64) -> Result<Self> {
        Self::new(self.rep * lambda)
    }

    /// Smallest singular value of the 4×2 matrix (Re z, Im z). It vanishes
    /// exactly on the real points.
    pub fn reality_defect(&self) -> f64 {
        let m = Matrix4x2::from_columns(&[self.re(), self.im()]);
        m.singular_values().min()
    }

    pub fn is_real_tol(&self, tol: f64) -> bool {
        self.reality_defect() < tol
    }

    pub fn is_real(&self) -> bool {
        self.is_real_tol(DEFAULT_TOL)
    }

    /// `min_φ |a − e^{iφ} b|` between unit representatives.
    pub fn distance(&self, other: &Self) -> f64 {
        let pairing = other.rep.dotc(&self.rep);
        let m = pairing.norm();
        if m == 0.0 {
            return std::f64::consts::SQRT_2;
        }
        (self.rep - other.rep * (pairing / m)).norm()
    }

    pub fn projectively_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance(other) < tol
    }
}

/// Ordered basis (u, v) of a real 2-plane in ℝ⁴.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    u: RVec4,
    v: RVec4,
}

impl Frame {
    pub fn new(u: RVec4, v: RVec4) -> Result<Self> {
        let m = Matrix4x2::from_columns(&[u, v]);
        let sv = m.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if !(hi > 0.0) || !(lo >= DEGENERACY_RATIO * hi) || !lo.is_finite() {
            return Err(Error::DegenerateFrame {
                smallest: lo,
                threshold: DEGENERACY_RATIO,
            });
        }
        Ok(Self { u, v })
    }

    pub fn from_arrays(u: [f64; 4], v: [f64; 4]) -> Result<Self> {
        Self::new(RVec4::from(u), RVec4::from(v))
    }

    /// The standard frame (e_i, e_j), zero-based indices.
    pub fn standard(i: usize, j: usize) -> Result<Self> {
        let mut u = RVec4::zeros();
        let mut v = RVec4::zeros();
        u[i] = 1.0;
        v[j] = 1.0;
        Self::new(u, v)
    }

    pub fn u(&self) -> &RVec4 {
        &self.u
    }

    pub fn v(&self) -> &RVec4 {
        &self.v
    }

    pub fn matrix(&self) -> Matrix4x2<f64> {
        Matrix4x2::from_columns(&[self.u, self.v])
    }

    /// Point u cos θ + v sin θ of the circle of lines in the plane.
    pub fn circle_point(&self, c: f64, s: f64) -> RVec4 {
        self.u * c + self.v * s
    }

    /// Right action of GL(2): the columns of (u v)·g.
    pub fn act(&self, g: &Matrix2<f64>) -> Result<Self> {
        if g.determinant() == 0.0 {
            return Err(Error::Singular("frame change matrix has zero determinant".into()));
        }
        let m = self.matrix() * g;
        Self::new(m.column(0).into(), m.column(1).into())
    }

    /// Left action of a linear map of ℝ⁴: (g·u, g·v).
    pub fn transform(&self, g: &nalgebra::Matrix4<f64>) -> Result<Self> {
        Self::new(g * self.u, g * self.v)
    }

    /// Gram determinant |u|²|v|² − (u·v)².
    pub fn gram_determinant(&self) -> f64 {
        let (uu, vv, uv) = (self.u.dot(&self.u), self.v.dot(&self.v), self.u.dot(&self.v));
        uu * vv - uv * uv
    }

    /// Orthogonal projector residual of `x` onto span(u, v).
    pub fn projection_residual(&self, x: &RVec4) -> f64 {
        let q = self.matrix().qr().q();
        let proj = q * (q.transpose() * x);
        (x - proj).norm()
    }

    /// If `other` spans the same plane, the determinant of the change-of-basis
    /// matrix g with `other = self·g`; otherwise `None`.
    pub fn change_of_basis_det(&self, other: &Frame, tol: f64) -> Option<f64> {
        let a = self.matrix();
        let b = other.matrix();
        let g = a.svd(true, true).solve(&b, 0.0).ok()?;
        if (a * g - b).norm() > tol * (1.0 + b.norm()) {
            return None;
        }
        Some(g.determinant())
    }

    pub fn plucker(&self) -> PlueckerPoint {
        plucker_embed(self)
    }

    /// Same unoriented plane.
    pub fn same_plane(&self, other: &Frame, tol: f64) -> bool {
        self.plucker().distance(&other.plucker()) < tol
    }
}

/// The six 2×2 minors (p12, p13, p14, p23, p24, p34) of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlueckerPoint {
    pub coords: [f64; 6],
}

impl PlueckerPoint {
    pub fn quadric(&self) -> f64 {
        let [p12, p13, p14, p23, p24, p34] = self.coords;
        p12 * p34 - p13 * p24 + p14 * p23
    }

    /// Quadric relative to the squared coordinate norm.
    pub fn relative_quadric(&self) -> f64 {
        self.quadric().abs() / self.norm().powi(2)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> [f64; 6] {
        let n = self.norm();
        self.coords.map(|p| p / n)
    }

    /// Distance between normalized coordinate vectors up to sign.
    pub fn distance(&self, other: &Self) -> f64 {
        let (a, b) = (self.normalized(), other.normalized());
        let minus: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let plus: f64 = a.iter().zip(&b).map(|(x, y)| (x + y).powi(2)).sum();
        minus.min(plus).sqrt()
    }

    /// The minor for zero-based column indices i < j.
    pub fn minor(&self, i: usize, j: usize) -> f64 {
        let idx = match (i, j) {
            (0, 1) => 0,
            (0, 2) => 1,
            (0, 3) => 2,
            (1, 2) => 3,
            (1, 3) => 4,
            (2, 3) => 5,
            _ => panic!("minor index out of range: ({i}, {j})"),
        };
        self.coords[idx]
    }
}

pub fn plucker_embed(f: &Frame) -> PlueckerPoint {
    let (u, v) = (f.u, f.v);
    let m = |i: usize, j: usize| u[i] * v[j] - u[j] * v[i];
    PlueckerPoint {
        coords: [m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3)],
    }
}

/// Affine chart p12 ≠ 0: u = (1, 0, X₁₁, X₁₂), v = (0, 1, X₂₁, X₂₂).
pub fn plane_from_chart(x: &Matrix2<f64>) -> Frame {
    Frame {
        u: RVec4::new(1.0, 0.0, x[(0, 0)], x[(0, 1)]),
        v: RVec4::new(0.0, 1.0, x[(1, 0)], x[(1, 1)]),
    }
}

/// Inverse of [`plane_from_chart`] on the plane spanned by `f`.
pub fn chart_from_plane(f: &Frame) -> Result<Matrix2<f64>> {
    // (u v) = (a; b) with a the top 2×2 block; the chart frame is (u v)·a⁻¹.
    let a = Matrix2::new(f.u[0], f.v[0], f.u[1], f.v[1]);
    let a_inv = a
        .try_inverse()
        .filter(|_| a.determinant().abs() > DEGENERACY_RATIO * f.matrix().norm_squared())
        .ok_or_else(|| Error::Domain("plane is outside the chart p12 ≠ 0".into()))?;
    let b = Matrix2::new(f.u[2], f.v[2], f.u[3], f.v[3]);
    // rows of X are the lower blocks of the new u and v
    Ok((b * a_inv).transpose())
}

/// The plane spanned by real and imaginary parts of a non-real complex line.
pub fn pi_project(z: &ComplexProjectivePoint) -> Result<Frame> {
    if z.is_real() {
        return Err(Error::Domain("π undefined on ℝP³".into()));
    }
    Frame::new(z.re(), z.im())
}

/// A complex line inside the complexification of a real plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPoint {
    line: ComplexProjectivePoint,
    plane: Frame,
}

impl GPoint {
    pub fn new(line: ComplexProjectivePoint, plane: Frame) -> Result<Self> {
        if !incidence_complex(&line, &plane, DEFAULT_TOL) {
            return Err(Error::Domain(
                "complex line does not lie in the complexified plane".into(),
            ));
        }
        Ok(Self { line, plane })
    }

    pub fn line(&self) -> &ComplexProjectivePoint {
        &self.line
    }

    pub fn plane(&self) -> &Frame {
        &self.plane
    }

    /// Points with a real line form the flag manifold F ⊂ G.
    pub fn in_flag_locus(&self) -> bool {
        self.line.is_real()
    }
}

/// A real line nested in a real plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagPoint {
    line: RealProjectivePoint,
    plane: Frame,
}

impl FlagPoint {
    pub fn new(line: RealProjectivePoint, plane: Frame) -> Result<Self> {
        if !incidence_real(&line, &plane, DEFAULT_TOL) {
            return Err(Error::Domain("real line does not lie in the plane".into()));
        }
        Ok(Self { line, plane })
    }

    pub fn line(&self) -> &RealProjectivePoint {
        &self.line
    }

    pub fn plane(&self) -> &Frame {
        &self.plane
    }

    pub fn to_gpoint(&self) -> GPoint {
        GPoint {
            line: ComplexProjectivePoint::from_real(&self.line),
            plane: self.plane,
        }
    }
}

/// μ restricted to G ∖ F: forget the plane.
pub fn mu_restrict(gp: &GPoint) -> Result<ComplexProjectivePoint> {
    if gp.line.is_real() {
        return Err(Error::Domain("μ is a diffeomorphism only off the flag locus F".into()));
    }
    Ok(gp.line)
}

/// Inverse of μ on ℙ ∖ P: attach the unique real plane containing the line.
pub fn mu_inverse(z: &ComplexProjectivePoint) -> Result<GPoint> {
    let plane = pi_project(z)?;
    Ok(GPoint { line: *z, plane })
}

pub fn incidence_real(line: &RealProjectivePoint, plane: &Frame, tol: f64) -> bool {
    plane.projection_residual(line.rep()) < tol
}

pub fn incidence_complex(line: &ComplexProjectivePoint, plane: &Frame, tol: f64) -> bool {
    let r = plane.projection_residual(&line.re());
    let i = plane.projection_residual(&line.im());
    r.hypot(i) < tol
}

/// Frames through a fixed real line, one per direction (a, b, c) on a
/// `n × n` spherical grid of the orthogonal complement.
pub fn fiber_over_line(line: &RealProjectivePoint, n: usize) -> Result<Vec<Frame>> {
    let comp = orthogonal_complement(line.rep());
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let s = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            let w = comp[0] * s.cos() + (comp[1] * t.cos() + comp[2] * t.sin()) * s.sin();
            out.push(Frame::new(*line.rep(), w)?);
        }
    }
    Ok(out)
}

/// Real lines u cos t + v sin t inside a fixed plane, t ∈ [0, π).
pub fn fiber_over_plane(plane: &Frame, n: usize) -> Result<Vec<RealProjectivePoint>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / n as f64;
            RealProjectivePoint::new(plane.circle_point(t.cos(), t.sin()))
        })
        .collect()
}

/// Numerical rank of the Jacobian of a parametrized family of Plücker points,
/// estimated at parameter `p` by central differences.
pub fn family_dimension<F>(family: F, p: &[f64], h: f64) -> Result<usize>
where
    F: Fn(&[f64]) -> Result<Frame>,
{
    let base = family(p)?.plucker().normalized();
    let mut jac = nalgebra::DMatrix::<f64>::zeros(6, p.len());
    for k in 0..p.len() {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let align = |q: [f64; 6]| {
            let dot: f64 = q.iter().zip(&base).map(|(a, b)| a * b).sum();
            q.map(|x| x * dot.signum())
        };
        let a = align(family(&plus)?.plucker().normalized());
        let b = align(family(&minus)?.plucker().normalized());
        for r in 0..6 {
            jac[(r, k)] = (a[r] - b[r]) / (2.0 * h);
        }
    }
    let sv = jac.singular_values();
    let max = sv.max();
    Ok(sv.iter().filter(|&&s| s > 1e-6 * max.max(1e-300)).count())
}

fn orthogonal_complement(x: &RVec4) -> [RVec4; 3] {
    let mut basis: Vec<RVec4> = vec![x.normalize()];
    for k in 0..4 {
        let mut e = RVec4::zeros();
        e[k] = 1.0;
        for b in &basis {
            e -= b * b.dot(&e);
        }
        if e.norm() > 1e-6 {
            basis.push(e.normalize());
        }
        if basis.len() == 4 {
            break;
        }
    }
    [basis[1], basis[2], basis[3]]
}
