//! Contour-integral transform of rational twistor functions.
//!
//! A class of homogeneity −2 on ℂP³ ∖ ℝP³ is represented by a rational
//! function with poles off the real circles it is integrated over. Its
//! transform is the same circle integral as the X-ray transform, with a
//! complex integrand; the output is a weight −1 field whose real and
//! imaginary parts both solve John's equation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{plane_from_chart, CVec4, Frame, RVec4};
use crate::quadrature::QuadratureSpec;
use crate::xray::ChartPoint;

pub const DEFAULT_POLE_MARGIN: f64 = 1e-3;

/// c · Π (A_k·Z)^{m_k} with complex covectors A_k (bilinear pairing).
#[derive(Debug, Clone, PartialEq)]
pub struct TwistorRationalFunction {
    coefficient: Complex64,
    factors: Vec<(CVec4, i32)>,
}

impl TwistorRationalFunction {
    pub fn new(factors: Vec<(CVec4, i32)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Invalid("a twistor function needs at least one factor".into()));
        }
        if let Some(k) = factors.iter().position(|(a, _)| a.norm() == 0.0) {
            return Err(Error::Invalid(format!("factor {k} has a zero covector")));
        }
        Ok(Self {
            coefficient: Complex64::from(1.0),
            factors,
        })
    }

    /// Σ m_k.
    pub fn homogeneity(&self) -> i32 {
        self.factors.iter().map(|(_, m)| m).sum()
    }

    pub fn factors(&self) -> &[(CVec4, i32)] {
        &self.factors
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        Self {
            coefficient: self.coefficient * lambda,
            factors: self.factors.clone(),
        }
    }

    pub fn eval(&self, z: &CVec4) -> Complex64 {
        self.factors
            .iter()
            .fold(self.coefficient, |acc, (a, m)| acc * pair(a, z).powi(*m))
    }

    pub fn eval_real(&self, x: &RVec4) -> Complex64 {
        self.factors
            .iter()
            .fold(self.coefficient, |acc, (a, m)| acc * pair_real(a, x).powi(*m))
    }
}

fn pair(a: &CVec4, z: &CVec4) -> Complex64 {
    a.iter().zip(z.iter()).map(|(x, y)| x * y).sum()
}

fn pair_real(a: &CVec4, x: &RVec4) -> Complex64 {
    a.iter().zip(x.iter()).map(|(c, r)| c * r).sum()
}

/// 1/((A·Z)(B·Z)); A and B must not be proportional.
pub fn elementary_state(a: CVec4, b: CVec4) -> Result<TwistorRationalFunction> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Invalid("elementary state covectors must be nonzero".into()));
    }
    let wedge: f64 = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| (a[i] * b[j] - a[j] * b[i]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if wedge <= 1e-12 * na * nb {
        return Err(Error::Invalid(
            "proportional covectors: the elementary state is singular on the whole incidence set".into(),
        ));
    }
    TwistorRationalFunction::new(vec![(a, -1), (b, -1)])
}

/// Per-factor minimum of |A·(u cos θ + v sin θ)| over the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSafetyReport {
    pub margins: Vec<f64>,
}

impl PoleSafetyReport {
    /// Smallest margin among the pole factors (negative exponent).
    pub fn worst_pole(&self, f: &TwistorRationalFunction) -> Option<(usize, f64)> {
        self.margins
            .iter()
            .zip(f.factors())
            .enumerate()
            .filter(|(_, (_, (_, m)))| *m < 0)
            .map(|(k, (margin, _))| (k, *margin))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Exact minimum over θ: |a_u c + a_v s|² is a real quadratic form in
/// (c, s), so the minimum is the square root of its smallest eigenvalue.
pub fn pole_safety(f: &TwistorRationalFunction, frame: &Frame) -> PoleSafetyReport {
    let margins = f
        .factors()
        .iter()
        .map(|(a, _)| {
            let au = pair_real(a, frame.u());
            let av = pair_real(a, frame.v());
            let p = au.norm_sqr();
            let r = av.norm_sqr();
            let q = (au * av.conj()).re;
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
            // p·r − q² = |Im(au conj av)|², stable form of mean − rad
            let det = (au * av.conj()).im.powi(2);
            let lo = if mean + rad > 0.0 { det / (mean + rad) } else { 0.0 };
            lo.max(0.0).sqrt()
        })
        .collect();
    PoleSafetyReport { margins }
}

/// ∫₀^{2π} g(u cos θ + v sin θ) dθ for a complex integrand.
pub fn contour_integral<F>(g: F, frame: &Frame, q: &QuadratureSpec) -> Result<Complex64>
where
    F: Fn(&RVec4) -> Complex64,
{
    q.integrate(|c, s| Ok(g(&frame.circle_point(c, s))))
}

/// Circle integral of a homogeneity −2 rational function over the plane of
/// `frame`; refuses when a pole is within `margin` of the circle.
pub fn contour_transform(
    f: &TwistorRationalFunction,
    frame: &Frame,
    q: &QuadratureSpec,
    margin: f64,
) -> Result<Complex64> {
    let h = f.homogeneity();
    if h != -2 {
        return Err(Error::DegreeMismatch { expected: -2, found: h });
    }
    check_poles(f, frame, margin)?;
    contour_integral(|x| f.eval_real(x), frame, q)
}

fn check_poles(f: &TwistorRationalFunction, frame: &Frame, margin: f64) -> Result<()> {
    if let Some((factor, m)) = pole_safety(f, frame).worst_pole(f) {
        if !(m >= margin) {
            return Err(Error::PoleTooClose {
                factor,
                margin: m,
                threshold: margin,
            });
        }
    }
    Ok(())
}

/// Complex moments ∫ f cos^{n−k}θ sin^kθ dθ for homogeneity −n−2 inputs.
pub fn contour_moments(
    f: &TwistorRationalFunction,
    frame: &Frame,
    n: u32,
    q: &QuadratureSpec,
    margin: f64,
) -> Result<Vec<Complex64>> {
    let expected = -(n as i32) - 2;
    if f.homogeneity() != expected {
        return Err(Error::DegreeMismatch {
            expected,
            found: f.homogeneity(),
        });
    }
    check_poles(f, frame, margin)?;
    let n = n as usize;
    let mut acc = vec![Complex64::from(0.0); n + 1];
    for (c, s) in q.nodes() {
        let val = f.eval_real(&frame.circle_point(c, s));
        for (k, a) in acc.iter_mut().enumerate() {
            *a += val * (c.powi((n - k) as i32) * s.powi(k as i32));
        }
    }
    Ok(acc.into_iter().map(|a| a * q.weight()).collect())
}

pub type ComplexChartFn = Arc<dyn Fn(&ChartPoint) -> Result<Complex64> + Send + Sync>;

pub fn contour_chart_field(f: &TwistorRationalFunction, q: QuadratureSpec, margin: f64) -> Result<ComplexChartFn> {
    if f.homogeneity() != -2 {
        return Err(Error::DegreeMismatch {
            expected: -2,
            found: f.homogeneity(),
        });
    }
    let f = f.clone();
    Ok(Arc::new(move |x: &ChartPoint| {
        contour_transform(&f, &plane_from_chart(x), &q, margin)
    }))
}

/// (A∧B)·(u∧v) = (A·u)(B·v) − (A·v)(B·u).
pub fn wedge_pairing(a: &CVec4, b: &CVec4, frame: &Frame) -> Complex64 {
    pair_real(a, frame.u()) * pair_real(b, frame.v()) - pair_real(a, frame.v()) * pair_real(b, frame.u())
}

/// Parses four comma-separated complex entries such as `1,0,i,0` or
/// `0.5+2i, -i, 0, 1`.
pub fn parse_covector(s: &str) -> Result<CVec4> {
    let parts: Vec<Complex64> = s.split(',').map(parse_complex).collect::<Result<_>>()?;
    let arr: [Complex64; 4] = parts
        .try_into()
        .map_err(|_| Error::Invalid(format!("covector {s:?} needs four entries")))?;
    Ok(CVec4::from(arr))
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Invalid(format!("cannot parse complex number {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(Complex64::from).map_err(|_| bad());
    };
    // split at the last sign that is not the leading one or part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            v => v.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok(Complex64::new(body[..k].parse().map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::HomogeneousFunction;
    use crate::operators::{john_operator, FdSpec};
    use crate::sampling::Sampler;
    use crate::xray::xray_transform;
    use nalgebra::Matrix2;
    use std::f64::consts::{PI, TAU};

    const O: Complex64 = Complex64 { re: 0.0, im: 0.0 };
    const L: Complex64 = Complex64 { re: 1.0, im: 0.0 };
    const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

    fn flagship() -> (CVec4, CVec4) {
        (CVec4::new(L, O, I, O), CVec4::new(I, O, L, O))
    }

    fn q(n: usize) -> QuadratureSpec {
        QuadratureSpec::new(n).unwrap()
    }

    #[test]
    fn construction_and_degeneracy() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        assert_eq!(f.homogeneity(), -2);
        assert!(elementary_state(a, a).is_err());
        assert!(elementary_state(a, a * Complex64::new(0.0, -3.0)).is_err());
        assert!(elementary_state(CVec4::zeros(), b).is_err());
    }

    #[test]
    fn numeric_homogeneity() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let mut s = Sampler::new(4);
        for _ in 0..10 {
            let z = CVec4::from_fn(|_, _| Complex64::new(s.normal(), s.normal()));
            let r = f.eval(&(z * Complex64::from(2.0))) / f.eval(&z);
            assert!((r - Complex64::from(0.25)).norm() < 1e-14);
        }
    }

    #[test]
    fn flagship_value() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let v = contour_transform(&f, &Frame::standard(0, 2).unwrap(), &q(64), DEFAULT_POLE_MARGIN).unwrap();
        assert!((v - Complex64::new(0.0, -TAU)).norm() < 1e-12);
        let scaled = f.scaled(Complex64::new(2.0, -1.0));
        let w = contour_transform(&scaled, &Frame::standard(0, 2).unwrap(), &q(64), DEFAULT_POLE_MARGIN).unwrap();
        assert!((w - v * Complex64::new(2.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn exact_pole_margin() {
        // A·(c, s, 0, 0) = c + i s has constant modulus 1
        let a = CVec4::new(L, I, O, O);
        let f = TwistorRationalFunction::new(vec![(a, -2)]).unwrap();
        let m = pole_safety(&f, &Frame::standard(0, 1).unwrap()).margins[0];
        assert!((m - 1.0).abs() < 1e-15);
        // a real covector always vanishes somewhere on the circle
        let real = TwistorRationalFunction::new(vec![(CVec4::new(L, L, O, O), -2)]).unwrap();
        let m = pole_safety(&real, &Frame::standard(0, 1).unwrap()).margins[0];
        assert!(m < 1e-15);
        match contour_transform(&real, &Frame::standard(0, 1).unwrap(), &q(64), DEFAULT_POLE_MARGIN) {
            Err(Error::PoleTooClose { factor: 0, .. }) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn pole_margin_matches_dense_grid() {
        let mut s = Sampler::new(8);
        for _ in 0..10 {
            let a = CVec4::from_fn(|_, _| Complex64::new(s.normal(), s.normal()));
            let f = TwistorRationalFunction::new(vec![(a, -1), (a, -1)]).unwrap();
            let frame = s.frame();
            let exact = pole_safety(&f, &frame).margins[0];
            let grid = (0..20000)
                .map(|k| {
                    let t = TAU * k as f64 / 20000.0;
                    pair_real(&a, &frame.circle_point(t.cos(), t.sin())).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(exact <= grid + 1e-12 && grid - exact < 1e-6, "{exact} {grid}");
        }
    }

    #[test]
    fn wrong_homogeneity_is_rejected() {
        let (a, _) = flagship();
        let f = TwistorRationalFunction::new(vec![(a, -3)]).unwrap();
        assert!(matches!(
            contour_transform(&f, &Frame::standard(0, 2).unwrap(), &q(64), DEFAULT_POLE_MARGIN),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn shares_the_xray_engine() {
        let g = HomogeneousFunction::norm_power(-2);
        let frame = Sampler::new(1).frame();
        let c = contour_integral(|x| Complex64::from(g.eval(x).unwrap()), &frame, &q(64)).unwrap();
        let r = xray_transform(&g, &frame, &q(64)).unwrap();
        assert_eq!(c.re.to_bits(), r.to_bits());
        assert_eq!(c.im, 0.0);
    }

    fn near_flagship_frames(seed: u64, n: usize) -> Vec<Frame> {
        let mut s = Sampler::new(seed);
        let f = elementary_state(flagship().0, flagship().1).unwrap();
        let mut out = Vec::new();
        while out.len() < n {
            let u = Frame::standard(0, 2).unwrap().u() + s.gaussian4() * 0.2;
            let v = Frame::standard(0, 2).unwrap().v() + s.gaussian4() * 0.2;
            let Ok(frame) = Frame::new(u, v) else { continue };
            if pole_safety(&f, &frame).worst_pole(&f).unwrap().1 > 0.05 {
                out.push(frame);
            }
        }
        out
    }

    #[test]
    fn residue_law() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let products: Vec<Complex64> = near_flagship_frames(7, 10)
            .iter()
            .map(|fr| contour_transform(&f, fr, &q(256), DEFAULT_POLE_MARGIN).unwrap() * wedge_pairing(&a, &b, fr))
            .collect();
        let mean = products.iter().sum::<Complex64>() / products.len() as f64;
        let spread = products.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max) / mean.norm();
        assert!(spread < 1e-8, "{spread}");
        assert!((mean - Complex64::new(0.0, -4.0 * PI)).norm() < 1e-8);
    }

    #[test]
    fn weight_law_and_node_doubling() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let mut s = Sampler::new(9);
        for frame in near_flagship_frames(3, 5) {
            let g = s.gl2();
            let v = contour_transform(&f, &frame, &q(256), 1e-6).unwrap();
            let w = contour_transform(&f, &frame.act(&g).unwrap(), &q(256), 1e-6).unwrap();
            assert!((w - v / g.determinant().abs()).norm() < 1e-9 * (1.0 + v.norm()));
            let v2 = contour_transform(&f, &frame, &q(512), 1e-6).unwrap();
            assert!((v2 - v).norm() < 1e-10);
        }
    }

    #[test]
    fn john_on_both_parts() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let phi = contour_chart_field(&f, q(128), DEFAULT_POLE_MARGIN).unwrap();
        let fd = FdSpec::default();
        let mut s = Sampler::new(5);
        for _ in 0..5 {
            let mut x = s.chart_point(0.5);
            x[(1, 0)] = s.uniform(0.7, 1.3);
            let v: Complex64 = john_operator(&*phi, &x, &fd).unwrap();
            assert!(v.re.abs() < 1e-6 && v.im.abs() < 1e-6, "{v}");
        }
        // the pole locus X₂₁ = 0 is refused
        assert!(phi(&Matrix2::zeros()).is_err());
    }

    #[test]
    fn complex_moments_reduce_to_transform() {
        let (a, b) = flagship();
        let f = elementary_state(a, b).unwrap();
        let frame = Frame::standard(0, 2).unwrap();
        let m = contour_moments(&f, &frame, 0, &q(64), DEFAULT_POLE_MARGIN).unwrap();
        assert!((m[0] - Complex64::new(0.0, -TAU)).norm() < 1e-12);
        let g = TwistorRationalFunction::new(vec![(a, -2), (b, -1)]).unwrap();
        assert_eq!(
            contour_moments(&g, &frame, 1, &q(64), DEFAULT_POLE_MARGIN)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn covector_parsing() {
        assert_eq!(parse_covector("1,0,i,0").unwrap(), flagship().0);
        assert_eq!(parse_covector(" i, 0, 1, 0 ").unwrap(), flagship().1);
        let v = parse_covector("0.5+2i,-i,1e-3-1.5e2i,-3").unwrap();
        assert_eq!(v[0], Complex64::new(0.5, 2.0));
        assert_eq!(v[1], Complex64::new(0.0, -1.0));
        assert_eq!(v[2], Complex64::new(1e-3, -150.0));
        assert_eq!(v[3], Complex64::new(-3.0, 0.0));
        assert!(parse_covector("1,2,3").is_err());
        assert!(parse_covector("1,2,3,x").is_err());
    }
}
