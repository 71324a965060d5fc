//! The X-ray transform: circle integrals of degree −2 functions over the
//! ℝP¹ of lines inside a 2-plane, the helicity moment transforms, and the
//! SL(4, ℝ) equivariance harness.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{HomogeneousFunction, WeightedField};
use crate::geometry::{plane_from_chart, Frame};
use crate::quadrature::QuadratureSpec;

/// Chart coordinates X of the affine chart p12 ≠ 0.
pub type ChartPoint = Matrix2<f64>;

/// ∫₀^{2π} f(u cos θ + v sin θ) dθ.
pub fn xray_transform(f: &HomogeneousFunction, frame: &Frame, q: &QuadratureSpec) -> Result<f64> {
    f.require_degree(-2)?;
    circle_integral(f, frame, q)
}

// Frames are full rank, so no node of the circle hits the origin.
fn circle_integral(f: &HomogeneousFunction, frame: &Frame, q: &QuadratureSpec) -> Result<f64> {
    q.integrate(|c, s| Ok(f.eval_unchecked(&frame.circle_point(c, s))))
}

/// The transform of `f` as a weight −1 field on frames.
pub fn xray_field(f: &HomogeneousFunction, q: QuadratureSpec) -> Result<WeightedField> {
    f.require_degree(-2)?;
    let f = f.clone();
    Ok(WeightedField::new(-1, move |frame| xray_transform(&f, frame, &q)))
}

pub type ChartFn = Arc<dyn Fn(&ChartPoint) -> Result<f64> + Send + Sync>;

/// X ↦ xray_transform(f, plane_from_chart(X)).
pub fn xray_chart_field(f: &HomogeneousFunction, q: QuadratureSpec) -> Result<ChartFn> {
    f.require_degree(-2)?;
    let f = f.clone();
    Ok(Arc::new(move |x: &ChartPoint| {
        xray_transform(&f, &plane_from_chart(x), &q)
    }))
}

/// Gram determinant of the chart frame at X; the closed form of the
/// transform of |x|⁻² is 2π/√G(X).
pub fn chart_gram(x: &ChartPoint) -> f64 {
    let (a, b, c, d) = (x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
    (1.0 + a * a + b * b) * (1.0 + c * c + d * d) - (a * c + b * d).powi(2)
}

/// φ_k(frame) = ∫ f(u cos θ + v sin θ) cos^{n−k}θ sin^kθ dθ for k = 0..=n.
///
/// `f` must have degree −n−2 and parity (−1)^n so that every integrand is
/// invariant under θ ↦ θ + π.
pub fn xray_moments(f: &HomogeneousFunction, frame: &Frame, n: u32, q: &QuadratureSpec) -> Result<Vec<f64>> {
    f.require_degree(-(n as i32) - 2)?;
    if !f.has_parity(n % 2 == 1) {
        return Err(Error::Parity(format!(
            "moment input for n = {n} must satisfy f(−x) = {}f(x)",
            if n % 2 == 1 { "−" } else { "" }
        )));
    }
    let n = n as usize;
    let mut acc = vec![0.0; n + 1];
    for (c, s) in q.nodes() {
        let val = f.eval_unchecked(&frame.circle_point(c, s));
        for (k, a) in acc.iter_mut().enumerate() {
            *a += val * c.powi((n - k) as i32) * s.powi(k as i32);
        }
    }
    let w = q.weight();
    Ok(acc.into_iter().map(|a| a * w).collect())
}

/// Helicity n/2 field on the affine chart: the n+1 moment components.
#[derive(Clone)]
pub struct MomentField {
    n: u32,
    f: HomogeneousFunction,
    q: QuadratureSpec,
}

impl MomentField {
    pub fn new(f: &HomogeneousFunction, n: u32, q: QuadratureSpec) -> Result<Self> {
        // validate once, including parity
        xray_moments(f, &Frame::standard(0, 1)?, n, &q)?;
        Ok(Self { n, f: f.clone(), q })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn components(&self, x: &ChartPoint) -> Result<Vec<f64>> {
        xray_moments(&self.f, &plane_from_chart(x), self.n, &self.q)
    }
}

/// max over frames of |R(f∘g)(u, v) − (Rf)(g·u, g·v)|.
pub fn equivariance_residual(
    f: &HomogeneousFunction,
    g: &Matrix4<f64>,
    frames: &[Frame],
    q: &QuadratureSpec,
) -> Result<f64> {
    let det = g.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular("group element has zero determinant".into()));
    }
    let pulled = f.compose_linear(g)?;
    let residuals = frames
        .par_iter()
        .map(|frame| {
            let lhs = xray_transform(&pulled, frame, q)?;
            let rhs = xray_transform(f, &frame.transform(g)?, q)?;
            Ok((lhs - rhs).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{basis_to_degree_minus_2, degree_minus_2_basis, harmonic_basis, weight_transform_residual};
    use crate::sampling::Sampler;
    use std::f64::consts::{PI, TAU};

    fn q(n: usize) -> QuadratureSpec {
        QuadratureSpec::new(n).unwrap()
    }

    fn inv_r2() -> HomogeneousFunction {
        HomogeneousFunction::norm_power(-2)
    }

    #[test]
    fn flagship_value() {
        let v = xray_transform(&inv_r2(), &Frame::standard(0, 1).unwrap(), &q(64)).unwrap();
        assert!((v - TAU).abs() < 1e-12);
    }

    #[test]
    fn zero_function_gives_zero() {
        let v = xray_transform(&HomogeneousFunction::zero(-2), &Frame::standard(0, 2).unwrap(), &q(64)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn scaled_frame_uses_gram_determinant() {
        let f = Frame::from_arrays([2.0, 0.0, 0.0, 0.0], [0.0, 3.0, 0.0, 0.0]).unwrap();
        let v = xray_transform(&inv_r2(), &f, &q(64)).unwrap();
        assert!((v - TAU / 6.0).abs() < 1e-12);
    }

    #[test]
    fn traceless_quadratic_integrates_to_zero() {
        let h = &harmonic_basis(2);
        // find x1² − x2² in the span: build it directly instead
        let f = HomogeneousFunction::linear_combination(&[
            (1.0, &HomogeneousFunction::monomial_term(1.0, [2, 0, 0, 0], -4)),
            (-1.0, &HomogeneousFunction::monomial_term(1.0, [0, 2, 0, 0], -4)),
        ])
        .unwrap();
        assert!(
            xray_transform(&f, &Frame::standard(0, 1).unwrap(), &q(64))
                .unwrap()
                .abs()
                < 1e-14
        );
        assert_eq!(h.len(), 9);
    }

    #[test]
    fn wrong_degree_is_rejected() {
        let f = HomogeneousFunction::norm_power(-3);
        assert!(matches!(
            xray_transform(&f, &Frame::standard(0, 1).unwrap(), &q(64)),
            Err(Error::DegreeMismatch {
                expected: -2,
                found: -3
            })
        ));
        assert!(xray_chart_field(&f, q(64)).is_err());
    }

    #[test]
    fn chart_field_closed_form() {
        let phi = xray_chart_field(&inv_r2(), q(64)).unwrap();
        assert!((phi(&Matrix2::zeros()).unwrap() - TAU).abs() < 1e-12);
        let mut s = Sampler::new(1);
        for _ in 0..20 {
            let x = s.chart_point(1.0);
            let exact = TAU / chart_gram(&x).sqrt();
            assert!((phi(&x).unwrap() - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_examples() {
        let e12 = Frame::standard(0, 1).unwrap();
        let f1 = HomogeneousFunction::monomial_term(1.0, [1, 0, 0, 0], -4);
        let m = xray_moments(&f1, &e12, 1, &q(64)).unwrap();
        assert!((m[0] - PI).abs() < 1e-13 && m[1].abs() < 1e-14);

        let f2 = HomogeneousFunction::monomial_term(1.0, [2, 0, 0, 0], -6);
        let m = xray_moments(&f2, &e12, 2, &q(64)).unwrap();
        assert!((m[0] - 0.75 * PI).abs() < 1e-13);
        assert!(m[1].abs() < 1e-14);
        assert!((m[2] - 0.25 * PI).abs() < 1e-13);

        for n in 0..4 {
            let z = HomogeneousFunction::zero(-(n as i32) - 2);
            assert!(xray_moments(&z, &e12, n, &q(16)).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn zeroth_moment_is_the_transform() {
        let f = basis_to_degree_minus_2(&harmonic_basis(2)[3]).unwrap();
        let frame = Sampler::new(8).frame();
        let m = xray_moments(&f, &frame, 0, &q(64)).unwrap();
        assert_eq!(m[0], xray_transform(&f, &frame, &q(64)).unwrap());
    }

    #[test]
    fn moments_check_degree_and_parity() {
        let e12 = Frame::standard(0, 1).unwrap();
        let even = HomogeneousFunction::norm_power(-3);
        assert!(matches!(xray_moments(&even, &e12, 1, &q(16)), Err(Error::Parity(_))));
        assert!(matches!(
            xray_moments(&inv_r2(), &e12, 1, &q(16)),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn weight_law_including_negative_determinant() {
        let mut s = Sampler::new(17);
        let phi = xray_field(&inv_r2(), q(64)).unwrap();
        let frame = Frame::standard(0, 1).unwrap();
        assert!(weight_transform_residual(&phi, &frame, &Matrix2::new(2.0, 0.0, 0.0, 3.0)).unwrap() < 1e-10);
        assert!(weight_transform_residual(&phi, &frame, &Matrix2::new(0.0, 1.0, 1.0, 0.0)).unwrap() < 1e-10);
        let basis = degree_minus_2_basis(2).unwrap();
        for b in &basis {
            let phi = xray_field(&b.function, q(128)).unwrap();
            let frame = s.frame();
            let mut saw_negative = false;
            for _ in 0..20 {
                let g = s.gl2();
                saw_negative |= g.determinant() < 0.0;
                assert!(weight_transform_residual(&phi, &frame, &g).unwrap() < 1e-9);
            }
            assert!(saw_negative);
        }
    }

    #[test]
    fn quadrature_converges_spectrally() {
        let frame = Frame::from_arrays([1.0, 0.0, 0.8, -0.3], [0.0, 1.0, 0.6, 1.4]).unwrap();
        let exact = TAU / frame.gram_determinant().sqrt();
        let err = |n| (xray_transform(&inv_r2(), &frame, &q(n)).unwrap() - exact).abs();
        assert!(err(16) >= 1e3 * err(32) || err(32) < 1e-14);
        assert!(err(64) < 1e-12);
    }

    #[test]
    fn linearity() {
        let basis = degree_minus_2_basis(2).unwrap();
        let (a, b) = (1.7, -0.4);
        let f = HomogeneousFunction::linear_combination(&[(a, &basis[0].function), (b, &basis[5].function)]).unwrap();
        let frame = Sampler::new(3).frame();
        let lhs = xray_transform(&f, &frame, &q(64)).unwrap();
        let rhs = a * xray_transform(&basis[0].function, &frame, &q(64)).unwrap()
            + b * xray_transform(&basis[5].function, &frame, &q(64)).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn equivariance_examples() {
        let mut s = Sampler::new(23);
        let frames: Vec<Frame> = (0..20).map(|_| s.frame()).collect();
        let f = inv_r2();
        assert_eq!(
            equivariance_residual(&f, &Matrix4::identity(), &frames, &q(64)).unwrap(),
            0.0
        );
        let g = Matrix4::from_diagonal(&nalgebra::Vector4::new(2.0, 0.5, 1.0, 1.0));
        assert!(equivariance_residual(&f, &g, &frames, &q(64)).unwrap() < 1e-10);
        let (c, sn) = ((PI / 6.0).cos(), (PI / 6.0).sin());
        let mut rot = Matrix4::identity();
        rot[(0, 0)] = c;
        rot[(0, 1)] = -sn;
        rot[(1, 0)] = sn;
        rot[(1, 1)] = c;
        assert!(equivariance_residual(&f, &rot, &frames, &q(64)).unwrap() < 1e-10);
        assert!(matches!(
            equivariance_residual(&f, &Matrix4::zeros(), &frames, &q(64)),
            Err(Error::Singular(_))
        ));
    }
}
