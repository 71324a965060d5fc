//! Seeded random draws used by experiments and tests.

use nalgebra::{Matrix2, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{ComplexProjectivePoint, Frame, RVec4};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn gaussian4(&mut self) -> RVec4 {
        RVec4::from_fn(|_, _| self.normal())
    }

    /// Orthonormalized pair of Gaussian vectors. The spanned plane is
    /// distributed by the O(4)-invariant measure on Gr(2, ℝ⁴).
    pub fn frame(&mut self) -> Frame {
        loop {
            let u = self.gaussian4();
            let v = self.gaussian4();
            let nu = u.norm();
            if nu < 1e-6 {
                continue;
            }
            let u = u / nu;
            let w = v - u * u.dot(&v);
            let nw = w.norm();
            if nw < 1e-6 {
                continue;
            }
            if let Ok(f) = Frame::new(u, w / nw) {
                return f;
            }
        }
    }

    /// Gaussian complex 4-vector; non-real with probability one.
    pub fn complex_point(&mut self) -> ComplexProjectivePoint {
        loop {
            let z = ComplexProjectivePoint::from_parts(self.gaussian4(), self.gaussian4())
                .expect("nonzero Gaussian vector");
            if z.reality_defect() > 1e-3 {
                return z;
            }
        }
    }

    /// Chart coordinates with entries uniform in [−r, r].
    pub fn chart_point(&mut self, r: f64) -> Matrix2<f64> {
        Matrix2::from_fn(|_, _| self.uniform(-r, r))
    }

    /// Invertible 2×2 matrix with condition number at most 4; the
    /// determinant sign is random.
    pub fn gl2(&mut self) -> Matrix2<f64> {
        loop {
            let g = Matrix2::from_fn(|_, _| self.normal());
            let sv = g.singular_values();
            if sv.min() > 0.1 && sv.max() < 4.0 * sv.min() {
                return g;
            }
        }
    }

    /// Element of SL(4, ℝ): a random orthogonal matrix times a perturbation
    /// of the identity, rescaled to unit determinant.
    pub fn sl4(&mut self, spread: f64) -> Matrix4<f64> {
        loop {
            let gauss = Matrix4::from_fn(|_, _| self.normal());
            let q = gauss.qr().q();
            let p = Matrix4::identity() + Matrix4::from_fn(|_, _| spread * self.normal());
            let mut g = q * p;
            let mut d = g.determinant();
            if d.abs() < 1e-3 {
                continue;
            }
            if d < 0.0 {
                g.column_mut(0).neg_mut();
                d = -d;
            }
            return g / d.powf(0.25);
        }
    }
}
