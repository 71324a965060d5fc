//! Split self-dual Yang–Mills data on ℝ^{2,2}.
//!
//! Conventions: metric diag(+1, +1, −1, −1), ε₁₂₃₄ = +1, curvature
//! F_ij = ∂ᵢAⱼ − ∂ⱼAᵢ + [Aᵢ, Aⱼ], gauge action Aᵍ = gAg⁻¹ − (∂g)g⁻¹ so that
//! (∂ + Aᵍ)(gψ) = g(∂ + A)ψ. Flipping the orientation swaps self-dual and
//! anti-self-dual.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{first_partial, FdSpec, FdValue, SPLIT_SIGNS};

pub type CMat = DMatrix<Complex64>;
pub type Point = [f64; 4];

/// `d[i][j] = ∂ᵢAⱼ`.
pub type Partials = [[CMat; 4]; 4];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

impl FdValue for CMat {
    fn scale(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }
    fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self.zip_map(other, |x, y| x + y * a)
    }
}

/// A connection on a trivial rank-n bundle over ℝ^{2,2}, given by its four
/// n×n coefficient matrices.
pub trait Connection: Send + Sync {
    fn rank(&self) -> usize;

    fn potential(&self, x: &Point) -> Result<[CMat; 4]>;

    /// Analytic ∂ᵢAⱼ, when the connection has a closed form.
    fn analytic_partials(&self, _x: &Point) -> Option<Result<Partials>> {
        None
    }

    /// ∂ᵢAⱼ, analytic if available, central differences otherwise.
    fn derivatives(&self, x: &Point, fd: &FdSpec) -> Result<Partials> {
        match self.analytic_partials(x) {
            Some(p) => p,
            None => fd_partials(self, x, fd),
        }
    }
}

/// ∂ᵢAⱼ by central differences regardless of analytic availability.
pub fn fd_partials<C: Connection + ?Sized>(a: &C, x: &Point, fd: &FdSpec) -> Result<Partials> {
    let mut out: Vec<[CMat; 4]> = Vec::with_capacity(4);
    for i in 0..4 {
        let comps: Vec<CMat> = (0..4)
            .map(|j| first_partial(&|y: &Point| Ok(a.potential(y)?[j].clone()), x, i, fd))
            .collect::<Result<_>>()?;
        out.push(comps.try_into().expect("four components"));
    }
    Ok(out.try_into().expect("four directions"))
}

/// Aⱼ(x) = Cⱼ + Σᵢ xᵢ Lᵢⱼ. Every preset is of this form.
#[derive(Debug, Clone)]
pub struct AffineConnection {
    rank: usize,
    constant: [CMat; 4],
    linear: Partials,
}

impl AffineConnection {
    pub fn new(constant: [CMat; 4], linear: Partials) -> Result<Self> {
        let rank = constant[0].nrows();
        let all_square = constant
            .iter()
            .chain(linear.iter().flatten())
            .all(|m| m.nrows() == rank && m.ncols() == rank);
        if !all_square {
            return Err(Error::Dimension(
                "connection coefficients must all be rank × rank".into(),
            ));
        }
        Ok(Self { rank, constant, linear })
    }
}

impl Connection for AffineConnection {
    fn rank(&self) -> usize {
        self.rank
    }

    fn potential(&self, x: &Point) -> Result<[CMat; 4]> {
        Ok(std::array::from_fn(|j| {
            let mut a = self.constant[j].clone();
            for i in 0..4 {
                a += &self.linear[i][j] * Complex64::from(x[i]);
            }
            a
        }))
    }

    fn analytic_partials(&self, _x: &Point) -> Option<Result<Partials>> {
        Some(Ok(self.linear.clone()))
    }
}

type PotentialFn = dyn Fn(&Point) -> Result<[CMat; 4]> + Send + Sync;

/// A connection known only pointwise; derivatives by finite differences.
#[derive(Clone)]
pub struct FnConnection {
    rank: usize,
    f: Arc<PotentialFn>,
}

impl FnConnection {
    pub fn new<F>(rank: usize, f: F) -> Self
    where
        F: Fn(&Point) -> Result<[CMat; 4]> + Send + Sync + 'static,
    {
        Self { rank, f: Arc::new(f) }
    }
}

impl fmt::Debug for FnConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnConnection")
            .field("rank", &self.rank)
            .finish_non_exhaustive()
    }
}

impl Connection for FnConnection {
    fn rank(&self) -> usize {
        self.rank
    }

    fn potential(&self, x: &Point) -> Result<[CMat; 4]> {
        let a = (self.f)(x)?;
        if a.iter().any(|m| m.nrows() != self.rank || m.ncols() != self.rank) {
            return Err(Error::Dimension("potential has the wrong matrix size".into()));
        }
        Ok(a)
    }
}

/// A gauge transformation x ↦ g(x) with analytic first and second partials.
pub trait Gauge: Send + Sync {
    fn value(&self, x: &Point) -> CMat;
    fn partials(&self, x: &Point) -> [CMat; 4];
    /// `d2[i][j] = ∂ᵢ∂ⱼg`
    fn second_partials(&self, x: &Point) -> [[CMat; 4]; 4];
}

/// χ(x) = a·x + ½ xᵀQx with Q symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPhase {
    pub linear: [f64; 4],
    pub quadratic: Matrix4<f64>,
}

impl QuadraticPhase {
    pub fn linear(a: [f64; 4]) -> Self {
        Self {
            linear: a,
            quadratic: Matrix4::zeros(),
        }
    }

    /// χ = x_i x_j (zero-based i ≠ j).
    pub fn product(i: usize, j: usize) -> Self {
        let mut q = Matrix4::zeros();
        q[(i, j)] = 1.0;
        q[(j, i)] = 1.0;
        Self {
            linear: [0.0; 4],
            quadratic: q,
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        let v = nalgebra::Vector4::from(*x);
        nalgebra::Vector4::from(self.linear).dot(&v) + 0.5 * v.dot(&(self.quadratic * v))
    }

    pub fn gradient(&self, x: &Point) -> [f64; 4] {
        let g = nalgebra::Vector4::from(self.linear) + self.quadratic * nalgebra::Vector4::from(*x);
        [g[0], g[1], g[2], g[3]]
    }
}

/// g = exp(iχ)·𝟙.
#[derive(Debug, Clone)]
pub struct ScalarPhase {
    pub chi: QuadraticPhase,
    pub rank: usize,
}

impl Gauge for ScalarPhase {
    fn value(&self, x: &Point) -> CMat {
        CMat::identity(self.rank, self.rank) * (I * self.chi.value(x)).exp()
    }

    fn partials(&self, x: &Point) -> [CMat; 4] {
        let g = self.value(x);
        let d = self.chi.gradient(x);
        std::array::from_fn(|i| &g * (I * d[i]))
    }

    fn second_partials(&self, x: &Point) -> [[CMat; 4]; 4] {
        let g = self.value(x);
        let d = self.chi.gradient(x);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| &g * (I * self.chi.quadratic[(i, j)] - Complex64::from(d[i] * d[j])))
        })
    }
}

/// g = exp(iχT) = cos χ·𝟙 + i sin χ·T for a generator with T² = 𝟙
/// (e.g. a Pauli matrix).
#[derive(Debug, Clone)]
pub struct MatrixPhase {
    chi: QuadraticPhase,
    generator: CMat,
}

impl MatrixPhase {
    pub fn new(chi: QuadraticPhase, generator: CMat) -> Result<Self> {
        let n = generator.nrows();
        if generator.ncols() != n || (&generator * &generator - CMat::identity(n, n)).norm() > 1e-12 {
            return Err(Error::Invalid("phase generator must square to the identity".into()));
        }
        Ok(Self { chi, generator })
    }
}

impl Gauge for MatrixPhase {
    fn value(&self, x: &Point) -> CMat {
        let n = self.generator.nrows();
        let c = self.chi.value(x);
        CMat::identity(n, n) * Complex64::from(c.cos()) + &self.generator * (I * c.sin())
    }

    fn partials(&self, x: &Point) -> [CMat; 4] {
        let tg = &self.generator * self.value(x);
        let d = self.chi.gradient(x);
        std::array::from_fn(|i| &tg * (I * d[i]))
    }

    fn second_partials(&self, x: &Point) -> [[CMat; 4]; 4] {
        let g = self.value(x);
        let tg = &self.generator * &g;
        let d = self.chi.gradient(x);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| &tg * (I * self.chi.quadratic[(i, j)]) - &g * Complex64::from(d[i] * d[j]))
        })
    }
}

/// A constant gauge matrix.
#[derive(Debug, Clone)]
pub struct ConstantGauge(pub CMat);

impl Gauge for ConstantGauge {
    fn value(&self, _x: &Point) -> CMat {
        self.0.clone()
    }
    fn partials(&self, _x: &Point) -> [CMat; 4] {
        let n = self.0.nrows();
        std::array::from_fn(|_| CMat::zeros(n, n))
    }
    fn second_partials(&self, _x: &Point) -> [[CMat; 4]; 4] {
        let n = self.0.nrows();
        std::array::from_fn(|_| std::array::from_fn(|_| CMat::zeros(n, n)))
    }
}

/// Aᵍᵢ = g Aᵢ g⁻¹ − (∂ᵢg) g⁻¹.
#[derive(Clone)]
pub struct GaugeTransformed {
    base: Arc<dyn Connection>,
    g: Arc<dyn Gauge>,
}

impl fmt::Debug for GaugeTransformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeTransformed")
            .field("rank", &self.base.rank())
            .finish_non_exhaustive()
    }
}

fn invert(g: &CMat) -> Result<CMat> {
    let scale = g.norm();
    g.clone()
        .try_inverse()
        .filter(|inv| scale * inv.norm() < 1e12)
        .ok_or_else(|| Error::Singular("gauge transformation is not invertible".into()))
}

impl Connection for GaugeTransformed {
    fn rank(&self) -> usize {
        self.base.rank()
    }

    fn potential(&self, x: &Point) -> Result<[CMat; 4]> {
        let g = self.g.value(x);
        let g_inv = invert(&g)?;
        let dg = self.g.partials(x);
        let a = self.base.potential(x)?;
        Ok(std::array::from_fn(|i| &g * &a[i] * &g_inv - &dg[i] * &g_inv))
    }

    fn analytic_partials(&self, x: &Point) -> Option<Result<Partials>> {
        let base_partials = self.base.analytic_partials(x)?;
        Some((|| {
            let dbase = base_partials?;
            let g = self.g.value(x);
            let g_inv = invert(&g)?;
            let dg = self.g.partials(x);
            let d2g = self.g.second_partials(x);
            let a = self.base.potential(x)?;
            // ∂ⱼ(g⁻¹) = −g⁻¹ (∂ⱼg) g⁻¹
            let dg_inv: [CMat; 4] = std::array::from_fn(|j| -(&g_inv * &dg[j] * &g_inv));
            Ok(std::array::from_fn(|j| {
                std::array::from_fn(|i| {
                    &dg[j] * &a[i] * &g_inv + &g * &dbase[j][i] * &g_inv + &g * &a[i] * &dg_inv[j]
                        - &d2g[j][i] * &g_inv
                        - &dg[i] * &dg_inv[j]
                })
            }))
        })())
    }
}

pub fn gauge_transform(a: Arc<dyn Connection>, g: Arc<dyn Gauge>) -> Result<GaugeTransformed> {
    let probe = g.value(&[0.0; 4]);
    if probe.nrows() != a.rank() || probe.ncols() != a.rank() {
        return Err(Error::Dimension("gauge matrix size differs from bundle rank".into()));
    }
    invert(&probe)?;
    Ok(GaugeTransformed { base: a, g })
}

/// Antisymmetric family F_ij of n×n matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    f: [[CMat; 4]; 4],
}

impl Curvature {
    /// Builds from the six components F₁₂, F₁₃, F₁₄, F₂₃, F₂₄, F₃₄.
    pub fn from_components(c: [CMat; 6]) -> Self {
        let n = c[0].nrows();
        let mut f: [[CMat; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| CMat::zeros(n, n)));
        for ((i, j), m) in PAIRS.iter().zip(c) {
            f[*j][*i] = -&m;
            f[*i][*j] = m;
        }
        Self { f }
    }

    pub fn get(&self, i: usize, j: usize) -> &CMat {
        &self.f[i][j]
    }

    pub fn components(&self) -> [CMat; 6] {
        PAIRS.map(|(i, j)| self.f[i][j].clone())
    }

    /// √(Σ_{i<j} ‖F_ij‖²_F).
    pub fn norm(&self) -> f64 {
        PAIRS
            .iter()
            .map(|&(i, j)| self.f[i][j].norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Curvature) -> Curvature {
        Curvature {
            f: std::array::from_fn(|i| std::array::from_fn(|j| &self.f[i][j] - &other.f[i][j])),
        }
    }

    pub fn conjugate_by(&self, g: &CMat, g_inv: &CMat) -> Curvature {
        Curvature {
            f: std::array::from_fn(|i| std::array::from_fn(|j| g * &self.f[i][j] * g_inv)),
        }
    }
}

/// Index pairs (i, j), i < j, in the order 12, 13, 14, 23, 24, 34.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Sign of the permutation (i j k l) of (0 1 2 3), zero on repeats.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for a in 0..4 {
        for b in a + 1..4 {
            if idx[a] == idx[b] {
                return 0.0;
            }
            if idx[a] > idx[b] {
                sign = -sign;
            }
        }
    }
    sign
}

pub fn curvature_from_partials(pot: &[CMat; 4], d: &Partials) -> Curvature {
    let c = PAIRS.map(|(i, j)| &d[i][j] - &d[j][i] + &pot[i] * &pot[j] - &pot[j] * &pot[i]);
    Curvature::from_components(c)
}

/// F_ij = ∂ᵢAⱼ − ∂ⱼAᵢ + [Aᵢ, Aⱼ], analytic partials when available.
pub fn curvature<C: Connection + ?Sized>(a: &C, x: &Point, fd: &FdSpec) -> Result<Curvature> {
    Ok(curvature_from_partials(&a.potential(x)?, &a.derivatives(x, fd)?))
}

/// Curvature with finite-difference partials.
pub fn curvature_fd<C: Connection + ?Sized>(a: &C, x: &Point, fd: &FdSpec) -> Result<Curvature> {
    Ok(curvature_from_partials(&a.potential(x)?, &fd_partials(a, x, fd)?))
}

/// (*F)_ij = ½ ε_ijkl g^kk g^ll F_kl for the split metric.
pub fn hodge_star(f: &Curvature) -> Curvature {
    let n = f.f[0][0].nrows();
    let c = PAIRS.map(|(i, j)| {
        let mut acc = CMat::zeros(n, n);
        for k in 0..4 {
            for l in 0..4 {
                let e = levi_civita([i, j, k, l]);
                if e != 0.0 {
                    acc += &f.f[k][l] * Complex64::from(0.5 * e * SPLIT_SIGNS[k] * SPLIT_SIGNS[l]);
                }
            }
        }
        acc
    });
    Curvature::from_components(c)
}

/// max over points of ‖*F − F‖.
pub fn selfdual_residual<C: Connection + ?Sized>(a: &C, points: &[Point], fd: &FdSpec) -> Result<f64> {
    points.iter().try_fold(0.0f64, |worst, x| {
        let f = curvature(a, x, fd)?;
        Ok(worst.max(hodge_star(&f).sub(&f).norm()))
    })
}

/// Frobenius norm of Σ_cyclic (∂ᵢF_jk + [Aᵢ, F_jk]) summed over the four
/// index triples, with ∂ᵢF by central differences.
pub fn bianchi_residual<C: Connection + ?Sized>(a: &C, x: &Point, fd: &FdSpec) -> Result<f64> {
    let pot = a.potential(x)?;
    let f0 = curvature(a, x, fd)?;
    let mut dfs: Vec<[CMat; 6]> = Vec::with_capacity(4);
    for i in 0..4 {
        let comps = |y: &Point| -> Result<Vec<f64>> {
            let c = curvature(a, y, fd)?.components();
            Ok(c.iter().flat_map(|m| m.iter().flat_map(|z| [z.re, z.im])).collect())
        };
        let flat: Vec<f64> = first_partial(&comps, x, i, fd)?;
        let n = a.rank();
        let per = 2 * n * n;
        dfs.push(std::array::from_fn(|p| {
            CMat::from_iterator(
                n,
                n,
                (0..n * n).map(|q| Complex64::new(flat[p * per + 2 * q], flat[p * per + 2 * q + 1])),
            )
        }));
    }
    let pair_index = |i: usize, j: usize| PAIRS.iter().position(|&p| p == (i, j)).expect("ordered pair");
    let mut total = 0.0;
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        let cov = |a_idx: usize, b: usize, c: usize| {
            let fbc = f0.get(b, c);
            &dfs[a_idx][pair_index(b, c)] + &pot[a_idx] * fbc - fbc * &pot[a_idx]
        };
        // cyclic sum of D_i F_jk with i < j < k; F_ki = F_ik up to sign
        let s = cov(i, j, k) + cov(j, i, k) * Complex64::from(-1.0) + cov(k, i, j);
        total += s.norm_squared();
    }
    Ok(total.sqrt())
}

/// Max ‖Aᵢ + Aᵢ*‖ at x (zero for u(n)-valued connections).
pub fn anti_hermitian_defect<C: Connection + ?Sized>(a: &C, x: &Point) -> Result<f64> {
    Ok(a.potential(x)?
        .iter()
        .map(|m| (m + m.adjoint()).norm())
        .fold(0.0, f64::max))
}

pub mod presets {
    //! Named connections addressable from the command line.

    use super::*;

    fn zeros(n: usize) -> CMat {
        CMat::zeros(n, n)
    }

    fn scalar(z: Complex64) -> CMat {
        CMat::from_element(1, 1, z)
    }

    fn empty_linear(n: usize) -> Partials {
        std::array::from_fn(|_| std::array::from_fn(|_| zeros(n)))
    }

    pub fn zero(rank: usize) -> AffineConnection {
        AffineConnection::new(std::array::from_fn(|_| zeros(rank)), empty_linear(rank)).expect("square")
    }

    /// i(x₁ dx₂ + σ x₃ dx₄) on the trivial line bundle.
    fn abelian(sigma: f64) -> AffineConnection {
        let mut lin = empty_linear(1);
        lin[0][1] = scalar(I);
        lin[2][3] = scalar(I * sigma);
        AffineConnection::new(std::array::from_fn(|_| zeros(1)), lin).expect("square")
    }

    /// i(x₁ dx₂ + x₃ dx₄): curvature i(dx¹∧dx² + dx³∧dx⁴), self-dual.
    pub fn flagship_u1() -> AffineConnection {
        abelian(1.0)
    }

    /// i(x₁ dx₂ − x₃ dx₄): anti-self-dual.
    pub fn asd_u1() -> AffineConnection {
        abelian(-1.0)
    }

    /// −(∂g)g⁻¹ = −i dχ for g = exp(iχ); flat.
    pub fn pure_gauge(chi: QuadraticPhase) -> AffineConnection {
        let constant = std::array::from_fn(|j| scalar(-I * chi.linear[j]));
        let linear = std::array::from_fn(|i| std::array::from_fn(|j| scalar(-I * chi.quadratic[(i, j)])));
        AffineConnection::new(constant, linear).expect("square")
    }

    pub fn pauli() -> [CMat; 3] {
        let o = Complex64::from(0.0);
        let l = Complex64::from(1.0);
        [
            CMat::from_row_slice(2, 2, &[o, l, l, o]),
            CMat::from_row_slice(2, 2, &[o, -I, I, o]),
            CMat::from_row_slice(2, 2, &[l, o, o, -l]),
        ]
    }

    /// Constant su(2) connection (iσ₁, iσ₂, iσ₂, −iσ₁): F₁₂ = F₃₄ = F₁₃ =
    /// F₂₄ = −2iσ₃, F₁₄ = F₂₃ = 0, hence self-dual.
    pub fn su2_constant() -> AffineConnection {
        let [s1, s2, _] = pauli();
        let a1 = &s1 * I;
        let a2 = &s2 * I;
        AffineConnection::new([a1.clone(), a2.clone(), a2, -a1], empty_linear(2)).expect("square")
    }

    pub const NAMES: [&str; 5] = ["zero", "flagship-u1", "asd-u1", "pure-gauge", "su2-constant"];

    /// Parses a preset name. `pure-gauge` uses χ = x₁x₂; `pure-gauge(c1,c2,c3,c4)`
    /// uses the linear phase χ = Σ cᵢxᵢ.
    pub fn by_name(name: &str) -> Result<Arc<dyn Connection>> {
        let name = name.trim();
        Ok(match name {
            "zero" => Arc::new(zero(1)),
            "flagship-u1" => Arc::new(flagship_u1()),
            "asd-u1" => Arc::new(asd_u1()),
            "pure-gauge" => Arc::new(pure_gauge(QuadraticPhase::product(0, 1))),
            "su2-constant" => Arc::new(su2_constant()),
            other => {
                let args = other
                    .strip_prefix("pure-gauge(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| {
                        Error::Invalid(format!(
                            "unknown connection preset {other:?}; known: {}",
                            NAMES.join(", ")
                        ))
                    })?;
                let c: Vec<f64> = args
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Invalid(format!("bad pure-gauge coefficients: {e}")))?;
                let c: [f64; 4] = c
                    .try_into()
                    .map_err(|_| Error::Invalid("pure-gauge needs four coefficients".into()))?;
                Arc::new(pure_gauge(QuadraticPhase::linear(c)))
            }
        })
    }
}
