//! Homogeneous functions on ℝ⁴∖0, harmonic polynomial bases, and
//! determinant-weighted fields on frames.
//!
//! A [`HomogeneousFunction`] is built from a closed vocabulary: monomials
//! times powers of |x|, linear combinations, and pullbacks along linear maps.
//! Every node carries its analytic gradient, so Euler's identity and the
//! finite-difference agreement are checkable at any point.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::{Frame, RVec4};

pub type Exponents = [u32; 4];

#[derive(Debug, Clone)]
enum Expr {
    /// `coeff · x^exps · |x|^norm_power`
    Term {
        coeff: f64,
        exps: Exponents,
        norm_power: i32,
    },
    Sum(Vec<(f64, Expr)>),
    /// x ↦ inner(g·x)
    Pullback {
        inner: Box<Expr>,
        g: Matrix4<f64>,
    },
}

impl Expr {
    fn eval(&self, x: &RVec4) -> f64 {
        match self {
            Expr::Term {
                coeff,
                exps,
                norm_power,
            } => coeff * monomial(exps, x) * x.norm().powi(*norm_power),
            Expr::Sum(parts) => parts.iter().map(|(a, e)| a * e.eval(x)).sum(),
            Expr::Pullback { inner, g } => inner.eval(&(g * x)),
        }
    }

    fn grad(&self, x: &RVec4) -> RVec4 {
        match self {
            Expr::Term {
                coeff,
                exps,
                norm_power,
            } => {
                let r = x.norm();
                let rp = r.powi(*norm_power);
                let m = monomial(exps, x);
                let mut g = RVec4::zeros();
                for i in 0..4 {
                    let mut d = 0.0;
                    if exps[i] > 0 {
                        let mut e = *exps;
                        e[i] -= 1;
                        d += exps[i] as f64 * monomial(&e, x) * rp;
                    }
                    if *norm_power != 0 {
                        d += m * *norm_power as f64 * r.powi(norm_power - 2) * x[i];
                    }
                    g[i] = coeff * d;
                }
                g
            }
            Expr::Sum(parts) => parts.iter().fold(RVec4::zeros(), |acc, (a, e)| acc + e.grad(x) * *a),
            Expr::Pullback { inner, g } => g.transpose() * inner.grad(&(g * x)),
        }
    }

    /// Some(true) for odd, Some(false) for even, None when mixed.
    fn parity(&self) -> Option<Option<bool>> {
        match self {
            Expr::Term { coeff, exps, .. } => {
                if *coeff == 0.0 {
                    Some(None)
                } else {
                    Some(Some(exps.iter().sum::<u32>() % 2 == 1))
                }
            }
            Expr::Sum(parts) => {
                let mut acc: Option<bool> = None;
                for (a, e) in parts {
                    if *a == 0.0 {
                        continue;
                    }
                    match e.parity()? {
                        None => {}
                        Some(p) => match acc {
                            None => acc = Some(p),
                            Some(q) if q != p => return None,
                            _ => {}
                        },
                    }
                }
                Some(acc)
            }
            Expr::Pullback { inner, .. } => inner.parity(),
        }
    }
}

fn monomial(exps: &Exponents, x: &RVec4) -> f64 {
    (0..4).map(|i| x[i].powi(exps[i] as i32)).product()
}

/// A function on ℝ⁴∖0 with fixed integer homogeneity and an analytic gradient.
#[derive(Clone)]
pub struct HomogeneousFunction {
    degree: i32,
    expr: Arc<Expr>,
}

impl fmt::Debug for HomogeneousFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomogeneousFunction")
            .field("degree", &self.degree)
            .finish_non_exhaustive()
    }
}

impl HomogeneousFunction {
    fn from_expr(degree: i32, expr: Expr) -> Self {
        Self {
            degree,
            expr: Arc::new(expr),
        }
    }

    /// |x|^p.
    pub fn norm_power(p: i32) -> Self {
        Self::monomial_term(1.0, [0; 4], p)
    }

    /// coeff · x^exps · |x|^p, of degree |exps| + p.
    pub fn monomial_term(coeff: f64, exps: Exponents, norm_power: i32) -> Self {
        let degree = exps.iter().sum::<u32>() as i32 + norm_power;
        Self::from_expr(
            degree,
            Expr::Term {
                coeff,
                exps,
                norm_power,
            },
        )
    }

    pub fn zero(degree: i32) -> Self {
        Self::from_expr(degree, Expr::Sum(Vec::new()))
    }

    /// H(x) · |x|^p for a homogeneous polynomial H.
    pub fn polynomial_times_norm(h: &HarmonicPolynomial, norm_power: i32) -> Self {
        let terms = h
            .terms()
            .map(|(exps, c)| {
                (
                    1.0,
                    Expr::Term {
                        coeff: c,
                        exps,
                        norm_power,
                    },
                )
            })
            .collect();
        Self::from_expr(h.degree() as i32 + norm_power, Expr::Sum(terms))
    }

    pub fn linear_combination(parts: &[(f64, &HomogeneousFunction)]) -> Result<Self> {
        let degree = parts
            .first()
            .map(|(_, f)| f.degree)
            .ok_or_else(|| Error::Invalid("empty linear combination".into()))?;
        if let Some((_, bad)) = parts.iter().find(|(_, f)| f.degree != degree) {
            return Err(Error::DegreeMismatch {
                expected: degree,
                found: bad.degree,
            });
        }
        let terms = parts.iter().map(|(a, f)| (*a, (*f.expr).clone())).collect();
        Ok(Self::from_expr(degree, Expr::Sum(terms)))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_expr(self.degree, Expr::Sum(vec![(a, (*self.expr).clone())]))
    }

    /// x ↦ self(g·x).
    pub fn compose_linear(&self, g: &Matrix4<f64>) -> Result<Self> {
        if g.determinant() == 0.0 {
            return Err(Error::Singular("pullback along a singular linear map".into()));
        }
        Ok(Self::from_expr(
            self.degree,
            Expr::Pullback {
                inner: Box::new((*self.expr).clone()),
                g: *g,
            },
        ))
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn eval(&self, x: &RVec4) -> Result<f64> {
        check_nonzero(x)?;
        Ok(self.expr.eval(x))
    }

    pub fn grad(&self, x: &RVec4) -> Result<RVec4> {
        check_nonzero(x)?;
        Ok(self.expr.grad(x))
    }

    /// Evaluation without the zero check, for integrands known to avoid 0.
    pub(crate) fn eval_unchecked(&self, x: &RVec4) -> f64 {
        self.expr.eval(x)
    }

    /// True if f(−x) = (−1)^parity f(x) holds structurally (the zero function
    /// has both parities).
    pub fn has_parity(&self, odd: bool) -> bool {
        match self.expr.parity() {
            Some(None) => true,
            Some(Some(p)) => p == odd,
            None => false,
        }
    }

    pub fn require_degree(&self, expected: i32) -> Result<()> {
        if self.degree != expected {
            return Err(Error::DegreeMismatch {
                expected,
                found: self.degree,
            });
        }
        Ok(())
    }
}

fn check_nonzero(x: &RVec4) -> Result<()> {
    if x.iter().all(|c| *c == 0.0) {
        return Err(Error::Domain(
            "homogeneous functions are undefined at the origin".into(),
        ));
    }
    Ok(())
}

pub fn eval_homogeneous(f: &HomogeneousFunction, x: &RVec4) -> Result<f64> {
    f.eval(x)
}

pub fn grad_homogeneous(f: &HomogeneousFunction, x: &RVec4) -> Result<RVec4> {
    f.grad(x)
}

/// Homogeneous polynomial in four variables with exact rational coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPolynomial {
    degree: u32,
    coeffs: BTreeMap<Exponents, BigRational>,
}

impl HarmonicPolynomial {
    /// Drops zero coefficients; all exponents must have total degree `degree`.
    pub fn new(degree: u32, coeffs: BTreeMap<Exponents, BigRational>) -> Result<Self> {
        if let Some(bad) = coeffs.keys().find(|e| e.iter().sum::<u32>() != degree) {
            return Err(Error::Invalid(format!("monomial {bad:?} is not of degree {degree}")));
        }
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(Self { degree, coeffs })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exact_coefficients(&self) -> &BTreeMap<Exponents, BigRational> {
        &self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponents, f64)> + '_ {
        self.coeffs
            .iter()
            .map(|(e, c)| (*e, c.to_f64().expect("finite rational")))
    }

    /// Coefficient table of the Euclidean Laplacian, zero entries removed.
    pub fn laplacian(&self) -> BTreeMap<Exponents, BigRational> {
        let mut out: BTreeMap<Exponents, BigRational> = BTreeMap::new();
        for (e, c) in &self.coeffs {
            for i in 0..4 {
                if e[i] >= 2 {
                    let mut t = *e;
                    t[i] -= 2;
                    let k = BigInt::from(e[i]) * BigInt::from(e[i] - 1);
                    *out.entry(t).or_insert_with(BigRational::zero) += c * BigRational::from_integer(k);
                }
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    }

    pub fn eval(&self, x: &RVec4) -> f64 {
        self.terms().map(|(e, c)| c * monomial(&e, x)).sum()
    }
}

/// Exponent vectors of degree-k monomials in four variables, in
/// lexicographically decreasing order (x₁^k first).
pub fn monomials(k: u32) -> Vec<Exponents> {
    let mut out = Vec::new();
    for a in (0..=k).rev() {
        for b in (0..=k - a).rev() {
            for c in (0..=k - a - b).rev() {
                out.push([a, b, c, k - a - b - c]);
            }
        }
    }
    out
}

/// Basis of harmonic homogeneous polynomials of degree k on ℝ⁴: the exact
/// nullspace of the Laplacian from degree k to degree k−2 monomials, one
/// vector per free column of the reduced row echelon form.
pub fn harmonic_basis(k: u32) -> Vec<HarmonicPolynomial> {
    let cols = monomials(k);
    if k < 2 {
        return cols
            .into_iter()
            .map(|e| HarmonicPolynomial::new(k, BTreeMap::from([(e, BigRational::one())])).expect("degree matches"))
            .collect();
    }
    let rows = monomials(k - 2);
    let row_index: BTreeMap<Exponents, usize> = rows.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut m = vec![vec![BigRational::zero(); cols.len()]; rows.len()];
    for (j, e) in cols.iter().enumerate() {
        for i in 0..4 {
            if e[i] >= 2 {
                let mut t = *e;
                t[i] -= 2;
                m[row_index[&t]][j] += BigRational::from_integer(BigInt::from(e[i] * (e[i] - 1)));
            }
        }
    }
    let pivots = rref(&mut m);
    let pivot_of_col: BTreeMap<usize, usize> = pivots.iter().enumerate().map(|(r, c)| (*c, r)).collect();
    (0..cols.len())
        .filter(|c| !pivot_of_col.contains_key(c))
        .map(|free| {
            let mut coeffs = BTreeMap::new();
            coeffs.insert(cols[free], BigRational::one());
            for (&pc, &r) in &pivot_of_col {
                let v = -m[r][free].clone();
                if !v.is_zero() {
                    coeffs.insert(cols[pc], v);
                }
            }
            HarmonicPolynomial::new(k, coeffs).expect("degree matches")
        })
        .collect()
}

/// In-place reduced row echelon form; returns the pivot columns in row order.
fn rref(m: &mut [Vec<BigRational>]) -> Vec<usize> {
    let n_rows = m.len();
    let n_cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n_cols {
        if r == n_rows {
            break;
        }
        let Some(p) = (r..n_rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n_rows {
            if i != r && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                let (pivot_row, row) = if i < r {
                    let (a, b) = m.split_at_mut(r);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = m.split_at_mut(i);
                    (&a[r], &mut b[0])
                };
                for (x, p) in row.iter_mut().zip(pivot_row) {
                    *x -= &factor * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// f(x) = H(x)·|x|^{−k−2}, a degree −2 function. Odd k is rejected: such f is
/// odd under x ↦ −x and does not descend to ℝP³.
pub fn basis_to_degree_minus_2(h: &HarmonicPolynomial) -> Result<HomogeneousFunction> {
    if h.degree() % 2 == 1 {
        return Err(Error::Parity(format!(
            "degree {} polynomial gives an odd function; it does not descend to ℝP³",
            h.degree()
        )));
    }
    Ok(HomogeneousFunction::polynomial_times_norm(h, -(h.degree() as i32) - 2))
}

/// A named element of the degree −2 input basis.
#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub id: String,
    pub function: HomogeneousFunction,
}

/// All H·|x|^{−k−2} for even k ≤ max_degree; ids are `h{k}_{index}`.
/// Dimension Σ (k+1)² over even k.
pub fn degree_minus_2_basis(max_degree: u32) -> Result<Vec<BasisFunction>> {
    let mut out = Vec::new();
    for k in (0..=max_degree).step_by(2) {
        for (i, h) in harmonic_basis(k).iter().enumerate() {
            out.push(BasisFunction {
                id: format!("h{k}_{i}"),
                function: basis_to_degree_minus_2(h)?,
            });
        }
    }
    Ok(out)
}

pub fn basis_dimension(max_degree: u32) -> usize {
    (0..=max_degree).step_by(2).map(|k| ((k + 1) * (k + 1)) as usize).sum()
}

/// Resolves an id produced by [`degree_minus_2_basis`] (or `zero`).
pub fn basis_function_by_id(id: &str) -> Result<HomogeneousFunction> {
    if id == "zero" {
        return Ok(HomogeneousFunction::zero(-2));
    }
    let bad = || Error::Invalid(format!("unknown basis id {id:?}"));
    let (k, i) = id
        .strip_prefix('h')
        .and_then(|rest| rest.split_once('_'))
        .ok_or_else(bad)?;
    let k: u32 = k.parse().map_err(|_| bad())?;
    let i: usize = i.parse().map_err(|_| bad())?;
    let basis = harmonic_basis(k);
    basis_to_degree_minus_2(basis.get(i).ok_or_else(bad)?)
}

/// Writes the degree-k harmonic basis as CSV rows `basis,e1,e2,e3,e4,coeff`.
pub fn write_basis_csv<W: Write>(k: u32, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["basis", "e1", "e2", "e3", "e4", "coeff"])?;
    for (i, h) in harmonic_basis(k).iter().enumerate() {
        for (e, c) in h.exact_coefficients() {
            let coeff = if c.denom().is_one() {
                c.numer().to_string()
            } else {
                format!("{}", c.to_f64().unwrap_or(f64::NAN))
            };
            w.write_record([
                i.to_string(),
                e[0].to_string(),
                e[1].to_string(),
                e[2].to_string(),
                e[3].to_string(),
                coeff,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_basis_csv`] as floating-point tables.
pub fn read_basis_csv<R: std::io::Read>(input: R) -> Result<Vec<Vec<(Exponents, f64)>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<Vec<(Exponents, f64)>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse_u = |i: usize| -> Result<u32> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Invalid(format!("bad basis CSV field {i}")))
        };
        let idx = parse_u(0)? as usize;
        let e = [parse_u(1)?, parse_u(2)?, parse_u(3)?, parse_u(4)?];
        let c: f64 = rec
            .get(5)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Invalid("bad basis CSV coefficient".into()))?;
        if out.len() <= idx {
            out.resize_with(idx + 1, Vec::new);
        }
        out[idx].push((e, c));
    }
    Ok(out)
}

type FrameFn = dyn Fn(&Frame) -> Result<f64> + Send + Sync;

/// A function on frames transforming as φ(frame·g) = |det g|^w φ(frame).
#[derive(Clone)]
pub struct WeightedField {
    weight: i32,
    eval: Arc<FrameFn>,
}

impl fmt::Debug for WeightedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightedField")
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

impl WeightedField {
    pub fn new<F>(weight: i32, eval: F) -> Self
    where
        F: Fn(&Frame) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            weight,
            eval: Arc::new(eval),
        }
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn eval(&self, frame: &Frame) -> Result<f64> {
        (self.eval)(frame)
    }
}

/// |φ(frame·g) − |det g|^w φ(frame)| / (1 + |φ(frame)|).
pub fn weight_transform_residual(phi: &WeightedField, frame: &Frame, g: &Matrix2<f64>) -> Result<f64> {
    let det = g.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular("frame change matrix has zero determinant".into()));
    }
    let base = phi.eval(frame)?;
    let moved = phi.eval(&frame.act(g)?)?;
    Ok((moved - det.abs().powi(phi.weight()) * base).abs() / (1.0 + base.abs()))
}
