//! Verification suites. Every random draw comes from the configured seed
//! and is taken sequentially before any parallel work, so reports are
//! reproducible regardless of thread count.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use split_xray::fields::{
    degree_minus_2_basis, harmonic_basis, weight_transform_residual, write_basis_csv, HomogeneousFunction,
};
use split_xray::geometry::{chart_from_plane, mu_inverse, mu_restrict, pi_project, plane_from_chart, GPoint};
use split_xray::instanton::{
    gauge_transform, hodge_star, presets, selfdual_residual, CMat, Connection, Curvature, Gauge, MatrixPhase,
    QuadraticPhase, ScalarPhase,
};
use split_xray::inversion::{add_noise, design_matrix, injectivity_report, reconstruct, sample_frames};
use split_xray::operators::{box_diag, coupled_box, dn_residual, john_operator, FdSpec};
use split_xray::penrose::{
    contour_chart_field, contour_transform, elementary_state, parse_covector, pole_safety, wedge_pairing,
    TwistorRationalFunction,
};
use split_xray::sampling::Sampler;
use split_xray::xray::{chart_gram, equivariance_residual, xray_chart_field, xray_field, MomentField};
use split_xray::{Error, Frame, QuadratureSpec, Result};

use crate::config::ExperimentConfig;
use crate::report::Check;

pub type Metrics = BTreeMap<String, f64>;

pub struct Outcome {
    pub checks: Vec<Check>,
    pub metrics: Metrics,
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken evaluation can never pass
    it.fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn fd(cfg: &ExperimentConfig) -> Result<FdSpec> {
    FdSpec::new(cfg.h, cfg.richardson)
}

fn quadrature(cfg: &ExperimentConfig) -> Result<QuadratureSpec> {
    QuadratureSpec::new(cfg.nodes)
}

fn check(cfg: &ExperimentConfig, name: &str, value: f64) -> Check {
    Check::at_most(name, value, cfg.tolerance(name))
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command.as_str() {
        "verify-john" => verify_john(cfg),
        "verify-weight-law" => verify_weight_law(cfg),
        "verify-equivariance" => verify_equivariance(cfg),
        "verify-moments" => verify_moments(cfg),
        "verify-selfdual" => verify_selfdual(cfg),
        "verify-gauge" => verify_gauge(cfg),
        "verify-coupled-box" => verify_coupled_box(cfg),
        "penrose-elementary" => penrose_elementary(cfg),
        "geometry-roundtrip" => geometry_roundtrip(cfg),
        "reconstruct" => run_reconstruct(cfg),
        "injectivity" => run_injectivity(cfg),
        other => Err(Error::Invalid(format!("command {other:?} has no suite"))),
    }
}

fn verify_john(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (q, fd) = (quadrature(cfg)?, fd(cfg)?);
    let basis = degree_minus_2_basis(cfg.max_degree)?;
    let mut s = Sampler::new(cfg.seed);
    let points: Vec<Matrix2<f64>> = (0..cfg.points).map(|_| s.chart_point(1.0)).collect();
    let per_field = basis
        .par_iter()
        .map(|b| {
            let phi = xray_chart_field(&b.function, q)?;
            let vals = points
                .iter()
                .map(|x| john_operator::<f64, _>(&*phi, x, &fd))
                .collect::<Result<Vec<_>>>()?;
            Ok(max_of(vals.into_iter().map(f64::abs)))
        })
        .collect::<Result<Vec<f64>>>()?;

    let flagship = xray_chart_field(&HomogeneousFunction::norm_power(-2), q)?;
    let closed = points
        .iter()
        .map(|x| Ok((flagship(x)? - TAU / chart_gram(x).sqrt()).abs()))
        .collect::<Result<Vec<f64>>>()?;

    let metrics = Metrics::from([("basis_size".into(), basis.len() as f64)]);
    Ok(Outcome {
        checks: vec![
            check(cfg, "john_residual", max_of(per_field.into_iter())),
            check(cfg, "flagship_closed_form", max_of(closed.into_iter())),
        ],
        metrics,
    })
}

fn verify_weight_law(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = quadrature(cfg)?;
    let mut fields = vec![HomogeneousFunction::norm_power(-2)];
    fields.extend(degree_minus_2_basis(cfg.max_degree)?.into_iter().map(|b| b.function));
    let mut s = Sampler::new(cfg.seed);
    let draws: Vec<(Frame, Vec<Matrix2<f64>>)> = fields
        .iter()
        .map(|_| (s.frame(), (0..cfg.points).map(|_| s.gl2()).collect()))
        .collect();
    let negative = draws
        .iter()
        .flat_map(|(_, gs)| gs)
        .filter(|g| g.determinant() < 0.0)
        .count();
    let worst = fields
        .par_iter()
        .zip(&draws)
        .map(|(f, (frame, gs))| {
            let phi = xray_field(f, q)?;
            let r = gs
                .iter()
                .map(|g| weight_transform_residual(&phi, frame, g))
                .collect::<Result<Vec<_>>>()?;
            Ok(max_of(r.into_iter()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Outcome {
        checks: vec![check(cfg, "weight_law_residual", max_of(worst.into_iter()))],
        metrics: Metrics::from([
            ("fields".into(), fields.len() as f64),
            ("negative_determinants".into(), negative as f64),
        ]),
    })
}

fn verify_equivariance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = quadrature(cfg)?;
    let basis = degree_minus_2_basis(cfg.max_degree.min(2))?;
    let mut s = Sampler::new(cfg.seed);
    let frames: Vec<Frame> = (0..2 * cfg.points).map(|_| s.frame()).collect();
    let gs: Vec<Matrix4<f64>> = (0..cfg.points).map(|_| s.sl4(0.3)).collect();
    let mut worst = Vec::new();
    for g in &gs {
        for b in &basis {
            worst.push(equivariance_residual(&b.function, g, &frames, &q)?);
        }
    }
    Ok(Outcome {
        checks: vec![check(cfg, "equivariance_residual", max_of(worst.into_iter()))],
        metrics: Metrics::from([
            ("group_elements".into(), gs.len() as f64),
            ("frames".into(), frames.len() as f64),
        ]),
    })
}

fn verify_moments(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (q, fd) = (quadrature(cfg)?, fd(cfg)?);
    let mut s = Sampler::new(cfg.seed);
    let mut inputs = Vec::new();
    for n in [1u32, 2] {
        for k in (n % 2..=n + 2).step_by(2) {
            for h in harmonic_basis(k) {
                let f = HomogeneousFunction::polynomial_times_norm(&h, -(k as i32) - n as i32 - 2);
                let pts: Vec<Matrix2<f64>> = (0..cfg.points).map(|_| s.chart_point(1.0)).collect();
                inputs.push((n, f, pts));
            }
        }
    }
    let worst = inputs
        .par_iter()
        .map(|(n, f, pts)| {
            let m = MomentField::new(f, *n, q)?;
            let r = pts
                .iter()
                .map(|x| dn_residual(&m, x, &fd))
                .collect::<Result<Vec<_>>>()?;
            Ok(max_of(r.into_iter()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Outcome {
        checks: vec![check(cfg, "moment_residual", max_of(worst.into_iter()))],
        metrics: Metrics::from([("inputs".into(), inputs.len() as f64)]),
    })
}

fn space_points(s: &mut Sampler, n: usize) -> Vec<[f64; 4]> {
    (0..n).map(|_| std::array::from_fn(|_| s.uniform(-2.0, 2.0))).collect()
}

fn random_two_form(s: &mut Sampler, rank: usize) -> Curvature {
    Curvature::from_components(std::array::from_fn(|_| {
        CMat::from_fn(rank, rank, |_, _| Complex64::new(s.normal(), s.normal()))
    }))
}

fn verify_selfdual(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fd = fd(cfg)?;
    let a = presets::by_name(&cfg.connection)?;
    let mut s = Sampler::new(cfg.seed);
    let points = space_points(&mut s, cfg.points);
    let residual = selfdual_residual(&*a, &points, &fd)?;

    let mut forms: Vec<Curvature> = (0..6)
        .map(|p| {
            Curvature::from_components(std::array::from_fn(|q| {
                CMat::from_element(1, 1, Complex64::from(if p == q { 1.0 } else { 0.0 }))
            }))
        })
        .collect();
    forms.extend((0..cfg.points).map(|_| random_two_form(&mut s, a.rank())));
    let involution = max_of(
        forms
            .iter()
            .map(|f| hodge_star(&hodge_star(f)).sub(f).norm() / f.norm().max(1.0)),
    );

    Ok(Outcome {
        checks: vec![
            check(cfg, "selfdual_residual", residual),
            check(cfg, "hodge_involution", involution),
        ],
        metrics: Metrics::from([("rank".into(), a.rank() as f64)]),
    })
}

/// A unitary gauge matched to the rank of the connection.
fn test_gauge(rank: usize) -> Result<Arc<dyn Gauge>> {
    let chi = QuadraticPhase::product(0, 1);
    if rank == 2 {
        let sigma3 = presets::pauli()[2].clone();
        return Ok(Arc::new(MatrixPhase::new(chi, sigma3)?));
    }
    Ok(Arc::new(ScalarPhase { chi, rank }))
}

fn test_section(rank: usize) -> impl Fn(&[f64; 4]) -> Result<DVector<Complex64>> {
    move |y: &[f64; 4]| {
        Ok(DVector::from_fn(rank, |k, _| {
            let k = k as f64;
            Complex64::new((y[0] + k).cos() * y[2], y[1] - y[3] * y[3] + k * y[0] * y[1])
        }))
    }
}

fn covariance_residual(a: &Arc<dyn Connection>, g: &Arc<dyn Gauge>, points: &[[f64; 4]], fd: &FdSpec) -> Result<f64> {
    let t = gauge_transform(a.clone(), g.clone())?;
    let psi = test_section(a.rank());
    let g_psi = |y: &[f64; 4]| Ok(g.value(y) * psi(y)?);
    let r = points
        .iter()
        .map(|x| {
            let lhs = coupled_box(&t, &g_psi, x, fd)?;
            let rhs = g.value(x) * coupled_box(&**a, &psi, x, fd)?;
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(max_of(r.into_iter()))
}

fn verify_gauge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fd = fd(cfg)?;
    let a = presets::by_name(&cfg.connection)?;
    let g = test_gauge(a.rank())?;
    let mut s = Sampler::new(cfg.seed);
    let points = space_points(&mut s, cfg.points);
    let t = gauge_transform(a.clone(), g.clone())?;
    let r0 = selfdual_residual(&*a, &points, &fd)?;
    let r1 = selfdual_residual(&t, &points, &fd)?;
    Ok(Outcome {
        checks: vec![
            check(cfg, "gauge_invariance", (r0 - r1).abs()),
            check(cfg, "gauge_covariance", covariance_residual(&a, &g, &points, &fd)?),
        ],
        metrics: Metrics::from([
            ("selfdual_residual".into(), r0),
            ("selfdual_residual_gauged".into(), r1),
        ]),
    })
}

fn verify_coupled_box(cfg: &ExperimentConfig) -> Result<Outcome> {
    let fd = fd(cfg)?;
    let a = presets::by_name(&cfg.connection)?;
    let mut s = Sampler::new(cfg.seed);
    let points = space_points(&mut s, cfg.points);

    let real = |y: &[f64; 4]| Ok((0.3 * y[0] - 0.2 * y[3]).sin() * (1.0 + y[1] * y[2]));
    let lifted = |y: &[f64; 4]| Ok(DVector::from_element(1, Complex64::from(real(y)?)));
    let zero = presets::zero(1);
    let flat = points
        .iter()
        .map(|x| Ok((coupled_box(&zero, &lifted, x, &fd)?[0] - box_diag(&real, x, &fd)?).norm()))
        .collect::<Result<Vec<f64>>>()?;

    let mut checks = vec![check(cfg, "coupled_box_flat", max_of(flat.into_iter()))];
    if cfg.connection == "flagship-u1" {
        let one = |_: &[f64; 4]| Ok(DVector::from_element(1, Complex64::from(1.0)));
        let v = coupled_box(&*a, &one, &[1.0, 0.0, 2.0, 0.0], &fd)?;
        checks.push(check(cfg, "coupled_box_value", (v[0] - Complex64::from(3.0)).norm()));
    }
    let g = test_gauge(a.rank())?;
    checks.push(check(
        cfg,
        "gauge_covariance",
        covariance_residual(&a, &g, &points, &fd)?,
    ));
    Ok(Outcome {
        checks,
        metrics: Metrics::new(),
    })
}

const DEFAULT_A: &str = "1,0,i,0";
const DEFAULT_B: &str = "i,0,1,0";
const SAFE_FRAME_MARGIN: f64 = 0.05;
const SAFE_CHART_MARGIN: f64 = 0.2;
const MAX_TRIES: usize = 100_000;

fn worst_margin(f: &TwistorRationalFunction, frame: &Frame) -> f64 {
    pole_safety(f, frame).worst_pole(f).map_or(f64::INFINITY, |(_, m)| m)
}

/// Frames near `base` reachable along a straight path that keeps clear of
/// the poles, so the residue law compares values on one component.
fn frames_near(f: &TwistorRationalFunction, base: &Frame, n: usize, s: &mut Sampler) -> Result<Vec<Frame>> {
    let floor = 0.5 * worst_margin(f, base);
    let mut out = Vec::with_capacity(n);
    for _ in 0..MAX_TRIES {
        if out.len() == n {
            return Ok(out);
        }
        let (du, dv) = (s.gaussian4() * 0.2, s.gaussian4() * 0.2);
        let safe = (1..=8).all(|k| {
            let t = k as f64 / 8.0;
            Frame::new(base.u() + du * t, base.v() + dv * t).is_ok_and(|fr| worst_margin(f, &fr) > floor)
        });
        if safe {
            out.push(Frame::new(base.u() + du, base.v() + dv)?);
        }
    }
    Err(Error::Invalid("could not find enough pole-safe frames".into()))
}

fn penrose_elementary(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (q, fd) = (quadrature(cfg)?, fd(cfg)?);
    let margin = cfg.tolerance("pole_margin");
    let (a, b) = (parse_covector(&cfg.a)?, parse_covector(&cfg.b)?);
    let f = elementary_state(a, b)?;
    let mut s = Sampler::new(cfg.seed);
    let mut checks = Vec::new();
    let mut metrics = Metrics::new();

    let e13 = Frame::standard(0, 2)?;
    let base = if worst_margin(&f, &e13) > SAFE_FRAME_MARGIN {
        e13
    } else {
        (0..MAX_TRIES)
            .map(|_| s.frame())
            .find(|fr| worst_margin(&f, fr) > SAFE_FRAME_MARGIN)
            .ok_or_else(|| Error::Invalid("no pole-safe frame found".into()))?
    };
    if cfg.a.replace(' ', "") == DEFAULT_A && cfg.b.replace(' ', "") == DEFAULT_B {
        let v = contour_transform(&f, &base, &q, margin)?;
        checks.push(check(cfg, "elementary_value", (v - Complex64::new(0.0, -TAU)).norm()));
    }

    let products = frames_near(&f, &base, cfg.points, &mut s)?
        .iter()
        .map(|fr| Ok(contour_transform(&f, fr, &q, margin)? * wedge_pairing(&a, &b, fr)))
        .collect::<Result<Vec<Complex64>>>()?;
    let mean = products.iter().sum::<Complex64>() / products.len() as f64;
    let spread = max_of(products.iter().map(|p| (p - mean).norm())) / mean.norm();
    checks.push(check(cfg, "residue_spread", spread));
    metrics.insert("residue_constant_re".into(), mean.re);
    metrics.insert("residue_constant_im".into(), mean.im);

    let phi = contour_chart_field(&f, q, margin)?;
    let mut john = Vec::new();
    for _ in 0..MAX_TRIES {
        if john.len() == cfg.points {
            break;
        }
        let x = s.chart_point(1.0);
        if worst_margin(&f, &plane_from_chart(&x)) < SAFE_CHART_MARGIN {
            continue;
        }
        let v: Complex64 = john_operator(&*phi, &x, &fd)?;
        john.push(v.re.abs().max(v.im.abs()));
    }
    if john.len() < cfg.points {
        return Err(Error::Invalid("could not find enough pole-safe chart points".into()));
    }
    checks.push(check(cfg, "john_residual", max_of(john.into_iter())));
    Ok(Outcome { checks, metrics })
}

fn geometry_roundtrip(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut s = Sampler::new(cfg.seed);
    let n = cfg.points;
    let (mut mu, mut chart, mut quadric) = (Vec::new(), Vec::new(), Vec::new());
    let (mut scale_bad, mut conj_bad) = (0usize, 0usize);
    for _ in 0..n {
        let z = s.complex_point();
        let gp = mu_inverse(&z)?;
        mu.push(mu_restrict(&gp)?.distance(&z));

        let frame = pi_project(&z)?;
        let gp = GPoint::new(z, frame.act(&s.gl2())?)?;
        let back = mu_inverse(&mu_restrict(&gp)?)?;
        mu.push(back.line().distance(gp.line()));
        mu.push(back.plane().plucker().distance(&gp.plane().plucker()));

        let lambda = Complex64::new(s.normal(), s.normal());
        let scaled = pi_project(&z.scale(lambda)?)?;
        scale_bad += usize::from(!frame.change_of_basis_det(&scaled, 1e-10).is_some_and(|d| d > 0.0));
        let conj = pi_project(&z.conj())?;
        conj_bad += usize::from(!frame.change_of_basis_det(&conj, 1e-10).is_some_and(|d| d < 0.0));

        let x = s.chart_point(2.0);
        let back = chart_from_plane(&plane_from_chart(&x))?;
        chart.push((back - x).amax() / (1.0 + x.amax()));
        quadric.push(s.frame().plucker().relative_quadric().abs());
    }
    Ok(Outcome {
        checks: vec![
            check(cfg, "mu_round_trip", max_of(mu.into_iter())),
            check(cfg, "chart_round_trip", max_of(chart.into_iter())),
            check(cfg, "plucker_quadric", max_of(quadric.into_iter())),
            Check::at_most("pi_scaling_orientation_violations", scale_bad as f64, 0.0),
            Check::at_most("pi_conjugation_orientation_violations", conj_bad as f64, 0.0),
        ],
        metrics: Metrics::from([("samples".into(), n as f64)]),
    })
}

fn run_reconstruct(cfg: &ExperimentConfig) -> Result<Outcome> {
    let q = quadrature(cfg)?;
    let basis = degree_minus_2_basis(cfg.max_degree)?;
    if cfg.n_frames < basis.len() {
        return Err(Error::InsufficientFrames {
            required: basis.len(),
            got: cfg.n_frames,
        });
    }
    let mut d = design_matrix(&basis, &sample_frames(cfg.n_frames, cfg.seed), &q)?;
    d.seed = Some(cfg.seed);
    if let Some(path) = &cfg.design_output {
        d.save(path, &path.with_extension("json"))?;
    }
    let mut s = Sampler::new(cfg.seed.wrapping_add(1));
    let truth: Vec<f64> = (0..basis.len()).map(|_| s.normal()).collect();
    let clean = &d.matrix * DVector::from_column_slice(&truth);
    let samples = add_noise(clean.as_slice(), cfg.noise, cfg.seed.wrapping_add(2));
    let mut metrics = Metrics::from([("dimension".into(), basis.len() as f64), ("noise".into(), cfg.noise)]);
    match reconstruct(&samples, &d) {
        Ok(r) => {
            let err = r
                .coefficients
                .iter()
                .zip(&truth)
                .map(|(x, t)| (x - t).powi(2))
                .sum::<f64>()
                .sqrt()
                / truth.iter().map(|t| t * t).sum::<f64>().sqrt();
            metrics.insert("rank".into(), r.rank as f64);
            metrics.insert("condition".into(), r.condition);
            metrics.insert("residual_norm".into(), r.residual_norm);
            Ok(Outcome {
                checks: vec![check(cfg, "relative_error", err)],
                metrics,
            })
        }
        Err(Error::RankDeficient { rank, cols, .. }) => {
            metrics.insert("rank".into(), rank as f64);
            Ok(Outcome {
                checks: vec![Check::at_most("rank_deficit", (cols - rank) as f64, 0.0)],
                metrics,
            })
        }
        Err(e) => Err(e),
    }
}

fn run_injectivity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let r = injectivity_report(cfg.max_degree, cfg.n_frames, cfg.seed, &quadrature(cfg)?)?;
    let mut metrics = Metrics::from([
        ("dimension".into(), r.dimension as f64),
        ("rank".into(), r.rank as f64),
        ("condition".into(), r.condition),
    ]);
    for (k, v) in &r.per_degree_min_singular_value {
        metrics.insert(format!("min_singular_value_degree_{k}"), *v);
    }
    Ok(Outcome {
        checks: vec![Check::at_most("rank_deficit", (r.dimension - r.rank) as f64, 0.0)],
        metrics,
    })
}

pub fn export_basis<W: std::io::Write>(cfg: &ExperimentConfig, out: W) -> Result<()> {
    write_basis_csv(cfg.max_degree, out)
}
