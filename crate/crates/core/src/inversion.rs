//! Finite-basis injectivity and least-squares reconstruction for the X-ray
//! transform.
//!
//! A design matrix holds the transforms of basis functions sampled on a list
//! of frames. Full column rank witnesses injectivity on the span; solving the
//! least-squares problem recovers coefficients from transform samples.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{basis_dimension, basis_function_by_id, degree_minus_2_basis, BasisFunction};
use crate::geometry::Frame;
use crate::quadrature::QuadratureSpec;
use crate::sampling::Sampler;
use crate::xray::xray_transform;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub frames: Vec<Frame>,
    pub basis_ids: Vec<String>,
    pub quadrature: QuadratureSpec,
    pub seed: Option<u64>,
}

/// Seeded frames, orthonormalized Gaussian pairs.
pub fn sample_frames(n: usize, seed: u64) -> Vec<Frame> {
    let mut s = Sampler::new(seed);
    (0..n).map(|_| s.frame()).collect()
}

pub fn design_matrix(basis: &[BasisFunction], frames: &[Frame], q: &QuadratureSpec) -> Result<DesignMatrix> {
    for b in basis {
        b.function.require_degree(-2)?;
    }
    let rows: Vec<Vec<f64>> = frames
        .par_iter()
        .map(|frame| basis.iter().map(|b| xray_transform(&b.function, frame, q)).collect())
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(frames.len(), basis.len(), |i, j| rows[i][j]);
    Ok(DesignMatrix {
        matrix,
        frames: frames.to_vec(),
        basis_ids: basis.iter().map(|b| b.id.clone()).collect(),
        quadrature: *q,
        seed: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub coefficients: Vec<f64>,
    pub relative_error: Option<f64>,
    pub residual_norm: f64,
    pub rank: usize,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy)]
struct Spectrum {
    rank: usize,
    condition: f64,
}

fn spectrum(m: &DMatrix<f64>) -> (Spectrum, nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) {
    let svd = m.clone().svd(false, true);
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<f64> = sv.iter().cloned().filter(|s| *s > RANK_THRESHOLD * max).collect();
    let min = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if kept.is_empty() { f64::INFINITY } else { max / min };
    (
        Spectrum {
            rank: kept.len(),
            condition,
        },
        svd,
    )
}

/// Least-squares coefficients by Householder QR after a rank check.
pub fn reconstruct(samples: &[f64], d: &DesignMatrix) -> Result<ReconstructionReport> {
    let (rows, cols) = d.matrix.shape();
    if samples.len() != rows {
        return Err(Error::Dimension(format!("{} samples for {rows} frames", samples.len())));
    }
    if rows < cols {
        return Err(Error::InsufficientFrames {
            required: cols,
            got: rows,
        });
    }
    let (spec, svd) = spectrum(&d.matrix);
    if spec.rank < cols {
        let v_t = svd.v_t.expect("requested V");
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        return Err(Error::RankDeficient {
            rank: spec.rank,
            cols,
            null_combination: v_t.row(k).iter().cloned().collect(),
        });
    }
    let b = DVector::from_column_slice(samples);
    let qr = d.matrix.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let c = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    let residual_norm = (&d.matrix * &c - b).norm();
    Ok(ReconstructionReport {
        coefficients: c.iter().cloned().collect(),
        relative_error: None,
        residual_norm,
        rank: spec.rank,
        condition: spec.condition,
    })
}

/// Reconstruction with the relative coefficient error against `truth`.
pub fn reconstruct_known(truth: &[f64], d: &DesignMatrix) -> Result<ReconstructionReport> {
    let c = DVector::from_column_slice(truth);
    if c.len() != d.matrix.ncols() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} columns",
            c.len(),
            d.matrix.ncols()
        )));
    }
    let samples = &d.matrix * &c;
    let mut report = reconstruct(samples.as_slice(), d)?;
    let err = (DVector::from_vec(report.coefficients.clone()) - &c).norm();
    report.relative_error = Some(err / c.norm().max(f64::MIN_POSITIVE));
    Ok(report)
}

/// Minimum-norm least-squares solution via the SVD, as an independent route.
pub fn reference_solve(samples: &[f64], d: &DesignMatrix) -> Result<Vec<f64>> {
    let b = DVector::from_column_slice(samples);
    let svd = d.matrix.clone().svd(true, true);
    let max = svd.singular_values.max();
    let c = svd
        .solve(&b, RANK_THRESHOLD * max)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(c.iter().cloned().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectivityReport {
    pub dimension: usize,
    pub rank: usize,
    pub full_rank: bool,
    pub condition: f64,
    /// Smallest singular value of the columns of each harmonic degree.
    pub per_degree_min_singular_value: BTreeMap<u32, f64>,
}

pub fn injectivity_report(
    max_degree: u32,
    n_frames: usize,
    seed: u64,
    q: &QuadratureSpec,
) -> Result<InjectivityReport> {
    if max_degree % 2 == 1 {
        return Err(Error::Invalid(format!("max_degree must be even, got {max_degree}")));
    }
    let dimension = basis_dimension(max_degree);
    if n_frames < dimension {
        return Err(Error::InsufficientFrames {
            required: dimension,
            got: n_frames,
        });
    }
    let basis = degree_minus_2_basis(max_degree)?;
    let d = design_matrix(&basis, &sample_frames(n_frames, seed), q)?;
    let (spec, _) = spectrum(&d.matrix);
    let mut per_degree = BTreeMap::new();
    let mut start = 0;
    for k in (0..=max_degree).step_by(2) {
        let width = ((k + 1) * (k + 1)) as usize;
        let block = d.matrix.columns(start, width).into_owned();
        per_degree.insert(k, block.singular_values().min());
        start += width;
    }
    Ok(InjectivityReport {
        dimension,
        rank: spec.rank,
        full_rank: spec.rank == dimension,
        condition: spec.condition,
        per_degree_min_singular_value: per_degree,
    })
}

/// Adds seeded Gaussian noise of standard deviation `sigma`.
pub fn add_noise(samples: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut s = Sampler::new(seed);
    samples.iter().map(|v| v + sigma * s.normal()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct FrameRecord {
    u: [f64; 4],
    v: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Sidecar {
    frames: Vec<FrameRecord>,
    basis_ids: Vec<String>,
    quadrature_nodes: usize,
    seed: Option<u64>,
}

impl DesignMatrix {
    /// One row per frame, one column per basis id (header row of ids).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.basis_ids)?;
        for row in self.matrix.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, out: W) -> Result<()> {
        let sidecar = Sidecar {
            frames: self
                .frames
                .iter()
                .map(|f| FrameRecord {
                    u: (*f.u()).into(),
                    v: (*f.v()).into(),
                })
                .collect(),
            basis_ids: self.basis_ids.clone(),
            quadrature_nodes: self.quadrature.n_nodes(),
            seed: self.seed,
        };
        serde_json::to_writer_pretty(out, &sidecar)?;
        Ok(())
    }

    pub fn read<R1: Read, R2: Read>(csv_in: R1, sidecar_in: R2) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_reader(sidecar_in)?;
        let mut rdr = csv::Reader::from_reader(csv_in);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != sidecar.basis_ids {
            return Err(Error::Invalid("CSV header does not match sidecar basis ids".into()));
        }
        let mut values = Vec::new();
        let mut n_rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for field in rec.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Invalid(format!("bad matrix entry {field:?}: {e}")))?,
                );
            }
            n_rows += 1;
        }
        let cols = header.len();
        if n_rows != sidecar.frames.len() || values.len() != n_rows * cols {
            return Err(Error::Dimension("matrix shape does not match sidecar".into()));
        }
        let frames = sidecar
            .frames
            .iter()
            .map(|f| Frame::from_arrays(f.u, f.v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            matrix: DMatrix::from_row_slice(n_rows, cols, &values),
            frames,
            basis_ids: sidecar.basis_ids,
            quadrature: QuadratureSpec::new(sidecar.quadrature_nodes)?,
            seed: sidecar.seed,
        })
    }

    pub fn save(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        self.write_sidecar(std::fs::File::create(sidecar_path)?)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(csv_path)?, std::fs::File::open(sidecar_path)?)
    }

    /// Recomputes every entry from the stored frames and basis ids.
    pub fn recompute(&self) -> Result<DesignMatrix> {
        let basis = self
            .basis_ids
            .iter()
            .map(|id| {
                Ok(BasisFunction {
                    id: id.clone(),
                    function: basis_function_by_id(id)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut d = design_matrix(&basis, &self.frames, &self.quadrature)?;
        d.seed = self.seed;
        Ok(d)
    }
}
