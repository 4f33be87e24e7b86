//! Retarded potentials at points off the screen.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::OperatorId;
use crate::error::{Error, Result};
use crate::geometry::{reflect, Mesh, Point3, Triangle};
use crate::mot::DensityHistory;
use crate::quadrature::{point_triangle_distance, PolarFrame, UnitGauss};
use crate::timegrid::TemporalBasis;

/// Sampled field values, `values[point][time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProbe {
    pub points: Vec<[f64; 3]>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FieldProbe {
    /// CSV rows `point_id,t,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["point_id", "t", "value"])?;
        for (p, vals) in self.values.iter().enumerate() {
            for (t, v) in self.times.iter().zip(vals) {
                wr.serialize((p, t, v))?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn series(&self, point: usize) -> &[f64] {
        &self.values[point]
    }
}

/// Angular quadrature order of the exact-in-radius evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub angular_order: usize,
    /// Points closer than this to the screen are rejected.
    pub min_distance: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { angular_order: 8, min_distance: 1e-10 }
    }
}

/// Retarded integral of one piecewise constant density history.
///
/// For a triangle seen from `x`, `C(r) = int_{T, |x-y| <= r} 1/|x-y|` is
/// evaluated exactly in the radial variable, and the potential at time `t`
/// is `sum_j C(t - t_j) (c^{j+1} - c^j)` by summation by parts.
struct Evaluator<'a> {
    tris: Vec<Triangle>,
    density: &'a DensityHistory,
    gauss: UnitGauss,
}

impl<'a> Evaluator<'a> {
    fn new(mesh: &Mesh, density: &'a DensityHistory, opts: &EvalOptions) -> Result<Self> {
        if density.header.basis != TemporalBasis::PiecewiseConstant {
            return Err(Error::InvalidParameter(
                "field evaluation needs a piecewise constant density in time".into(),
            ));
        }
        if density.header.size != mesh.num_triangles() {
            return Err(Error::DimensionMismatch(format!(
                "density has {} dofs, mesh has {} triangles",
                density.header.size,
                mesh.num_triangles()
            )));
        }
        if opts.angular_order == 0 {
            return Err(Error::InvalidParameter("angular order must be positive".into()));
        }
        Ok(Evaluator {
            tris: mesh.triangles_geom(),
            density,
            gauss: UnitGauss::new(opts.angular_order),
        })
    }

    fn check_points(&self, points: &[Point3], min_distance: f64) -> Result<()> {
        for (i, p) in points.iter().enumerate() {
            if self.tris.iter().any(|t| point_triangle_distance(p, t) <= min_distance) {
                return Err(Error::PointOnSurface(i));
            }
        }
        Ok(())
    }

    /// `int_Gamma c(t - |x - y|, y) / |x - y| dy` (without `1 / 4 pi`).
    fn retarded(&self, x: &Point3, times: &[f64]) -> Vec<f64> {
        let dt = self.density.dt();
        let ns = self.density.n_steps();
        let coeff = |j: usize, i: usize| -> f64 {
            if j >= 1 && j <= ns {
                self.density.coefficients[j - 1][i]
            } else {
                0.0
            }
        };
        let mut out = vec![0.0; times.len()];
        for (i, tri) in self.tris.iter().enumerate() {
            let frame = PolarFrame::new(x, tri);
            let total = frame.cumulative_inv_distance(frame.dist_max, &self.gauss);
            for (o, &t) in out.iter_mut().zip(times) {
                if t <= frame.dist_min {
                    continue;
                }
                // j with t - t_j in (dist_min, dist_max) need C; earlier ones see all of T
                let j_lo = ((t - frame.dist_max) / dt).ceil().max(0.0) as usize;
                let j_hi = ((t - frame.dist_min) / dt).ceil().max(0.0) as usize;
                let mut acc = total * coeff(j_lo, i);
                for j in j_lo..j_hi {
                    let r = t - j as f64 * dt;
                    if r <= frame.dist_min {
                        break;
                    }
                    let c = if r >= frame.dist_max {
                        total
                    } else {
                        frame.cumulative_inv_distance(r, &self.gauss)
                    };
                    acc += c * (coeff(j + 1, i) - coeff(j, i));
                }
                *o += acc;
            }
        }
        out
    }
}

fn to_points(points: &[[f64; 3]]) -> Vec<Point3> {
    points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
}

/// `u(t, x) = 1/(4 pi) int psi(t - |x - y|, y) / |x - y| dy`.
pub fn evaluate_single_layer(
    psi: &DensityHistory,
    mesh: &Mesh,
    points: &[[f64; 3]],
    times: &[f64],
    opts: &EvalOptions,
) -> Result<FieldProbe> {
    if psi.header.operator != OperatorId::SingleLayer {
        return Err(Error::InvalidParameter(format!(
            "single layer evaluation needs a single layer density, got {}",
            psi.header.operator.name()
        )));
    }
    let ev = Evaluator::new(mesh, psi, opts)?;
    let pts = to_points(points);
    ev.check_points(&pts, opts.min_distance)?;
    let values = pts
        .par_iter()
        .map(|x| ev.retarded(x, times).into_iter().map(|v| v / (4.0 * PI)).collect())
        .collect();
    Ok(FieldProbe { points: points.to_vec(), times: times.to_vec(), values })
}

/// Half-space pressure: direct term plus the term of the mirrored source
/// points, `|x - y'| = |x' - y|`.
pub fn evaluate_halfspace_pressure(
    phi: &DensityHistory,
    mesh: &Mesh,
    points: &[[f64; 3]],
    times: &[f64],
    opts: &EvalOptions,
) -> Result<FieldProbe> {
    let ev = Evaluator::new(mesh, phi, opts)?;
    let pts = to_points(points);
    ev.check_points(&pts, opts.min_distance)?;
    let values = pts
        .par_iter()
        .map(|x| {
            let direct = ev.retarded(x, times);
            let image = ev.retarded(&reflect(x), times);
            direct
                .iter()
                .zip(&image)
                .map(|(a, b)| (a + b) / (4.0 * PI))
                .collect()
        })
        .collect();
    Ok(FieldProbe { points: points.to_vec(), times: times.to_vec(), values })
}

/// Fourier transform `e^{-i w r}/(4 pi r) + e^{-i w r'}/(4 pi r')` of the
/// incident Dirac pulse and its ground reflection, `out[point][freq]`.
pub fn incident_point_source(y_src: &[f64; 3], points: &[[f64; 3]], omegas: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let y = Point3::new(y_src[0], y_src[1], y_src[2]);
    let yi = reflect(&y);
    to_points(points)
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let r = (x - y).norm();
            let ri = (x - yi).norm();
            if r == 0.0 || ri == 0.0 {
                return Err(Error::PointOnSurface(i));
            }
            Ok(omegas
                .iter()
                .map(|w| {
                    Complex64::from_polar(1.0 / (4.0 * PI * r), -w * r)
                        + Complex64::from_polar(1.0 / (4.0 * PI * ri), -w * ri)
                })
                .collect())
        })
        .collect()
}
