//! Right-hand sides tested against the spatial basis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::OperatorId;
use crate::error::{Error, Result};
use crate::geometry::{reflect, Mesh, Point3};
use crate::quadrature::{PolarFrame, QuadratureRule, TriangleRule, UnitGauss};
use crate::timegrid::TimeGrid;

/// Boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RhsId {
    /// `f(t, x) = cos(|k| t - k.x) exp(-1 / (10 t^2))`.
    PlaneWavePacket { k: [f64; 3] },
    /// Spatially constant ring-down profile for the hypersingular equation.
    RingdownG,
    /// Same profile as the right-hand side of the Dirichlet-to-Neumann equation.
    RingdownH,
    /// Dirac pulse emitted at `t = 0` from `y_src` above a rigid ground plane.
    PointSourceDirac { y_src: [f64; 3] },
    Zero,
}

/// How stored values become the right-hand side of step `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadCombination {
    /// `b^n = f^{n-1} - f^n` (time-differentiated test functions).
    PointDifference,
    /// `b^n = f^n`, values already integrated over `(t_{n-1}, t_n]`.
    Direct,
}

/// Load vectors `f^n`, `n = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsTimeSeries {
    pub rhs: RhsId,
    pub combination: LoadCombination,
    pub values: Vec<Vec<f64>>,
}

impl RhsTimeSeries {
    pub fn n_steps(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn size(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Right-hand side of step `n >= 1`.
    pub fn system_rhs(&self, n: usize) -> Vec<f64> {
        match self.combination {
            LoadCombination::Direct => self.values[n].clone(),
            LoadCombination::PointDifference => self.values[n - 1]
                .iter()
                .zip(&self.values[n])
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Copy with the right-hand side of step `n` perturbed by `delta` in
    /// component `i` and every other step unchanged.
    pub fn perturbed(&self, n: usize, i: usize, delta: f64) -> Self {
        let mut out = self.clone();
        match self.combination {
            LoadCombination::Direct => out.values[n][i] += delta,
            LoadCombination::PointDifference => {
                // shifting all later values keeps b^m for m != n
                for v in out.values.iter_mut().skip(n) {
                    v[i] -= delta;
                }
            }
        }
        out
    }
}

/// Plane wave packet `cos(|k| t - k.x) exp(-1 / (10 t^2))`, zero for `t <= 0`.
pub fn plane_wave_packet(k: &[f64; 3], t: f64, x: &Point3) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let kv = Point3::new(k[0], k[1], k[2]);
    (kv.norm() * t - kv.dot(x)).cos() * (-1.0 / (10.0 * t * t)).exp()
}

/// Ring-down profile supported on `[0, 4]`.
pub fn ringdown(t: f64) -> f64 {
    if !(0.0..=4.0).contains(&t) {
        return 0.0;
    }
    let s = 4.0 - t;
    let h = PI / 2.0;
    -0.75 + (h * s).cos() + h * (h * s).sin() - 0.25 * ((PI * s).cos() + PI * (PI * s).sin())
}

/// `int_a^b ringdown`, split at the kink `t = 4`.
fn ringdown_integral(a: f64, b: f64) -> f64 {
    let gauss = UnitGauss::new(8);
    let lo = a.max(0.0);
    let hi = b.min(4.0);
    if hi <= lo {
        return 0.0;
    }
    gauss.integrate(lo, hi, 1, ringdown)
}

/// Assemble the load vectors for `operator` on `mesh`.
pub fn assemble_rhs(
    mesh: &Mesh,
    grid: &TimeGrid,
    operator: OperatorId,
    rhs: &RhsId,
    rule: &QuadratureRule,
) -> Result<RhsTimeSeries> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    rule.validate()?;
    let nt = mesh.num_triangles();
    let steps = grid.n_steps;
    let size = match operator {
        OperatorId::SingleLayer | OperatorId::HornAdjointDL => nt,
        OperatorId::Hypersingular => mesh.interior_nodes().len(),
        OperatorId::DtN => mesh.interior_nodes().len() + mesh.num_nodes(),
    };
    let zero = || RhsTimeSeries {
        rhs: *rhs,
        combination: LoadCombination::Direct,
        values: vec![vec![0.0; size]; steps + 1],
    };
    let mismatch = || {
        Error::InvalidParameter(format!(
            "right-hand side {rhs:?} does not apply to operator {}",
            operator.name()
        ))
    };
    match (rhs, operator) {
        (RhsId::Zero, _) => Ok(zero()),
        (RhsId::PlaneWavePacket { k }, OperatorId::SingleLayer) => {
            let pts: Vec<Vec<(Point3, f64)>> = mesh
                .triangles_geom()
                .iter()
                .map(|t| TriangleRule::seven_point().on_triangle(t, 1))
                .collect();
            let values = (0..=steps)
                .map(|n| {
                    let t = grid.t(n);
                    pts.iter()
                        .map(|p| p.iter().map(|(x, w)| w * plane_wave_packet(k, t, x)).sum())
                        .collect()
                })
                .collect();
            Ok(RhsTimeSeries {
                rhs: *rhs,
                combination: LoadCombination::PointDifference,
                values,
            })
        }
        (RhsId::RingdownG, OperatorId::Hypersingular) | (RhsId::RingdownH, OperatorId::DtN) => {
            let interior = mesh.interior_nodes();
            let mut hat_integral = vec![0.0; mesh.num_nodes()];
            for (i, tri) in mesh.triangles.iter().enumerate() {
                let a = mesh.triangle(i).area / 3.0;
                for &v in tri {
                    hat_integral[v] += a;
                }
            }
            let mut out = zero();
            for n in 1..=steps {
                let g = ringdown_integral(grid.t(n - 1), grid.t(n));
                for (k, &node) in interior.iter().enumerate() {
                    out.values[n][k] = g * hat_integral[node];
                }
            }
            Ok(out)
        }
        (RhsId::PointSourceDirac { y_src }, OperatorId::HornAdjointDL) => {
            let src = Point3::new(y_src[0], y_src[1], y_src[2]);
            let image = reflect(&src);
            let tris = mesh.triangles_geom();
            let ang = UnitGauss::new(rule.angular_order);
            let rad = UnitGauss::new(rule.radial_order);
            let mut out = zero();
            for (i, tri) in tris.iter().enumerate() {
                for y in [src, image] {
                    let frame = PolarFrame::new(&y, tri);
                    // n.(x - y) is constant on the plane of the triangle
                    let ndist = -frame.h_signed;
                    if ndist == 0.0 {
                        continue;
                    }
                    let theta_over_t = |t: f64| {
                        if t <= frame.dist_min {
                            0.0
                        } else {
                            frame.arc_angle(frame.in_plane_radius(t)) / t
                        }
                    };
                    let n_lo = (frame.dist_min / grid.dt).floor() as usize;
                    let n_hi = ((frame.dist_max / grid.dt).floor() as usize + 1).min(steps);
                    let mut prev = theta_over_t(grid.t(n_lo.max(1) - 1));
                    for n in n_lo.max(1)..=n_hi {
                        let (a, b) = (grid.t(n - 1), grid.t(n));
                        let mut vol = 0.0;
                        frame.visit_shell(a, b, &ang, &rad, |_, r, w| {
                            vol += w / (r * r * r);
                        });
                        let cur = theta_over_t(b);
                        out.values[n][i] += ndist * (vol + cur - prev) / (2.0 * PI);
                        prev = cur;
                    }
                }
            }
            Ok(out)
        }
        _ => Err(mismatch()),
    }
}
