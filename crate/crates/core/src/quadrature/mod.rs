//! Shell-restricted double surface integrals over triangle pairs.
//!
//! The outer integral runs over a (possibly subdivided) symmetric triangle
//! rule; the inner integral over the second triangle, restricted to the
//! shell `r_lo <= |x - y| <= r_hi`, is done in polar coordinates around the
//! outer point (see [`polar`]). The polar inner integral absorbs the
//! `1/|x - y|` singularity, so coincident and adjacent pairs need no special
//! treatment beyond a finer outer rule.

pub mod polar;
pub mod rules;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reflect, Point3, Triangle};

pub use polar::{point_triangle_distance, triangle_distance, triangle_max_distance, PolarFrame};
pub use rules::{gauss_legendre, TriangleRule, UnitGauss};

/// Distance shell `r_lo <= |x - y| <= r_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub r_lo: f64,
    pub r_hi: f64,
}

impl ShellSpec {
    pub fn new(r_lo: f64, r_hi: f64) -> Result<Self> {
        if !(r_lo >= 0.0 && r_hi > r_lo) {
            return Err(Error::InvalidParameter(format!(
                "shell needs 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]"
            )));
        }
        Ok(ShellSpec { r_lo, r_hi })
    }

    /// Shell containing every pair of points.
    pub fn everything() -> Self {
        ShellSpec {
            r_lo: 0.0,
            r_hi: f64::INFINITY,
        }
    }

    /// Light-cone shell `E_l = [l dt, (l + 1) dt]`.
    pub fn light_cone(l: usize, dt: f64) -> Self {
        ShellSpec {
            r_lo: l as f64 * dt,
            r_hi: (l + 1) as f64 * dt,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi
    }
}

/// Integral kernels supported by [`shell_pair_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelId {
    /// `1 / |x - y|`
    InvDistance,
    /// `(n_x . n_y) / |x - y|`
    NormalDotInvDistance,
    /// `(grad a . grad b) / |x - y|`; bases must be hats.
    GradGradInvDistance,
    /// `n_x . (y - x) / (2 pi |x - y|^3)` plus the same for the mirror image
    /// of `y` in the ground plane `z = 0`. The shell applies to the
    /// respective distance.
    HalfSpaceAdjointDL,
}

/// Local basis function on one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisFn {
    Constant,
    /// Barycentric coordinate of local vertex `k`.
    Hat(usize),
}

impl BasisFn {
    fn value(&self, tri: &Triangle, x: &Point3) -> f64 {
        match self {
            BasisFn::Constant => 1.0,
            BasisFn::Hat(k) => tri.barycentric(x)[*k],
        }
    }

    fn gradient(&self, tri: &Triangle) -> Option<Point3> {
        match self {
            BasisFn::Constant => None,
            BasisFn::Hat(k) => Some(tri.basis_gradients()[*k]),
        }
    }
}

/// Quadrature settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureRule {
    /// Outer subdivision depth for well separated pairs.
    pub subdivision_depth: usize,
    /// Outer subdivision depth for pairs closer than their size.
    pub near_depth: usize,
    /// Gauss order per chunk of the inner angular integrals.
    pub angular_order: usize,
    /// Gauss order per chunk of the inner radial integrals.
    pub radial_order: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            subdivision_depth: 0,
            near_depth: 2,
            angular_order: 4,
            radial_order: 4,
        }
    }
}

impl QuadratureRule {
    /// Outer depth 3, and 5 for near pairs. Slow; resolves the kinks that a
    /// single narrow shell puts into the outer integrand.
    pub fn reference() -> Self {
        QuadratureRule {
            subdivision_depth: 3,
            near_depth: 5,
            ..QuadratureRule::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angular_order == 0 || self.radial_order == 0 {
            return Err(Error::InvalidParameter("quadrature orders must be positive".into()));
        }
        if self.subdivision_depth > 6 || self.near_depth > 6 {
            return Err(Error::InvalidParameter("subdivision depth above 6".into()));
        }
        Ok(())
    }

    /// Outer subdivision depth for the pair `(ta, tb)`.
    pub fn depth_for(&self, ta: &Triangle, tb: &Triangle, dist: f64) -> usize {
        let size = ta.diameter().max(tb.diameter());
        if dist < size {
            self.near_depth.max(self.subdivision_depth)
        } else {
            self.subdivision_depth
        }
    }

    /// Outer quadrature points on `ta` for its interaction with `tb`.
    pub fn outer_points(&self, ta: &Triangle, tb: &Triangle, dist: f64) -> Vec<(Point3, f64)> {
        TriangleRule::seven_point().on_triangle(ta, self.depth_for(ta, tb, dist))
    }
}

/// Double integral of `kernel * a(x) * b(y)` over `{(x, y) in Ta x Tb : shell}`.
pub fn shell_pair_integral(
    ta: &Triangle,
    tb: &Triangle,
    shell: &ShellSpec,
    kernel: KernelId,
    basis_a: BasisFn,
    basis_b: BasisFn,
    rule: &QuadratureRule,
) -> f64 {
    let ang = UnitGauss::new(rule.angular_order);
    let rad = UnitGauss::new(rule.radial_order);
    match kernel {
        KernelId::HalfSpaceAdjointDL => {
            let image = tb.reflected();
            let direct = adjoint_dl_part(ta, tb, shell, basis_a, basis_b, rule, &ang, &rad, false);
            let mirrored = adjoint_dl_part(ta, &image, shell, basis_a, basis_b, rule, &ang, &rad, true);
            direct + mirrored
        }
        _ => {
            let dist = triangle_distance(ta, tb);
            if dist > shell.r_hi || triangle_max_distance(ta, tb) < shell.r_lo {
                return 0.0;
            }
            let factor = match kernel {
                KernelId::NormalDotInvDistance => ta.normal.dot(&tb.normal),
                KernelId::GradGradInvDistance => match (basis_a.gradient(ta), basis_b.gradient(tb)) {
                    (Some(ga), Some(gb)) => ga.dot(&gb),
                    _ => 0.0,
                },
                _ => 1.0,
            };
            if factor == 0.0 {
                return 0.0;
            }
            let use_values = kernel != KernelId::GradGradInvDistance;
            let mut total = 0.0;
            for (x, wx) in rule.outer_points(ta, tb, dist) {
                let ax = if use_values { basis_a.value(ta, &x) } else { 1.0 };
                if ax == 0.0 {
                    continue;
                }
                let frame = PolarFrame::new(&x, tb);
                let mut inner = 0.0;
                frame.visit_shell(shell.r_lo, shell.r_hi, &ang, &rad, |y, r, w| {
                    let by = if use_values { basis_b.value(tb, y) } else { 1.0 };
                    inner += w * by / r;
                });
                total += wx * ax * inner;
            }
            factor * total
        }
    }
}

/// `tb_eff` is either the source triangle or its mirror image; basis values
/// are always taken on the unreflected triangle.
#[allow(clippy::too_many_arguments)]
fn adjoint_dl_part(
    ta: &Triangle,
    tb_eff: &Triangle,
    shell: &ShellSpec,
    basis_a: BasisFn,
    basis_b: BasisFn,
    rule: &QuadratureRule,
    ang: &UnitGauss,
    rad: &UnitGauss,
    mirrored: bool,
) -> f64 {
    let dist = triangle_distance(ta, tb_eff);
    if dist > shell.r_hi || triangle_max_distance(ta, tb_eff) < shell.r_lo {
        return 0.0;
    }
    let tb_orig = if mirrored { tb_eff.reflected() } else { *tb_eff };
    let mut total = 0.0;
    for (x, wx) in rule.outer_points(ta, tb_eff, dist) {
        let ax = basis_a.value(ta, &x);
        let frame = PolarFrame::new(&x, tb_eff);
        let mut inner = 0.0;
        frame.visit_shell(shell.r_lo, shell.r_hi, ang, rad, |y, r, w| {
            let y_src = if mirrored { reflect(y) } else { *y };
            let by = basis_b.value(&tb_orig, &y_src);
            inner += w * by * ta.normal.dot(&(y - x)) / (r * r * r);
        });
        total += wx * ax * inner;
    }
    total / (2.0 * std::f64::consts::PI)
}

/// `|sum_l I(E_l) - I(everything)|` for a list of shells.
pub fn shell_partition_check(
    ta: &Triangle,
    tb: &Triangle,
    shells: &[ShellSpec],
    kernel: KernelId,
    rule: &QuadratureRule,
) -> f64 {
    let parts: f64 = shells
        .iter()
        .map(|s| shell_pair_integral(ta, tb, s, kernel, BasisFn::Constant, BasisFn::Constant, rule))
        .sum();
    let full = shell_pair_integral(
        ta,
        tb,
        &ShellSpec::everything(),
        kernel,
        BasisFn::Constant,
        BasisFn::Constant,
        rule,
    );
    (parts - full).abs()
}

/// Length of `{y in T : |y - center| = radius}`.
pub fn arc_length_in_triangle(tri: &Triangle, center: &Point3, radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let frame = PolarFrame::new(center, tri);
    let sigma = frame.in_plane_radius(radius);
    if sigma <= 0.0 {
        return 0.0;
    }
    (sigma * frame.arc_angle(sigma)).max(0.0)
}
