//! Polar decomposition of a triangle around an observation point.
//!
//! The triangle is written as a signed sum of three wedges `(p, a, b)`,
//! one per edge, where `p` is the projection of the observation point onto
//! the triangle's plane. Inside a wedge the radial limit is `d / cos(u)`
//! with `u` the angle from the foot of the perpendicular to the edge. The
//! substitution `u = gd(v)` (so `d / cos(u) = d cosh(v)`) removes the
//! steepness of that limit when `p` is close to the edge line.
//!
//! Restricting to a shell `r_lo <= |x - y| <= r_hi` turns into an in-plane
//! annulus whose boundary circles cut each wedge at explicitly known angles,
//! so no indicator sampling is involved.

use crate::geometry::{Point3, Triangle};

use super::rules::UnitGauss;

/// Width of one Gauss chunk in the hyperbolic angle variable.
const V_CHUNK: f64 = 0.5;
/// Width of one Gauss chunk in the plain angle variable.
const U_CHUNK: f64 = 0.4;
/// Width of one Gauss chunk in the sinh-radial variable.
const W_CHUNK: f64 = 0.75;

/// One half-wedge: the part of a wedge on one side of the perpendicular foot.
#[derive(Debug, Clone, Copy)]
struct HalfWedge {
    /// Orientation of the wedge relative to the triangle normal.
    sign: f64,
    /// Distance from `p` to the edge line.
    d: f64,
    /// Unit vector from `p` toward the foot of the perpendicular.
    m: Point3,
    /// In-plane unit vector along the edge in the direction of increasing angle.
    t: Point3,
    /// Tangential coordinates along the edge, `0 <= sa < sb`.
    sa: f64,
    sb: f64,
}

impl HalfWedge {
    #[inline]
    fn rho_at(&self, s: f64) -> f64 {
        self.d.hypot(s)
    }

    /// Tangential coordinate where the wedge's radial limit equals `sigma`.
    #[inline]
    fn s_at(&self, sigma: f64) -> f64 {
        if sigma <= self.d {
            0.0
        } else {
            ((sigma - self.d) * (sigma + self.d)).sqrt()
        }
    }

    #[inline]
    fn dir(&self, cos_u: f64, sin_u: f64) -> Point3 {
        self.m * cos_u + self.t * sin_u
    }
}

/// Triangle seen from an observation point.
#[derive(Debug, Clone)]
pub struct PolarFrame {
    /// Projection of the observation point onto the triangle plane.
    pub p: Point3,
    /// Distance from the observation point to the plane.
    pub h: f64,
    /// Signed height along the triangle normal.
    pub h_signed: f64,
    /// Exact distance from the observation point to the triangle.
    pub dist_min: f64,
    /// Largest distance to a vertex.
    pub dist_max: f64,
    halves: [Option<HalfWedge>; 6],
}

/// Relative tolerance below which a wedge counts as degenerate.
const DEGENERATE: f64 = 1e-13;

impl PolarFrame {
    pub fn new(x: &Point3, tri: &Triangle) -> Self {
        let n = tri.normal;
        let h_signed = n.dot(&(x - tri.v[0]));
        let p = x - n * h_signed;
        let h = h_signed.abs();
        let mut halves = [None; 6];
        let mut k = 0;
        let mut inside = true;
        let mut edge_dist = f64::INFINITY;
        for e in 0..3 {
            let a = tri.v[e];
            let b = tri.v[(e + 1) % 3];
            let ab = b - a;
            let len = ab.norm();
            let tau = ab / len;
            let pa = a - p;
            let orient = n.dot(&pa.cross(&(b - p)));
            if orient < 0.0 {
                inside = false;
            }
            // point-segment distance in the plane, used for dist_min
            let s_proj = (-pa.dot(&tau)).clamp(0.0, len);
            edge_dist = edge_dist.min((a + tau * s_proj - p).norm());

            let foot = a + tau * (-pa.dot(&tau));
            let mvec = foot - p;
            let d = mvec.norm();
            if d <= DEGENERATE * len {
                continue;
            }
            let m = mvec / d;
            // angle increases counterclockwise about n
            let t = n.cross(&m);
            let sa = (a - p).dot(&t);
            let sb = (b - p).dot(&t);
            let (s0, s1) = if sa <= sb { (sa, sb) } else { (sb, sa) };
            let sign = orient.signum();
            // (p, a, b) swept from a to b; the signed area covers [s0, s1]
            if s0 < 0.0 && s1 > 0.0 {
                halves[k] = Some(HalfWedge { sign, d, m, t: -t, sa: 0.0, sb: -s0 });
                halves[k + 1] = Some(HalfWedge { sign, d, m, t, sa: 0.0, sb: s1 });
                k += 2;
            } else if s0 >= 0.0 {
                halves[k] = Some(HalfWedge { sign, d, m, t, sa: s0, sb: s1 });
                k += 1;
            } else {
                halves[k] = Some(HalfWedge { sign, d, m, t: -t, sa: -s1, sb: -s0 });
                k += 1;
            }
        }
        let in_plane = if inside { 0.0 } else { edge_dist };
        let dist_min = in_plane.hypot(h);
        let dist_max = tri
            .v
            .iter()
            .map(|v| (v - x).norm())
            .fold(0.0, f64::max);
        PolarFrame {
            p,
            h,
            h_signed,
            dist_min,
            dist_max,
            halves,
        }
    }

    fn halves(&self) -> impl Iterator<Item = &HalfWedge> {
        self.halves.iter().flatten()
    }

    /// In-plane radius of the sphere of radius `r` about the observation point.
    #[inline]
    pub fn in_plane_radius(&self, r: f64) -> f64 {
        if r <= self.h {
            0.0
        } else {
            ((r - self.h) * (r + self.h)).sqrt()
        }
    }

    /// Total angle (radians) of the in-plane circle of radius `sigma`
    /// about `p` that lies inside the triangle.
    pub fn arc_angle(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in self.halves() {
            if sigma >= w.rho_at(w.sb) {
                continue;
            }
            let s_lo = w.s_at(sigma).max(w.sa);
            total += w.sign * ((w.sb / w.d).atan() - (s_lo / w.d).atan());
        }
        total
    }

    /// `int_{T, |x-y| <= r} 1 / |x - y| dy`.
    pub fn cumulative_inv_distance(&self, r: f64, gauss: &UnitGauss) -> f64 {
        let sigma = self.in_plane_radius(r);
        if sigma <= 0.0 {
            return 0.0;
        }
        let h = self.h;
        let mut total = 0.0;
        for w in self.halves() {
            let rho_b = w.rho_at(w.sb);
            let s_cut = if sigma >= rho_b { w.sb } else { w.s_at(sigma).max(w.sa) };
            // radial limit below sigma: integrand sqrt(rho^2 + h^2) - h
            if s_cut > w.sa {
                let va = (w.sa / w.d).asinh();
                let vb = (s_cut / w.d).asinh();
                let chunks = ((vb - va) / V_CHUNK).ceil().max(1.0) as usize;
                let d = w.d;
                let val = gauss.integrate(va, vb, chunks, |v| {
                    let c = v.cosh();
                    let rho = d * c;
                    // sqrt(rho^2 + h^2) - h without cancellation
                    rho * rho / (rho.hypot(h) + h) / c
                });
                total += w.sign * val;
            }
            // full radial span up to sigma
            if s_cut < w.sb {
                let du = (w.sb / w.d).atan() - (s_cut / w.d).atan();
                total += w.sign * (r - h) * du;
            }
        }
        total
    }

    /// Visit quadrature points of `T ∩ {r_lo <= |x - y| <= r_hi}`.
    ///
    /// The callback receives the point, its distance `R` to the observation
    /// point and a signed weight; summing `weight * f(y)` approximates the
    /// surface integral. Points are clustered in polar coordinates around
    /// the observation point, so kernels with a `1/R` singularity are
    /// integrated accurately.
    pub fn visit_shell<F>(
        &self,
        r_lo: f64,
        r_hi: f64,
        ang: &UnitGauss,
        rad: &UnitGauss,
        mut f: F,
    ) where
        F: FnMut(&Point3, f64, f64),
    {
        if r_hi <= self.dist_min || r_lo >= self.dist_max || r_hi <= r_lo {
            return;
        }
        let s_lo = self.in_plane_radius(r_lo.max(0.0));
        let s_hi = self.in_plane_radius(r_hi);
        if s_hi <= 0.0 {
            return;
        }
        let h = self.h;
        let p = self.p;
        let radial = |rho_max: f64, dir: &Point3, w_ang: f64, f: &mut F| {
            if rho_max <= s_lo {
                return;
            }
            if h > 0.0 {
                let wa = (s_lo / h).asinh();
                let wb = (rho_max / h).asinh();
                let chunks = ((wb - wa) / W_CHUNK).ceil().max(1.0) as usize;
                let step = (wb - wa) / chunks as f64;
                for c in 0..chunks {
                    let lo = wa + c as f64 * step;
                    for (x, w) in rad.nodes.iter().zip(&rad.weights) {
                        let ww = lo + x * step;
                        let rho = h * ww.sinh();
                        let big_r = h * ww.cosh();
                        let y = p + dir * rho;
                        f(&y, big_r, w_ang * w * step * rho * big_r);
                    }
                }
            } else {
                let len = rho_max - s_lo;
                for (x, w) in rad.nodes.iter().zip(&rad.weights) {
                    let rho = s_lo + x * len;
                    let y = p + dir * rho;
                    f(&y, rho, w_ang * w * len * rho);
                }
            }
        };
        for w in self.halves() {
            let rho_b = w.rho_at(w.sb);
            if s_lo >= rho_b {
                continue;
            }
            // region A: wedge limit inside the annulus
            let sa_a = w.s_at(s_lo).max(w.sa);
            let sb_a = w.s_at(s_hi).min(w.sb);
            if sb_a > sa_a {
                let va = (sa_a / w.d).asinh();
                let vb = (sb_a / w.d).asinh();
                let chunks = ((vb - va) / V_CHUNK).ceil().max(1.0) as usize;
                let step = (vb - va) / chunks as f64;
                for c in 0..chunks {
                    let lo = va + c as f64 * step;
                    for (x, wt) in ang.nodes.iter().zip(&ang.weights) {
                        let v = lo + x * step;
                        let ch = v.cosh();
                        let dir = w.dir(1.0 / ch, v.tanh());
                        radial(w.d * ch, &dir, w.sign * wt * step / ch, &mut f);
                    }
                }
            }
            // region B: annulus fully inside the wedge
            if s_hi < rho_b {
                let s_b0 = w.s_at(s_hi).max(w.sa);
                let ua = (s_b0 / w.d).atan();
                let ub = (w.sb / w.d).atan();
                if ub > ua {
                    let chunks = ((ub - ua) / U_CHUNK).ceil().max(1.0) as usize;
                    let step = (ub - ua) / chunks as f64;
                    for c in 0..chunks {
                        let lo = ua + c as f64 * step;
                        for (x, wt) in ang.nodes.iter().zip(&ang.weights) {
                            let u = lo + x * step;
                            let dir = w.dir(u.cos(), u.sin());
                            radial(s_hi, &dir, w.sign * wt * step, &mut f);
                        }
                    }
                }
            }
        }
    }

    /// Shell moments of `sigma^j * lambda(y) / |x - y|` for coplanar points.
    ///
    /// `radii` are increasing shell boundaries; shell `k` is
    /// `[radii[k], radii[k+1]]` and `sigma = (|x-y| - radii[k]) / scale`.
    /// Each linear function is given by its value at the observation point
    /// and its in-plane gradient. Results are added, multiplied by
    /// `weight`, into `out[(k * lin.len() + b) * (jmax + 1) + j]`.
    ///
    /// Requires the observation point to lie in the triangle's plane.
    #[allow(clippy::too_many_arguments)]
    pub fn coplanar_moments(
        &self,
        radii: &[f64],
        scale: f64,
        lin: &[(f64, Point3)],
        jmax: usize,
        gauss: &UnitGauss,
        weight: f64,
        out: &mut [f64],
    ) {
        let nb = lin.len();
        let nj = jmax + 1;
        let nshell = radii.len().saturating_sub(1);
        debug_assert!(out.len() >= nshell * nb * nj);
        if nshell == 0 {
            return;
        }
        let inv_scale = 1.0 / scale;
        // Integral over a full annulus sector of angle `du` and angular
        // moment `cint = int (g . dir) du` for each basis function.
        let mut powers = [0.0f64; 6];
        for w in self.halves() {
            let rho_a = w.rho_at(w.sa);
            let rho_b = w.rho_at(w.sb);
            // shells starting beyond the far end of the wedge see nothing
            let k_end = radii.partition_point(|&r| r < rho_b).min(nshell);
            for k in 0..k_end {
                let r_lo = radii[k];
                let r_hi = radii[k + 1];
                let base = k * nb * nj;
                // region B: sector [max(sa, s(r_hi)), sb] fully covered
                if r_hi < rho_b {
                    let s0 = if r_hi <= rho_a { w.sa } else { w.s_at(r_hi) };
                    let ua = (s0 / w.d).atan();
                    let ub = (w.sb / w.d).atan();
                    let du = ub - ua;
                    let (sa_, ca_) = ua.sin_cos();
                    let (sb_, cb_) = ub.sin_cos();
                    let width = r_hi - r_lo;
                    let wn = width * inv_scale;
                    for (b, (lam_x, g)) in lin.iter().enumerate() {
                        let gm = g.dot(&w.m);
                        let gt = g.dot(&w.t);
                        let cint = gm * (sb_ - sa_) + gt * (ca_ - cb_);
                        // sum_j: scale^{-j} [ (lam_x du + r_lo cint) W^{j+1}/(j+1) + cint W^{j+2}/(j+2) ]
                        let mut wp = width; // W^{j+1} scale^{-j}
                        for j in 0..nj {
                            let t1 = (lam_x * du + r_lo * cint) * wp / (j + 1) as f64;
                            let t2 = cint * wp * width / (j + 2) as f64;
                            out[base + b * nj + j] += weight * w.sign * (t1 + t2);
                            wp *= wn;
                        }
                    }
                }
                // region A: wedge boundary inside the shell
                if r_hi > rho_a && r_lo < rho_b {
                    let s0 = if r_lo <= rho_a { w.sa } else { w.s_at(r_lo) };
                    let s1 = if r_hi >= rho_b { w.sb } else { w.s_at(r_hi) };
                    if s1 <= s0 {
                        continue;
                    }
                    let va = (s0 / w.d).asinh();
                    let vb = (s1 / w.d).asinh();
                    let chunks = ((vb - va) / V_CHUNK).ceil().max(1.0) as usize;
                    let step = (vb - va) / chunks as f64;
                    for c in 0..chunks {
                        let lo = va + c as f64 * step;
                        for (xg, wg) in gauss.nodes.iter().zip(&gauss.weights) {
                            let v = lo + xg * step;
                            let ch = v.cosh();
                            let cos_u = 1.0 / ch;
                            let sin_u = v.tanh();
                            let big_w = (w.d * ch - r_lo).max(0.0);
                            let wq = weight * w.sign * wg * step * cos_u;
                            // powers[j] = W^{j+1} scale^{-j}
                            powers[0] = big_w;
                            let wn = big_w * inv_scale;
                            for j in 1..=nj {
                                powers[j] = powers[j - 1] * wn;
                            }
                            for (b, (lam_x, g)) in lin.iter().enumerate() {
                                let c_th = g.dot(&w.m) * cos_u + g.dot(&w.t) * sin_u;
                                let a0 = lam_x + r_lo * c_th;
                                for j in 0..nj {
                                    let t1 = a0 * powers[j] / (j + 1) as f64;
                                    let t2 = c_th * powers[j] * big_w / (j + 2) as f64;
                                    out[base + b * nj + j] += wq * (t1 + t2);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Shortest distance between two points sets given as segments.
fn segment_distance(p0: &Point3, p1: &Point3, q0: &Point3, q1: &Point3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-300 && e <= 1e-300 {
        return r.norm();
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t_ = (b * s_ + f) / e;
            if t_ < 0.0 {
                t_ = 0.0;
                s_ = (-c / a).clamp(0.0, 1.0);
            } else if t_ > 1.0 {
                t_ = 1.0;
                s_ = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Exact distance between a point and a triangle.
pub fn point_triangle_distance(x: &Point3, tri: &Triangle) -> f64 {
    let n = tri.normal;
    let h = n.dot(&(x - tri.v[0]));
    let p = x - n * h;
    let lam = tri.barycentric(&p);
    if lam.iter().all(|&l| l >= 0.0) {
        return h.abs();
    }
    (0..3)
        .map(|e| segment_distance(x, x, &tri.v[e], &tri.v[(e + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

/// Exact distance between two non-intersecting triangles.
///
/// Minimum over vertex-face and edge-edge pairs; returns 0 when they touch.
pub fn triangle_distance(a: &Triangle, b: &Triangle) -> f64 {
    let mut best = f64::INFINITY;
    for v in &a.v {
        best = best.min(point_triangle_distance(v, b));
    }
    for v in &b.v {
        best = best.min(point_triangle_distance(v, a));
    }
    for i in 0..3 {
        for j in 0..3 {
            best = best.min(segment_distance(
                &a.v[i],
                &a.v[(i + 1) % 3],
                &b.v[j],
                &b.v[(j + 1) % 3],
            ));
        }
    }
    best
}

/// Largest distance between points of two triangles.
pub fn triangle_max_distance(a: &Triangle, b: &Triangle) -> f64 {
    let mut best = 0.0f64;
    for p in &a.v {
        for q in &b.v {
            best = best.max((p - q).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_tri() -> Triangle {
        Triangle::new(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
    }

    #[test]
    fn arc_angle_full_circle_inside() {
        let t = unit_tri();
        let f = PolarFrame::new(&Point3::new(0.25, 0.25, 0.0), &t);
        assert!((f.arc_angle(0.01) - 2.0 * PI).abs() < 1e-12);
        assert_eq!(f.arc_angle(5.0), 0.0);
    }

    #[test]
    fn arc_angle_at_vertex() {
        let t = unit_tri();
        let f = PolarFrame::new(&Point3::zeros(), &t);
        assert!((f.arc_angle(0.5) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cumulative_total_matches_shell_sum() {
        let t = unit_tri();
        let g = UnitGauss::new(8);
        for x in [
            Point3::new(0.2, 0.3, 0.0),
            Point3::new(-0.4, 0.5, 0.0),
            Point3::new(0.3, 0.3, 0.2),
            Point3::new(1.5, -0.2, -0.7),
        ] {
            let f = PolarFrame::new(&x, &t);
            let total = f.cumulative_inv_distance(10.0, &g);
            let mut by_points = 0.0;
            f.visit_shell(0.0, 10.0, &g, &g, |_, r, w| by_points += w / r);
            assert!((total - by_points).abs() < 1e-10 * total, "{total} {by_points}");
            // brute-force reference on a fine collapsed rule away from the singularity
            if f.dist_min > 0.1 {
                let rule = super::super::rules::TriangleRule::collapsed_gauss(30);
                let brute: f64 = rule
                    .on_triangle(&t, 0)
                    .iter()
                    .map(|(y, w)| w / (y - x).norm())
                    .sum();
                assert!((total - brute).abs() < 1e-10 * brute);
            }
        }
    }

    #[test]
    fn coplanar_moments_match_point_visits() {
        let t = Triangle::new(
            Point3::new(0.1, -0.2, 0.0),
            Point3::new(1.1, 0.1, 0.0),
            Point3::new(0.2, 0.9, 0.0),
        );
        let g = UnitGauss::new(6);
        let grads = t.basis_gradients();
        for x in [Point3::new(0.3, 0.2, 0.0), Point3::new(-0.5, 0.4, 0.0), Point3::new(1.3, 1.0, 0.0)] {
            let f = PolarFrame::new(&x, &t);
            let lam = t.barycentric(&x);
            let lin: Vec<(f64, Point3)> = (0..3).map(|k| (lam[k], grads[k])).collect();
            let radii: Vec<f64> = (0..40).map(|k| k as f64 * 0.05).collect();
            let scale = 0.05;
            let mut out = vec![0.0; 39 * 3 * 3];
            f.coplanar_moments(&radii, scale, &lin, 2, &g, 1.0, &mut out);
            for k in 0..39 {
                let mut refv = [[0.0; 3]; 3];
                f.visit_shell(radii[k], radii[k + 1], &g, &g, |y, r, w| {
                    let l = t.barycentric(y);
                    let sig = (r - radii[k]) / scale;
                    for b in 0..3 {
                        for j in 0..3 {
                            refv[b][j] += w * l[b] * sig.powi(j as i32) / r;
                        }
                    }
                });
                for b in 0..3 {
                    for j in 0..3 {
                        let got = out[(k * 3 + b) * 3 + j];
                        assert!((got - refv[b][j]).abs() < 1e-11, "k={k} b={b} j={j} {got} {}", refv[b][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn distances() {
        let a = unit_tri();
        let b = Triangle::new(
            Point3::new(3.0, 0.0, 0.0),
            Point3::new(4.0, 0.0, 0.0),
            Point3::new(3.0, 1.0, 0.0),
        );
        assert!((triangle_distance(&a, &b) - 2.0).abs() < 1e-14);
        assert_eq!(triangle_distance(&a, &a), 0.0);
        assert!((point_triangle_distance(&Point3::new(0.2, 0.2, 0.5), &a) - 0.5).abs() < 1e-15);
        assert!((triangle_max_distance(&a, &b) - 17f64.sqrt()).abs() < 1e-14);
    }
}
