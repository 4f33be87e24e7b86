//! Screens and their triangulations.
//!
//! Flat screens (square and disc) live in the plane `z = 0` and are meshed
//! with nodes graded algebraically toward the boundary: a 1D coordinate at
//! relative position `k / N` is mapped to `(k / N)^beta`. `beta = 1` gives a
//! uniform mesh. The horn geometry is a cylindrical band above the ground
//! plane, used with the half-space Green's function.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Default number of nodes per unit ring index on disc meshes.
pub const DEFAULT_DISC_SECTORS: usize = 6;

/// Which surface a mesh discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScreenKind {
    /// `[-1, 1]^2 x {0}`.
    Square,
    /// Unit disc in the plane `z = 0`.
    Disc {
        /// Ring `j` (counted from the centre) carries `sectors * j` nodes.
        sectors: usize,
    },
    /// Cylinder band with axis along `y`, lowest generator at height `clearance`.
    Horn {
        radius: f64,
        clearance: f64,
        width: f64,
    },
}

impl ScreenKind {
    pub fn is_flat(&self) -> bool {
        !matches!(self, ScreenKind::Horn { .. })
    }

    /// Exact surface area of the continuous screen.
    pub fn exact_area(&self) -> f64 {
        match *self {
            ScreenKind::Square => 4.0,
            ScreenKind::Disc { .. } => PI,
            ScreenKind::Horn { radius, width, .. } => 2.0 * PI * radius * width,
        }
    }
}

/// A flat triangle with cached geometric data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Point3; 3],
    /// Unit normal, `(v1 - v0) x (v2 - v0)` normalized.
    pub normal: Point3,
    pub area: f64,
}

impl Triangle {
    pub fn new(a: Point3, b: Point3, c: Point3) -> Self {
        let cross = (b - a).cross(&(c - a));
        let twice = cross.norm();
        let normal = if twice > 0.0 { cross / twice } else { Point3::zeros() };
        Triangle {
            v: [a, b, c],
            normal,
            area: 0.5 * twice,
        }
    }

    pub fn centroid(&self) -> Point3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.v;
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    /// Point from barycentric weights of `v[1]` and `v[2]`.
    pub fn point(&self, s: f64, t: f64) -> Point3 {
        self.v[0] + (self.v[1] - self.v[0]) * s + (self.v[2] - self.v[0]) * t
    }

    /// Barycentric coordinates of the projection of `x` onto the plane.
    pub fn barycentric(&self, x: &Point3) -> [f64; 3] {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        let d = x - self.v[0];
        let a11 = e1.dot(&e1);
        let a12 = e1.dot(&e2);
        let a22 = e2.dot(&e2);
        let b1 = d.dot(&e1);
        let b2 = d.dot(&e2);
        let det = a11 * a22 - a12 * a12;
        let s = (a22 * b1 - a12 * b2) / det;
        let t = (a11 * b2 - a12 * b1) / det;
        [1.0 - s - t, s, t]
    }

    /// Surface gradients of the three barycentric (hat) functions.
    pub fn basis_gradients(&self) -> [Point3; 3] {
        let n2 = 2.0 * self.area;
        let mut g = [Point3::zeros(); 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let a = self.v[(k + 1) % 3];
            let b = self.v[(k + 2) % 3];
            // grad lambda_k = n x (b - a) / (2 area)
            *gk = self.normal.cross(&(b - a)) / n2;
        }
        g
    }

    /// The triangle mirrored across the plane `z = 0`.
    pub fn reflected(&self) -> Triangle {
        let r = |p: Point3| Point3::new(p.x, p.y, -p.z);
        Triangle::new(r(self.v[0]), r(self.v[1]), r(self.v[2]))
    }
}

/// Mirror image of a point across the ground plane `z = 0`.
pub fn reflect(p: &Point3) -> Point3 {
    Point3::new(p.x, p.y, -p.z)
}

/// Triangulated screen.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    /// Sorted indices of nodes on the screen boundary.
    pub boundary_nodes: Vec<usize>,
    pub beta: f64,
    pub levels: usize,
    pub kind: ScreenKind,
    pub h_max: f64,
}

impl Mesh {
    pub fn new(
        nodes: Vec<Point3>,
        triangles: Vec<[usize; 3]>,
        boundary_nodes: Vec<usize>,
        beta: f64,
        levels: usize,
        kind: ScreenKind,
    ) -> Self {
        let mut mesh = Mesh {
            nodes,
            triangles,
            boundary_nodes,
            beta,
            levels,
            kind,
            h_max: 0.0,
        };
        mesh.boundary_nodes.sort_unstable();
        mesh.boundary_nodes.dedup();
        mesh.h_max = mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(i, _)| mesh.triangle(i).diameter())
            .fold(0.0, f64::max);
        mesh
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.triangles[i];
        Triangle::new(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn triangles_geom(&self) -> Vec<Triangle> {
        (0..self.triangles.len()).map(|i| self.triangle(i)).collect()
    }

    pub fn h_min(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| self.triangle(i).diameter())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle(i).area).sum()
    }

    /// Nodes not on the boundary, in increasing order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let boundary: BTreeSet<usize> = self.boundary_nodes.iter().copied().collect();
        (0..self.nodes.len()).filter(|i| !boundary.contains(i)).collect()
    }

    /// True when every node lies in the plane `z = 0`.
    pub fn is_flat(&self) -> bool {
        self.nodes.iter().all(|p| p.z == 0.0)
    }

    /// SHA-256 of the serialized mesh, hex encoded.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_vec(&MeshFile::from(self)).expect("mesh serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MeshFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Mesh> {
        let file: MeshFile = serde_json::from_str(s)?;
        Mesh::try_from(file)
    }
}

/// On-disk mesh layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshFile {
    pub nodes: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_nodes: Vec<usize>,
    pub beta: f64,
    #[serde(rename = "N_l")]
    pub n_l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
}

impl From<&Mesh> for MeshFile {
    fn from(m: &Mesh) -> Self {
        MeshFile {
            nodes: m.nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
            triangles: m.triangles.clone(),
            boundary_nodes: m.boundary_nodes.clone(),
            beta: m.beta,
            n_l: m.levels,
            screen: Some(m.kind),
            h_max: Some(m.h_max),
        }
    }
}

impl TryFrom<MeshFile> for Mesh {
    type Error = Error;

    fn try_from(f: MeshFile) -> Result<Mesh> {
        let n = f.nodes.len();
        if f.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if f.triangles.iter().flatten().chain(&f.boundary_nodes).any(|&i| i >= n) {
            return Err(Error::InvalidParameter("node index out of range".into()));
        }
        let nodes = f.nodes.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        Ok(Mesh::new(
            nodes,
            f.triangles,
            f.boundary_nodes,
            f.beta,
            f.n_l,
            f.screen.unwrap_or(ScreenKind::Square),
        ))
    }
}

fn check_grading(levels: usize, beta: f64) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("refinement level N_l must be >= 1".into()));
    }
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grading exponent beta must be >= 1, got {beta}"
        )));
    }
    Ok(())
}

/// Graded 1D nodes on `[-1, 1]`, symmetric about 0, with `2 N + 1` entries.
pub fn graded_coordinates(levels: usize, beta: f64) -> Vec<f64> {
    let n = levels as f64;
    let half: Vec<f64> = (0..=levels)
        .map(|k| -1.0 + (k as f64 / n).powf(beta))
        .collect();
    let mut coords = half.clone();
    coords.extend(half.iter().rev().skip(1).map(|x| -x));
    coords
}

/// `beta`-graded mesh of the square screen `[-1, 1]^2 x {0}` with `8 N^2` triangles.
///
/// Each rectangular cell is split along the diagonal that points toward the
/// nearest screen corner.
pub fn graded_square_mesh(levels: usize, beta: f64) -> Result<Mesh> {
    check_grading(levels, beta)?;
    let c = graded_coordinates(levels, beta);
    let m = c.len();
    let idx = |i: usize, j: usize| j * m + i;
    let mut nodes = Vec::with_capacity(m * m);
    for &y in &c {
        for &x in &c {
            nodes.push(Point3::new(x, y, 0.0));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (m - 1) * (m - 1));
    let mid = levels;
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            let (a, b, cc, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // same sign of (x, y) quadrant: diagonal a-cc, otherwise b-d
            let lower_left = (i < mid) == (j < mid);
            if lower_left {
                triangles.push([a, b, cc]);
                triangles.push([a, cc, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, cc, d]);
            }
        }
    }
    let boundary = (0..m * m)
        .filter(|&k| {
            let (i, j) = (k % m, k / m);
            i == 0 || j == 0 || i == m - 1 || j == m - 1
        })
        .collect();
    Ok(Mesh::new(nodes, triangles, boundary, beta, levels, ScreenKind::Square))
}

/// Ring radii of the graded disc, from the rim inward: `1 - (k/N)^beta` for `k = 0..=N`.
pub fn graded_disc_radii(levels: usize, beta: f64) -> Vec<f64> {
    let n = levels as f64;
    (0..=levels)
        .map(|k| if k == levels { 0.0 } else { 1.0 - (k as f64 / n).powf(beta) })
        .collect()
}

/// `beta`-graded mesh of the unit disc with [`DEFAULT_DISC_SECTORS`].
pub fn graded_disc_mesh(levels: usize, beta: f64) -> Result<Mesh> {
    graded_disc_mesh_with_sectors(levels, beta, DEFAULT_DISC_SECTORS)
}

/// Disc mesh whose `j`-th ring from the centre carries `sectors * j` nodes.
///
/// Consecutive rings are stitched by merging their nodes in angular order,
/// giving `sectors * N^2` triangles in total.
pub fn graded_disc_mesh_with_sectors(levels: usize, beta: f64, sectors: usize) -> Result<Mesh> {
    check_grading(levels, beta)?;
    if sectors < 3 {
        return Err(Error::InvalidParameter("disc needs at least 3 sectors".into()));
    }
    let radii = graded_disc_radii(levels, beta);
    // ring j (from centre) has radius radii[levels - j]
    let mut nodes = vec![Point3::zeros()];
    let mut ring_start = vec![0usize];
    for j in 1..=levels {
        ring_start.push(nodes.len());
        let r = radii[levels - j];
        let count = sectors * j;
        for i in 0..count {
            let th = 2.0 * PI * i as f64 / count as f64;
            nodes.push(Point3::new(r * th.cos(), r * th.sin(), 0.0));
        }
    }
    let mut triangles = Vec::with_capacity(sectors * levels * levels);
    for i in 0..sectors {
        triangles.push([0, 1 + i, 1 + (i + 1) % sectors]);
    }
    for j in 2..=levels {
        let (inner0, ni) = (ring_start[j - 1], sectors * (j - 1));
        let (outer0, no) = (ring_start[j], sectors * j);
        let (mut a, mut b) = (0usize, 0usize);
        while a < ni || b < no {
            let next_inner = (a + 1) as f64 / ni as f64;
            let next_outer = (b + 1) as f64 / no as f64;
            let ia = inner0 + a % ni;
            let ib = outer0 + b % no;
            if b < no && (a >= ni || next_outer <= next_inner) {
                triangles.push([ia, ib, outer0 + (b + 1) % no]);
                b += 1;
            } else {
                triangles.push([ia, ib, inner0 + (a + 1) % ni]);
                a += 1;
            }
        }
    }
    let boundary = (ring_start[levels]..nodes.len()).collect();
    Ok(Mesh::new(
        nodes,
        triangles,
        boundary,
        beta,
        levels,
        ScreenKind::Disc { sectors },
    ))
}

/// Parameters of the cylinder-over-plane horn geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornParams {
    pub radius: f64,
    pub clearance: f64,
    /// Number of segments around the circumference.
    pub resolution: usize,
    /// Band width along the axis; defaults to the radius.
    pub width: Option<f64>,
    /// Angular grading toward the contact line (1 = uniform).
    pub beta: f64,
}

impl HornParams {
    pub fn new(radius: f64, clearance: f64, resolution: usize) -> Self {
        HornParams {
            radius,
            clearance,
            resolution,
            width: None,
            beta: 1.0,
        }
    }
}

/// Uniform cylinder band above the ground plane.
pub fn horn_surface_mesh(radius: f64, clearance: f64, resolution: usize) -> Result<Mesh> {
    horn_surface_mesh_with(&HornParams::new(radius, clearance, resolution))
}

/// Cylinder band with axis along `y` whose lowest generator sits at `z = clearance`.
///
/// Angles are measured from the contact line; with `beta > 1` they are
/// graded toward it. Normals point away from the axis.
pub fn horn_surface_mesh_with(p: &HornParams) -> Result<Mesh> {
    if !(p.radius > 0.0) {
        return Err(Error::InvalidParameter("horn radius must be positive".into()));
    }
    if !(p.clearance >= 0.0) {
        return Err(Error::InvalidParameter("horn clearance must be >= 0".into()));
    }
    if p.resolution < 3 {
        return Err(Error::InvalidParameter("horn resolution must be >= 3".into()));
    }
    if !(p.beta >= 1.0) {
        return Err(Error::InvalidParameter("horn grading beta must be >= 1".into()));
    }
    let width = p.width.unwrap_or(p.radius);
    let n = p.resolution;
    let axial = ((n as f64 * width / (2.0 * PI * p.radius)).round() as usize).max(1);
    let angles: Vec<f64> = (0..n)
        .map(|i| {
            let s = i as f64 / n as f64; // in [0, 1)
            let folded = if s <= 0.5 { 2.0 * s } else { 2.0 * (1.0 - s) };
            let g = folded.powf(p.beta) * PI;
            if s <= 0.5 { g } else { 2.0 * PI - g }
        })
        .collect();
    let zc = p.radius + p.clearance;
    let mut nodes = Vec::with_capacity(n * (axial + 1));
    for a in 0..=axial {
        let y = -0.5 * width + width * a as f64 / axial as f64;
        for &th in &angles {
            nodes.push(Point3::new(p.radius * th.sin(), y, zc - p.radius * th.cos()));
        }
    }
    let idx = |i: usize, a: usize| a * n + i % n;
    let mut triangles = Vec::with_capacity(2 * n * axial);
    for a in 0..axial {
        for i in 0..n {
            let (p00, p10, p11, p01) = (idx(i, a), idx(i + 1, a), idx(i + 1, a + 1), idx(i, a + 1));
            triangles.push([p00, p01, p11]);
            triangles.push([p00, p11, p10]);
        }
    }
    let boundary = (0..n).chain(axial * n..(axial + 1) * n).collect();
    let mut mesh = Mesh::new(
        nodes,
        triangles,
        boundary,
        p.beta,
        p.resolution,
        ScreenKind::Horn {
            radius: p.radius,
            clearance: p.clearance,
            width,
        },
    );
    // orient outward
    let axis_point = |y: f64| Point3::new(0.0, y, zc);
    for t in mesh.triangles.iter_mut() {
        let tri = Triangle::new(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
        let c = tri.centroid();
        if tri.normal.dot(&(c - axis_point(c.y))) < 0.0 {
            t.swap(1, 2);
        }
    }
    Ok(mesh)
}

/// Largest distance between two mesh nodes.
pub fn mesh_diameter(mesh: &Mesh) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in mesh.nodes.iter().enumerate() {
        for b in &mesh.nodes[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}

/// Number of edges shared or unshared, counted once.
pub fn edge_count(mesh: &Mesh) -> usize {
    let mut edges = BTreeSet::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    edges.len()
}

/// `V - E + F` of the triangulation.
pub fn euler_characteristic(mesh: &Mesh) -> i64 {
    mesh.num_nodes() as i64 - edge_count(mesh) as i64 + mesh.num_triangles() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_coordinates_follow_grading_formula() {
        let c = graded_coordinates(4, 2.0);
        assert_eq!(c.len(), 9);
        assert!((c[1] + 0.9375).abs() < 1e-15);
        assert!((c[2] + 0.75).abs() < 1e-15);
        assert_eq!(c[4], 0.0);
        assert!((c[7] - 0.9375).abs() < 1e-15);
    }

    #[test]
    fn uniform_square_has_quarter_spacing() {
        let c = graded_coordinates(4, 1.0);
        for w in c.windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn square_triangle_counts() {
        assert_eq!(graded_square_mesh(4, 2.0).unwrap().num_triangles(), 128);
        assert_eq!(graded_square_mesh(17, 2.0).unwrap().num_triangles(), 2312);
    }

    #[test]
    fn square_orientation_and_area() {
        let m = graded_square_mesh(5, 2.0).unwrap();
        let mut area = 0.0;
        for i in 0..m.num_triangles() {
            let t = m.triangle(i);
            assert!(t.area > 0.0);
            assert!((t.normal.z - 1.0).abs() < 1e-14);
            area += t.area;
        }
        assert!((area - 4.0).abs() < 1e-12);
    }

    #[test]
    fn square_boundary_nodes_are_on_rim() {
        let m = graded_square_mesh(3, 1.5).unwrap();
        for (i, p) in m.nodes.iter().enumerate() {
            let on_rim = p.x.abs().max(p.y.abs()) == 1.0;
            assert_eq!(on_rim, m.boundary_nodes.binary_search(&i).is_ok());
        }
    }

    #[test]
    fn disc_radii() {
        let r = graded_disc_radii(4, 2.0);
        assert_eq!(r, vec![1.0, 0.9375, 0.75, 0.4375, 0.0]);
        let r = graded_disc_radii(4, 1.0);
        assert_eq!(r, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn disc_counts_and_orientation() {
        let m = graded_disc_mesh(4, 2.0).unwrap();
        assert_eq!(m.num_triangles(), 6 * 16);
        for i in 0..m.num_triangles() {
            let t = m.triangle(i);
            assert!(t.area > 0.0, "triangle {i} degenerate");
            assert!(t.normal.z > 0.0);
        }
        let m = graded_disc_mesh_with_sectors(11, 2.0, 22).unwrap();
        assert_eq!(m.num_triangles(), 2662);
    }

    #[test]
    fn disc_boundary_on_unit_circle() {
        let m = graded_disc_mesh(5, 2.0).unwrap();
        for (i, p) in m.nodes.iter().enumerate() {
            let on_rim = (p.norm() - 1.0).abs() < 1e-14;
            assert_eq!(on_rim, m.boundary_nodes.binary_search(&i).is_ok());
        }
    }

    #[test]
    fn disc_area_converges() {
        let coarse = graded_disc_mesh(4, 1.0).unwrap().total_area();
        let fine = graded_disc_mesh(8, 1.0).unwrap().total_area();
        assert!((fine - PI).abs() < (coarse - PI).abs());
        assert!((fine - PI).abs() < 0.05);
    }

    #[test]
    fn rejects_beta_below_one() {
        assert!(graded_square_mesh(4, 0.5).is_err());
        assert!(graded_disc_mesh(4, 0.99).is_err());
        assert!(graded_square_mesh(0, 2.0).is_err());
    }

    #[test]
    fn diameters() {
        let sq = graded_square_mesh(2, 1.0).unwrap();
        assert!((mesh_diameter(&sq) - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let disc = graded_disc_mesh(3, 1.0).unwrap();
        assert!((mesh_diameter(&disc) - 2.0).abs() < 1e-14);
        let one = Mesh::new(
            vec![Point3::zeros(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            vec![0, 1, 2],
            1.0,
            1,
            ScreenKind::Square,
        );
        assert!((mesh_diameter(&one) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h_max_decreases_with_refinement() {
        let mut prev = f64::INFINITY;
        for n in [2, 4, 8] {
            let h = graded_square_mesh(n, 2.0).unwrap().h_max;
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn horn_mesh_properties() {
        let m = horn_surface_mesh(0.3, 0.0, 16).unwrap();
        assert!(m.nodes.iter().all(|p| p.z >= -1e-15));
        assert_eq!(euler_characteristic(&m), 0);
        for i in 0..m.num_triangles() {
            let t = m.triangle(i);
            let c = t.centroid();
            let radial = Point3::new(c.x, 0.0, c.z - 0.3);
            assert!(t.normal.dot(&radial) > 0.0);
        }
        let fine = horn_surface_mesh(0.3, 0.0, 64).unwrap();
        let exact = fine.kind.exact_area();
        assert!((fine.total_area() - exact).abs() / exact < 0.01);
        assert!(horn_surface_mesh(0.3, 0.0, 2).is_err());
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let t = Triangle::new(
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(1.0, 0.2, 0.0),
            Point3::new(0.3, 0.8, 0.0),
        );
        let g = t.basis_gradients();
        assert!((g[0] + g[1] + g[2]).norm() < 1e-14);
        let x = t.point(0.2, 0.3);
        let lam = t.barycentric(&x);
        assert!((lam[1] - 0.2).abs() < 1e-14 && (lam[2] - 0.3).abs() < 1e-14);
        // gradient of lambda_1 dotted with an edge vector reproduces the change
        let d = t.v[1] - t.v[0];
        assert!((g[1].dot(&d) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn json_roundtrip() {
        let m = graded_disc_mesh(2, 2.0).unwrap();
        let back = Mesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert!(v.get("N_l").is_some() && v.get("boundary_nodes").is_some());
    }
}
