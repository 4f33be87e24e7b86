//! Error norms, rate and exponent fits, interpolation study and the horn
//! amplification spectrum.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::assembly::{Dof, LagMatrixSequence, RhsTimeSeries};
use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point3, ScreenKind, Triangle};
use crate::mot::{energy_functional, DensityHistory};
use crate::potentials::incident_point_source;
use crate::quadrature::{TriangleRule, UnitGauss};
use crate::timegrid::TemporalBasis;

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> RateFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    RateFit { slope, intercept: my - slope * mx, r_squared, points: xs.len() }
}

/// Slope of `log(error)` against `log(dof)`.
pub fn fit_convergence_rate(rows: &[(f64, f64)]) -> Result<RateFit> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!("rate fit needs >= 3 levels, got {}", rows.len())));
    }
    if rows.iter().any(|&(d, e)| !(d > 0.0) || !(e > 0.0)) {
        return Err(Error::InvalidParameter("rate fit needs positive dofs and errors".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    if xs.iter().all(|x| (x - xs[0]).abs() < 1e-14) {
        return Err(Error::InvalidParameter("rate fit needs distinct dof counts".into()));
    }
    Ok(least_squares(&xs, &ys))
}

/// Uniform bucket grid over the `xy` bounding box of a flat mesh.
struct Locator<'a> {
    tris: Vec<Triangle>,
    mesh: &'a Mesh,
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let tris = mesh.triangles_geom();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.nodes {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        let side = ((tris.len() as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(1e-300),
            ((hi[1] - lo[1]) / side as f64).max(1e-300),
        ];
        let mut buckets = vec![Vec::new(); side * side];
        let clampi = |v: f64, k: usize| (v.floor().max(0.0) as usize).min(dims[k] - 1);
        for (t, tri) in tris.iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in &tri.v {
                a = [a[0].min(v.x), a[1].min(v.y)];
                b = [b[0].max(v.x), b[1].max(v.y)];
            }
            let (i0, i1) = (clampi((a[0] - lo[0]) / cell[0], 0), clampi((b[0] - lo[0]) / cell[0], 0));
            let (j0, j1) = (clampi((a[1] - lo[1]) / cell[1], 1), clampi((b[1] - lo[1]) / cell[1], 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(t);
                }
            }
        }
        Locator { tris, mesh, lo, cell, dims, buckets }
    }

    /// Triangle containing `p` (closest in barycentric sense on ties).
    fn locate(&self, p: &Point3) -> Option<(usize, [f64; 3])> {
        let i = ((p.x - self.lo[0]) / self.cell[0]).floor();
        let j = ((p.y - self.lo[1]) / self.cell[1]).floor();
        if i < -1.0 || j < -1.0 || i > self.dims[0] as f64 || j > self.dims[1] as f64 {
            return None;
        }
        let i = (i.max(0.0) as usize).min(self.dims[0] - 1);
        let j = (j.max(0.0) as usize).min(self.dims[1] - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let l = self.tris[t].barycentric(p);
            let m = l[0].min(l[1]).min(l[2]);
            if best.is_none_or(|b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        best.filter(|b| b.2 >= -1e-9).map(|b| (b.0, b.1))
    }
}

/// Evaluates a density on the screen.
struct Sampler<'a> {
    hist: &'a DensityHistory,
    loc: Locator<'a>,
    tri_dof: Vec<Option<usize>>,
    node_dof: Vec<Option<usize>>,
    p1: bool,
}

impl<'a> Sampler<'a> {
    fn new(hist: &'a DensityHistory, mesh: &'a Mesh) -> Result<Self> {
        if !mesh.is_flat() {
            return Err(Error::NonFlatMesh);
        }
        let mut tri_dof = vec![None; mesh.num_triangles()];
        let mut node_dof = vec![None; mesh.num_nodes()];
        let dofs = &hist.header.dofs[..hist.header.size.min(hist.header.dofs.len())];
        if dofs.len() != hist.header.size {
            return Err(Error::DimensionMismatch("density header lists too few dofs".into()));
        }
        for (k, d) in dofs.iter().enumerate() {
            match *d {
                Dof::Triangle(t) if t < tri_dof.len() => tri_dof[t] = Some(k),
                Dof::Node(n) if n < node_dof.len() => node_dof[n] = Some(k),
                _ => return Err(Error::DimensionMismatch("density dof outside the mesh".into())),
            }
        }
        let p1 = tri_dof.iter().all(|d| d.is_none());
        Ok(Sampler { hist, loc: Locator::new(mesh), tri_dof, node_dof, p1 })
    }

    fn is_p1(&self) -> bool {
        self.p1
    }

    /// Value on triangle `t` at barycentric `l`, time `t`.
    fn value_in(&self, tri: usize, l: &[f64; 3], time: f64) -> f64 {
        if self.is_p1() {
            let v = self.loc.mesh.triangles[tri];
            (0..3)
                .map(|k| self.node_dof[v[k]].map_or(0.0, |d| l[k] * self.hist.value_at(d, time)))
                .sum()
        } else {
            self.tri_dof[tri].map_or(0.0, |d| self.hist.value_at(d, time))
        }
    }

    fn value(&self, p: &Point3, time: f64) -> Option<f64> {
        self.loc.locate(p).map(|(t, l)| self.value_in(t, &l, time))
    }
}

fn same_screen(a: &Mesh, b: &Mesh) -> Result<()> {
    let kind_eq = match (a.kind, b.kind) {
        (ScreenKind::Square, ScreenKind::Square) => true,
        (ScreenKind::Disc { .. }, ScreenKind::Disc { .. }) => true,
        _ => false,
    };
    if !kind_eq {
        return Err(Error::InvalidParameter("densities live on different screens".into()));
    }
    Ok(())
}

/// `L2([0, T] x Gamma)` norm of the difference of two densities, sampled at
/// the quadrature points of the finer mesh.
pub fn l2_spacetime_error(
    a: (&DensityHistory, &Mesh),
    b: (&DensityHistory, &Mesh),
    t_end: f64,
) -> Result<f64> {
    same_screen(a.1, b.1)?;
    let (fine, coarse) = if a.1.num_triangles() >= b.1.num_triangles() { (a, b) } else { (b, a) };
    let sf = Sampler::new(fine.0, fine.1)?;
    let sc = Sampler::new(coarse.0, coarse.1)?;
    let dt = fine.0.dt().min(coarse.0.dt());
    let hats = fine.0.header.basis == TemporalBasis::PiecewiseLinearHat
        || coarse.0.header.basis == TemporalBasis::PiecewiseLinearHat;
    let sub = if hats { 4 } else { 1 };
    let tau = dt / sub as f64;
    let nt = (t_end / tau).round() as usize;
    let rule = TriangleRule::seven_point();
    let mut total = 0.0;
    for (t, tri) in fine.1.triangles_geom().iter().enumerate() {
        for (x, w) in rule.on_triangle(tri, 0) {
            let l = tri.barycentric(&x);
            for k in 0..nt {
                let time = (k as f64 + 0.5) * tau;
                let vf = sf.value_in(t, &l, time);
                let vc = sc.value(&x, time).unwrap_or(0.0);
                total += w * tau * (vf - vc) * (vf - vc);
            }
        }
    }
    Ok(total.sqrt())
}

/// Transfer a density to a finer mesh: triangle values are averaged over
/// quadrature points, nodal values are interpolated at the nodes.
pub fn lift_density(coarse: &DensityHistory, coarse_mesh: &Mesh, fine_template: &DensityHistory, fine_mesh: &Mesh) -> Result<DensityHistory> {
    same_screen(coarse_mesh, fine_mesh)?;
    if (coarse.dt() - fine_template.dt()).abs() > 1e-12 * fine_template.dt() {
        return Err(Error::InvalidParameter("lifting needs equal time steps".into()));
    }
    let sc = Sampler::new(coarse, coarse_mesh)?;
    let ns = fine_template.n_steps().min(coarse.n_steps());
    let dt = coarse.dt();
    let rule = TriangleRule::seven_point();
    let mut out = fine_template.clone();
    out.coefficients.truncate(ns);
    for n in 1..=ns {
        // values at the step node (hats) or the step midpoint (constants)
        let time = match coarse.header.basis {
            TemporalBasis::PiecewiseConstant => (n as f64 - 0.5) * dt,
            TemporalBasis::PiecewiseLinearHat => n as f64 * dt,
        };
        let row = &mut out.coefficients[n - 1];
        for (k, d) in fine_template.header.dofs.iter().enumerate() {
            row[k] = match *d {
                Dof::Triangle(t) => {
                    let tri = fine_mesh.triangle(t);
                    let mut acc = 0.0;
                    for (x, w) in rule.on_triangle(&tri, 0) {
                        acc += w * sc.value(&x, time).unwrap_or(0.0);
                    }
                    acc / tri.area
                }
                Dof::Node(v) => sc.value(&fine_mesh.nodes[v], time).unwrap_or(0.0),
            };
        }
    }
    out.residuals.truncate(ns);
    Ok(out)
}

/// `sqrt(|E(lifted coarse) - E(fine)|)` with the benchmark system.
pub fn energy_error(
    system_fine: &LagMatrixSequence,
    rhs_fine: &RhsTimeSeries,
    coarse: (&DensityHistory, &Mesh),
    fine: (&DensityHistory, &Mesh),
) -> Result<f64> {
    let lifted = lift_density(coarse.0, coarse.1, fine.0, fine.1)?;
    let mut fine_cut = fine.0.clone();
    fine_cut.coefficients.truncate(lifted.n_steps());
    let ec = energy_functional(system_fine, &lifted, rhs_fine)?;
    let ef = energy_functional(system_fine, &fine_cut, rhs_fine)?;
    Ok((ec - ef).abs().sqrt())
}

/// Line along which singular behaviour is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    /// From the centre along `y = 0` to the edge point `(1, 0)`.
    EdgeY0,
    /// Along `y = x` to the corner `(1, 1)`.
    CornerDiagonal,
    /// Along `x = const` to the edge point `(x, 1)`.
    EdgeXConst { x: f64 },
}

impl Section {
    /// Singular point and unit direction pointing toward it.
    fn geometry(&self) -> (Point3, Point3) {
        match *self {
            Section::EdgeY0 => (Point3::new(1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)),
            Section::CornerDiagonal => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                (Point3::new(1.0, 1.0, 0.0), Point3::new(s, s, 0.0))
            }
            Section::EdgeXConst { x } => (Point3::new(x, 1.0, 0.0), Point3::new(0.0, 1.0, 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub time: f64,
    pub section: Section,
    pub exponent: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    /// `(distance, value)` samples, nearest first.
    pub samples: Vec<(f64, f64)>,
}

/// Sample along a section; `cell` is the triangle of a piecewise constant value.
struct Crossing {
    distance: f64,
    value: f64,
    cell: Option<Triangle>,
}

fn section_crossings(psi: &DensityHistory, mesh: &Mesh, section: Section, time: f64) -> Result<Vec<Crossing>> {
    let sampler = Sampler::new(psi, mesh)?;
    let (s, u) = section.geometry();
    let perp = Point3::new(-u.y, u.x, 0.0);
    // shift off mesh lines so that every chord belongs to one triangle
    let eps = 1e-9;
    let origin = s + perp * eps;
    let mut out: Vec<Crossing> = Vec::new();
    let p1 = sampler.is_p1();
    for (t, tri) in sampler.loc.tris.iter().enumerate() {
        // points origin - d u, d >= 0, inside the triangle
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        let mut empty = false;
        for e in 0..3 {
            let a = tri.v[e];
            let b = tri.v[(e + 1) % 3];
            let c = tri.v[(e + 2) % 3];
            let edge = b - a;
            let nrm = Point3::new(edge.y, -edge.x, 0.0);
            let sign = nrm.dot(&(c - a)).signum();
            // sign * nrm.(origin - d u - a) >= 0
            let c0 = sign * nrm.dot(&(origin - a));
            let c1 = -sign * nrm.dot(&u);
            if c1.abs() < 1e-15 {
                if c0 < 0.0 {
                    empty = true;
                }
            } else if c1 > 0.0 {
                lo = lo.max(-c0 / c1);
            } else {
                hi = hi.min(-c0 / c1);
            }
        }
        if empty || !(hi > lo + 1e-12) {
            continue;
        }
        if p1 {
            for d in [lo, hi] {
                let l = tri.barycentric(&(origin - u * d));
                out.push(Crossing { distance: d, value: sampler.value_in(t, &l, time), cell: None });
            }
        } else {
            let d = (s - tri.centroid()).dot(&u);
            let l = tri.barycentric(&(origin - u * (0.5 * (lo + hi))));
            out.push(Crossing { distance: d, value: sampler.value_in(t, &l, time), cell: Some(*tri) });
        }
    }
    out.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap());
    // neighbouring chords share their end points up to the offset
    out.dedup_by(|a, b| (a.distance - b.distance).abs() < 1e3 * eps);
    Ok(out)
}

/// Samples of the density along a section: one per crossed triangle for
/// piecewise constants (at the projected centroid), one per crossed edge for
/// piecewise linears.
pub fn section_samples(psi: &DensityHistory, mesh: &Mesh, section: Section, time: f64) -> Result<Vec<(f64, f64)>> {
    Ok(section_crossings(psi, mesh, section, time)?
        .into_iter()
        .map(|c| (c.distance, c.value))
        .collect())
}

/// Distance `d` with `d^a` equal to the mean of `dist^a` over the triangle,
/// where `dist` is measured to the singular edge or corner of the section.
pub fn mean_power_distance(tri: &Triangle, section: Section, a: f64) -> f64 {
    let (s, u) = section.geometry();
    let dist = |x: &Point3| match section {
        Section::CornerDiagonal => (s - x).norm(),
        _ => (s - x).dot(&u),
    }
    .max(f64::MIN_POSITIVE);
    let pts = TriangleRule::seven_point().on_triangle(tri, 3);
    let area: f64 = pts.iter().map(|p| p.1).sum();
    if a.abs() < 1e-9 {
        (pts.iter().map(|(x, w)| w * dist(x).ln()).sum::<f64>() / area).exp()
    } else {
        (pts.iter().map(|(x, w)| w * dist(x).powf(a)).sum::<f64>() / area).powf(1.0 / a)
    }
}

/// Slope of `log|density|` against `log(distance)` over the fit window.
///
/// The window drops the two samples nearest the singular point and every
/// sample beyond `max_distance`. A piecewise constant is an element mean, so
/// its distance is refined to [`mean_power_distance`] at the fitted exponent
/// until the exponent settles.
pub fn fit_singular_exponent(psi: &DensityHistory, mesh: &Mesh, section: Section, time: f64, max_distance: f64) -> Result<ExponentFit> {
    let crossings = section_crossings(psi, mesh, section, time)?;
    let samples: Vec<(f64, f64)> = crossings.iter().map(|c| (c.distance, c.value)).collect();
    let window = fit_window(&samples, max_distance)?;
    let (mut slope, mut r2) = log_log_fit(window.iter().map(|&i| samples[i]));
    let mut fitted = samples;
    if crossings.iter().any(|c| c.cell.is_some()) {
        for _ in 0..50 {
            for &i in &window {
                if let Some(tri) = &crossings[i].cell {
                    fitted[i].0 = mean_power_distance(tri, section, slope);
                }
            }
            let (next, nr2) = log_log_fit(window.iter().map(|&i| fitted[i]));
            let done = (next - slope).abs() < 1e-8;
            slope = next;
            r2 = nr2;
            if done {
                break;
            }
        }
    }
    let lo = window.iter().map(|&i| fitted[i].0).fold(f64::INFINITY, f64::min);
    let hi = window.iter().map(|&i| fitted[i].0).fold(0.0, f64::max);
    fitted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(ExponentFit { time, section, exponent: slope, window: (lo, hi), r_squared: r2, samples: fitted })
}

/// Indices of the samples inside the fit window.
fn fit_window(samples: &[(f64, f64)], max_distance: f64) -> Result<Vec<usize>> {
    let window: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].0 > 1e-8)
        .skip(2)
        .filter(|&i| samples[i].0 <= max_distance && samples[i].1 != 0.0)
        .collect();
    if window.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window, need 4",
            window.len()
        )));
    }
    Ok(window)
}

fn log_log_fit(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.map(|(d, v)| (d.ln(), v.abs().ln())).unzip();
    let fit = least_squares(&xs, &ys);
    (fit.slope, fit.r_squared)
}

/// Exponent fit of given `(distance, value)` samples, sorted by distance.
pub fn fit_exponent_samples(samples: Vec<(f64, f64)>, section: Section, time: f64, max_distance: f64) -> Result<ExponentFit> {
    let window = fit_window(&samples, max_distance)?;
    let (slope, r2) = log_log_fit(window.iter().map(|&i| samples[i]));
    Ok(ExponentFit {
        time,
        section,
        exponent: slope,
        window: (samples[window[0]].0, samples[window[window.len() - 1]].0),
        r_squared: r2,
        samples,
    })
}

/// One refinement level of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub label: String,
    pub dofs: usize,
    pub h_max: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study_id: String,
    pub protocol: String,
    pub config: serde_json::Value,
    pub rows: Vec<StudyRow>,
    pub fits: BTreeMap<String, RateFit>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn new(study_id: &str, protocol: &str, config: serde_json::Value) -> Self {
        StudyReport {
            study_id: study_id.into(),
            protocol: protocol.into(),
            config,
            rows: Vec::new(),
            fits: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Fit `log(value)` against `log(dofs)` for one column.
    pub fn fit_column(&mut self, column: &str) -> Result<RateFit> {
        let rows: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.values.get(column).map(|v| (r.dofs as f64, *v)))
            .collect();
        let fit = fit_convergence_rate(&rows)?;
        self.fits.insert(column.to_string(), fit);
        Ok(fit)
    }

    /// CSV with one row per level and one column per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut cols: Vec<&String> = self.rows.iter().flat_map(|r| r.values.keys()).collect();
        cols.sort();
        cols.dedup();
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["label".to_string(), "dofs".into(), "h_max".into()];
        head.extend(cols.iter().map(|c| c.to_string()));
        wr.write_record(&head)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone(), r.dofs.to_string(), format!("{:e}", r.h_max)];
            rec.extend(cols.iter().map(|c| r.values.get(*c).map_or(String::new(), |v| format!("{v:e}"))));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Nodes `(k / N)^beta` of a graded mesh on `[0, 1]`.
pub fn graded_interval(n: usize, beta: f64) -> Vec<f64> {
    (0..=n).map(|k| (k as f64 / n as f64).powf(beta)).collect()
}

/// `||y^a - I_h y^a||_{L2(0,1)}` for the piecewise linear interpolant.
pub fn interpolation_error(a: f64, nodes: &[f64]) -> f64 {
    let g = UnitGauss::new(20);
    let f = |y: f64| y.powf(a);
    let mut total = 0.0;
    for (k, w) in nodes.windows(2).enumerate() {
        let (x0, x1) = (w[0], w[1]);
        let (f0, f1) = (f(x0), f(x1));
        let err = |y: f64| {
            let lin = f0 + (f1 - f0) * (y - x0) / (x1 - x0);
            let e = f(y) - lin;
            e * e
        };
        total += if k == 0 && x0 == 0.0 {
            // y = x1 s^2 removes the singular derivative at the origin
            g.integrate(0.0, 1.0, 4, |s| err(x1 * s * s) * 2.0 * x1 * s)
        } else {
            g.integrate(x0, x1, 1, err)
        };
    }
    total.sqrt()
}

/// Empirical interpolation rates of `y^a` on graded 1D meshes.
pub fn interpolation_lemma_study(a: f64, beta: f64, levels: &[usize]) -> Result<StudyReport> {
    if !(a > 0.0) || !(beta >= 1.0) {
        return Err(Error::InvalidParameter("need a > 0 and beta >= 1".into()));
    }
    let predicted = (beta * (a + 0.5)).min(2.0);
    let mut rep = StudyReport::new(
        "interp",
        "L2(0,1) error of the piecewise linear interpolant of y^a on (k/N)^beta nodes",
        serde_json::json!({ "a": a, "beta": beta, "levels": levels }),
    );
    for &n in levels {
        if n == 0 {
            return Err(Error::InvalidParameter("levels must be positive".into()));
        }
        let nodes = graded_interval(n, beta);
        let h_max = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let mut values = BTreeMap::new();
        values.insert("l2_error".into(), interpolation_error(a, &nodes));
        rep.rows.push(StudyRow { label: format!("N={n}"), dofs: n, h_max, values });
    }
    let fit = rep.fit_column("l2_error")?;
    rep.notes.push(format!("rate {:.4} vs predicted min(beta (a + 1/2), 2) = {predicted}", -fit.slope));
    Ok(rep)
}

/// `2 pi f L / c`: angular frequency in units where the wave speed is one.
pub fn hz_to_omega(f_hz: f64, speed_of_sound: f64, length_unit: f64) -> f64 {
    2.0 * PI * f_hz * length_unit / speed_of_sound
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub delta_l_db: Vec<f64>,
    pub scattered_abs: Vec<f64>,
    pub incident_abs: Vec<f64>,
}

impl Spectrum {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["omega", "delta_l_db", "scattered_abs", "incident_abs"])?;
        for i in 0..self.omega.len() {
            wr.serialize((self.omega[i], self.delta_l_db[i], self.scattered_abs[i], self.incident_abs[i]))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Linear interpolation of `delta_l_db` at `w`.
    pub fn db_at(&self, w: f64) -> f64 {
        let k = self.omega.partition_point(|&o| o < w);
        if k == 0 {
            return self.delta_l_db[0];
        }
        if k >= self.omega.len() {
            return *self.delta_l_db.last().unwrap();
        }
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let s = (w - w0) / (w1 - w0);
        (1.0 - s) * self.delta_l_db[k - 1] + s * self.delta_l_db[k]
    }
}

/// `p_hat(w) = dt sum_n p(t_n) e^{-i w t_n}` on the FFT bins of the
/// zero-padded series.
pub fn scattered_spectrum(series: &[f64], dt: f64) -> (Vec<f64>, Vec<Complex64>) {
    let n = series.len().next_power_of_two().max(2);
    let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let omega = (0..=n / 2).map(|k| 2.0 * PI * k as f64 / (n as f64 * dt)).collect();
    let vals = buf[..=n / 2].iter().map(|z| z * dt).collect();
    (omega, vals)
}

/// Amplification `20 log10(|p_hat + p_inc| / |p_inc|)` over `band`.
///
/// `series[k]` is the scattered pressure at `t_k = k dt`, `k >= 0`.
pub fn amplification_spectrum(series: &[f64], dt: f64, y_src: &[f64; 3], x_fp: &[f64; 3], band: (f64, f64)) -> Result<Spectrum> {
    if series.is_empty() || !(dt > 0.0) {
        return Err(Error::InvalidParameter("empty scattered series".into()));
    }
    let (omega, p) = scattered_spectrum(series, dt);
    let keep: Vec<usize> = (0..omega.len()).filter(|&k| omega[k] >= band.0 && omega[k] <= band.1).collect();
    if keep.is_empty() {
        return Err(Error::InsufficientData("no frequency bin inside the band".into()));
    }
    let ws: Vec<f64> = keep.iter().map(|&k| omega[k]).collect();
    let inc = incident_point_source(y_src, &[*x_fp], &ws)?.remove(0);
    let mut out = Spectrum { omega: ws, delta_l_db: Vec::new(), scattered_abs: Vec::new(), incident_abs: Vec::new() };
    for (j, &k) in keep.iter().enumerate() {
        let total = p[k] + inc[j];
        out.delta_l_db.push(20.0 * (total.norm() / inc[j].norm()).log10());
        out.scattered_abs.push(p[k].norm());
        out.incident_abs.push(inc[j].norm());
    }
    Ok(out)
}

/// Ratio of the mean spectral difference near the peaks of `reference` to
/// the mean difference away from them.
///
/// Peaks are local maxima of `reference`; bins within `half_width` of a peak
/// form the peak band.
pub fn peak_band_contrast(reference: &Spectrum, others: &[&Spectrum], half_width: f64) -> Result<(f64, f64)> {
    let db = &reference.delta_l_db;
    let w = &reference.omega;
    let peaks: Vec<f64> = (1..db.len().saturating_sub(1))
        .filter(|&k| db[k] > db[k - 1] && db[k] >= db[k + 1])
        .map(|k| w[k])
        .collect();
    if peaks.is_empty() {
        return Err(Error::InsufficientData("reference spectrum has no interior peak".into()));
    }
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for s in others {
        for (k, &wk) in w.iter().enumerate() {
            let d = (s.db_at(wk) - db[k]).abs();
            if peaks.iter().any(|p| (p - wk).abs() <= half_width) {
                on += d;
                n_on += 1;
            } else {
                off += d;
                n_off += 1;
            }
        }
    }
    if n_on == 0 || n_off == 0 {
        return Err(Error::InsufficientData("peak band or off-peak band is empty".into()));
    }
    Ok((on / n_on as f64, off / n_off as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::OperatorId;
    use crate::geometry::graded_square_mesh;
    use crate::mot::HistoryHeader;

    fn p0_history(mesh: &Mesh, dt: f64, steps: usize, f: impl Fn(usize, &Triangle) -> f64) -> DensityHistory {
        let tris = mesh.triangles_geom();
        DensityHistory {
            header: HistoryHeader {
                operator: OperatorId::SingleLayer,
                dt,
                n_steps: steps,
                size: tris.len(),
                mesh_hash: String::new(),
                basis: TemporalBasis::PiecewiseConstant,
                dofs: (0..tris.len()).map(Dof::Triangle).collect(),
                blocks: None,
                config_hash: None,
            },
            coefficients: (1..=steps).map(|n| tris.iter().map(|t| f(n, t)).collect()).collect(),
            residuals: vec![0.0; steps],
        }
    }

    #[test]
    fn exact_power_laws() {
        let rows: Vec<(f64, f64)> = [10.0, 40.0, 160.0, 640.0].iter().map(|&d: &f64| (d, 3.0 * d.powf(-0.5))).collect();
        assert!((fit_convergence_rate(&rows).unwrap().slope + 0.5).abs() < 1e-12);
        let rows: Vec<(f64, f64)> = [10.0, 40.0, 160.0].iter().map(|&d: &f64| (d, d.recip())).collect();
        assert!((fit_convergence_rate(&rows).unwrap().slope + 1.0).abs() < 1e-12);
        assert!(fit_convergence_rate(&rows[..2]).is_err());
        assert!(fit_convergence_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn l2_error_of_unit_density() {
        let mesh = graded_square_mesh(2, 2.0).unwrap();
        let one = p0_history(&mesh, 0.1, 10, |_, _| 1.0);
        let zero = p0_history(&mesh, 0.1, 10, |_, _| 0.0);
        assert!((l2_spacetime_error((&one, &mesh), (&zero, &mesh), 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(l2_spacetime_error((&one, &mesh), (&one, &mesh), 1.0).unwrap(), 0.0);
        let fine = graded_square_mesh(3, 1.0).unwrap();
        let one_f = p0_history(&fine, 0.1, 10, |_, _| 1.0);
        assert!(l2_spacetime_error((&one, &mesh), (&one_f, &fine), 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn synthetic_edge_exponent() {
        let mesh = graded_square_mesh(16, 2.0).unwrap();
        let h = p0_history(&mesh, 0.1, 3, |_, t| {
            let c = t.centroid();
            (1.0 - c.x).powf(-0.5)
        });
        let fit = fit_singular_exponent(&h, &mesh, Section::EdgeY0, 0.25, 0.3).unwrap();
        assert!((fit.exponent + 0.5).abs() < 0.01, "{}", fit.exponent);
        let mut scaled = h.clone();
        scaled.coefficients.iter_mut().flatten().for_each(|v| *v *= 7.0);
        let fit2 = fit_singular_exponent(&scaled, &mesh, Section::EdgeY0, 0.25, 0.3).unwrap();
        assert!((fit.exponent - fit2.exponent).abs() < 1e-12);
        let corner = p0_history(&mesh, 0.1, 3, |_, t| {
            let c = t.centroid();
            ((1.0 - c.x).powi(2) + (1.0 - c.y).powi(2)).sqrt().powf(-0.7)
        });
        let fit = fit_singular_exponent(&corner, &mesh, Section::CornerDiagonal, 0.25, 0.3).unwrap();
        assert!((fit.exponent + 0.7).abs() < 0.03, "{}", fit.exponent);
    }

    #[test]
    fn element_means_recover_exponent() {
        let mesh = graded_square_mesh(12, 2.0).unwrap();
        let mean = |t: &Triangle, f: &dyn Fn(&Point3) -> f64| {
            let pts = TriangleRule::collapsed_gauss(12).on_triangle(t, 2);
            pts.iter().map(|(x, w)| w * f(x)).sum::<f64>() / t.area
        };
        let edge = p0_history(&mesh, 0.1, 3, |_, t| mean(t, &|x| (1.0 - x.x).max(1e-300).powf(-0.5)));
        let centroid_fit = fit_exponent_samples(
            section_samples(&edge, &mesh, Section::EdgeY0, 0.25).unwrap(),
            Section::EdgeY0,
            0.25,
            0.1,
        )
        .unwrap();
        let fit = fit_singular_exponent(&edge, &mesh, Section::EdgeY0, 0.25, 0.1).unwrap();
        assert!((fit.exponent + 0.5).abs() < 2e-3, "{}", fit.exponent);
        assert!((fit.exponent + 0.5).abs() < (centroid_fit.exponent + 0.5).abs());
        let corner = p0_history(&mesh, 0.1, 3, |_, t| {
            mean(t, &|x| ((1.0 - x.x).powi(2) + (1.0 - x.y).powi(2)).sqrt().max(1e-300).powf(-0.7))
        });
        let fit = fit_singular_exponent(&corner, &mesh, Section::CornerDiagonal, 0.25, 0.3).unwrap();
        assert!((fit.exponent + 0.7).abs() < 0.01, "{}", fit.exponent);
    }

    #[test]
    fn interpolation_rates() {
        for (a, beta, want) in [(0.5, 2.0, 2.0), (0.5, 1.0, 1.0), (2.0, 1.0, 2.0)] {
            let rep = interpolation_lemma_study(a, beta, &[16, 32, 64, 128]).unwrap();
            let rate = -rep.fits["l2_error"].slope;
            assert!((rate - want).abs() < 0.15, "a={a} beta={beta} rate={rate}");
        }
    }

    #[test]
    fn zero_scatter_gives_zero_db() {
        let s = amplification_spectrum(&[0.0; 300], 0.01, &[0.08, 0.0, 0.0], &[1.0, 0.0, 0.0], (3.0, 40.0)).unwrap();
        assert!(s.delta_l_db.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn spectrum_of_delayed_pulse() {
        let dt = 0.01;
        let mut series = vec![0.0; 512];
        series[100] = 1.0 / dt;
        let (w, p) = scattered_spectrum(&series, dt);
        for k in [3, 17, 40] {
            let expect = Complex64::from_polar(1.0, -w[k] * 1.0);
            assert!((p[k] - expect).norm() < 1e-12);
        }
        // doubling a dominant scattered field adds 20 log10 2
        let big: Vec<f64> = series.iter().map(|v| v * 1e3).collect();
        let big2: Vec<f64> = big.iter().map(|v| v * 2.0).collect();
        let a = amplification_spectrum(&big, dt, &[0.08, 0.0, 0.0], &[1.0, 0.0, 0.0], (3.0, 40.0)).unwrap();
        let b = amplification_spectrum(&big2, dt, &[0.08, 0.0, 0.0], &[1.0, 0.0, 0.0], (3.0, 40.0)).unwrap();
        for (x, y) in a.delta_l_db.iter().zip(&b.delta_l_db) {
            assert!((y - x - 20.0 * 2f64.log10()).abs() < 0.01);
        }
    }
}
