//! Single layer, hypersingular, DtN and half-space adjoint double layer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pairs::{accumulate, Entry, FlatPairEngine};
use super::{Dof, LagMatrixSequence, LocalTerm, OperatorId, ShellTerm};
use crate::error::{Error, Result};
use crate::geometry::{mesh_diameter, Mesh, Triangle};
use crate::quadrature::{
    triangle_distance, triangle_max_distance, PolarFrame, QuadratureRule, UnitGauss,
};
use crate::sparse::CsrMatrix;
use crate::timegrid::{lag_cutoff_for, TimeGrid};

const FOUR_PI: f64 = 4.0 * PI;

/// Assembly settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyOptions {
    pub quadrature: QuadratureRule,
    /// Soft cap on stored matrix memory; exceeding it logs a warning.
    pub memory_budget_bytes: Option<u64>,
    /// Turn the warning into an error.
    pub enforce_budget: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            quadrature: QuadratureRule::default(),
            memory_budget_bytes: Some(3 << 30),
            enforce_budget: false,
        }
    }
}

/// Rough estimate of the peak bytes needed for the lag matrices, including
/// the transient triplet buffers of the assembly.
pub fn estimate_memory(mesh: &Mesh, grid: &TimeGrid, operator: OperatorId) -> u64 {
    let nt = mesh.num_triangles() as f64;
    let nn = mesh.num_nodes() as f64;
    let diam = mesh_diameter(mesh);
    let shells = shell_count(diam, grid) as f64;
    let h_mean = (mesh.total_area() / nt.max(1.0)).sqrt() * 1.5;
    // lags touched by one pair of dofs: triangles for constants, node
    // patches for linears
    let (dof_pairs, reach) = match operator {
        OperatorId::SingleLayer | OperatorId::HornAdjointDL => (nt * nt, 2.0 * h_mean),
        OperatorId::Hypersingular => (nn * nn, 4.0 * h_mean),
        OperatorId::DtN => (2.0 * nn * nn, 4.0 * h_mean),
    };
    let lags = (reach / grid.dt + 3.0).min(shells + 2.0);
    // 16 bytes per stored entry, about as much again while compacting
    (dof_pairs * lags * 32.0) as u64
}

fn shell_count(diam: f64, grid: &TimeGrid) -> usize {
    // shells beyond the diameter are empty, and lags beyond the horizon are
    // never used by the march
    ((diam / grid.dt).floor() as usize + 1).min(grid.n_steps)
}

fn check_budget(mesh: &Mesh, grid: &TimeGrid, op: OperatorId, opts: &AssemblyOptions) -> Result<()> {
    if let Some(budget) = opts.memory_budget_bytes {
        let est = estimate_memory(mesh, grid, op);
        if est > budget {
            log::warn!(
                "{}: estimated {} MB of lag matrices exceeds the budget of {} MB",
                op.name(),
                est >> 20,
                budget >> 20
            );
            if opts.enforce_budget {
                return Err(Error::MemoryBudget {
                    estimate_bytes: est,
                    budget_bytes: budget,
                });
            }
        }
    }
    Ok(())
}

fn require_flat(mesh: &Mesh) -> Result<()> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !mesh.is_flat() {
        return Err(Error::NonFlatMesh);
    }
    Ok(())
}

/// Piecewise constant single layer operator.
///
/// Family `S^l = int_{E_l} 1/|x-y|` with lag weights `A^k = (S^{k-1} - S^k) / 4 pi`.
pub fn assemble_single_layer(
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: &AssemblyOptions,
) -> Result<LagMatrixSequence> {
    require_flat(mesh)?;
    opts.quadrature.validate()?;
    check_budget(mesh, grid, OperatorId::SingleLayer, opts)?;
    let tris = mesh.triangles_geom();
    let nt = tris.len();
    let diam = mesh_diameter(mesh);
    let n_shells = shell_count(diam, grid);
    let engine = FlatPairEngine::new(&tris, grid.dt, n_shells, &opts.quadrature, false, 0);
    let shells = accumulate(nt, n_shells, nt, nt, |a, out: &mut Vec<Entry>| {
        for b in a..nt {
            if let Some(pm) = engine.pair(a, b) {
                for s in 0..pm.n_shells {
                    let v = pm.get(s, 0, 0, 0);
                    if v == 0.0 {
                        continue;
                    }
                    let l = (pm.l0 + s) as u32;
                    out.push((l, a as u32, b as u32, v));
                    if a != b {
                        out.push((l, b as u32, a as u32, v));
                    }
                }
            }
        }
    });
    Ok(LagMatrixSequence {
        operator: OperatorId::SingleLayer,
        size: nt,
        dt: grid.dt,
        lag_cutoff: lag_cutoff_for(diam, grid.dt),
        dofs: (0..nt).map(Dof::Triangle).collect(),
        terms: vec![ShellTerm {
            label: "S",
            row_offset: 0,
            col_offset: 0,
            weights: vec![-1.0 / FOUR_PI, 1.0 / FOUR_PI],
            shells,
        }],
        local: Vec::new(),
    })
}

/// Lag weights of the hypersingular operator, family by family.
///
/// Rows: normal term (hat-hat `sigma^0` moments), then gradient term
/// `sigma^0, sigma^1, sigma^2` moments. Column `m` is the weight in the
/// system matrix of lag `l + m`.
pub(crate) fn hypersingular_weights(dt: f64) -> [[f64; 3]; 4] {
    let n = 1.0 / (FOUR_PI * dt);
    let g = dt / FOUR_PI;
    [
        [n, -2.0 * n, n],
        [0.5 * g, 0.5 * g, 0.0],
        [-g, g, 0.0],
        [0.5 * g, -g, 0.5 * g],
    ]
}

/// Lag weights of the single layer with hat ansatz in time, tested with the
/// derivative of piecewise constants: rows `sigma^0`, `sigma^1` hat-hat moments.
pub(crate) fn hat_single_layer_weights() -> [[f64; 3]; 2] {
    [
        [-1.0 / FOUR_PI, 1.0 / FOUR_PI, 0.0],
        [1.0 / FOUR_PI, -2.0 / FOUR_PI, 1.0 / FOUR_PI],
    ]
}

/// Lag-matrix entries produced by one pair block for P1 bases: shell `l`
/// contributes to lags `l, l + 1, l + 2`. `rows_a`/`cols_b` and
/// `vrows_a`/`vcols_b` send local vertices to dof rows of the hypersingular
/// and single layer blocks (or `None`).
#[allow(clippy::too_many_arguments)]
fn push_p1_pair(
    out: &mut Vec<Entry>,
    pm: &super::pairs::PairMoments,
    ta: &Triangle,
    tb: &Triangle,
    rows_a: [Option<u32>; 3],
    cols_b: [Option<u32>; 3],
    vrows_a: [Option<u32>; 3],
    vcols_b: [Option<u32>; 3],
    wts: &[[f64; 3]; 4],
    vwts: &[[f64; 3]; 2],
    mirror: bool,
    n_lags: usize,
) {
    let ga = ta.basis_gradients();
    let gb = tb.basis_gradients();
    let need_v = vrows_a.iter().any(|r| r.is_some());
    let mut wblk = vec![[[0.0; 3]; 3]; pm.n_shells + 2];
    let mut vblk = vec![[[0.0; 3]; 3]; if need_v { pm.n_shells + 2 } else { 0 }];
    for s in 0..pm.n_shells {
        // constant-constant sigma^j moments
        let mut cc = [0.0; 3];
        for (j, c) in cc.iter_mut().enumerate().take(pm.nj) {
            for oa in 0..3 {
                for ib in 0..3 {
                    *c += pm.get(s, oa, ib, j);
                }
            }
        }
        for oa in 0..3 {
            for ib in 0..3 {
                let gg = ga[oa].dot(&gb[ib]);
                let n0 = pm.get(s, oa, ib, 0);
                for m in 0..3 {
                    wblk[s + m][oa][ib] +=
                        wts[0][m] * n0 + gg * (wts[1][m] * cc[0] + wts[2][m] * cc[1] + wts[3][m] * cc[2]);
                }
                if need_v {
                    let m1 = pm.get(s, oa, ib, 1);
                    for m in 0..3 {
                        vblk[s + m][oa][ib] += vwts[0][m] * n0 + vwts[1][m] * m1;
                    }
                }
            }
        }
    }
    let mut emit = |blk: &[[[f64; 3]; 3]], rows: &[Option<u32>; 3], cols: &[Option<u32>; 3]| {
        for (i, b) in blk.iter().enumerate() {
            let k = pm.l0 + i;
            if k >= n_lags {
                break;
            }
            for oa in 0..3 {
                for ib in 0..3 {
                    let v = b[oa][ib];
                    if let (Some(r), Some(c)) = (rows[oa], cols[ib]) {
                        if v != 0.0 {
                            out.push((k as u32, r, c, v));
                            if mirror {
                                out.push((k as u32, c, r, v));
                            }
                        }
                    }
                }
            }
        }
    };
    emit(&wblk, &rows_a, &cols_b);
    if need_v {
        emit(&vblk, &vrows_a, &vcols_b);
    }
}

/// Combined lag matrices `A^k` of the P1 shell families.
fn p1_lag_matrices(
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: &AssemblyOptions,
    w_dof: &[Option<u32>],
    v_dof: &[Option<u32>],
    size: usize,
) -> Vec<CsrMatrix> {
    let tris = mesh.triangles_geom();
    let nt = tris.len();
    let n_shells = shell_count(mesh_diameter(mesh), grid);
    // lags at or beyond the horizon never enter the march
    let n_lags = (n_shells + 2).min(grid.n_steps.max(1));
    let need_v = v_dof.iter().any(|d| d.is_some());
    let jmax = 2;
    let engine = FlatPairEngine::new(&tris, grid.dt, n_shells, &opts.quadrature, true, jmax);
    let wts = hypersingular_weights(grid.dt);
    let vwts = hat_single_layer_weights();
    let map = |t: usize, dofs: &[Option<u32>]| -> [Option<u32>; 3] {
        let tri = mesh.triangles[t];
        [dofs[tri[0]], dofs[tri[1]], dofs[tri[2]]]
    };
    let none = [None; 3];
    accumulate(nt, n_lags, size, size, |a, out: &mut Vec<Entry>| {
        for b in a..nt {
            if let Some(pm) = engine.pair(a, b) {
                let (va, vb) = if need_v { (map(a, v_dof), map(b, v_dof)) } else { (none, none) };
                push_p1_pair(
                    out,
                    &pm,
                    &tris[a],
                    &tris[b],
                    map(a, w_dof),
                    map(b, w_dof),
                    va,
                    vb,
                    &wts,
                    &vwts,
                    a != b,
                    n_lags,
                );
            }
        }
    })
}

fn lag_term(label: &'static str, lags: Vec<CsrMatrix>) -> ShellTerm {
    ShellTerm { label, row_offset: 0, col_offset: 0, weights: vec![1.0], shells: lags }
}

/// Hypersingular operator with continuous piecewise linears vanishing on the
/// boundary, hat functions in time, tested with piecewise constants in time.
pub fn assemble_hypersingular(
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: &AssemblyOptions,
) -> Result<LagMatrixSequence> {
    require_flat(mesh)?;
    opts.quadrature.validate()?;
    check_budget(mesh, grid, OperatorId::Hypersingular, opts)?;
    let interior = mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::InvalidParameter("mesh has no interior nodes".into()));
    }
    let mut w_dof = vec![None; mesh.num_nodes()];
    for (k, &n) in interior.iter().enumerate() {
        w_dof[n] = Some(k as u32);
    }
    let v_dof = vec![None; mesh.num_nodes()];
    let size = interior.len();
    let lags = p1_lag_matrices(mesh, grid, opts, &w_dof, &v_dof, size);
    let diam = mesh_diameter(mesh);
    Ok(LagMatrixSequence {
        operator: OperatorId::Hypersingular,
        size,
        dt: grid.dt,
        // the hat ansatz reaches one step further back than piecewise constants
        lag_cutoff: lag_cutoff_for(diam, grid.dt) + 1,
        dofs: interior.into_iter().map(Dof::Node).collect(),
        terms: vec![lag_term("W", lags)],
        local: Vec::new(),
    })
}

/// Consistent P1 mass matrix `int xi_i xi_j` restricted to the given row and
/// column dof maps.
fn p1_mass(mesh: &Mesh, rows: &[Option<u32>], cols: &[Option<u32>], nr: usize, nc: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for (i, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle(i).area;
        for a in 0..3 {
            for b in 0..3 {
                if let (Some(r), Some(c)) = (rows[tri[a]], cols[tri[b]]) {
                    let v = if a == b { area / 6.0 } else { area / 12.0 };
                    t.push((r as usize, c as usize, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(nr, nc, &t)
}

/// Block system for the Dirichlet-to-Neumann equation on a flat screen.
///
/// Unknowns per step: `phi` on interior nodes followed by `psi` on all
/// nodes, both hat functions in time. The first block row is the
/// hypersingular equation tested with piecewise constants in time, the
/// second the single layer equation tested with time derivatives of
/// piecewise constants; `K = K' = 0` leaves `1/2` mass couplings.
pub fn assemble_dtn_blocks(
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: &AssemblyOptions,
) -> Result<LagMatrixSequence> {
    require_flat(mesh)?;
    opts.quadrature.validate()?;
    check_budget(mesh, grid, OperatorId::DtN, opts)?;
    let interior = mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::InvalidParameter("mesh has no interior nodes".into()));
    }
    let ni = interior.len();
    let na = mesh.num_nodes();
    let size = ni + na;
    let mut w_dof = vec![None; na];
    for (k, &n) in interior.iter().enumerate() {
        w_dof[n] = Some(k as u32);
    }
    let v_dof: Vec<Option<u32>> = (0..na).map(|n| Some((ni + n) as u32)).collect();
    let lags = p1_lag_matrices(mesh, grid, opts, &w_dof, &v_dof, size);

    let all: Vec<Option<u32>> = (0..na).map(|n| Some(n as u32)).collect();
    let m_ia = p1_mass(mesh, &w_dof, &all, ni, na);
    let m_ai = m_ia.transpose();
    let scaled = |m: &CsrMatrix, s: f64| {
        let mut c = m.clone();
        c.values.iter_mut().for_each(|v| *v *= s);
        c
    };
    let c_phi_psi = scaled(&m_ia, 0.25 * grid.dt);
    let local = vec![
        LocalTerm { lag: 0, row_offset: 0, col_offset: ni, matrix: c_phi_psi.clone() },
        LocalTerm { lag: 1, row_offset: 0, col_offset: ni, matrix: c_phi_psi },
        LocalTerm { lag: 0, row_offset: ni, col_offset: 0, matrix: scaled(&m_ai, 0.5) },
        LocalTerm { lag: 1, row_offset: ni, col_offset: 0, matrix: scaled(&m_ai, -0.5) },
    ];
    let mut dofs: Vec<Dof> = interior.into_iter().map(Dof::Node).collect();
    dofs.extend((0..na).map(Dof::Node));
    Ok(LagMatrixSequence {
        operator: OperatorId::DtN,
        size,
        dt: grid.dt,
        lag_cutoff: lag_cutoff_for(mesh_diameter(mesh), grid.dt) + 1,
        dofs,
        terms: vec![lag_term("D", lags)],
        local,
    })
}

/// `-I + K'` for the half-space Green's function with piecewise constants
/// in space and time.
///
/// Per shell `l` three moments are integrated (direct and image):
/// `P0 = int n_x.(y-x)/R^3`, `P1 = int sigma n_x.(y-x)/R^3` and
/// `Q = int n_x.(y-x)/R^2`. The stored lag-`k` matrix is
/// `[dt (P0^k - P1^k + P1^{k-1}) + Q^k - Q^{k-1}] / 2 pi`.
pub fn assemble_adjoint_double_layer_halfspace(
    mesh: &Mesh,
    grid: &TimeGrid,
    opts: &AssemblyOptions,
) -> Result<LagMatrixSequence> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    opts.quadrature.validate()?;
    check_budget(mesh, grid, OperatorId::HornAdjointDL, opts)?;
    let tris = mesh.triangles_geom();
    let images: Vec<Triangle> = tris.iter().map(|t| t.reflected()).collect();
    let nt = tris.len();
    let dt = grid.dt;
    // the image mesh is farther away; its diameter bounds the shell range
    let mut diam = mesh_diameter(mesh);
    for a in &tris {
        for b in &images {
            diam = diam.max(triangle_max_distance(a, b));
        }
    }
    let n_shells = ((diam / dt).floor() as usize + 1).min(grid.n_steps);
    let ang = UnitGauss::new(opts.quadrature.angular_order);
    let rad = UnitGauss::new(opts.quadrature.radial_order);
    let rule = &opts.quadrature;
    let inv2pi = 1.0 / (2.0 * PI);
    let n_lags = (n_shells + 1).min(grid.n_steps.max(1));

    let lags = accumulate(nt, n_lags, nt, nt, |a, out: &mut Vec<Entry>| {
        let ta = &tris[a];
        let mut acc: Vec<[f64; 3]> = Vec::new();
        for b in 0..nt {
            for (mirrored, tb) in [(false, &tris[b]), (true, &images[b])] {
                if !mirrored && a == b {
                    // n_x . (y - x) vanishes on the own plane
                    continue;
                }
                let dist = triangle_distance(ta, tb);
                let dmax = triangle_max_distance(ta, tb);
                let l0 = (dist / dt).floor() as usize;
                let l1 = ((dmax / dt).floor() as usize).min(n_shells.saturating_sub(1));
                if l0 > l1 {
                    continue;
                }
                acc.clear();
                acc.resize(l1 - l0 + 1, [0.0; 3]);
                for (x, wx) in rule.outer_points(ta, tb, dist) {
                    let frame = PolarFrame::new(&x, tb);
                    for (s, slot) in acc.iter_mut().enumerate() {
                        let l = l0 + s;
                        let r_lo = l as f64 * dt;
                        frame.visit_shell(r_lo, r_lo + dt, &ang, &rad, |y, r, w| {
                            let k = ta.normal.dot(&(y - x)) / (r * r);
                            let sigma = (r - r_lo) / dt;
                            let wk = wx * w * k;
                            slot[0] += wk / r;
                            slot[1] += wk * sigma / r;
                            slot[2] += wk;
                        });
                    }
                }
                for (s, m) in acc.iter().enumerate() {
                    let l = l0 + s;
                    let f0 = inv2pi * (dt * (m[0] - m[1]) + m[2]);
                    let f1 = inv2pi * (dt * m[1] - m[2]);
                    if f0 != 0.0 {
                        out.push((l as u32, a as u32, b as u32, f0));
                    }
                    if f1 != 0.0 && l + 1 < n_lags {
                        out.push((l as u32 + 1, a as u32, b as u32, f1));
                    }
                }
            }
        }
    });
    let identity = CsrMatrix::from_triplets(
        nt,
        nt,
        &(0..nt).map(|i| (i, i, -dt * tris[i].area)).collect::<Vec<_>>(),
    );
    Ok(LagMatrixSequence {
        operator: OperatorId::HornAdjointDL,
        size: nt,
        dt,
        lag_cutoff: lag_cutoff_for(diam, dt),
        dofs: (0..nt).map(Dof::Triangle).collect(),
        terms: vec![lag_term("K", lags)],
        local: vec![LocalTerm { lag: 0, row_offset: 0, col_offset: 0, matrix: identity }],
    })
}
