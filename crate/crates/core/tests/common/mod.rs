//! Dense space-time Galerkin oracle.
//!
//! Builds the full block lower-triangular matrix entry by entry from the
//! weak forms: every time integral is evaluated pointwise in `R = |x - y|`
//! from the temporal basis functions, independently of the lag weight
//! tables used by the assembly. Spatial quadrature nodes come from the same
//! outer rule and polar inner rule as the production code so that the
//! comparison isolates the time discretization and the bookkeeping.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use tdbem::assembly::OperatorId;
use tdbem::geometry::{Mesh, Point3, ScreenKind, Triangle};
use tdbem::mot::DensityHistory;
use tdbem::quadrature::{triangle_distance, PolarFrame, QuadratureRule, TriangleRule, UnitGauss};
use tdbem::timegrid::{TemporalBasis, TimeGrid};

/// Square `[-1, 1]^2` split into four triangles around the centre node.
pub fn four_triangle_square() -> Mesh {
    let nodes = vec![
        Point3::new(-1.0, -1.0, 0.0),
        Point3::new(1.0, -1.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(-1.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 0.0),
    ];
    let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    Mesh::new(nodes, tris, vec![0, 1, 2, 3], 1.0, 1, ScreenKind::Square)
}

/// Two triangles forming `[0, 1]^2`.
pub fn two_triangle_square() -> Mesh {
    let nodes = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    Mesh::new(nodes, vec![[0, 1, 2], [0, 2, 3]], vec![0, 1, 2, 3], 1.0, 1, ScreenKind::Square)
}

/// One quadrature node of a triangle pair.
struct Node {
    r: f64,
    w: f64,
    la: [f64; 3],
    lb: [f64; 3],
}

fn pair_nodes(ta: &Triangle, tb: &Triangle, same: bool, grid: &TimeGrid, rule: &QuadratureRule) -> Vec<Node> {
    let ang = UnitGauss::new(rule.angular_order);
    let rad = UnitGauss::new(rule.radial_order);
    let dist = if same { 0.0 } else { triangle_distance(ta, tb) };
    let mut out = Vec::new();
    for (x, wx) in rule.outer_points(ta, tb, dist) {
        let la = ta.barycentric(&x);
        let frame = PolarFrame::new(&x, tb);
        // one shell per step keeps every node away from a kink in time
        for l in 0..grid.n_steps {
            let r0 = l as f64 * grid.dt;
            frame.visit_shell(r0, r0 + grid.dt, &ang, &rad, |y, r, w| {
                out.push(Node { r, w: wx * w, la, lb: tb.barycentric(y) });
            });
        }
    }
    out
}

fn hat(grid: &TimeGrid, m: usize, t: f64) -> f64 {
    TemporalBasis::PiecewiseLinearHat.eval(grid, m, t)
}

fn indicator(grid: &TimeGrid, m: usize, t: f64) -> f64 {
    TemporalBasis::PiecewiseConstant.eval(grid, m, t)
}

/// Derivative of the hat centred at `t_m`.
fn hat_dot(grid: &TimeGrid, m: usize, t: f64) -> f64 {
    let s = t / grid.dt - m as f64;
    if s > -1.0 && s < 0.0 {
        1.0 / grid.dt
    } else if s > 0.0 && s < 1.0 {
        -1.0 / grid.dt
    } else {
        0.0
    }
}

/// `int_{t_{n-1}}^{t_n} hat_m(t - r) dt`, exact by splitting at the kinks.
fn hat_window(grid: &TimeGrid, m: usize, n: usize, r: f64) -> f64 {
    let a = grid.t(n - 1);
    let b = grid.t(n);
    let mut cuts = vec![a, b];
    for k in [m as f64 - 1.0, m as f64, m as f64 + 1.0] {
        let c = k * grid.dt + r;
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (hat(grid, m, w[0] - r) + hat(grid, m, w[1] - r)))
        .sum()
}

fn gradients(t: &Triangle) -> [Point3; 3] {
    t.basis_gradients()
}

/// Dense space-time matrix for `n_steps` steps.
pub fn dense_matrix(mesh: &Mesh, grid: &TimeGrid, op: OperatorId, rule: &QuadratureRule) -> DMatrix<f64> {
    let tris = mesh.triangles_geom();
    let nt = tris.len();
    let ns = grid.n_steps;
    let interior = mesh.interior_nodes();
    let na = mesh.num_nodes();
    let mut w_dof = vec![None; na];
    for (k, &v) in interior.iter().enumerate() {
        w_dof[v] = Some(k);
    }
    let ni = interior.len();
    let size = match op {
        OperatorId::SingleLayer => nt,
        OperatorId::Hypersingular => ni,
        OperatorId::DtN => ni + na,
        OperatorId::HornAdjointDL => panic!("not covered by the flat oracle"),
    };
    let mut d = DMatrix::zeros(size * ns, size * ns);
    let c4 = 1.0 / (4.0 * PI);

    for a in 0..nt {
        for b in a..nt {
            let nodes = pair_nodes(&tris[a], &tris[b], a == b, grid, rule);
            let ga = gradients(&tris[a]);
            let gb = gradients(&tris[b]);
            for n in 1..=ns {
                for m in 1..=ns {
                    let tn = grid.t(n);
                    let tp = grid.t(n - 1);
                    // block[oa][ib] for the two P1 operators, [0][0] for P0
                    let mut wblk = [[0.0; 3]; 3];
                    let mut vblk = [[0.0; 3]; 3];
                    let mut sl = 0.0;
                    for q in &nodes {
                        let inv = q.w / q.r;
                        match op {
                            OperatorId::SingleLayer => {
                                sl += inv * c4 * (indicator(grid, m, tp - q.r) - indicator(grid, m, tn - q.r));
                            }
                            _ => {
                                let normal = -c4 * (hat_dot(grid, m, tp - q.r) - hat_dot(grid, m, tn - q.r));
                                let grad = c4 * hat_window(grid, m, n, q.r);
                                let vtime = c4 * (hat(grid, m, tp - q.r) - hat(grid, m, tn - q.r));
                                for oa in 0..3 {
                                    for ib in 0..3 {
                                        let ll = q.la[oa] * q.lb[ib];
                                        wblk[oa][ib] += inv * (normal * ll + grad * ga[oa].dot(&gb[ib]));
                                        vblk[oa][ib] += inv * vtime * ll;
                                    }
                                }
                            }
                        }
                    }
                    let row0 = (n - 1) * size;
                    let col0 = (m - 1) * size;
                    let mut put = |r: usize, c: usize, v: f64, mirror: bool| {
                        d[(row0 + r, col0 + c)] += v;
                        if mirror {
                            d[(row0 + c, col0 + r)] += v;
                        }
                    };
                    if op == OperatorId::SingleLayer {
                        put(a, b, sl, a != b);
                        continue;
                    }
                    if a == b {
                        for oa in 0..3 {
                            for ib in (oa + 1)..3 {
                                let s = 0.5 * (wblk[oa][ib] + wblk[ib][oa]);
                                wblk[oa][ib] = s;
                                wblk[ib][oa] = s;
                                let s = 0.5 * (vblk[oa][ib] + vblk[ib][oa]);
                                vblk[oa][ib] = s;
                                vblk[ib][oa] = s;
                            }
                        }
                    }
                    let va = mesh.triangles[a];
                    let vb = mesh.triangles[b];
                    for oa in 0..3 {
                        for ib in 0..3 {
                            if let (Some(r), Some(c)) = (w_dof[va[oa]], w_dof[vb[ib]]) {
                                put(r, c, wblk[oa][ib], a != b);
                            }
                            if op == OperatorId::DtN {
                                put(ni + va[oa], ni + vb[ib], vblk[oa][ib], a != b);
                            }
                        }
                    }
                }
            }
        }
    }

    if op == OperatorId::DtN {
        // mass couplings: +1/2 psi tested with phi-test, -1/2 phi tested with d/dt psi-test
        let rule7 = TriangleRule::seven_point();
        for (t, tri) in tris.iter().enumerate() {
            let v = mesh.triangles[t];
            let mut mass = [[0.0; 3]; 3];
            for (x, w) in rule7.on_triangle(tri, 0) {
                let l = tri.barycentric(&x);
                for i in 0..3 {
                    for j in 0..3 {
                        mass[i][j] += w * l[i] * l[j];
                    }
                }
            }
            for n in 1..=ns {
                for m in 1..=ns {
                    let cpsi = 0.5 * hat_window(grid, m, n, 0.0);
                    let cphi = -0.5 * (hat(grid, m, grid.t(n - 1)) - hat(grid, m, grid.t(n)));
                    for i in 0..3 {
                        for j in 0..3 {
                            if let Some(r) = w_dof[v[i]] {
                                d[((n - 1) * size + r, (m - 1) * size + ni + v[j])] += cpsi * mass[i][j];
                            }
                            if let Some(c) = w_dof[v[j]] {
                                d[((n - 1) * size + ni + v[i], (m - 1) * size + c)] += cphi * mass[i][j];
                            }
                        }
                    }
                }
            }
        }
    }
    d
}

/// `||D x - b|| / ||b||` for a marched history.
pub fn relative_residual(d: &DMatrix<f64>, history: &DensityHistory, b: &[Vec<f64>]) -> f64 {
    let x = DVector::from_iterator(d.ncols(), history.coefficients.iter().flatten().copied());
    let bv = DVector::from_iterator(d.nrows(), b.iter().flatten().copied());
    (d * x - &bv).norm() / bv.norm()
}
