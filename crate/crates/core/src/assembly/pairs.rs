//! Shell moments of triangle pairs on flat meshes, and bucketing of the
//! resulting entries into per-shell sparse matrices.

use rayon::prelude::*;

use crate::geometry::{Point3, Triangle};
use crate::quadrature::{triangle_distance, triangle_max_distance, PolarFrame, QuadratureRule, UnitGauss};
use crate::sparse::CsrMatrix;

/// One contribution `(bucket, row, col, value)`.
pub(crate) type Entry = (u32, u32, u32, f64);

/// Moments `int int_{E_l} a(x) b(y) sigma^j / |x - y|` for coplanar pairs.
pub(crate) struct FlatPairEngine<'a> {
    pub tris: &'a [Triangle],
    pub dt: f64,
    pub n_shells: usize,
    pub rule: &'a QuadratureRule,
    /// Piecewise linear bases when true, constants otherwise.
    pub hats: bool,
    pub jmax: usize,
    gauss: UnitGauss,
}

/// Moment block of one ordered pair.
pub(crate) struct PairMoments {
    pub l0: usize,
    pub n_shells: usize,
    pub nb: usize,
    pub nj: usize,
    pub data: Vec<f64>,
}

impl PairMoments {
    /// Moment for shell `l0 + s`, outer basis `oa`, inner basis `ib`, power `j`.
    #[inline]
    pub fn get(&self, s: usize, oa: usize, ib: usize, j: usize) -> f64 {
        self.data[((s * self.nb + oa) * self.nb + ib) * self.nj + j]
    }
}

impl<'a> FlatPairEngine<'a> {
    pub fn new(
        tris: &'a [Triangle],
        dt: f64,
        n_shells: usize,
        rule: &'a QuadratureRule,
        hats: bool,
        jmax: usize,
    ) -> Self {
        FlatPairEngine {
            tris,
            dt,
            n_shells,
            rule,
            hats,
            jmax,
            gauss: UnitGauss::new(rule.angular_order),
        }
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<PairMoments> {
        let ta = &self.tris[a];
        let tb = &self.tris[b];
        let dist = if a == b { 0.0 } else { triangle_distance(ta, tb) };
        let dmax = triangle_max_distance(ta, tb);
        let l0 = (dist / self.dt).floor() as usize;
        let l1 = ((dmax / self.dt).floor() as usize).min(self.n_shells.saturating_sub(1));
        if self.n_shells == 0 || l0 > l1 {
            return None;
        }
        let ns = l1 - l0 + 1;
        let radii: Vec<f64> = (l0..=l1 + 1).map(|l| l as f64 * self.dt).collect();
        let nb = if self.hats { 3 } else { 1 };
        let nj = self.jmax + 1;
        let mut data = vec![0.0; ns * nb * nb * nj];
        let mut point = vec![0.0; ns * nb * nj];
        let grads = tb.basis_gradients();
        let mut lin = Vec::with_capacity(3);
        for (x, wx) in self.rule.outer_points(ta, tb, dist) {
            lin.clear();
            if self.hats {
                let lam = tb.barycentric(&x);
                for k in 0..3 {
                    lin.push((lam[k], grads[k]));
                }
            } else {
                lin.push((1.0, Point3::zeros()));
            }
            point.iter_mut().for_each(|v| *v = 0.0);
            let frame = PolarFrame::new(&x, tb);
            frame.coplanar_moments(&radii, self.dt, &lin, self.jmax, &self.gauss, wx, &mut point);
            let outer: [f64; 3] = if self.hats { ta.barycentric(&x) } else { [1.0, 0.0, 0.0] };
            for s in 0..ns {
                for (oa, ov) in outer.iter().take(nb).enumerate() {
                    let dst = ((s * nb + oa) * nb) * nj;
                    let src = s * nb * nj;
                    for k in 0..nb * nj {
                        data[dst + k] += ov * point[src + k];
                    }
                }
            }
        }
        if a == b && nb > 1 {
            // coincident pair: the exact block is symmetric
            for s in 0..ns {
                for oa in 0..nb {
                    for ib in (oa + 1)..nb {
                        for j in 0..nj {
                            let p = ((s * nb + oa) * nb + ib) * nj + j;
                            let q = ((s * nb + ib) * nb + oa) * nj + j;
                            let m = 0.5 * (data[p] + data[q]);
                            data[p] = m;
                            data[q] = m;
                        }
                    }
                }
            }
        }
        Some(PairMoments {
            l0,
            n_shells: ns,
            nb,
            nj,
            data,
        })
    }
}

/// Outer indices handled per batch. Fixed so that summation order, and hence
/// every bit of the result, does not depend on the thread count.
const BATCH: usize = 16;

/// Per-bucket triplets kept sorted and summed once they double in size.
struct Bucket {
    data: Vec<(u64, f64)>,
    compacted: usize,
}

impl Bucket {
    fn compact(&mut self) {
        self.data.sort_unstable_by_key(|e| e.0);
        let mut w = 0;
        for k in 0..self.data.len() {
            if w > 0 && self.data[w - 1].0 == self.data[k].0 {
                self.data[w - 1].1 += self.data[k].1;
            } else {
                self.data[w] = self.data[k];
                w += 1;
            }
        }
        self.data.truncate(w);
        self.data.shrink_to(2 * w + 1024);
        self.compacted = w;
    }
}

/// Run `per_outer(a, &mut entries)` for every outer index and sum the
/// entries into one sparse matrix per bucket. Trailing empty buckets are
/// dropped.
pub(crate) fn accumulate<F>(n_outer: usize, n_buckets: usize, nrows: usize, ncols: usize, per_outer: F) -> Vec<CsrMatrix>
where
    F: Fn(usize, &mut Vec<Entry>) + Sync,
{
    let mut buckets: Vec<Bucket> = (0..n_buckets).map(|_| Bucket { data: Vec::new(), compacted: 0 }).collect();
    for lo in (0..n_outer).step_by(BATCH) {
        let hi = (lo + BATCH).min(n_outer);
        let chunks: Vec<Vec<Entry>> = (lo..hi)
            .into_par_iter()
            .map(|a| {
                let mut out = Vec::new();
                per_outer(a, &mut out);
                out
            })
            .collect();
        for c in chunks {
            for (b, r, col, v) in c {
                debug_assert!((r as usize) < nrows && (col as usize) < ncols);
                buckets[b as usize].data.push((((r as u64) << 32) | col as u64, v));
            }
        }
        for b in buckets.iter_mut() {
            if b.data.len() > 2 * b.compacted + 4096 {
                b.compact();
            }
        }
    }
    let mut out: Vec<CsrMatrix> = buckets
        .into_iter()
        .map(|mut b| {
            b.compact();
            let mut m = CsrMatrix::zeros(nrows, ncols);
            for (key, v) in b.data {
                if v == 0.0 {
                    continue;
                }
                let r = (key >> 32) as usize;
                m.indices.push((key & 0xffff_ffff) as usize);
                m.values.push(v);
                m.indptr[r + 1] += 1;
            }
            for i in 0..nrows {
                m.indptr[i + 1] += m.indptr[i];
            }
            m
        })
        .collect();
    while out.last().is_some_and(|s| s.nnz() == 0) {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{shell_pair_integral, BasisFn, KernelId, ShellSpec};

    #[test]
    fn flat_moments_agree_with_generic_integral() {
        let tris = vec![
            Triangle::new(Point3::zeros(), Point3::new(0.5, 0.0, 0.0), Point3::new(0.0, 0.5, 0.0)),
            Triangle::new(Point3::new(0.5, 0.0, 0.0), Point3::new(0.5, 0.5, 0.0), Point3::new(0.0, 0.5, 0.0)),
        ];
        let rule = QuadratureRule::default();
        let dt = 0.1;
        let eng = FlatPairEngine::new(&tris, dt, 20, &rule, true, 1);
        for (a, b) in [(0, 1), (1, 1)] {
            let pm = eng.pair(a, b).unwrap();
            for s in 0..pm.n_shells {
                let shell = ShellSpec::light_cone(pm.l0 + s, dt);
                for oa in 0..3 {
                    for ib in 0..3 {
                        let g = shell_pair_integral(&tris[a], &tris[b], &shell, KernelId::InvDistance, BasisFn::Hat(oa), BasisFn::Hat(ib), &rule);
                        let v = pm.get(s, oa, ib, 0);
                        let tol = if a == b { 1e-3 } else { 1e-9 };
                        assert!((g - v).abs() <= tol * g.abs().max(1e-3), "{a}{b} s={s} {g} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn buckets_sum_and_drop_trailing_empty() {
        let m = accumulate(3, 4, 2, 2, |a, out| {
            out.push((0, 0, 0, 1.0));
            if a == 1 {
                out.push((2, 1, 0, 2.0));
                out.push((1, 0, 1, 0.0));
            }
        });
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].get(0, 0), 3.0);
        assert_eq!(m[1].nnz(), 0);
        assert_eq!(m[2].get(1, 0), 2.0);
    }

    #[test]
    fn compaction_matches_direct_sum() {
        let n = 300;
        let m = accumulate(n, 1, 5, 5, |a, out| {
            for k in 0..40 {
                out.push((0, ((a + k) % 5) as u32, (k % 5) as u32, (a * k) as f64));
            }
        });
        let mut want = [[0.0; 5]; 5];
        for a in 0..n {
            for k in 0..40 {
                want[(a + k) % 5][k % 5] += (a * k) as f64;
            }
        }
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(m[0].get(r, c), want[r][c]);
            }
        }
    }
}
