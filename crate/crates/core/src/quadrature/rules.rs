//! Gauss-Legendre and triangle rules.

use std::f64::consts::PI;

use crate::geometry::{Point3, Triangle};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitGauss {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitGauss {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        UnitGauss {
            nodes: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|t| 0.5 * t).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]` split into `chunks` equal pieces.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, chunks: usize, mut f: F) -> f64 {
        let h = (b - a) / chunks as f64;
        let mut acc = 0.0;
        for c in 0..chunks {
            let lo = a + c as f64 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * h * f(lo + x * h);
            }
        }
        acc
    }
}

/// Quadrature rule on the reference triangle `{s, t >= 0, s + t <= 1}`.
///
/// Weights sum to the reference area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Symmetric 7-point rule, exact for degree 5.
    pub fn seven_point() -> Self {
        let a1 = 0.059_715_871_789_770;
        let b1 = 0.470_142_064_105_115;
        let a2 = 0.797_426_985_353_087;
        let b2 = 0.101_286_507_323_456;
        let w0 = 0.225;
        let w1 = 0.132_394_152_788_506;
        let w2 = 0.125_939_180_544_827;
        let mut points = vec![[1.0 / 3.0, 1.0 / 3.0]];
        let mut weights = vec![w0];
        for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
            for bary in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push([bary[1], bary[2]]);
                weights.push(w);
            }
        }
        let rule = TriangleRule {
            points,
            weights: weights.iter().map(|w| 0.5 * w).collect(),
        };
        rule
    }

    /// Centroid rule.
    pub fn one_point() -> Self {
        TriangleRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        }
    }

    /// Collapsed tensor-product Gauss rule with `n * n` points.
    pub fn collapsed_gauss(n: usize) -> Self {
        let g = UnitGauss::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (a, wa) in g.nodes.iter().zip(&g.weights) {
            for (b, wb) in g.nodes.iter().zip(&g.weights) {
                // (a, b) in unit square -> (s, t) = (a, b (1 - a))
                points.push([*a, b * (1.0 - a)]);
                weights.push(wa * wb * (1.0 - a));
            }
        }
        TriangleRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical points and weights on `tri`, after `depth` levels of
    /// uniform 4-way subdivision.
    pub fn on_triangle(&self, tri: &Triangle, depth: usize) -> Vec<(Point3, f64)> {
        let mut out = Vec::with_capacity(self.len() << (2 * depth));
        let mut stack = vec![(tri.v, depth)];
        while let Some((v, d)) = stack.pop() {
            if d == 0 {
                let t = Triangle::new(v[0], v[1], v[2]);
                let jac = 2.0 * t.area;
                for (p, w) in self.points.iter().zip(&self.weights) {
                    out.push((t.point(p[0], p[1]), w * jac));
                }
            } else {
                let m01 = (v[0] + v[1]) * 0.5;
                let m12 = (v[1] + v[2]) * 0.5;
                let m20 = (v[2] + v[0]) * 0.5;
                stack.push(([v[0], m01, m20], d - 1));
                stack.push(([m01, v[1], m12], d - 1));
                stack.push(([m20, m12, v[2]], d - 1));
                stack.push(([m01, m12, m20], d - 1));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    fn monomial_exact(p: i32, q: i32) -> f64 {
        // int_T s^p t^q = p! q! / (p + q + 2)!
        let f = |k: i32| (1..=k).map(|i| i as f64).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    #[test]
    fn seven_point_rule_degree_five() {
        let r = TriangleRule::seven_point();
        assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        for p in 0..=5 {
            for q in 0..=(5 - p) {
                let v: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x[0].powi(p) * x[1].powi(q))
                    .sum();
                assert!((v - monomial_exact(p, q)).abs() < 1e-12, "{p} {q}");
            }
        }
    }

    #[test]
    fn collapsed_rule_degree() {
        let r = TriangleRule::collapsed_gauss(5);
        for p in 0..=8 {
            for q in 0..=(8 - p) {
                let v: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x[0].powi(p) * x[1].powi(q))
                    .sum();
                assert!((v - monomial_exact(p, q)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn subdivided_weights_sum_to_area() {
        let t = Triangle::new(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 1.0),
        );
        for d in 0..4 {
            let pts = TriangleRule::seven_point().on_triangle(&t, d);
            let s: f64 = pts.iter().map(|(_, w)| w).sum();
            assert!((s - t.area).abs() < 1e-13);
            assert!(pts.iter().all(|(_, w)| *w > 0.0));
        }
    }
}
