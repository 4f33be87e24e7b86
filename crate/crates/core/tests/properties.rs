use proptest::prelude::*;

use tdbem::analysis::{fit_convergence_rate, graded_interval, interpolation_error};
use tdbem::geometry::{
    euler_characteristic, graded_coordinates, graded_disc_mesh_with_sectors, graded_square_mesh, Mesh, Point3,
    Triangle,
};
use tdbem::quadrature::{shell_pair_integral, BasisFn, KernelId, QuadratureRule, ShellSpec};
use tdbem::timegrid::{lag_cutoff_for, TemporalBasis, TimeGrid};

fn point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

/// Triangle around `centre` with edges no shorter than a tenth of its size.
fn triangle(centre: Point3) -> impl Strategy<Value = Triangle> {
    (point(), point(), point(), 0.2..0.6f64)
        .prop_map(move |(a, b, c, s)| Triangle::new(centre + a * s, centre + b * s, centre + c * s))
        .prop_filter("well shaped", |t| {
            let [a, b, c] = t.v;
            let shortest = (a - b).norm().min((b - c).norm()).min((c - a).norm());
            t.area > 0.05 * t.diameter() * t.diameter() && shortest > 0.1 * t.diameter()
        })
}

fn separated_pair() -> impl Strategy<Value = (Triangle, Triangle)> {
    (triangle(Point3::zeros()), triangle(Point3::new(1.6, 0.4, 0.3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn graded_coordinates_are_symmetric_and_increasing(n in 1usize..20, beta in 1.0..4.0f64) {
        let c = graded_coordinates(n, beta);
        prop_assert_eq!(c.len(), 2 * n + 1);
        prop_assert_eq!(c[0], -1.0);
        prop_assert!((c[2 * n] - 1.0).abs() < 1e-15);
        for k in 0..c.len() {
            prop_assert!((c[k] + c[2 * n - k]).abs() < 1e-15);
        }
        prop_assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn square_mesh_invariants(n in 1usize..7, beta in 1.0..3.0f64) {
        let m = graded_square_mesh(n, beta).unwrap();
        prop_assert_eq!(m.num_triangles(), 8 * n * n);
        prop_assert!((m.total_area() - 4.0).abs() < 1e-12);
        prop_assert_eq!(euler_characteristic(&m), 1);
        prop_assert_eq!(m.boundary_nodes.len(), 8 * n);
        prop_assert!(m.h_min() > 0.0 && m.h_min() <= m.h_max);
        let back = Mesh::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.hash_hex(), m.hash_hex());
        prop_assert_eq!(back, m);
    }

    #[test]
    fn disc_mesh_invariants(n in 1usize..6, beta in 1.0..3.0f64, sectors in 4usize..9) {
        let m = graded_disc_mesh_with_sectors(n, beta, sectors).unwrap();
        prop_assert_eq!(m.num_triangles(), sectors * n * n);
        prop_assert_eq!(euler_characteristic(&m), 1);
        prop_assert_eq!(m.boundary_nodes.len(), sectors * n);
        prop_assert!(m.total_area() < std::f64::consts::PI);
        for p in &m.nodes {
            prop_assert!(p.norm() <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn hats_partition_unity(dt in 0.01..0.5f64, steps in 2usize..40, s in 0.0..1.0f64) {
        let grid = TimeGrid::new(dt, steps).unwrap();
        let t = grid.dt + s * (grid.end_time() - grid.dt);
        let sum: f64 = (1..=steps).map(|n| TemporalBasis::PiecewiseLinearHat.eval(&grid, n, t)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let ones = vec![1.0; steps];
        prop_assert!((TemporalBasis::PiecewiseLinearHat.eval_series(&grid, &ones, t) - 1.0).abs() < 1e-12);
        prop_assert!((TemporalBasis::PiecewiseConstant.eval_series(&grid, &ones, t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lag_cutoff_covers_the_diameter(d in 0.01..10.0f64, dt in 0.001..1.0f64) {
        let l = lag_cutoff_for(d, dt);
        prop_assert!(l as f64 * dt >= d * (1.0 - 1e-15));
        prop_assert!(l == 0 || (l - 1) as f64 * dt < d);
    }

    #[test]
    fn rate_fit_recovers_power_laws(c in 0.01..100.0f64, p in -3.0..-0.1f64, start in 10.0..1e3f64) {
        let rows: Vec<(f64, f64)> = (0..5).map(|k| {
            let n = start * 2f64.powi(k);
            (n, c * n.powf(p))
        }).collect();
        let fit = fit_convergence_rate(&rows).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn interpolation_error_decreases_with_refinement(a in 0.2..2.0f64, beta in 1.0..3.0f64, n in 2usize..20) {
        let coarse = interpolation_error(a, &graded_interval(n, beta));
        let fine = interpolation_error(a, &graded_interval(2 * n, beta));
        prop_assert!(fine < coarse);
    }

    #[test]
    fn shells_are_additive((ta, tb) in separated_pair(), lo in 0.0..1.0f64, split in 0.0..1.0f64) {
        let rule = QuadratureRule::default();
        let (r_lo, r_hi) = (lo, lo + 2.0);
        let mid = r_lo + split * (r_hi - r_lo);
        let k = KernelId::InvDistance;
        let whole = shell_pair_integral(&ta, &tb, &ShellSpec::new(r_lo, r_hi).unwrap(), k, BasisFn::Constant, BasisFn::Hat(1), &rule);
        let parts = shell_pair_integral(&ta, &tb, &ShellSpec { r_lo, r_hi: mid }, k, BasisFn::Constant, BasisFn::Hat(1), &rule)
            + shell_pair_integral(&ta, &tb, &ShellSpec { r_lo: mid, r_hi }, k, BasisFn::Constant, BasisFn::Hat(1), &rule);
        let scale = shell_pair_integral(&ta, &tb, &ShellSpec::everything(), k, BasisFn::Constant, BasisFn::Hat(1), &rule);
        prop_assert!((whole - parts).abs() <= 1e-5 * scale.abs(), "{} vs {} (scale {})", whole, parts, scale);
    }

    #[test]
    fn pair_integrals_are_rigid_motion_invariant((ta, tb) in separated_pair(), shift in point(), angle in 0.0..6.3f64) {
        let rule = QuadratureRule::default();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), angle);
        let m = |t: &Triangle| Triangle::new(rot * t.v[0] + shift, rot * t.v[1] + shift, rot * t.v[2] + shift);
        let shell = ShellSpec::new(1.2, 1.8).unwrap();
        for k in [KernelId::InvDistance, KernelId::NormalDotInvDistance] {
            let a = shell_pair_integral(&ta, &tb, &shell, k, BasisFn::Hat(0), BasisFn::Hat(2), &rule);
            let b = shell_pair_integral(&m(&ta), &m(&tb), &shell, k, BasisFn::Hat(0), BasisFn::Hat(2), &rule);
            let full = shell_pair_integral(&ta, &tb, &ShellSpec::everything(), k, BasisFn::Hat(0), BasisFn::Hat(2), &rule);
            prop_assert!((a - b).abs() <= 1e-10 * full.abs(), "{:?}: {} vs {} (full {})", k, a, b, full);
        }
    }
}
