//! Uniform time grid and temporal basis functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mesh_diameter, Mesh};

/// Uniform time steps `t_n = n dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Grid reaching `t_end`, rounding the step count to the nearest integer.
    pub fn with_end_time(dt: f64, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {t_end}")));
        }
        let n = (t_end / dt).round().max(1.0) as usize;
        Self::new(dt, n)
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.t(self.n_steps)
    }
}

/// Temporal basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemporalBasis {
    /// `gamma^n`: indicator of `(t_{n-1}, t_n]`, `n >= 1`.
    PiecewiseConstant,
    /// `beta^n`: hat centred at `t_n`, `n >= 1`, zero at `t = 0`.
    PiecewiseLinearHat,
}

impl TemporalBasis {
    /// Value of basis function `n` at time `t`.
    pub fn eval(&self, grid: &TimeGrid, n: usize, t: f64) -> f64 {
        let s = t / grid.dt - n as f64;
        match self {
            TemporalBasis::PiecewiseConstant => {
                if s > -1.0 && s <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TemporalBasis::PiecewiseLinearHat => (1.0 - s.abs()).max(0.0),
        }
    }

    /// Evaluate `sum_n c[n] b^n(t)` for coefficients indexed by step
    /// (`coeffs[0]` belongs to step 1).
    pub fn eval_series(&self, grid: &TimeGrid, coeffs: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let s = t / grid.dt;
        match self {
            TemporalBasis::PiecewiseConstant => {
                let n = s.ceil() as usize;
                if n >= 1 && n <= coeffs.len() {
                    coeffs[n - 1]
                } else {
                    0.0
                }
            }
            TemporalBasis::PiecewiseLinearHat => {
                let lo = s.floor() as usize;
                let frac = s - lo as f64;
                let at = |n: usize| if n >= 1 && n <= coeffs.len() { coeffs[n - 1] } else { 0.0 };
                (1.0 - frac) * at(lo) + frac * at(lo + 1)
            }
        }
    }
}

/// `dt / h_min^beta`; values above one violate the step restriction.
pub fn cfl_ratio(grid: &TimeGrid, mesh: &Mesh) -> f64 {
    grid.dt / mesh.h_min().powf(mesh.beta)
}

/// `ceil(diam / dt)`: shells beyond this lag miss every pair of points.
pub fn lag_cutoff(grid: &TimeGrid, mesh: &Mesh) -> usize {
    lag_cutoff_for(mesh_diameter(mesh), grid.dt)
}

pub fn lag_cutoff_for(diameter: f64, dt: f64) -> usize {
    (diameter / dt).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{graded_disc_mesh, graded_square_mesh, Point3};

    #[test]
    fn grid_nodes_are_products() {
        let g = TimeGrid::new(0.1, 1000).unwrap();
        assert_eq!(g.t(700), 700.0 * 0.1);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert_eq!(TimeGrid::with_end_time(0.005, 1.0).unwrap().n_steps, 200);
    }

    #[test]
    fn cutoffs() {
        let sq = graded_square_mesh(2, 1.0).unwrap();
        assert_eq!(lag_cutoff(&TimeGrid::new(0.005, 10).unwrap(), &sq), 566);
        let disc = graded_disc_mesh(2, 1.0).unwrap();
        assert_eq!(lag_cutoff(&TimeGrid::new(0.01, 10).unwrap(), &disc), 200);
        assert_eq!(lag_cutoff_for(2f64.sqrt(), 1.0), 2);
    }

    #[test]
    fn cfl_examples() {
        let mut m = graded_square_mesh(2, 1.0).unwrap();
        // single triangle of diameter 0.1
        m.nodes = vec![Point3::zeros(), Point3::new(0.1, 0.0, 0.0), Point3::new(0.05, 0.05, 0.0)];
        m.triangles = vec![[0, 1, 2]];
        let g = TimeGrid::new(0.005, 1).unwrap();
        assert!((cfl_ratio(&g, &m) - 0.05).abs() < 1e-12);
        m.beta = 2.0;
        let g = TimeGrid::new(0.01, 1).unwrap();
        assert!((cfl_ratio(&g, &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hats_vanish_at_zero() {
        let g = TimeGrid::new(0.5, 4).unwrap();
        let b = TemporalBasis::PiecewiseLinearHat;
        for n in 1..=4 {
            assert_eq!(b.eval(&g, n, 0.0), 0.0);
        }
        assert_eq!(b.eval(&g, 2, 1.0), 1.0);
        assert_eq!(b.eval(&g, 2, 0.75), 0.5);
        let c = TemporalBasis::PiecewiseConstant;
        assert_eq!(c.eval(&g, 1, 0.5), 1.0);
        assert_eq!(c.eval(&g, 1, 0.0), 0.0);
        assert_eq!(c.eval_series(&g, &[1.0, 2.0], 0.7), 2.0);
        assert_eq!(b.eval_series(&g, &[1.0, 2.0], 0.75), 1.5);
    }
}
