//! Marching-on-in-time forward substitution.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{Dof, LagMatrixSequence, OperatorId, RhsTimeSeries};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::timegrid::TemporalBasis;

/// Linear solver for the lag-0 system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StepMethod {
    DirectFactorization,
    ConjugateGradient { tol: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSolverConfig {
    pub method: StepMethod,
    /// Factorize once and reuse; otherwise refactorize every step.
    pub reuse_factorization: bool,
}

impl Default for StepSolverConfig {
    fn default() -> Self {
        StepSolverConfig {
            method: StepMethod::DirectFactorization,
            reuse_factorization: true,
        }
    }
}

impl StepSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let StepMethod::ConjugateGradient { tol, max_iter } = self.method {
            if !(tol > 0.0) || max_iter == 0 {
                return Err(Error::InvalidParameter(
                    "conjugate gradient needs tol > 0 and max_iter > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Metadata written next to a density CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryHeader {
    pub operator: OperatorId,
    pub dt: f64,
    pub n_steps: usize,
    pub size: usize,
    pub mesh_hash: String,
    pub basis: TemporalBasis,
    pub dofs: Vec<Dof>,
    /// Sizes of the `(phi, psi)` blocks of a DtN history.
    pub blocks: Option<(usize, usize)>,
    pub config_hash: Option<String>,
}

/// Coefficients `x^n`, `n = 1..=n_steps`; `x^0 = 0` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistory {
    pub header: HistoryHeader,
    pub coefficients: Vec<Vec<f64>>,
    /// Relative residual of each lag-0 solve.
    pub residuals: Vec<f64>,
}

impl DensityHistory {
    pub fn n_steps(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dt(&self) -> f64 {
        self.header.dt
    }

    /// Coefficient vector of step `n` (zero for `n = 0`).
    pub fn step(&self, n: usize) -> Vec<f64> {
        if n == 0 {
            vec![0.0; self.header.size]
        } else {
            self.coefficients[n - 1].clone()
        }
    }

    /// Time series of one degree of freedom.
    pub fn dof_series(&self, i: usize) -> Vec<f64> {
        self.coefficients.iter().map(|c| c[i]).collect()
    }

    /// Value of dof `i` at time `t` in the temporal basis of the history.
    pub fn value_at(&self, i: usize, t: f64) -> f64 {
        let s = t / self.header.dt;
        match self.header.basis {
            TemporalBasis::PiecewiseConstant => {
                if t <= 0.0 {
                    return 0.0;
                }
                let n = s.ceil() as usize;
                if n >= 1 && n <= self.n_steps() {
                    self.coefficients[n - 1][i]
                } else {
                    0.0
                }
            }
            TemporalBasis::PiecewiseLinearHat => {
                if t <= 0.0 {
                    return 0.0;
                }
                let lo = s.floor() as usize;
                let frac = s - lo as f64;
                let at = |n: usize| {
                    if n >= 1 && n <= self.n_steps() {
                        self.coefficients[n - 1][i]
                    } else {
                        0.0
                    }
                };
                (1.0 - frac) * at(lo) + frac * at(lo + 1)
            }
        }
    }

    /// `phi` part of a DtN history (all of it otherwise).
    pub fn primary_block(&self) -> DensityHistory {
        match self.header.blocks {
            None => self.clone(),
            Some((np, _)) => self.sub_block(0, np, None),
        }
    }

    /// `psi` part of a DtN history.
    pub fn secondary_block(&self) -> Option<DensityHistory> {
        self.header
            .blocks
            .map(|(np, ns)| self.sub_block(np, ns, Some(OperatorId::DtN)))
    }

    fn sub_block(&self, start: usize, len: usize, op: Option<OperatorId>) -> DensityHistory {
        let mut header = self.header.clone();
        header.size = len;
        header.dofs = header.dofs[start..start + len].to_vec();
        header.blocks = None;
        if let Some(op) = op {
            header.operator = op;
        }
        DensityHistory {
            header,
            coefficients: self
                .coefficients
                .iter()
                .map(|c| c[start..start + len].to_vec())
                .collect(),
            residuals: self.residuals.clone(),
        }
    }

    /// CSV rows `step,dof,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "dof", "value"])?;
        for (n, c) in self.coefficients.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                wr.serialize((n + 1, i, v))?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv) given the JSON header.
    pub fn read_csv<R: Read>(header: HistoryHeader, r: R) -> Result<DensityHistory> {
        let mut coefficients = vec![vec![0.0; header.size]; header.n_steps];
        // lines starting with '#' carry provenance such as the config hash
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        for rec in rd.deserialize() {
            let (n, i, v): (usize, usize, f64) = rec?;
            if n == 0 || n > header.n_steps || i >= header.size {
                return Err(Error::DimensionMismatch(format!(
                    "row ({n}, {i}) outside {} steps x {} dofs",
                    header.n_steps, header.size
                )));
            }
            coefficients[n - 1][i] = v;
        }
        Ok(DensityHistory {
            residuals: vec![0.0; header.n_steps],
            header,
            coefficients,
        })
    }
}

fn basis_for(op: OperatorId) -> TemporalBasis {
    match op {
        OperatorId::SingleLayer | OperatorId::HornAdjointDL => TemporalBasis::PiecewiseConstant,
        OperatorId::Hypersingular | OperatorId::DtN => TemporalBasis::PiecewiseLinearHat,
    }
}

enum StepSolver {
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Cg { sign: f64, tol: f64, max_iter: usize },
}

impl StepSolver {
    fn new(a0: &CsrMatrix, method: StepMethod, step: usize) -> Result<StepSolver> {
        match method {
            StepMethod::DirectFactorization => {
                let lu = a0.to_dense().lu();
                let u = lu.u();
                let scale = u.diagonal().amax();
                let tiny = u.diagonal().iter().any(|d| !(d.abs() > 1e-14 * scale));
                if tiny || !(scale > 0.0) {
                    return Err(Error::Factorization {
                        step,
                        reason: "lag-0 matrix is singular".into(),
                    });
                }
                Ok(StepSolver::Lu(lu))
            }
            StepMethod::ConjugateGradient { tol, max_iter } => {
                let d = a0.to_dense();
                if (&d - d.transpose()).amax() > 1e-10 * d.amax() {
                    return Err(Error::InvalidParameter(
                        "conjugate gradient needs a symmetric lag-0 matrix".into(),
                    ));
                }
                // the single layer lag-0 matrix is negative definite
                let sign = if d.diagonal().sum() < 0.0 { -1.0 } else { 1.0 };
                Ok(StepSolver::Cg { sign, tol, max_iter })
            }
        }
    }

    fn solve(&self, a0: &CsrMatrix, b: &[f64], step: usize) -> Result<Vec<f64>> {
        match self {
            StepSolver::Lu(lu) => {
                let x = lu
                    .solve(&DVector::from_column_slice(b))
                    .ok_or_else(|| Error::Factorization {
                        step,
                        reason: "triangular solve failed".into(),
                    })?;
                Ok(x.as_slice().to_vec())
            }
            StepSolver::Cg { sign, tol, max_iter } => conjugate_gradient(a0, *sign, b, *tol, *max_iter, step),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `sign * A x = sign * b` with `sign * A` positive definite.
fn conjugate_gradient(a: &CsrMatrix, sign: f64, b: &[f64], tol: f64, max_iter: usize, step: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.iter().map(|v| sign * v).collect();
    let bnorm = dot(&r, &r).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        ap.iter_mut().for_each(|v| *v = 0.0);
        a.mul_add(sign, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::NotConverged { step, iterations: it + 1, residual: f64::NAN });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * bnorm {
        return Ok(x);
    }
    Err(Error::NotConverged { step, iterations: max_iter, residual: rr.sqrt() / bnorm })
}

/// Forward substitution `A^0 x^n = b^n - sum_{k>=1} A^k x^{n-k}`.
pub fn march(system: &LagMatrixSequence, rhs: &RhsTimeSeries, cfg: &StepSolverConfig) -> Result<DensityHistory> {
    cfg.validate()?;
    if rhs.size() != system.size {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} entries per step, system has {}",
            rhs.size(),
            system.size
        )));
    }
    let n_steps = rhs.n_steps();
    if n_steps == 0 {
        return Err(Error::InvalidParameter("right-hand side has no steps".into()));
    }
    let a0 = system.system_matrix(0);
    let mut solver = StepSolver::new(&a0, cfg.method, 1)?;
    let mut past: Vec<Vec<f64>> = Vec::with_capacity(n_steps);
    let mut residuals = Vec::with_capacity(n_steps);
    // solution norm per unit of the largest load seen so far
    let (mut load_peak, mut gain_peak) = (0.0f64, 0.0f64);
    for n in 1..=n_steps {
        if !cfg.reuse_factorization && n > 1 {
            solver = StepSolver::new(&a0, cfg.method, n)?;
        }
        let mut b = rhs.system_rhs(n);
        load_peak = load_peak.max(dot(&b, &b).sqrt());
        let h = system.history(&past, n);
        for (bi, hi) in b.iter_mut().zip(&h) {
            *bi -= hi;
        }
        let x = solver.solve(&a0, &b, n)?;
        let mut ax = vec![0.0; x.len()];
        a0.mul_add(1.0, &x, &mut ax);
        let bn = dot(&b, &b).sqrt();
        let res = ax.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        residuals.push(if bn > 0.0 { res / bn } else { res });
        let norm = dot(&x, &x).sqrt();
        if !norm.is_finite() {
            return Err(Error::Factorization { step: n, reason: "non-finite solution".into() });
        }
        if load_peak > 0.0 {
            let gain = norm / load_peak;
            if gain_peak > 0.0 && gain > 1e6 * gain_peak {
                log::warn!("step {n}: solution norm {norm:.3e} grew by more than 1e6 relative to the load");
            }
            gain_peak = gain_peak.max(gain);
        }
        past.push(x);
    }
    let blocks = match system.operator {
        OperatorId::DtN => {
            let ns = node_count_tail(system);
            Some((system.size - ns, ns))
        }
        _ => None,
    };
    Ok(DensityHistory {
        header: HistoryHeader {
            operator: system.operator,
            dt: system.dt,
            n_steps,
            size: system.size,
            mesh_hash: String::new(),
            basis: basis_for(system.operator),
            dofs: system.dofs.clone(),
            blocks,
            config_hash: None,
        },
        coefficients: past,
        residuals,
    })
}

/// Number of trailing `psi` dofs of a DtN sequence (one per mesh node).
fn node_count_tail(system: &LagMatrixSequence) -> usize {
    system
        .local
        .iter()
        .find(|l| l.row_offset > 0)
        .map(|l| system.size - l.row_offset)
        .unwrap_or(0)
}

/// March the coupled DtN system; unknowns `(phi^n, psi^n)` per step.
pub fn march_dtn(blocks: &LagMatrixSequence, rhs: &RhsTimeSeries, cfg: &StepSolverConfig) -> Result<DensityHistory> {
    if blocks.operator != OperatorId::DtN {
        return Err(Error::InvalidParameter(format!(
            "march_dtn needs DtN blocks, got {}",
            blocks.operator.name()
        )));
    }
    if matches!(cfg.method, StepMethod::ConjugateGradient { .. }) {
        return Err(Error::InvalidParameter("the DtN lag-0 block is not symmetric; use a direct solver".into()));
    }
    march(blocks, rhs, cfg)
}

/// `E(x) = 1/2 x^T A x - x^T b` over the whole space-time vector.
pub fn energy_functional(system: &LagMatrixSequence, psi: &DensityHistory, rhs: &RhsTimeSeries) -> Result<f64> {
    if psi.header.size != system.size || rhs.size() != system.size {
        return Err(Error::DimensionMismatch("energy functional operands differ in size".into()));
    }
    let n_steps = psi.n_steps().min(rhs.n_steps());
    let a0 = system.system_matrix(0);
    let mut quad = 0.0;
    let mut lin = 0.0;
    for n in 1..=n_steps {
        let x = &psi.coefficients[n - 1];
        let mut ax = system.history(&psi.coefficients, n);
        a0.mul_add(1.0, x, &mut ax);
        quad += dot(x, &ax);
        lin += dot(x, &rhs.system_rhs(n));
    }
    Ok(0.5 * quad - lin)
}

/// Dense block lower-triangular space-time matrix (small problems only).
pub fn dense_spacetime_matrix(system: &LagMatrixSequence, n_steps: usize) -> DMatrix<f64> {
    let s = system.size;
    let mut m = DMatrix::zeros(s * n_steps, s * n_steps);
    for k in 0..n_steps {
        let a = system.system_matrix(k).to_dense();
        for n in k..n_steps {
            let col = n - k;
            m.view_mut((n * s, col * s), (s, s)).copy_from(&a);
        }
    }
    m
}
