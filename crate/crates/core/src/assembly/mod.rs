//! Causal lag-indexed Galerkin matrices and right-hand sides.
//!
//! Operators are stored as families of raw shell matrices `F^l` (one per
//! light-cone shell `E_l`) together with time weights: family `f` adds
//! `w_f[m] F_f^l` to the system matrix of lag `l + m`. The system matrix of
//! lag `k` is therefore `A^k = sum_f sum_m w_f[m] F_f^{k-m}` plus explicit
//! local terms (mass couplings), and the history sum in the marching scheme
//! is applied shell by shell without ever forming `A^k`. Operators with
//! several families store the combined `A^k` as a single family with weight
//! one, which takes a third of the memory.

mod operators;
mod pairs;
mod rhs;

use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;

pub use operators::{
    assemble_adjoint_double_layer_halfspace, assemble_dtn_blocks, assemble_hypersingular,
    assemble_single_layer, estimate_memory, AssemblyOptions,
};
pub use rhs::{assemble_rhs, ringdown, plane_wave_packet, LoadCombination, RhsId, RhsTimeSeries};

/// Which boundary integral formulation a sequence discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorId {
    SingleLayer,
    Hypersingular,
    DtN,
    HornAdjointDL,
}

impl OperatorId {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorId::SingleLayer => "single_layer",
            OperatorId::Hypersingular => "hypersingular",
            OperatorId::DtN => "dtn",
            OperatorId::HornAdjointDL => "horn_adjoint_dl",
        }
    }
}

/// Mesh entity carrying a degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dof {
    Triangle(usize),
    Node(usize),
}

/// Family of shell matrices sharing one set of time weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellTerm {
    pub label: &'static str,
    pub row_offset: usize,
    pub col_offset: usize,
    /// `weights[m]` multiplies shell `l` in the system matrix of lag `l + m`.
    pub weights: Vec<f64>,
    /// `shells[l]` for `l = 0..shells.len()`.
    pub shells: Vec<CsrMatrix>,
}

/// Matrix added to one system lag only.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub lag: usize,
    pub row_offset: usize,
    pub col_offset: usize,
    pub matrix: CsrMatrix,
}

/// Causal sequence of system matrices `A^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrixSequence {
    pub operator: OperatorId,
    /// Square system size per time step.
    pub size: usize,
    pub dt: f64,
    /// Largest lag whose system matrix can be nonzero.
    pub lag_cutoff: usize,
    pub dofs: Vec<Dof>,
    pub terms: Vec<ShellTerm>,
    pub local: Vec<LocalTerm>,
}

impl LagMatrixSequence {
    /// Largest lag at which any stored data contributes.
    pub fn stored_max_lag(&self) -> usize {
        let t = self
            .terms
            .iter()
            .map(|t| (t.shells.len() + t.weights.len()).saturating_sub(2))
            .max()
            .unwrap_or(0);
        let l = self.local.iter().map(|l| l.lag).max().unwrap_or(0);
        t.max(l)
    }

    /// Assemble `A^k` explicitly.
    pub fn system_matrix(&self, k: usize) -> CsrMatrix {
        let mut trip = Vec::new();
        for term in &self.terms {
            for (m, w) in term.weights.iter().enumerate() {
                if *w == 0.0 || m > k {
                    continue;
                }
                if let Some(s) = term.shells.get(k - m) {
                    for (r, c, v) in s.triplets() {
                        trip.push((r + term.row_offset, c + term.col_offset, w * v));
                    }
                }
            }
        }
        for l in self.local.iter().filter(|l| l.lag == k) {
            for (r, c, v) in l.matrix.triplets() {
                trip.push((r + l.row_offset, c + l.col_offset, v));
            }
        }
        CsrMatrix::from_triplets(self.size, self.size, &trip)
    }

    /// `sum_{k >= 1} A^k x^{n-k}` where `past[j - 1]` holds `x^j` for
    /// `j = 1..n`; entries `x^j` with `j >= n` are treated as zero.
    pub fn history(&self, past: &[Vec<f64>], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        let known = n.saturating_sub(1).min(past.len());
        let get = |j: isize| -> Option<&Vec<f64>> {
            if j >= 1 && (j as usize) <= known {
                Some(&past[j as usize - 1])
            } else {
                None
            }
        };
        let mut v = Vec::new();
        for term in &self.terms {
            let ncols = term.shells.first().map(|s| s.ncols).unwrap_or(0);
            for (l, shell) in term.shells.iter().enumerate() {
                if shell.nnz() == 0 {
                    continue;
                }
                v.clear();
                v.resize(ncols, 0.0);
                let mut any = false;
                for (m, w) in term.weights.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    if let Some(x) = get(n as isize - (l + m) as isize) {
                        any = true;
                        for (vi, xi) in v.iter_mut().zip(&x[term.col_offset..term.col_offset + ncols]) {
                            *vi += w * xi;
                        }
                    }
                }
                if any {
                    shell.mul_add(
                        1.0,
                        &v,
                        &mut out[term.row_offset..term.row_offset + shell.nrows],
                    );
                }
            }
        }
        for lt in &self.local {
            if lt.lag == 0 {
                continue;
            }
            if let Some(x) = get(n as isize - lt.lag as isize) {
                let nc = lt.matrix.ncols;
                lt.matrix.mul_add(
                    1.0,
                    &x[lt.col_offset..lt.col_offset + nc],
                    &mut out[lt.row_offset..lt.row_offset + lt.matrix.nrows],
                );
            }
        }
        out
    }

    /// Total stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.shells.iter().map(|s| s.nnz()).sum::<usize>())
            .sum::<usize>()
            + self.local.iter().map(|l| l.matrix.nnz()).sum::<usize>()
    }

    pub fn memory_bytes(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.shells.iter().map(|s| s.memory_bytes()).sum::<usize>())
            .sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LagMatrixSequence {
        let s0 = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]);
        let s1 = CsrMatrix::from_triplets(2, 2, &[(0, 1, 3.0)]);
        LagMatrixSequence {
            operator: OperatorId::SingleLayer,
            size: 2,
            dt: 1.0,
            lag_cutoff: 2,
            dofs: vec![Dof::Triangle(0), Dof::Triangle(1)],
            terms: vec![ShellTerm {
                label: "s",
                row_offset: 0,
                col_offset: 0,
                weights: vec![-1.0, 1.0],
                shells: vec![s0, s1],
            }],
            local: vec![LocalTerm {
                lag: 1,
                row_offset: 0,
                col_offset: 0,
                matrix: CsrMatrix::from_triplets(2, 2, &[(1, 0, 5.0)]),
            }],
        }
    }

    #[test]
    fn system_matrices_from_weights() {
        let s = toy();
        let a0 = s.system_matrix(0).to_dense();
        assert_eq!(a0[(0, 0)], -1.0);
        let a1 = s.system_matrix(1).to_dense();
        assert_eq!(a1[(0, 0)], 1.0);
        assert_eq!(a1[(0, 1)], -3.0);
        assert_eq!(a1[(1, 0)], 5.0);
        let a2 = s.system_matrix(2).to_dense();
        assert_eq!(a2[(0, 1)], 3.0);
        assert!(s.system_matrix(3).is_zero());
        assert_eq!(s.stored_max_lag(), 2);
    }

    #[test]
    fn history_matches_explicit_sum() {
        let s = toy();
        let past = vec![vec![1.0, -2.0], vec![0.5, 4.0], vec![3.0, 1.0]];
        let n = 4;
        let h = s.history(&past, n);
        let mut expect = vec![0.0; 2];
        for k in 1..n {
            let a = s.system_matrix(k);
            a.mul_add(1.0, &past[n - k - 1], &mut expect);
        }
        for i in 0..2 {
            assert!((h[i] - expect[i]).abs() < 1e-14);
        }
    }
}
