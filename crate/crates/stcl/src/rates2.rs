//! Second-order (golden-rule) Pauli rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::model::{Label, Setup};
use crate::Error;

/// Pauli rate matrix: `entries[(i, f)]` is the rate from state i to state f,
/// in energy units (ℏ = 1). Rows sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub order: u32,
    pub entries: DMatrix<f64>,
}

impl RateMatrix {
    /// Fill the diagonal from row-sum conservation.
    pub fn from_off_diagonal(order: u32, mut entries: DMatrix<f64>) -> RateMatrix {
        let n = entries.nrows();
        for i in 0..n {
            entries[(i, i)] = 0.0;
            let s: f64 = (0..n).filter(|&f| f != i).map(|f| entries[(i, f)]).sum();
            entries[(i, i)] = -s;
        }
        RateMatrix { order, entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest |row sum| relative to the largest |entry|.
    pub fn max_row_sum_rel(&self) -> f64 {
        let scale = self.entries.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (0..self.n()).map(|i| self.entries.row(i).sum().abs()).fold(0.0, f64::max) / scale
    }
}

/// A rate contribution with its branch-connecting labels left unsummed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedRate {
    pub i: usize,
    pub f: usize,
    pub lambdas: Vec<Label>,
    pub value: Complex64,
}

/// S̃₁₁^{if}(λ1) = 2π|V_{ifλ1}|² D_{λ1} C_{λ1}(χ_f − χ_i), by label index.
#[inline]
pub(crate) fn s11(setup: &Setup, i: usize, f: usize, li: usize) -> f64 {
    let v2 = setup.v(i, f, li).norm_sqr();
    if v2 == 0.0 {
        return 0.0;
    }
    2.0 * PI * v2 * setup.dos(li) * setup.c(li, setup.dchi(f, i))
}

pub fn s11_constrained(setup: &Setup, i: usize, f: usize, lambda1: Label) -> Result<ConstrainedRate, Error> {
    setup.check_state(i)?;
    setup.check_state(f)?;
    let li = setup.label_index(lambda1)?;
    Ok(ConstrainedRate { i, f, lambdas: vec![lambda1], value: Complex64::new(s11(setup, i, f, li), 0.0) })
}

/// Second-order rate matrix with the diagonal from conservation.
pub fn s2_matrix(setup: &Setup) -> RateMatrix {
    let n = setup.n_states();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for f in 0..n {
            if i != f {
                m[(i, f)] = (0..setup.n_labels()).map(|li| s11(setup, i, f, li)).sum();
            }
        }
    }
    RateMatrix::from_off_diagonal(2, m)
}
