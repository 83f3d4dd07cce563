//! Reservoir currents from filtered constrained rates.
//!
//! Sign convention: I_λ > 0 when particles of reservoir λ flow into it, so
//! the right lead of a resonant level biased with μ_L > μ_R carries a
//! positive current.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::model::{Label, Setup};
use crate::rates2::{s11, s2_matrix, RateMatrix};
use crate::rates4::{s22a, s22b, s31, s4_matrix};
use crate::steady::{solve, SteadyStateExpansion};
use crate::Error;

/// δ_λ(λ1, …) = Σ_s (δ_{λ,−λ_s} − δ_{λ,λ_s}) over branch-connecting labels.
pub fn filter_weight(lambda: Label, assignment: &[Label]) -> i32 {
    assignment.iter().map(|&s| (lambda == s.conj()) as i32 - (lambda == s) as i32).sum()
}

/// Signed current-rate matrix; rows need not sum to zero and the diagonal
/// holds elastic contributions.
pub type SignedRates = DMatrix<f64>;

/// Every constrained fourth-order rate of a setup, indexed by label index.
#[derive(Debug, Clone)]
pub struct ConstrainedTables {
    n: usize,
    nl: usize,
    /// s22a + s22b at [(i·n + f)·nl² + l1·nl + l2].
    s22: Vec<Complex64>,
    /// s31 at [(i·n + f)·nl + l1].
    s31: Vec<Complex64>,
}

impl ConstrainedTables {
    pub fn new(setup: &Setup) -> Self {
        let (n, nl) = (setup.n_states(), setup.n_labels());
        let mut s22 = Vec::with_capacity(n * n * nl * nl);
        let mut t31 = Vec::with_capacity(n * n * nl);
        for i in 0..n {
            for f in 0..n {
                for l1 in 0..nl {
                    for l2 in 0..nl {
                        s22.push(s22a(setup, i, f, l1, l2) + s22b(setup, i, f, l1, l2));
                    }
                }
                for l1 in 0..nl {
                    t31.push(s31(setup, i, f, l1).total());
                }
            }
        }
        ConstrainedTables { n, nl, s22, s31: t31 }
    }

    /// Filtered fourth-order current rates split into (2+2, 3+1) parts.
    fn filtered(&self, setup: &Setup, weight: impl Fn(&[Label]) -> f64) -> (SignedRates, SignedRates) {
        let (n, nl) = (self.n, self.nl);
        let labels = setup.labels();
        let mut cot = DMatrix::zeros(n, n);
        let mut vir = DMatrix::zeros(n, n);
        for i in 0..n {
            for f in 0..n {
                let base = i * n + f;
                let mut a = 0.0;
                for l1 in 0..nl {
                    for l2 in 0..nl {
                        let w = weight(&[labels[l1], labels[l2]]);
                        if w != 0.0 {
                            a += w * self.s22[base * nl * nl + l1 * nl + l2].re;
                        }
                    }
                }
                let mut b = Complex64::new(0.0, 0.0);
                for l1 in 0..nl {
                    let w = weight(&[labels[l1]]);
                    if w != 0.0 {
                        b += w * self.s31[base * nl + l1];
                    }
                }
                cot[(i, f)] = a;
                vir[(i, f)] = 2.0 * b.re;
            }
        }
        (cot, vir)
    }
}

/// S̃_{λ2}: golden-rule current rates for reservoir λ.
pub fn current_rates_2(setup: &Setup, lambda: Label) -> Result<SignedRates, Error> {
    setup.label_index(lambda)?;
    let n = setup.n_states();
    let labels = setup.labels();
    Ok(DMatrix::from_fn(n, n, |i, f| {
        (0..setup.n_labels())
            .map(|l1| filter_weight(lambda, &[labels[l1]]) as f64 * s11(setup, i, f, l1))
            .sum()
    }))
}

/// S̃_{λ4}: cotunnelling plus virtually-assisted current rates.
pub fn current_rates_4(setup: &Setup, lambda: Label) -> Result<SignedRates, Error> {
    setup.label_index(lambda)?;
    let (cot, vir) = ConstrainedTables::new(setup).filtered(setup, |a| filter_weight(lambda, a) as f64);
    Ok(cot + vir)
}

/// Fourth-order rates rebuilt from the constrained tables with unit filter;
/// must equal the off-diagonal of [`crate::rates4::s4_matrix`].
pub fn unfiltered_rates_4(setup: &Setup) -> SignedRates {
    let (cot, vir) = ConstrainedTables::new(setup).filtered(setup, |_| 1.0);
    cot + vir
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channels {
    /// q Σ S̃_{λ2} P⁽⁰⁾.
    pub sequential: f64,
    /// q Σ S̃_{λ2} P⁽²⁾.
    pub sequential_correction: f64,
    /// Inelastic 2+2 part, q Σ_{i≠f} S̃_{λ22}^{if} P⁽⁰⁾_i.
    pub cotunnelling_inelastic: f64,
    /// Elastic 2+2 part, q Σ_i S̃_{λ22}^{ii} P⁽⁰⁾_i.
    pub cotunnelling_elastic: f64,
    /// q Σ 2Re S̃_{λ31} P⁽⁰⁾.
    pub virtual_assisted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentEntry {
    pub reservoir: Label,
    pub name: Option<String>,
    pub i2: f64,
    pub i4: f64,
    pub channels: Channels,
}

#[derive(Debug, Clone)]
pub struct CurrentReport {
    pub s2: RateMatrix,
    pub s4: RateMatrix,
    pub expansion: SteadyStateExpansion,
    pub entries: Vec<CurrentEntry>,
}

fn weighted(m: &SignedRates, p: &DVector<f64>, diag: Option<bool>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for f in 0..n {
            if diag.is_none_or(|d| d == (i == f)) {
                s += m[(i, f)] * p[i];
            }
        }
    }
    s
}

fn entry(
    setup: &Setup,
    tables: &ConstrainedTables,
    lambda: Label,
    expansion: &SteadyStateExpansion,
) -> Result<CurrentEntry, Error> {
    let li = setup.label_index(lambda)?;
    let q = setup.charge(li);
    let r2 = current_rates_2(setup, lambda)?;
    let (cot, vir) = tables.filtered(setup, |a| filter_weight(lambda, a) as f64);
    let p0 = &expansion.p0;
    let ch = Channels {
        sequential: q * weighted(&r2, p0, None),
        sequential_correction: q * weighted(&r2, &expansion.p2, None),
        cotunnelling_inelastic: q * weighted(&cot, p0, Some(false)),
        cotunnelling_elastic: q * weighted(&cot, p0, Some(true)),
        virtual_assisted: q * weighted(&vir, p0, None),
    };
    let name = setup.spec().reservoirs.iter().find(|r| r.label == lambda.reservoir()).and_then(|r| r.name.clone());
    Ok(CurrentEntry {
        reservoir: lambda,
        name,
        i2: ch.sequential,
        i4: ch.sequential_correction + ch.cotunnelling_inelastic + ch.cotunnelling_elastic + ch.virtual_assisted,
        channels: ch,
    })
}

/// Current for one reservoir given an expansion computed from the same setup.
pub fn current(setup: &Setup, lambda: Label, expansion: &SteadyStateExpansion) -> Result<CurrentEntry, Error> {
    entry(setup, &ConstrainedTables::new(setup), lambda, expansion)
}

/// Rates, steady state and currents of every reservoir.
pub fn current_report(setup: &Setup) -> Result<CurrentReport, Error> {
    let s2 = s2_matrix(setup);
    let s4 = s4_matrix(setup).s4;
    let expansion = solve(&s2, &s4)?;
    let tables = ConstrainedTables::new(setup);
    let entries = setup
        .reservoirs()
        .map(|l| entry(setup, &tables, l, &expansion))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurrentReport { s2, s4, expansion, entries })
}
