//! Fourth-order Pauli STCL rates in the η → 0 limit.
//!
//! Contractions follow the Wick pairing of the four reservoir operators:
//! `a` pairs (1,4)(2,3), `b` pairs (1,3)(2,4) (crossed, carries the
//! statistics sign), `c` pairs (1,2)(3,4). For the 2+2 diagrams both pairs
//! connect the two Keldysh branches and the constrained labels are
//! (λ1, λ2); for the 3+1 diagrams only λ1 connects the branches and λ2 is
//! summed internally.
//!
//! All η → 0 limits are closed forms in the I± and J± integrals of
//! [`crate::specfun`]. The diagonal of S̃₄ always comes from row-sum
//! conservation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::model::{Label, Setup};
use crate::rates2::{ConstrainedRate, RateMatrix};
use crate::specfun::Sign;
use crate::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Per-entry contraction sums (over all labels) and the assembled matrix.
#[derive(Debug, Clone)]
pub struct FourthOrderBreakdown {
    pub s22a: DMatrix<Complex64>,
    pub s22b: DMatrix<Complex64>,
    pub s31a: DMatrix<Complex64>,
    pub s31b: DMatrix<Complex64>,
    pub s31c: DMatrix<Complex64>,
    pub s4: RateMatrix,
}

/// The three 3+1 contractions at fixed (i, f, λ1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S31Parts {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl S31Parts {
    pub fn total(&self) -> Complex64 {
        self.a + self.b + self.c
    }
}

pub(crate) fn chain(setup: &Setup, s: [(usize, usize, usize); 4]) -> Complex64 {
    let mut w = Complex64::new(1.0, 0.0);
    for (a, b, l) in s {
        let v = setup.v(a, b, l);
        if v == ZERO {
            return ZERO;
        }
        w *= v;
    }
    w
}

struct Ctx<'a> {
    s: &'a Setup,
    tp: f64,
    fb: f64,
}

impl<'a> Ctx<'a> {
    fn new(s: &'a Setup) -> Self {
        let t = s.temperature();
        Ctx { s, tp: s.tol.tol_pole * t, fb: s.tol.fallback_tol * t }
    }
    fn d(&self, a: usize, b: usize) -> f64 {
        self.s.dchi(a, b)
    }
    fn i_val(&self, sign: Sign, d1: f64, d2: f64, l1: usize, l2: usize) -> Complex64 {
        self.s.th.integral_i(sign, d1, d2, self.s.mu(l1), self.s.mu(l2), self.tp)
    }
    fn i_grad(&self, sign: Sign, d1: f64, d2: f64, l1: usize, l2: usize) -> (Complex64, Complex64) {
        self.s.th.integral_i_grad(sign, d1, d2, self.s.mu(l1), self.s.mu(l2), self.tp)
    }
    fn j(&self, sign: Sign, delta: f64, l: usize) -> Complex64 {
        self.s.th.integral_j_unchecked(sign, delta, self.s.mu(l), self.s.cutoff(l))
    }
    fn dj(&self, sign: Sign, delta: f64, l: usize) -> Complex64 {
        self.s.th.integral_j_deriv(sign, delta, self.s.mu(l))
    }
}

/// S̃₂₂a^{if}(λ1, λ2) by label index.
pub(crate) fn s22a(setup: &Setup, i: usize, f: usize, l1: usize, l2: usize) -> Complex64 {
    let (off, diag) = s22a_split(setup, i, f, l1, l2);
    off + diag
}

/// S̃₂₂a split into the n ≠ m and n = m intermediate-state parts.
fn s22a_split(setup: &Setup, i: usize, f: usize, l1: usize, l2: usize) -> (Complex64, Complex64) {
    let cx = Ctx::new(setup);
    let n_st = setup.n_states();
    let (c1, c2) = (setup.conj_index(l1), setup.conj_index(l2));
    let (mut acc, mut diag) = (ZERO, ZERO);
    for n in 0..n_st {
        for m in 0..n_st {
            let w = chain(setup, [(i, n, l1), (n, f, l2), (f, m, c2), (m, i, c1)]);
            if w == ZERO {
                continue;
            }
            if n != m {
                let im = cx.i_val(Sign::Minus, cx.d(i, n), cx.d(f, n), l1, l2);
                let ip = cx.i_val(Sign::Plus, cx.d(i, m), cx.d(f, m), l1, l2);
                acc += w * (2.0 * PI) * (im - ip) / cx.d(n, m);
            } else {
                // ∂_{χ_m} = −∂_{δ1} − ∂_{δ2}
                let (g1, g2) = cx.i_grad(Sign::Plus, cx.d(i, m), cx.d(f, m), l1, l2);
                let line2 = -(g1 + g2).re;
                let line3 = setup.c(l2, cx.d(f, m)) * cx.dj(Sign::Plus, cx.d(i, m), l1).re
                    - setup.c(l1, cx.d(m, i)) * cx.dj(Sign::Plus, cx.d(m, f), l2).re;
                diag += w * (2.0 * PI) * (line2 + line3);
            }
        }
    }
    let d12 = setup.dos(l1) * setup.dos(l2);
    (acc * d12, diag * d12)
}

/// The n = m (consecutive sequential tunnelling) part of S̃₂₂a^{if}, summed
/// over all labels.
pub fn s22a_repeated_state_part(setup: &Setup, i: usize, f: usize) -> Result<Complex64, Error> {
    check(setup, i, f)?;
    let nl = setup.n_labels();
    let mut acc = ZERO;
    for l1 in 0..nl {
        for l2 in 0..nl {
            acc += s22a_split(setup, i, f, l1, l2).1;
        }
    }
    Ok(acc)
}

/// S̃₂₂b^{if}(λ1, λ2) by label index.
pub(crate) fn s22b(setup: &Setup, i: usize, f: usize, l1: usize, l2: usize) -> Complex64 {
    let cx = Ctx::new(setup);
    let n_st = setup.n_states();
    let (c1, c2) = (setup.conj_index(l1), setup.conj_index(l2));
    let dfi = cx.d(f, i);
    let mut acc = ZERO;
    for n in 0..n_st {
        for m in 0..n_st {
            let w = chain(setup, [(i, n, l1), (n, f, l2), (f, m, c1), (m, i, c2)]);
            if w == ZERO {
                continue;
            }
            // [g(a) − g(b)]/(b − a) with g(x) = I⁻(x, x + δχ_fi)
            let (a, b) = (cx.d(i, n), cx.d(m, f));
            let q = if (b - a).abs() < cx.fb {
                let x = 0.5 * (a + b);
                let (g1, g2) = cx.i_grad(Sign::Minus, x, x + dfi, l1, l2);
                -(g1 + g2)
            } else {
                (cx.i_val(Sign::Minus, a, a + dfi, l1, l2) - cx.i_val(Sign::Minus, b, b + dfi, l1, l2)) / (b - a)
            };
            acc += w * q;
        }
    }
    acc * (-setup.crossing_sign() * 2.0 * PI * setup.dos(l1) * setup.dos(l2))
}

/// S̃₃₁^{if}(λ1) split by contraction, by label index.
pub(crate) fn s31(setup: &Setup, i: usize, f: usize, l1: usize) -> S31Parts {
    let mut p = S31Parts { a: ZERO, b: ZERO, c: ZERO };
    if setup.v(i, f, l1) == ZERO {
        return p;
    }
    let cx = Ctx::new(setup);
    let n_st = setup.n_states();
    let c1 = setup.conj_index(l1);
    let cfi = setup.c(l1, cx.d(f, i));
    for l2 in 0..setup.n_labels() {
        let c2 = setup.conj_index(l2);
        let d12 = setup.dos(l1) * setup.dos(l2);
        for n in 0..n_st {
            for m in 0..n_st {
                let wa = chain(setup, [(i, f, l1), (f, n, l2), (n, m, c2), (m, i, c1)]);
                if wa != ZERO {
                    let jfn = cx.j(Sign::Plus, cx.d(f, n), l2);
                    let term = if m != f {
                        cfi * (2.0 * PI) * jfn / cx.d(f, m)
                    } else {
                        cfi * (2.0 * PI) * cx.dj(Sign::Plus, cx.d(f, n), l2)
                            - I * cx.dj(Sign::Plus, cx.d(i, f), l1) * jfn
                    };
                    p.a += wa * term * d12;
                }
                let wb = chain(setup, [(i, f, l1), (f, n, l2), (n, m, c1), (m, i, c2)]);
                if wb != ZERO {
                    // [J(a) − J(b)]/(b − a)
                    let (a, b) = (cx.d(f, n), cx.d(i, m));
                    let q = if (b - a).abs() < cx.fb {
                        -cx.dj(Sign::Plus, 0.5 * (a + b), l2)
                    } else {
                        (cx.j(Sign::Plus, a, l2) - cx.j(Sign::Plus, b, l2)) / (b - a)
                    };
                    p.b += wb * (setup.crossing_sign() * 2.0 * PI * cfi) * q * d12;
                }
                let wc = chain(setup, [(i, f, l1), (f, n, c1), (n, m, l2), (m, i, c2)]);
                if wc != ZERO {
                    let jim = cx.j(Sign::Plus, cx.d(i, m), l2);
                    let term = if n != i {
                        cfi * (2.0 * PI) * jim / cx.d(i, n)
                    } else {
                        I * cx.dj(Sign::Plus, cx.d(i, f), l1) * jim
                    };
                    p.c += wc * term * d12;
                }
            }
        }
    }
    p
}

/// S̃₁₃^{if}(λ1): the mirrored diagrams, written with J⁻ and the reversed
/// (lower-branch) coupling chains. Equals conj(S̃₃₁); kept as an independent
/// evaluation path for that identity.
pub(crate) fn s13(setup: &Setup, i: usize, f: usize, l1: usize) -> Complex64 {
    let c1 = setup.conj_index(l1);
    if setup.v(f, i, c1) == ZERO {
        return ZERO;
    }
    let cx = Ctx::new(setup);
    let n_st = setup.n_states();
    let cfi = setup.c(l1, cx.d(f, i));
    let mut acc = ZERO;
    for l2 in 0..setup.n_labels() {
        let c2 = setup.conj_index(l2);
        let d12 = setup.dos(l1) * setup.dos(l2);
        for n in 0..n_st {
            for m in 0..n_st {
                let wa = chain(setup, [(i, m, l1), (m, n, l2), (n, f, c2), (f, i, c1)]);
                if wa != ZERO {
                    let jfn = cx.j(Sign::Minus, cx.d(f, n), l2);
                    acc += d12
                        * wa
                        * if m != f {
                            cfi * (2.0 * PI) * jfn / cx.d(f, m)
                        } else {
                            cfi * (2.0 * PI) * cx.dj(Sign::Minus, cx.d(f, n), l2)
                                + I * cx.dj(Sign::Minus, cx.d(i, f), l1) * jfn
                        };
                }
                let wb = chain(setup, [(i, m, l2), (m, n, l1), (n, f, c2), (f, i, c1)]);
                if wb != ZERO {
                    let (a, b) = (cx.d(f, n), cx.d(i, m));
                    let q = if (b - a).abs() < cx.fb {
                        -cx.dj(Sign::Minus, 0.5 * (a + b), l2)
                    } else {
                        (cx.j(Sign::Minus, a, l2) - cx.j(Sign::Minus, b, l2)) / (b - a)
                    };
                    acc += d12 * wb * (setup.crossing_sign() * 2.0 * PI * cfi) * q;
                }
                let wc = chain(setup, [(i, m, l2), (m, n, c2), (n, f, l1), (f, i, c1)]);
                if wc != ZERO {
                    let jim = cx.j(Sign::Minus, cx.d(i, m), l2);
                    acc += d12
                        * wc
                        * if n != i {
                            cfi * (2.0 * PI) * jim / cx.d(i, n)
                        } else {
                            -I * cx.dj(Sign::Minus, cx.d(i, f), l1) * jim
                        };
                }
            }
        }
    }
    acc
}

fn check(setup: &Setup, i: usize, f: usize) -> Result<(), Error> {
    setup.check_state(i)?;
    setup.check_state(f)
}

pub fn s22a_constrained(setup: &Setup, i: usize, f: usize, lambda1: Label, lambda2: Label) -> Result<ConstrainedRate, Error> {
    check(setup, i, f)?;
    let (l1, l2) = (setup.label_index(lambda1)?, setup.label_index(lambda2)?);
    Ok(ConstrainedRate { i, f, lambdas: vec![lambda1, lambda2], value: s22a(setup, i, f, l1, l2) })
}

pub fn s22b_constrained(setup: &Setup, i: usize, f: usize, lambda1: Label, lambda2: Label) -> Result<ConstrainedRate, Error> {
    check(setup, i, f)?;
    let (l1, l2) = (setup.label_index(lambda1)?, setup.label_index(lambda2)?);
    Ok(ConstrainedRate { i, f, lambdas: vec![lambda1, lambda2], value: s22b(setup, i, f, l1, l2) })
}

/// The pair-tunnelling contraction vanishes linearly in η.
pub fn s22c(_setup: &Setup, _i: usize, _f: usize) -> Complex64 {
    ZERO
}

pub fn s31_constrained(setup: &Setup, i: usize, f: usize, lambda1: Label) -> Result<ConstrainedRate, Error> {
    Ok(ConstrainedRate { i, f, lambdas: vec![lambda1], value: s31_parts(setup, i, f, lambda1)?.total() })
}

pub fn s31_parts(setup: &Setup, i: usize, f: usize, lambda1: Label) -> Result<S31Parts, Error> {
    check(setup, i, f)?;
    Ok(s31(setup, i, f, setup.label_index(lambda1)?))
}

pub fn s13_constrained(setup: &Setup, i: usize, f: usize, lambda1: Label) -> Result<ConstrainedRate, Error> {
    check(setup, i, f)?;
    let l1 = setup.label_index(lambda1)?;
    Ok(ConstrainedRate { i, f, lambdas: vec![lambda1], value: s13(setup, i, f, l1) })
}

/// Fourth-order rate matrix with its contraction breakdown.
pub fn s4_matrix(setup: &Setup) -> FourthOrderBreakdown {
    let n = setup.n_states();
    let nl = setup.n_labels();
    let z = || DMatrix::from_element(n, n, ZERO);
    let (mut s22a_m, mut s22b_m, mut s31a_m, mut s31b_m, mut s31c_m) = (z(), z(), z(), z(), z());
    let mut off = DMatrix::zeros(n, n);
    for i in 0..n {
        for f in 0..n {
            for l1 in 0..nl {
                for l2 in 0..nl {
                    s22a_m[(i, f)] += s22a(setup, i, f, l1, l2);
                    s22b_m[(i, f)] += s22b(setup, i, f, l1, l2);
                }
                let p = s31(setup, i, f, l1);
                s31a_m[(i, f)] += p.a;
                s31b_m[(i, f)] += p.b;
                s31c_m[(i, f)] += p.c;
            }
            if i != f {
                off[(i, f)] = (s22a_m[(i, f)] + s22b_m[(i, f)]).re
                    + 2.0 * (s31a_m[(i, f)] + s31b_m[(i, f)] + s31c_m[(i, f)]).re;
            }
        }
    }
    FourthOrderBreakdown {
        s22a: s22a_m,
        s22b: s22b_m,
        s31a: s31a_m,
        s31b: s31b_m,
        s31c: s31c_m,
        s4: RateMatrix::from_off_diagonal(4, off),
    }
}

/// Outcome of recomputing S̃₄ with every cutoff doubled.
#[derive(Debug, Clone)]
pub struct CutoffCheck {
    pub max_rel_change: f64,
    pub passed: bool,
    /// Reservoirs whose coupling sum Σ_n(|V_{inλ}|² + |V_{niλ}|²) depends on i.
    pub violated_sum_rules: Vec<Label>,
}

impl CutoffCheck {
    pub fn warning(&self) -> Option<String> {
        if self.passed {
            return None;
        }
        let rules: Vec<String> = self.violated_sum_rules.iter().map(|l| l.to_string()).collect();
        Some(format!(
            "S4 changes by {:.3e} (relative) under cutoff doubling; coupling sum rule sum_n(|V_in|^2+|V_ni|^2) = const violated for reservoir(s) [{}]",
            self.max_rel_change,
            rules.join(", ")
        ))
    }
}

/// Reservoirs (positive labels) whose coupling sum is not state-independent.
pub fn sum_rule_violations(setup: &Setup) -> Vec<Label> {
    let n = setup.n_states();
    let mut out = Vec::new();
    for lam in setup.reservoirs() {
        let li = setup.label_index(lam).expect("own label");
        let ci = setup.conj_index(li);
        let sums: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        [li, ci].iter().map(|&l| setup.v(i, k, l).norm_sqr() + setup.v(k, i, l).norm_sqr()).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let max = sums.iter().cloned().fold(0.0, f64::max);
        if sums.iter().any(|s| (s - max).abs() > 1e-12 * max) {
            out.push(lam);
        }
    }
    out
}

/// Recompute S̃₄ with all cutoffs doubled and compare.
pub fn cutoff_check(setup: &Setup) -> Result<CutoffCheck, Error> {
    let a = s4_matrix(setup).s4.entries;
    let b = s4_matrix(&setup.with_scaled_cutoffs(2.0)?).s4.entries;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let max_rel_change = (&a - &b).amax() / scale;
    Ok(CutoffCheck {
        max_rel_change,
        passed: max_rel_change < setup.tol.lambda_check,
        violated_sum_rules: sum_rule_violations(setup),
    })
}
