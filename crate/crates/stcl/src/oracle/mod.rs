//! Finite-η quadrature oracle.
//!
//! Each rate is evaluated at a finite switch-on rate η by integrating the
//! finite-η matrix-element integrands directly, with momentum sums replaced
//! by energy integrals. Nothing here calls the closed-form I/J layer of
//! [`crate::specfun`]; only the Fermi function and the setup tables are
//! shared. Extrapolation η → 0 uses three-point Richardson (polynomial) fits.
//!
//! Integrals that diverge logarithmically in the band edge use the soft
//! density of states Δ(ε) = n_F(−Λ − ε), whose wide-band limit matches the
//! cutoff convention of the closed forms up to O(|δ+μ|/Λ).

pub mod quad;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Label, Setup};
use crate::rates4::{chain, S31Parts};
use crate::specfun::Thermal;
use crate::Error;
pub use quad::{Quad, QuadResult};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default η grid in units of T, decreasing.
pub const ETA_GRID: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// ∫ n_F(ε − μ1) n_F(μ2 − ε)/(ε − iγ) dε over [−W, W], W = max(|μ1|, |μ2|) + 40T.
pub fn i0_quadrature(th: &Thermal, mu1: f64, mu2: f64, gamma: f64) -> Result<Complex64, Error> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("i0_quadrature needs gamma > 0, got {gamma}")));
    }
    let t = th.t;
    let w = mu1.abs().max(mu2.abs()) + 40.0 * t;
    let mut pts = vec![mu1, mu2];
    quad::cluster(0.0, gamma, levels(gamma, w), &mut pts);
    let q = Quad { abs_tol: 1e-13, rel_tol: 1e-13, max_cells: 20_000 };
    let r = q.range(
        |e| re(th.fermi(e - mu1) * th.fermi(mu2 - e)) / Complex64::new(e, -gamma),
        -w,
        w,
        &pts,
    )?;
    Ok(r.value)
}

/// Number of decades of breakpoints from width `w` out to `span`.
fn levels(w: f64, span: f64) -> usize {
    ((span / w).log10().ceil().max(1.0) as usize) + 1
}

/// Quadrature settings for nested oracle integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub inner: Quad,
    pub outer: Quad,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            inner: Quad { abs_tol: 1e-16, rel_tol: 1e-13, max_cells: 20_000 },
            outer: Quad { abs_tol: 1e-15, rel_tol: 1e-12, max_cells: 20_000 },
        }
    }
}

struct Ctx<'a> {
    s: &'a Setup,
    eta: f64,
    t: f64,
    /// Largest energy scale of the system, used to size breakpoint clusters.
    span: f64,
    o: OracleOptions,
}

impl<'a> Ctx<'a> {
    fn new(s: &'a Setup, eta: f64, o: OracleOptions) -> Result<Self, Error> {
        let t = s.temperature();
        if !(eta >= 1e-6 * t && eta <= 0.1 * t) {
            return Err(Error::Domain(format!("eta = {eta:e} outside [1e-6, 1e-1]·T")));
        }
        let mut span = 0.0f64;
        for &x in s.energies() {
            span = span.max(x.abs());
        }
        for l in 0..s.n_labels() {
            span = span.max(s.mu(l).abs());
        }
        Ok(Ctx { s, eta, t, span: 2.0 * span + 50.0 * t, o })
    }
    fn d(&self, a: usize, b: usize) -> f64 {
        self.s.dchi(a, b)
    }
    fn c(&self, l: usize, e: f64) -> f64 {
        self.s.c(l, e)
    }
    fn c_cut(&self, l: usize, e: f64) -> f64 {
        self.s.c(l, e) * self.s.th.fermi(-self.s.cutoff(l) - e)
    }
    fn fermi_points(&self, l: usize, cut: bool, out: &mut Vec<f64>) {
        let (mu, t) = (self.s.mu(l), self.t);
        out.extend([mu - 40.0 * t, mu - 5.0 * t, mu, mu + 5.0 * t, mu + 40.0 * t]);
        if cut {
            let lam = self.s.cutoff(l);
            out.extend([-lam - 40.0 * t, -lam, -lam + 40.0 * t]);
        }
    }
    fn peak(&self, c: f64, w: f64, out: &mut Vec<f64>) {
        quad::cluster(c, w, levels(w, self.span), out);
    }
    fn log_peak(&self, c: f64, w: f64, l: usize, out: &mut Vec<f64>) {
        quad::cluster(c, w, levels(w, self.s.cutoff(l) + self.span), out);
    }
    fn inner(&self, f: impl Fn(f64) -> Complex64, pts: &[f64]) -> Result<Complex64, Error> {
        Ok(self.o.inner.line(f, pts)?.value)
    }
    fn outer(&self, f: impl Fn(f64) -> Complex64, pts: &[f64]) -> Result<Complex64, Error> {
        Ok(self.o.outer.line(f, pts)?.value)
    }

    /// ∫ C_l(ε)/((ε + c)² + η²) dε.
    fn lorentz(&self, l: usize, c: f64) -> Result<Complex64, Error> {
        let eta = self.eta;
        let mut pts = Vec::new();
        self.fermi_points(l, false, &mut pts);
        self.peak(-c, eta, &mut pts);
        self.inner(|e| re(self.c(l, e) / ((e + c) * (e + c) + eta * eta)), &pts)
    }

    /// ∫ C_l(ε) Δ_l(ε)/(ε + c + iγ) dε.
    fn resolvent(&self, l: usize, c: f64, gamma: f64) -> Result<Complex64, Error> {
        let mut pts = Vec::new();
        self.fermi_points(l, true, &mut pts);
        self.log_peak(-c, gamma, l, &mut pts);
        self.inner(|e| re(self.c_cut(l, e)) / Complex64::new(e + c, gamma), &pts)
    }
}

/// Finite-η S̃₂₂a^{if}(λ1, λ2), returned together with the unsubtracted
/// T-matrix rate R̃₂₂a = 4η G̃₂₂a.
pub fn s22a_finite(
    setup: &Setup,
    i: usize,
    f: usize,
    lambda1: Label,
    lambda2: Label,
    eta: f64,
    o: OracleOptions,
) -> Result<(Complex64, Complex64), Error> {
    let cx = Ctx::new(setup, eta, o)?;
    let (l1, l2) = (setup.label_index(lambda1)?, setup.label_index(lambda2)?);
    let (c1, c2) = (setup.conj_index(l1), setup.conj_index(l2));
    let n_st = setup.n_states();
    let mut terms = Vec::new();
    for n in 0..n_st {
        for m in 0..n_st {
            let w = chain(setup, [(i, n, l1), (n, f, l2), (f, m, c2), (m, i, c1)]);
            if w != ZERO {
                terms.push((n, m, w));
            }
        }
    }
    if terms.is_empty() {
        return Ok((ZERO, ZERO));
    }
    let d12 = setup.dos(l1) * setup.dos(l2);
    let dif = cx.d(i, f);
    // ∫ C2(ε2) 4η/((δχ_if + ε1 + ε2)² + 4η²) dε2
    let k2 = |e1: f64| -> Result<Complex64, Error> {
        let c = dif + e1;
        let mut pts = Vec::new();
        cx.fermi_points(l2, false, &mut pts);
        cx.peak(-c, 2.0 * eta, &mut pts);
        cx.inner(|e2| re(cx.c(l2, e2) * 4.0 * eta / ((c + e2) * (c + e2) + 4.0 * eta * eta)), &pts)
    };
    let mut pts = Vec::new();
    cx.fermi_points(l1, false, &mut pts);
    for &(n, m, _) in &terms {
        cx.peak(-cx.d(i, n), eta, &mut pts);
        cx.peak(-cx.d(i, m), eta, &mut pts);
    }
    let err = std::cell::RefCell::new(None);
    let main = cx.outer(
        |e1| {
            let k = match k2(e1) {
                Ok(k) => k,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    return ZERO;
                }
            };
            let mut s = ZERO;
            for &(n, m, w) in &terms {
                s += w / (Complex64::new(cx.d(i, n) + e1, -eta) * Complex64::new(cx.d(i, m) + e1, eta));
            }
            s * k * cx.c(l1, e1)
        },
        &pts,
    )?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let mut sub = ZERO;
    for &(n, m, w) in &terms {
        if n == m {
            sub += w * 2.0 * eta * cx.lorentz(l1, cx.d(i, m))? * cx.lorentz(l2, cx.d(m, f))?;
        }
    }
    Ok(((main - sub) * d12, main * d12))
}

/// Finite-η S̃₂₂b^{if}(λ1, λ2) = 4η G̃₂₂b (no subtraction).
pub fn s22b_finite(
    setup: &Setup,
    i: usize,
    f: usize,
    lambda1: Label,
    lambda2: Label,
    eta: f64,
    o: OracleOptions,
) -> Result<Complex64, Error> {
    let cx = Ctx::new(setup, eta, o)?;
    let (l1, l2) = (setup.label_index(lambda1)?, setup.label_index(lambda2)?);
    let (c1, c2) = (setup.conj_index(l1), setup.conj_index(l2));
    let n_st = setup.n_states();
    let dif = cx.d(i, f);
    let mut acc = ZERO;
    for m in 0..n_st {
        let ns: Vec<(usize, Complex64)> = (0..n_st)
            .map(|n| (n, chain(setup, [(i, n, l1), (n, f, l2), (f, m, c1), (m, i, c2)])))
            .filter(|(_, w)| *w != ZERO)
            .collect();
        if ns.is_empty() {
            continue;
        }
        let dim = cx.d(i, m);
        // ∫ C2(ε2) / [((δχ_if + ε1 + ε2)² + 4η²)(δχ_im + ε2 + iη)] dε2
        let inner = |e1: f64| -> Result<Complex64, Error> {
            let c = dif + e1;
            let mut pts = Vec::new();
            cx.fermi_points(l2, false, &mut pts);
            cx.peak(-c, 2.0 * eta, &mut pts);
            cx.peak(-dim, eta, &mut pts);
            cx.inner(
                |e2| re(cx.c(l2, e2) / ((c + e2) * (c + e2) + 4.0 * eta * eta)) / Complex64::new(dim + e2, eta),
                &pts,
            )
        };
        let mut pts = Vec::new();
        cx.fermi_points(l1, false, &mut pts);
        cx.peak(cx.d(f, m), eta, &mut pts);
        for &(n, _) in &ns {
            cx.peak(-cx.d(i, n), eta, &mut pts);
        }
        let err = std::cell::RefCell::new(None);
        let v = cx.outer(
            |e1| {
                let k = inner(e1).unwrap_or_else(|e| {
                    err.borrow_mut().get_or_insert(e);
                    ZERO
                });
                let mut s = ZERO;
                for &(n, w) in &ns {
                    s += w / Complex64::new(cx.d(i, n) + e1, -eta);
                }
                s * k * cx.c(l1, e1)
            },
            &pts,
        )?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        acc += v;
    }
    Ok(acc * (setup.crossing_sign() * 4.0 * eta * setup.dos(l1) * setup.dos(l2)))
}

/// Finite-η S̃₂₂c^{if} summed over labels, for i ≠ f where no subtraction
/// enters: 4η G̃₂₂c.
pub fn s22c_finite(setup: &Setup, i: usize, f: usize, eta: f64, o: OracleOptions) -> Result<Complex64, Error> {
    if i == f {
        return Err(Error::Domain("s22c_finite is implemented for i != f".into()));
    }
    let cx = Ctx::new(setup, eta, o)?;
    let n_st = setup.n_states();
    let dif = cx.d(i, f);
    let mut acc = ZERO;
    for l1 in 0..setup.n_labels() {
        let c1 = setup.conj_index(l1);
        for l3 in 0..setup.n_labels() {
            let c3 = setup.conj_index(l3);
            for n in 0..n_st {
                for m in 0..n_st {
                    let w = chain(setup, [(i, n, l1), (n, f, c1), (f, m, l3), (m, i, c3)]);
                    if w == ZERO {
                        continue;
                    }
                    let a = cx.resolvent(l1, cx.d(i, n), -eta)?;
                    let b = cx.resolvent(l3, cx.d(i, m), eta)?;
                    acc += w * a * b * setup.dos(l1) * setup.dos(l3);
                }
            }
        }
    }
    Ok(acc * (4.0 * eta / (dif * dif + 4.0 * eta * eta)))
}

/// Finite-η S̃₃₁^{if}(λ1) by contraction, summed over λ2 and intermediate states.
pub fn s31_finite(setup: &Setup, i: usize, f: usize, lambda1: Label, eta: f64, o: OracleOptions) -> Result<S31Parts, Error> {
    let cx = Ctx::new(setup, eta, o)?;
    let l1 = setup.label_index(lambda1)?;
    let c1 = setup.conj_index(l1);
    let n_st = setup.n_states();
    let dif = cx.d(i, f);
    let mut p = S31Parts { a: ZERO, b: ZERO, c: ZERO };
    if setup.v(i, f, l1) == ZERO {
        return Ok(p);
    }
    // 4η/((x − iη)(x + 3iη)) with x = δχ_if + ε1
    let pref = move |x: f64| -> Complex64 { 4.0 * eta / (Complex64::new(x, -eta) * Complex64::new(x, 3.0 * eta)) };
    let outer_pts = |extra: &[f64]| -> Vec<f64> {
        let mut pts = Vec::new();
        cx.fermi_points(l1, false, &mut pts);
        cx.peak(-dif, eta, &mut pts);
        for &x in extra {
            cx.peak(x, eta, &mut pts);
        }
        pts
    };
    for l2 in 0..setup.n_labels() {
        let c2 = setup.conj_index(l2);
        let d12 = setup.dos(l1) * setup.dos(l2);

        // a: (1,4)(2,3)
        for n in 0..n_st {
            let ms: Vec<(usize, Complex64)> = (0..n_st)
                .map(|m| (m, chain(setup, [(i, f, l1), (f, n, l2), (n, m, c2), (m, i, c1)])))
                .filter(|(_, w)| *w != ZERO)
                .collect();
            if ms.is_empty() {
                continue;
            }
            let din = cx.d(i, n);
            let extra: Vec<f64> = ms.iter().map(|&(m, _)| -cx.d(i, m)).collect();
            let err = std::cell::RefCell::new(None);
            let v = cx.outer(
                |e1| {
                    let k = cx.resolvent(l2, din + e1, 2.0 * eta).unwrap_or_else(|e| {
                        err.borrow_mut().get_or_insert(e);
                        ZERO
                    });
                    let mut s = ZERO;
                    for &(m, w) in &ms {
                        s += w / Complex64::new(cx.d(i, m) + e1, eta);
                    }
                    pref(dif + e1) * s * k * cx.c(l1, e1)
                },
                &outer_pts(&extra),
            )?;
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            p.a += v * d12;
            // −2η G̃₁₁^{if} G̃₂₀^{ff} pairs with the m = f chain.
            if let Some(&(_, w)) = ms.iter().find(|(m, _)| *m == f) {
                let sub = I * w * cx.lorentz(l1, dif)? * cx.resolvent(l2, cx.d(f, n), eta)?;
                p.a += sub * d12;
            }
        }

        // b: (1,3)(2,4), crossing sign
        for n in 0..n_st {
            for m in 0..n_st {
                let w = chain(setup, [(i, f, l1), (f, n, l2), (n, m, c1), (m, i, c2)]);
                if w == ZERO {
                    continue;
                }
                let (din, dim) = (cx.d(i, n), cx.d(i, m));
                let inner = |e1: f64| -> Result<Complex64, Error> {
                    let a = din + e1;
                    let mut pts = Vec::new();
                    cx.fermi_points(l2, false, &mut pts);
                    cx.peak(-a, 2.0 * eta, &mut pts);
                    cx.peak(-dim, eta, &mut pts);
                    cx.inner(
                        |e2| re(cx.c(l2, e2)) / (Complex64::new(a + e2, 2.0 * eta) * Complex64::new(dim + e2, eta)),
                        &pts,
                    )
                };
                let err = std::cell::RefCell::new(None);
                let v = cx.outer(
                    |e1| {
                        let k = inner(e1).unwrap_or_else(|e| {
                            err.borrow_mut().get_or_insert(e);
                            ZERO
                        });
                        pref(dif + e1) * k * cx.c(l1, e1)
                    },
                    &outer_pts(&[dim - din]),
                )?;
                if let Some(e) = err.into_inner() {
                    return Err(e);
                }
                p.b += v * w * setup.crossing_sign() * d12;
            }
        }

        // c: (1,2)(3,4); the n = i chain is combined with −2η G̃₁₁^{if} G̃₂₀^{ii}
        // algebraically: 2/((x−iη)(x+3iη)) − 1/(x²+η²) = 1/((x+iη)(x+3iη)).
        for n in 0..n_st {
            for m in 0..n_st {
                let w = chain(setup, [(i, f, l1), (f, n, c1), (n, m, l2), (m, i, c2)]);
                if w == ZERO {
                    continue;
                }
                let r = cx.resolvent(l2, cx.d(i, m), eta)?;
                let x_int = if n != i {
                    let din = cx.d(i, n);
                    cx.outer(|e1| pref(dif + e1) * cx.c(l1, e1), &outer_pts(&[]))? / Complex64::new(din, 2.0 * eta)
                } else {
                    -I * cx.outer(
                        |e1| re(cx.c(l1, e1)) / (Complex64::new(dif + e1, eta) * Complex64::new(dif + e1, 3.0 * eta)),
                        &outer_pts(&[]),
                    )?
                };
                p.c += w * x_int * r * d12;
            }
        }
    }
    Ok(p)
}

/// The double-Lorentzian functional
/// F[g, η] = (1/η) ∫∫ L(ε1, η) L(ε2, η) g(ε1, ε2), L(ε, η) = η/(ε² + η²),
/// with g(ε1, ε2) = 2 Σ_{m λ1 λ2} D1 D2 |V_{imλ1}|²|V_{mfλ2}|²
/// C_{λ1}(ε1 − δχ_im)[C_{λ2}(2ε2 − ε1 − δχ_mf) − C_{λ2}(ε2 − δχ_mf)].
/// Its η → 0 limit is the n = m part of S̃₂₂a^{if}.
pub fn f_functional(setup: &Setup, i: usize, f: usize, eta: f64, o: OracleOptions) -> Result<f64, Error> {
    let cx = Ctx::new(setup, eta, o)?;
    setup.check_state(i)?;
    setup.check_state(f)?;
    let n_st = setup.n_states();
    let nl = setup.n_labels();
    let mut acc = 0.0;
    for m in 0..n_st {
        // g factorizes over (λ1, λ2): fold the label sums into each integrand.
        let w1: Vec<f64> = (0..nl).map(|l| setup.v(i, m, l).norm_sqr() * setup.dos(l)).collect();
        let w2: Vec<f64> = (0..nl).map(|l| setup.v(m, f, l).norm_sqr() * setup.dos(l)).collect();
        if w1.iter().all(|&w| w == 0.0) || w2.iter().all(|&w| w == 0.0) {
            continue;
        }
        let (dim, dmf) = (cx.d(i, m), cx.d(m, f));
        let mut fp2 = Vec::new();
        for l in (0..nl).filter(|&l| w2[l] != 0.0) {
            cx.fermi_points(l, false, &mut fp2);
        }
        // The inner integral vanishes linearly at ε1 = 0; measure its error
        // against the natural scale Σ w2 / η instead of its own size.
        let scale = w2.iter().sum::<f64>() / eta;
        let q = Quad { abs_tol: o.inner.abs_tol.max(o.inner.rel_tol * scale), ..o.inner };
        let inner = |e1: f64| -> Result<Complex64, Error> {
            let mut pts = Vec::new();
            cx.peak(0.0, eta, &mut pts);
            for &x in &fp2 {
                pts.push(x + dmf);
                pts.push(0.5 * (x + dmf + e1));
            }
            q.line(
                |e2| {
                    let mut g = 0.0;
                    for l in 0..nl {
                        if w2[l] != 0.0 {
                            g += w2[l] * (cx.c(l, 2.0 * e2 - e1 - dmf) - cx.c(l, e2 - dmf));
                        }
                    }
                    re(2.0 * g / (e2 * e2 + eta * eta))
                },
                &pts,
            )
            .map(|r| r.value)
        };
        let mut pts = Vec::new();
        cx.peak(0.0, eta, &mut pts);
        for l in (0..nl).filter(|&l| w1[l] != 0.0) {
            let mut fp = Vec::new();
            cx.fermi_points(l, false, &mut fp);
            pts.extend(fp.iter().map(|x| x + dim));
        }
        let err = std::cell::RefCell::new(None);
        let v = cx.outer(
            |e1| {
                let k = inner(e1).unwrap_or_else(|e| {
                    err.borrow_mut().get_or_insert(e);
                    ZERO
                });
                let c1: f64 = (0..nl).filter(|&l| w1[l] != 0.0).map(|l| w1[l] * cx.c(l, e1 - dim)).sum();
                k * (c1 / (e1 * e1 + eta * eta))
            },
            &pts,
        )?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        acc += eta * v.re;
    }
    Ok(acc)
}

/// Polynomial extrapolation to η = 0 through the given points.
pub fn richardson_limit(etas: &[f64], values: &[Complex64]) -> Complex64 {
    let mut out = ZERO;
    for (k, (&ek, &vk)) in etas.iter().zip(values).enumerate() {
        let mut w = 1.0;
        for (j, &ej) in etas.iter().enumerate() {
            if j != k {
                w *= ej / (ej - ek);
            }
        }
        out += vk * w;
    }
    out
}

/// η → 0 extrapolation of an oracle evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaLimit {
    pub etas: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Three-point Richardson limit from the three smallest η.
    pub limit: Complex64,
    /// |limit − limit from the next three η|, an error indicator.
    pub spread: f64,
}

/// Evaluate `eval` on `etas` (decreasing, energy units) in parallel and
/// extrapolate to η = 0.
pub fn eta_limit<F>(eval: F, etas: &[f64]) -> Result<EtaLimit, Error>
where
    F: Fn(f64) -> Result<Complex64, Error> + Sync,
{
    if etas.len() < 4 {
        return Err(Error::Domain("eta_limit needs at least four eta values".into()));
    }
    let values = etas.par_iter().map(|&e| eval(e)).collect::<Result<Vec<_>, _>>()?;
    let k = etas.len();
    let limit = richardson_limit(&etas[k - 3..], &values[k - 3..]);
    let prev = richardson_limit(&etas[k - 4..k - 1], &values[k - 4..k - 1]);
    Ok(EtaLimit { etas: etas.to_vec(), values, limit, spread: (limit - prev).norm() })
}

/// Log-log power-law fit |value| ∝ η^p.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaSeriesFit {
    pub etas: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub r2: f64,
    pub expected_exponent: f64,
}

impl EtaSeriesFit {
    /// Exponent within `tol` of the expected one and R² > `r2_min`.
    pub fn passes(&self, tol: f64, r2_min: f64) -> bool {
        (self.exponent - self.expected_exponent).abs() <= tol && self.r2 > r2_min
    }
}

/// Least-squares fit of ln|value| against ln η over `etas` (energy units,
/// strictly decreasing, ≥ 1e−6·T).
pub fn eta_scaling_fit<F>(evaluator: F, etas: &[f64], temperature: f64, expected_exponent: f64) -> Result<EtaSeriesFit, Error>
where
    F: Fn(f64) -> Result<f64, Error> + Sync,
{
    if etas.len() < 2 || etas.windows(2).any(|w| !(w[1] < w[0])) || etas.iter().any(|&e| e < 1e-6 * temperature) {
        return Err(Error::Domain("eta grid must be strictly decreasing and >= 1e-6·T".into()));
    }
    let values = etas.par_iter().map(|&e| evaluator(e)).collect::<Result<Vec<_>, _>>()?;
    let (exponent, r2) = loglog_fit(etas, &values);
    Ok(EtaSeriesFit { etas: etas.to_vec(), values, exponent, r2, expected_exponent })
}

/// Slope and coefficient of determination of ln|y| on ln x.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, r2)
}
