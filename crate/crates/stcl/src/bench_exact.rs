//! Exact resonant-level results and their Taylor coefficients in Γ0.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::specfun::digamma;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantLevelParams {
    pub eps0: f64,
    pub gamma0: f64,
    pub mu_bias: f64,
    pub temperature: f64,
}

impl ResonantLevelParams {
    fn validate(&self) -> Result<(), Error> {
        if !(self.gamma0 > 0.0 && self.temperature > 0.0) {
            return Err(Error::Domain("resonant level needs gamma0 > 0 and T > 0".into()));
        }
        Ok(())
    }
}

/// Im ψ(1/2 + (Γ0 − 2iε0 + iμ)/4πT), analytic in Γ0 through 0.
fn im_psi(gamma0: f64, eps0: f64, mu: f64, t: f64) -> f64 {
    let z = Complex64::new(0.5 + gamma0 / (4.0 * PI * t), (mu - 2.0 * eps0) / (4.0 * PI * t));
    digamma(z).expect("Re z > 0").im
}

/// Equilibrium occupation of the level, 1/2 + (1/π) Im ψ(1/2 + (Γ0 − 2iε0)/4πT).
pub fn exact_occupation(p: &ResonantLevelParams) -> Result<f64, Error> {
    p.validate()?;
    if p.mu_bias != 0.0 {
        return Err(Error::Domain("exact occupation is only available at mu_bias = 0".into()));
    }
    Ok(occupation_unchecked(p.eps0, p.gamma0, p.temperature))
}

fn occupation_unchecked(eps0: f64, gamma0: f64, t: f64) -> f64 {
    0.5 + im_psi(gamma0, eps0, 0.0, t) / PI
}

/// Current into the right lead (e = 1).
pub fn exact_current(p: &ResonantLevelParams) -> Result<f64, Error> {
    p.validate()?;
    Ok(current_unchecked(p.eps0, p.gamma0, p.mu_bias, p.temperature))
}

fn current_unchecked(eps0: f64, gamma0: f64, mu: f64, t: f64) -> f64 {
    gamma0 / (4.0 * PI) * (im_psi(gamma0, eps0, mu, t) - im_psi(gamma0, eps0, -mu, t))
}

/// Which closed form to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactQuantity {
    Occupation,
    Current,
}

impl ExactQuantity {
    /// Closed form as a function of Γ0 (continued analytically to Γ0 ≤ 0).
    pub fn eval(self, p: &ResonantLevelParams, gamma0: f64) -> f64 {
        match self {
            ExactQuantity::Occupation => occupation_unchecked(p.eps0, gamma0, p.temperature),
            ExactQuantity::Current => current_unchecked(p.eps0, gamma0, p.mu_bias, p.temperature),
        }
    }
}

/// Taylor coefficients c_0..=c_order of `f(Γ0)` at Γ0 = 0 (c_k multiplies Γ0^k),
/// by Richardson-extrapolated central differences with base step h0.
///
/// Both closed forms are analytic in Γ0 on a disc around 0, so central
/// stencils straddling Γ0 = 0 are legitimate.
pub fn taylor_coefficients(f: impl Fn(f64) -> f64, h0: f64, order: usize, levels: usize) -> Result<Vec<f64>, Error> {
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let stencil = |h: f64| central_derivative(&f, k, h);
        // Central stencils have even error expansions: ratio 2 steps, powers h², h⁴, …
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
        for lvl in 0..levels {
            let h = h0 / 2f64.powi(lvl as i32);
            let mut row = vec![stencil(h)];
            for j in 1..=lvl {
                let factor = 4f64.powi(j as i32);
                let v = (factor * row[j - 1] - table[lvl - 1][j - 1]) / (factor - 1.0);
                row.push(v);
            }
            table.push(row);
        }
        // Pick the entry whose change against its neighbours is smallest:
        // deeper levels trade truncation error for rounding noise.
        let (mut best, mut err) = (table[0][0], f64::INFINITY);
        for l in 1..levels {
            for j in 1..=l {
                let e = (table[l][j] - table[l][j - 1]).abs().max((table[l][j] - table[l - 1][j - 1]).abs());
                if e < err {
                    best = table[l][j];
                    err = e;
                }
            }
        }
        let scale = best.abs().max(f(0.0).abs()).max(1e-300);
        if !best.is_finite() || err > 1e-6 * scale {
            return Err(Error::Accuracy(format!("derivative {k}: estimate {best:e}, error {err:e}")));
        }
        out.push(best / factorial(k));
    }
    Ok(out)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, x| a * x as f64)
}

/// k-th derivative at 0 by the symmetric k-th difference with step h.
fn central_derivative(f: &impl Fn(f64) -> f64, k: usize, h: f64) -> f64 {
    if k == 0 {
        return f(0.0);
    }
    // Δ^k with nodes at (j − k/2)h, j = 0..=k; binomial weights.
    let mut s = 0.0;
    let mut binom = 1.0;
    for j in 0..=k {
        let x = (j as f64 - k as f64 / 2.0) * h;
        let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        s += sign * binom * f(x);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    s / h.powi(k as i32)
}

/// Taylor coefficients in Γ0 of an exact resonant-level quantity.
///
/// Default step h = 1e−3·T with 4 Richardson levels.
pub fn taylor_in_gamma0(q: ExactQuantity, p: &ResonantLevelParams, order: usize) -> Result<Vec<f64>, Error> {
    taylor_coefficients(|g| q.eval(p, g), 1e-3 * p.temperature, order, 4)
}
