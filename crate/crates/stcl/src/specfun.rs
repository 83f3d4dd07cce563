//! Special functions and the closed-form reservoir integrals.
//!
//! Energies are in a single unit with ℏ = k_B = 1. Every temperature-dependent
//! function hangs off [`Thermal`], an immutable context holding `T`.
//!
//! The integrals are
//!
//! ```text
//! I±(δ1, δ2) = ∫ dε n_F(ε − δ1 − μ1) n_F(δ2 − μ2 − ε) / (ε ± i0)
//! J±(δ)      = ∫ dε n_F(ε − δ − μ) / (ε ± i0)          (soft band bottom at −Λ)
//! ```

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::Error;

/// Which side of the real axis the infinitesimal sits on: `Plus` is `ε + i0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// B_{2k} for k = 1..=12.
const BERNOULLI_2K: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Real part above which the asymptotic series is used.
const ASYMPTOTIC_RE: f64 = 20.0;

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Polygamma function ψ⁽ⁿ⁾(z) for complex `z`.
///
/// Shifts `z` upward with ψ⁽ⁿ⁾(z+1) = ψ⁽ⁿ⁾(z) + (−1)ⁿ n!/z^{n+1} until
/// Re z ≥ 20, then sums the Bernoulli asymptotic series.
pub fn polygamma(n: u32, z: Complex64) -> Result<Complex64, Error> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("polygamma({n}) of non-finite argument {z}")));
    }
    if is_pole(z) {
        return Err(Error::Pole(format!("polygamma({n}) at non-positive integer {}", z.re)));
    }
    let nf = factorial(n);
    let sign_n = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.re < ASYMPTOTIC_RE {
        shift += w.powi(-(n as i32 + 1));
        w += 1.0;
    }
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let asym = if n == 0 {
        let mut s = w.ln() - 0.5 * inv;
        let mut p = inv2;
        for (k, b) in BERNOULLI_2K.iter().enumerate() {
            let two_k = 2.0 * (k as f64 + 1.0);
            s -= b / two_k * p;
            p *= inv2;
        }
        s
    } else {
        // (−1)^{n+1} [ (n−1)!/w^n + n!/(2 w^{n+1}) + Σ B_2k (2k+n−1)!/(2k)! / w^{2k+n} ]
        let mut s = factorial(n - 1) * inv.powi(n as i32) + 0.5 * nf * inv.powi(n as i32 + 1);
        let mut p = inv.powi(n as i32 + 2);
        for (k, b) in BERNOULLI_2K.iter().enumerate() {
            let two_k = 2 * (k as u32 + 1);
            s += b * factorial(two_k + n - 1) / factorial(two_k) * p;
            p *= inv2;
        }
        -sign_n * s
    };
    // ψ⁽ⁿ⁾(z) = ψ⁽ⁿ⁾(z+k) − (−1)ⁿ n! Σ_j 1/(z+j)^{n+1}
    Ok(asym - sign_n * nf * shift)
}

/// Digamma ψ(z).
pub fn digamma(z: Complex64) -> Result<Complex64, Error> {
    polygamma(0, z)
}

/// Trigamma ψ′(z).
pub fn trigamma(z: Complex64) -> Result<Complex64, Error> {
    polygamma(1, z)
}

/// ψ(1) = −γ_E, exposed for tests and docs.
pub const PSI_ONE: f64 = -EULER_GAMMA;

/// Temperature context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thermal {
    pub t: f64,
}

impl Thermal {
    pub fn new(t: f64) -> Result<Self, Error> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("temperature must be finite and > 0, got {t}")));
        }
        Ok(Thermal { t })
    }

    /// n_F(ε) = 1/(e^{ε/T}+1), overflow-free.
    pub fn fermi(&self, eps: f64) -> f64 {
        let u = eps / self.t;
        if u > 0.0 {
            let e = (-u).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + u.exp())
        }
    }

    /// dn_F/dε = −n_F(ε) n_F(−ε)/T.
    pub fn fermi_deriv(&self, eps: f64) -> f64 {
        -self.fermi(eps) * self.fermi(-eps) / self.t
    }

    /// n_B(ε) = 1/(e^{ε/T}−1).
    pub fn bose(&self, eps: f64) -> Result<f64, Error> {
        if eps == 0.0 {
            return Err(Error::Pole("bose distribution at eps = 0".into()));
        }
        Ok(1.0 / (eps / self.t).exp_m1())
    }

    /// n_ψ(δ) = ψ(1/2 + iδ/2πT).
    pub fn n_psi(&self, delta: f64) -> Complex64 {
        self.n_psi_deriv(0, delta)
    }

    /// k-th derivative of n_ψ with respect to δ.
    pub fn n_psi_deriv(&self, k: u32, delta: f64) -> Complex64 {
        let s = Complex64::new(0.0, 1.0 / (2.0 * PI * self.t));
        let z = Complex64::new(0.5, delta / (2.0 * PI * self.t));
        // Re z = 1/2, never a pole.
        polygamma(k, z).expect("Re = 1/2 is pole-free") * s.powi(k as i32)
    }

    /// φ(x) = x n_B(x), smooth through x = 0 where it equals T.
    fn x_bose(&self, x: f64) -> f64 {
        let u = x / self.t;
        if u.abs() < 0.25 {
            let u2 = u * u;
            self.t
                * (1.0 - u / 2.0
                    + u2 * (1.0 / 12.0
                        + u2 * (-1.0 / 720.0
                            + u2 * (1.0 / 30240.0 + u2 * (-1.0 / 1209600.0 + u2 / 47900160.0)))))
        } else {
            self.t * u / u.exp_m1()
        }
    }

    /// dφ/dx.
    fn x_bose_deriv(&self, x: f64) -> f64 {
        let u = x / self.t;
        if u.abs() < 0.25 {
            let u2 = u * u;
            -0.5 + u
                * (1.0 / 6.0
                    + u2 * (-1.0 / 180.0
                        + u2 * (1.0 / 5040.0 + u2 * (-1.0 / 151200.0 + u2 / 4790016.0))))
        } else if u > 0.0 {
            let t = (-u).exp();
            (1.0 - t - u) * t / ((1.0 - t) * (1.0 - t))
        } else {
            let s = u.exp();
            (s - 1.0 - u * s) / ((s - 1.0) * (s - 1.0))
        }
    }

    /// Divided difference (g(b) − g(a))/(b − a) of g = n_ψ and its partials
    /// in a and b. Below `switch` the Taylor series about the midpoint is used.
    fn divided_difference(&self, a: f64, b: f64, switch: f64) -> (Complex64, Complex64, Complex64) {
        let h = b - a;
        if h.abs() < switch {
            let m = 0.5 * (a + b);
            let g = |k| self.n_psi_deriv(k, m);
            let h2 = h * h;
            let q = g(1) + g(3) * (h2 / 24.0) + g(5) * (h2 * h2 / 1920.0);
            let dm = g(2) + g(4) * (h2 / 24.0) + g(6) * (h2 * h2 / 1920.0);
            let dh = g(3) * (h / 12.0) + g(5) * (h2 * h / 480.0);
            (q, 0.5 * dm - dh, 0.5 * dm + dh)
        } else {
            let q = (self.n_psi(b) - self.n_psi(a)) / h;
            let da = (q - self.n_psi_deriv(1, a)) / h;
            let db = (self.n_psi_deriv(1, b) - q) / h;
            (q, da, db)
        }
    }

    /// I±(δ1, δ2; μ1, μ2) = n_B(δ2−δ1−μ1−μ2)[n_ψ(∓δ2±μ2) − n_ψ(∓δ1∓μ1)].
    ///
    /// The n_B pole is removable; `tol_pole` is the |n_B argument| below which
    /// the bracket is expanded about its midpoint.
    pub fn integral_i(&self, sign: Sign, d1: f64, d2: f64, mu1: f64, mu2: f64, tol_pole: f64) -> Complex64 {
        self.integral_i_with_grad(sign, d1, d2, mu1, mu2, tol_pole).0
    }

    /// Partials (∂/∂δ1, ∂/∂δ2) of [`Thermal::integral_i`].
    pub fn integral_i_grad(
        &self,
        sign: Sign,
        d1: f64,
        d2: f64,
        mu1: f64,
        mu2: f64,
        tol_pole: f64,
    ) -> (Complex64, Complex64) {
        let (_, g1, g2) = self.integral_i_with_grad(sign, d1, d2, mu1, mu2, tol_pole);
        (g1, g2)
    }

    /// Value and both partials in one pass.
    pub fn integral_i_with_grad(
        &self,
        sign: Sign,
        d1: f64,
        d2: f64,
        mu1: f64,
        mu2: f64,
        tol_pole: f64,
    ) -> (Complex64, Complex64, Complex64) {
        let a = d1 + mu1;
        let b = d2 - mu2;
        let x = b - a;
        let (q, qa, qb) = self.divided_difference(a, b, tol_pole);
        let phi = self.x_bose(x);
        let dphi = self.x_bose_deriv(x);
        let val = q * phi;
        let da = qa * phi - q * dphi;
        let db = qb * phi + q * dphi;
        match sign {
            Sign::Minus => (val, da, db),
            Sign::Plus => (val.conj(), da.conj(), db.conj()),
        }
    }

    /// J±(δ; μ, Λ) = ∓iπ n_F(−δ−μ) + Re n_ψ(δ+μ) − ln(Λ/2πT), dropping O(|δ+μ|/Λ).
    pub fn integral_j(&self, sign: Sign, delta: f64, mu: f64, cutoff: f64, cutoff_factor: f64) -> Result<Complex64, Error> {
        let x = delta + mu;
        if !(cutoff.is_finite() && cutoff > 0.0) || cutoff < cutoff_factor * x.abs() {
            return Err(Error::Validation(format!(
                "cutoff {cutoff} too small for |delta + mu| = {} (factor {cutoff_factor})",
                x.abs()
            )));
        }
        Ok(self.integral_j_unchecked(sign, delta, mu, cutoff))
    }

    pub(crate) fn integral_j_unchecked(&self, sign: Sign, delta: f64, mu: f64, cutoff: f64) -> Complex64 {
        let x = delta + mu;
        let im = PI * self.fermi(-x);
        let re = self.n_psi(x).re - (cutoff / (2.0 * PI * self.t)).ln();
        match sign {
            Sign::Plus => Complex64::new(re, -im),
            Sign::Minus => Complex64::new(re, im),
        }
    }

    /// d/dδ of J±; independent of Λ.
    pub fn integral_j_deriv(&self, sign: Sign, delta: f64, mu: f64) -> Complex64 {
        let x = delta + mu;
        // d/dδ n_F(−x) = n_F(x) n_F(−x)/T
        let im = PI * self.fermi(x) * self.fermi(-x) / self.t;
        let re = self.n_psi_deriv(1, x).re;
        match sign {
            Sign::Plus => Complex64::new(re, -im),
            Sign::Minus => Complex64::new(re, im),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn digamma_constants() {
        let p1 = digamma(c(1.0, 0.0)).unwrap();
        assert!((p1.re - PSI_ONE).abs() < 1e-14 && p1.im == 0.0);
        let ph = digamma(c(0.5, 0.0)).unwrap();
        assert!((ph.re - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-14);
        let t = trigamma(c(0.5, 0.0)).unwrap();
        assert!((t.re - PI * PI / 2.0).abs() < 1e-13 && t.im == 0.0);
    }

    #[test]
    fn poles_rejected() {
        assert!(matches!(digamma(c(0.0, 0.0)), Err(Error::Pole(_))));
        assert!(matches!(trigamma(c(-3.0, 0.0)), Err(Error::Pole(_))));
        assert!(digamma(c(-3.0, 1e-3)).is_ok());
    }

    #[test]
    fn distributions() {
        let th = Thermal::new(1.0).unwrap();
        assert_eq!(th.fermi(0.0), 0.5);
        assert!((th.fermi(7.3) + th.fermi(-7.3) - 1.0).abs() < 1e-15);
        assert!((th.bose(2.0).unwrap() + th.bose(-2.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(th.bose(0.0).is_err());
        assert_eq!(th.fermi(1e4), 0.0);
        assert_eq!(th.fermi(-1e4), 1.0);
    }

    #[test]
    fn x_bose_branches_agree() {
        let th = Thermal::new(1.0).unwrap();
        for &x in &[0.2499999f64, 0.25, -0.25, -0.2500001] {
            let direct = x / x.exp_m1();
            assert!((th.x_bose(x) - direct).abs() < 1e-15);
            let h = 1e-5;
            let fd = ((x + h) / (x + h).exp_m1() - (x - h) / (x - h).exp_m1()) / (2.0 * h);
            assert!((th.x_bose_deriv(x) - fd).abs() < 1e-9);
        }
        assert_eq!(th.x_bose(800.0), 0.0);
        assert_eq!(th.x_bose(-800.0), 800.0);
        assert!(th.x_bose_deriv(800.0).abs() < 1e-300);
    }

    #[test]
    fn j_derivative_at_symmetric_point() {
        let th = Thermal::new(1.0).unwrap();
        let d = th.integral_j_deriv(Sign::Plus, 0.0, 0.0);
        assert!(d.re.abs() < 1e-15);
        assert!((d.im + PI / 4.0).abs() < 1e-15);
    }
}
