//! Input model: system levels, reservoirs, couplings, validation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::specfun::Thermal;
use crate::Error;

/// Signed reservoir label: `+r` is the particle branch of reservoir `r`, `−r`
/// its conjugate (μ_{−λ} = −μ_λ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub i32);

impl Label {
    pub fn conj(self) -> Label {
        Label(-self.0)
    }
    pub fn reservoir(self) -> u32 {
        self.0.unsigned_abs()
    }
    pub fn is_particle(self) -> bool {
        self.0 > 0
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// Reservoir particle statistics. Only fermions are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    #[default]
    Fermion,
}

impl Statistics {
    /// Sign of a crossed contraction.
    pub fn crossing_sign(self) -> f64 {
        match self {
            Statistics::Fermion => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub energies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

fn default_charge() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSpec {
    /// Positive reservoir index; the coupling table refers to `±label`.
    pub label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mu: f64,
    pub dos: f64,
    pub cutoff: f64,
    #[serde(default = "default_charge")]
    pub charge: f64,
}

/// One amplitude V_{nmλ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub n: usize,
    pub m: usize,
    pub lambda: i32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Raw, unvalidated setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSpec {
    pub temperature: f64,
    #[serde(default)]
    pub statistics: Statistics,
    pub system: SystemSpec,
    #[serde(rename = "reservoir")]
    pub reservoirs: Vec<ReservoirSpec>,
    #[serde(rename = "coupling", default)]
    pub couplings: Vec<CouplingEntry>,
}

/// Numerical tolerances, all but `cutoff_factor` and `lambda_check` in units of T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Minimum level spacing; closer levels are rejected as degenerate.
    pub degen_tol: f64,
    /// Below this denominator the 0/0 rate formulas switch to their derivative limit.
    pub fallback_tol: f64,
    /// Below this n_B argument the I± bracket is Taylor-expanded.
    pub tol_pole: f64,
    /// Required ratio of every cutoff to every other energy scale.
    pub cutoff_factor: f64,
    /// Allowed relative change of S̃₄ under cutoff doubling.
    pub lambda_check: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { degen_tol: 1e-9, fallback_tol: 1e-7, tol_pole: 1e-2, cutoff_factor: 1e3, lambda_check: 1e-8 }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 5] = ["degen_tol", "fallback_tol", "tol_pole", "cutoff_factor", "lambda_check"];

    /// Set one knob by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), Error> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Validation(format!("tolerance {name} must be finite and > 0, got {value}")));
        }
        match name {
            "degen_tol" => self.degen_tol = value,
            "fallback_tol" => self.fallback_tol = value,
            "tol_pole" => self.tol_pole = value,
            "cutoff_factor" => self.cutoff_factor = value,
            "lambda_check" => self.lambda_check = value,
            _ => {
                return Err(Error::Validation(format!(
                    "unknown tolerance {name:?}; known: {}",
                    Self::NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Apply `STCL_TOL_<NAME>` environment overrides.
    pub fn with_env(mut self) -> Result<Self, Error> {
        for name in Self::NAMES {
            let key = format!("STCL_TOL_{}", name.to_uppercase());
            if let Ok(raw) = std::env::var(&key) {
                let v: f64 = raw.trim().parse().map_err(|_| Error::Validation(format!("{key}={raw:?} is not a number")))?;
                self.set(name, v)?;
            }
        }
        Ok(self)
    }
}

/// Validated setup with dense coupling table.
#[derive(Debug, Clone)]
pub struct Setup {
    spec: SetupSpec,
    pub th: Thermal,
    pub tol: Tolerances,
    n: usize,
    labels: Vec<Label>,
    mu: Vec<f64>,
    dos: Vec<f64>,
    cutoff: Vec<f64>,
    charge: Vec<f64>,
    conj: Vec<usize>,
    v: Vec<Complex64>,
}

/// Validate a raw setup with default tolerances.
pub fn build_setup(raw: SetupSpec) -> Result<Setup, Error> {
    Setup::new(raw, Tolerances::default())
}

impl Setup {
    pub fn new(raw: SetupSpec, tol: Tolerances) -> Result<Setup, Error> {
        let th = Thermal::new(raw.temperature)?;
        let t = th.t;
        let n = raw.system.energies.len();
        if n < 2 {
            return Err(Error::Validation(format!("system needs at least 2 states, got {n}")));
        }
        if !raw.system.labels.is_empty() && raw.system.labels.len() != n {
            return Err(Error::Validation(format!(
                "{} state labels for {n} energies",
                raw.system.labels.len()
            )));
        }
        if let Some(e) = raw.system.energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::Validation(format!("non-finite energy {e}")));
        }
        if raw.reservoirs.is_empty() {
            return Err(Error::Validation("no reservoirs".into()));
        }
        let mut res = raw.reservoirs.clone();
        res.sort_by_key(|r| r.label);
        for w in res.windows(2) {
            if w[0].label == w[1].label {
                return Err(Error::Validation(format!("duplicate reservoir label {}", w[0].label)));
            }
        }
        for r in &res {
            if r.label == 0 || r.label > i32::MAX as u32 {
                return Err(Error::Validation(format!("reservoir label {} out of range", r.label)));
            }
            if !(r.dos.is_finite() && r.dos > 0.0) {
                return Err(Error::Validation(format!("reservoir {}: dos must be > 0", r.label)));
            }
            if !r.mu.is_finite() || !r.charge.is_finite() {
                return Err(Error::Validation(format!("reservoir {}: non-finite mu or charge", r.label)));
            }
        }
        // Cutoff must dominate every other scale.
        let mut scales: Vec<(String, f64)> = vec![("T".into(), t)];
        for (k, e) in raw.system.energies.iter().enumerate() {
            scales.push((format!("|chi_{k}|"), e.abs()));
        }
        for r in &res {
            scales.push((format!("|mu_{}|", r.label), r.mu.abs()));
        }
        for r in &res {
            if !r.cutoff.is_finite() {
                return Err(Error::Validation(format!("reservoir {}: non-finite cutoff", r.label)));
            }
            for (name, s) in &scales {
                if r.cutoff < tol.cutoff_factor * s {
                    return Err(Error::Validation(format!(
                        "reservoir {}: cutoff {} below {} x {name} = {}",
                        r.label,
                        r.cutoff,
                        tol.cutoff_factor,
                        tol.cutoff_factor * s
                    )));
                }
            }
        }

        let mut labels = Vec::with_capacity(2 * res.len());
        let (mut mu, mut dos, mut cutoff, mut charge, mut conj) = (vec![], vec![], vec![], vec![], vec![]);
        for (k, r) in res.iter().enumerate() {
            for s in [1i32, -1] {
                labels.push(Label(s * r.label as i32));
                mu.push(s as f64 * r.mu);
                dos.push(r.dos);
                cutoff.push(r.cutoff);
                charge.push(s as f64 * r.charge);
                conj.push(if s == 1 { 2 * k + 1 } else { 2 * k });
            }
        }
        let nl = labels.len();
        let mut v = vec![Complex64::new(0.0, 0.0); n * n * nl];
        let mut seen = vec![false; n * n * nl];
        for e in &raw.couplings {
            let li = labels
                .iter()
                .position(|l| l.0 == e.lambda)
                .ok_or_else(|| Error::Validation(format!("coupling ({}, {}, {}) names unknown reservoir", e.n, e.m, e.lambda)))?;
            if e.n >= n || e.m >= n {
                return Err(Error::Validation(format!("coupling ({}, {}, {}) names unknown state", e.n, e.m, e.lambda)));
            }
            if !(e.re.is_finite() && e.im.is_finite()) {
                return Err(Error::Validation(format!("coupling ({}, {}, {}) is not finite", e.n, e.m, e.lambda)));
            }
            let idx = (e.n * n + e.m) * nl + li;
            if seen[idx] {
                return Err(Error::Validation(format!("duplicate coupling ({}, {}, {})", e.n, e.m, e.lambda)));
            }
            seen[idx] = true;
            v[idx] = Complex64::new(e.re, e.im);
        }
        let mut offending = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for li in 0..nl {
                    let lhs = v[(a * n + b) * nl + li].conj();
                    let rhs = v[(b * n + a) * nl + conj[li]];
                    if lhs != rhs && (a, b, li) <= (b, a, conj[li]) {
                        offending.push(format!("V[{a},{b},{}] vs V[{b},{a},{}]", labels[li], labels[conj[li]]));
                    }
                }
            }
        }
        if !offending.is_empty() {
            return Err(Error::Validation(format!("Hermiticity violated: {}", offending.join("; "))));
        }
        // 1/δχ_ab appears only for states a ≠ b joined by a two-step coupling path.
        let linked = |a: usize, b: usize| (0..nl).any(|li| v[(a * n + b) * nl + li] != Complex64::new(0.0, 0.0));
        let mut degenerate = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let close = (raw.system.energies[a] - raw.system.energies[b]).abs() < tol.degen_tol * t;
                if close && (0..n).any(|k| linked(a, k) && linked(k, b)) {
                    degenerate.push(format!("({a}, {b})"));
                }
            }
        }
        if !degenerate.is_empty() {
            return Err(Error::Validation(format!("degenerate system levels: {}", degenerate.join(", "))));
        }

        let mut spec = raw;
        spec.reservoirs = res;
        spec.couplings.sort_by_key(|x| (x.n, x.m, x.lambda));
        spec.couplings.retain(|e| e.re != 0.0 || e.im != 0.0);
        Ok(Setup { spec, th, tol, n, labels, mu, dos, cutoff, charge, conj, v })
    }

    pub fn spec(&self) -> &SetupSpec {
        &self.spec
    }
    pub fn n_states(&self) -> usize {
        self.n
    }
    pub fn temperature(&self) -> f64 {
        self.th.t
    }
    pub fn energies(&self) -> &[f64] {
        &self.spec.system.energies
    }
    /// χ_a − χ_b.
    #[inline]
    pub fn dchi(&self, a: usize, b: usize) -> f64 {
        self.spec.system.energies[a] - self.spec.system.energies[b]
    }
    /// All signed labels, ordered +1, −1, +2, −2, ….
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }
    /// Positive labels, one per reservoir.
    pub fn reservoirs(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels.iter().copied().filter(|l| l.is_particle())
    }
    pub fn label_index(&self, l: Label) -> Result<usize, Error> {
        self.labels.iter().position(|x| *x == l).ok_or_else(|| Error::Lookup(format!("unknown reservoir label {l}")))
    }
    #[inline]
    pub fn conj_index(&self, li: usize) -> usize {
        self.conj[li]
    }
    #[inline]
    pub fn mu(&self, li: usize) -> f64 {
        self.mu[li]
    }
    #[inline]
    pub fn dos(&self, li: usize) -> f64 {
        self.dos[li]
    }
    #[inline]
    pub fn cutoff(&self, li: usize) -> f64 {
        self.cutoff[li]
    }
    /// Charge carried by one particle of label `li` (negative for conjugate labels).
    #[inline]
    pub fn charge(&self, li: usize) -> f64 {
        self.charge[li]
    }
    pub fn crossing_sign(&self) -> f64 {
        self.spec.statistics.crossing_sign()
    }
    /// V_{abλ} by label index.
    #[inline]
    pub fn v(&self, a: usize, b: usize, li: usize) -> Complex64 {
        self.v[(a * self.n + b) * self.labels.len() + li]
    }
    pub fn check_state(&self, k: usize) -> Result<(), Error> {
        if k < self.n {
            Ok(())
        } else {
            Err(Error::Lookup(format!("state index {k} out of range (N = {})", self.n)))
        }
    }

    /// C_λ(ε) = n_F(ε − μ_λ) by label index.
    #[inline]
    pub fn c(&self, li: usize, eps: f64) -> f64 {
        self.th.fermi(eps - self.mu[li])
    }

    /// C_λ(ε) = n_F(ε − μ_λ) (constant density of states).
    pub fn spectral_c(&self, lambda: Label, eps: f64) -> Result<f64, Error> {
        Ok(self.c(self.label_index(lambda)?, eps))
    }

    /// Copy of the raw spec with all cutoffs scaled by `factor`.
    pub fn with_scaled_cutoffs(&self, factor: f64) -> Result<Setup, Error> {
        let mut raw = self.spec.clone();
        for r in &mut raw.reservoirs {
            r.cutoff *= factor;
        }
        Setup::new(raw, self.tol)
    }

    /// Canonical JSON of the validated setup (sorted reservoirs and couplings).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("setup serializes")
    }
}

impl SetupSpec {
    pub fn from_toml(text: &str) -> Result<SetupSpec, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
    pub fn from_json(text: &str) -> Result<SetupSpec, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Reservoir labels of the resonant-level leads.
pub const LEAD_L: Label = Label(1);
pub const LEAD_R: Label = Label(2);

/// Spinless level at ε0 between leads L (μ/2) and R (−μ/2), V_{01,±l} = J/√2,
/// Γ0 = 2π|J|²D with D = 1.
pub fn resonant_level(eps0: f64, gamma0: f64, mu_bias: f64, t: f64, cutoff: f64) -> Result<SetupSpec, Error> {
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(Error::Validation(format!("gamma0 must be > 0, got {gamma0}")));
    }
    let dos = 1.0;
    let amp = (gamma0 / (2.0 * PI * dos)).sqrt() / 2f64.sqrt();
    let lead = |label: u32, name: &str, mu: f64| ReservoirSpec {
        label,
        name: Some(name.into()),
        mu,
        dos,
        cutoff,
        charge: 1.0,
    };
    let mut couplings = Vec::new();
    for l in [LEAD_L.0, LEAD_R.0] {
        couplings.push(CouplingEntry { n: 0, m: 1, lambda: l, re: amp, im: 0.0 });
        couplings.push(CouplingEntry { n: 1, m: 0, lambda: -l, re: amp, im: 0.0 });
    }
    Ok(SetupSpec {
        temperature: t,
        statistics: Statistics::Fermion,
        system: SystemSpec { energies: vec![0.0, eps0], labels: vec!["0".into(), "1".into()] },
        reservoirs: vec![lead(LEAD_L.reservoir(), "L", 0.5 * mu_bias), lead(LEAD_R.reservoir(), "R", -0.5 * mu_bias)],
        couplings,
    })
}
