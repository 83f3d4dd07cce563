//! Command-line front end. Every subcommand produces a numeric table that is
//! written as CSV or JSON with 17 significant digits.

use std::fmt::Write as _;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::bench_exact::{exact_current, exact_occupation, taylor_in_gamma0, ExactQuantity, ResonantLevelParams};
use crate::currents::current_report;
use crate::oracle::i0_quadrature;
use crate::specfun::{digamma, Thermal};
use crate::model::{resonant_level, Setup, SetupSpec, Tolerances, LEAD_R};
use crate::rates2::s2_matrix;
use crate::rates4::{cutoff_check, s13, s31, s4_matrix};
use crate::steady::solve;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "stcl", version, about = "Fourth-order Pauli STCL rates, occupations and currents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the S2 (and S4) rate matrices.
    Rates(RunArgs),
    /// Steady-state probabilities P(0), P(2).
    Steady(RunArgs),
    /// Per-reservoir currents with channel breakdown.
    Current(RunArgs),
    /// Resonant-level occupation sweep with exact benchmark columns.
    FigOccupation(RunArgs),
    /// Resonant-level current sweep (mu = 6T by default) with exact benchmark columns.
    FigCurrent(RunArgs),
    /// Run the invariant and benchmark suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Setup file (TOML). Figure subcommands default to the built-in resonant level.
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// Sweep as var:lo:hi:n with var one of eps0, mu, T, gamma0.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Perturbative order, 2 or 4.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..=4))]
    pub order: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Recompute S4 with doubled cutoffs and warn on any change.
    #[arg(long)]
    pub check_cutoff: bool,
    /// Tolerance override name=value (repeatable).
    #[arg(long = "tol")]
    pub tol: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Setup files to check in addition to the built-in benchmarks.
    #[arg(long)]
    pub setup: Vec<PathBuf>,
    #[arg(long = "tol")]
    pub tol: Vec<String>,
}

/// Resonant-level parameters as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonantLevelConfig {
    pub eps0: f64,
    pub gamma0: f64,
    #[serde(default)]
    pub mu_bias: f64,
    pub temperature: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    1e5
}

impl ResonantLevelConfig {
    fn spec(&self) -> Result<SetupSpec, Error> {
        resonant_level(self.eps0, self.gamma0, self.mu_bias, self.temperature, self.cutoff)
    }
    fn params(&self) -> ResonantLevelParams {
        ResonantLevelParams { eps0: self.eps0, gamma0: self.gamma0, mu_bias: self.mu_bias, temperature: self.temperature }
    }
}

/// A loaded config: either a general setup or the built-in resonant level.
#[derive(Debug, Clone, PartialEq)]
pub enum SetupSource {
    General(SetupSpec),
    ResonantLevel(ResonantLevelConfig),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonantLevelFile {
    resonant_level: ResonantLevelConfig,
}

impl SetupSource {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if value.get("resonant_level").is_some() {
            let f: ResonantLevelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            Ok(SetupSource::ResonantLevel(f.resonant_level))
        } else {
            Ok(SetupSource::General(SetupSpec::from_toml(text)?))
        }
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn spec(&self) -> Result<SetupSpec, Error> {
        match self {
            SetupSource::General(s) => Ok(s.clone()),
            SetupSource::ResonantLevel(r) => r.spec(),
        }
    }

    /// Copy with one parameter replaced.
    fn with(&self, var: SweepVar, x: f64) -> Result<Self, Error> {
        match (self, var) {
            (SetupSource::ResonantLevel(r), _) => {
                let mut r = *r;
                match var {
                    SweepVar::Eps0 => r.eps0 = x,
                    SweepVar::Mu => r.mu_bias = x,
                    SweepVar::T => r.temperature = x,
                    SweepVar::Gamma0 => r.gamma0 = x,
                }
                Ok(SetupSource::ResonantLevel(r))
            }
            (SetupSource::General(s), SweepVar::T) => {
                let mut s = s.clone();
                s.temperature = x;
                Ok(SetupSource::General(s))
            }
            (SetupSource::General(_), v) => Err(Error::Config(format!(
                "sweep variable {} only applies to resonant_level configs",
                v.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Eps0,
    Mu,
    T,
    Gamma0,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Eps0 => "eps0",
            SweepVar::Mu => "mu",
            SweepVar::T => "T",
            SweepVar::Gamma0 => "gamma0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!("sweep '{s}' is not var:lo:hi:n")));
        }
        let var = match parts[0] {
            "eps0" => SweepVar::Eps0,
            "mu" => SweepVar::Mu,
            "T" => SweepVar::T,
            "gamma0" => SweepVar::Gamma0,
            v => return Err(Error::Config(format!("unknown sweep variable '{v}' (eps0, mu, T, gamma0)"))),
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| Error::Config(format!("sweep bound '{x}': {e}")));
        let (lo, hi) = (num(parts[1])?, num(parts[2])?);
        let n: usize = parts[3].parse().map_err(|e| Error::Config(format!("sweep count '{}': {e}", parts[3])))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config("sweep range must be finite".into()));
        }
        if n < 2 {
            return Err(Error::Config("sweep needs at least 2 points".into()));
        }
        Ok(Sweep { var, lo, hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64).collect()
    }
}

/// Column-named numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NaN".into()
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&x| num(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let cols: Vec<String> = self.columns.iter().map(|c| serde_json::to_string(c).expect("string")).collect();
        let mut s = format!("{{\"columns\":[{}],\"rows\":[", cols.join(","));
        for (k, r) in self.rows.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let cells: Vec<String> =
                r.iter().map(|&x| if x.is_finite() { format!("{x:.16e}") } else { "null".into() }).collect();
            let _ = write!(s, "[{}]", cells.join(","));
        }
        s.push_str("]}\n");
        s
    }

    pub fn render(&self, f: Format) -> String {
        match f {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn tolerances(overrides: &[String]) -> Result<Tolerances, Error> {
    let mut t = Tolerances::default().with_env()?;
    for o in overrides {
        let (name, value) = o.split_once('=').ok_or_else(|| Error::Config(format!("--tol '{o}' is not name=value")))?;
        let v: f64 = value.parse().map_err(|e| Error::Config(format!("--tol {name}: {e}")))?;
        t.set(name, v)?;
    }
    Ok(t)
}

fn figure_default(mu: f64) -> SetupSource {
    SetupSource::ResonantLevel(ResonantLevelConfig {
        eps0: 0.0,
        gamma0: PI,
        mu_bias: mu,
        temperature: 1.0,
        cutoff: default_cutoff(),
    })
}

fn state_names(setup: &Setup) -> Vec<String> {
    let labels = &setup.spec().system.labels;
    (0..setup.n_states()).map(|k| labels.get(k).cloned().unwrap_or_else(|| k.to_string())).collect()
}

fn rows_for(
    source: &SetupSource,
    sweep: Option<&Sweep>,
    row: impl Fn(&SetupSource) -> Result<Vec<f64>, Error> + Sync,
) -> Result<Vec<Vec<f64>>, Error> {
    match sweep {
        None => Ok(vec![row(source)?]),
        Some(sw) => sw
            .points()
            .par_iter()
            .map(|&x| {
                let mut r = vec![x];
                r.extend(row(&source.with(sw.var, x)?)?);
                Ok(r)
            })
            .collect(),
    }
}

fn with_sweep_column(sweep: Option<&Sweep>, mut cols: Vec<String>) -> Vec<String> {
    if let Some(sw) = sweep {
        cols.insert(0, sw.var.name().to_string());
    }
    cols
}

fn build(source: &SetupSource, tol: Tolerances) -> Result<Setup, Error> {
    Setup::new(source.spec()?, tol)
}

fn rates_table(source: &SetupSource, a: &RunArgs, sweep: Option<&Sweep>, tol: Tolerances) -> Result<Table, Error> {
    let setup = build(source, tol)?;
    let n = setup.n_states();
    let mut cols = Vec::new();
    for order in [2, 4] {
        if order > a.order {
            continue;
        }
        for i in 0..n {
            for f in 0..n {
                cols.push(format!("S{order}_{i}_{f}"));
            }
        }
    }
    let rows = rows_for(source, sweep, |src| {
        let s = build(src, tol)?;
        let mut out: Vec<f64> = s2_matrix(&s).entries.transpose().iter().copied().collect();
        if a.order == 4 {
            out.extend(s4_matrix(&s).s4.entries.transpose().iter().copied());
        }
        Ok(out)
    })?;
    Ok(Table { columns: with_sweep_column(sweep, cols), rows })
}

fn steady_table(source: &SetupSource, a: &RunArgs, sweep: Option<&Sweep>, tol: Tolerances) -> Result<Table, Error> {
    let setup = build(source, tol)?;
    let names = state_names(&setup);
    let mut cols: Vec<String> = names.iter().map(|s| format!("P0_{s}")).collect();
    if a.order == 4 {
        cols.extend(names.iter().map(|s| format!("P2_{s}")));
    }
    let rows = rows_for(source, sweep, |src| {
        let s = build(src, tol)?;
        let s2 = s2_matrix(&s);
        if a.order == 2 {
            return Ok(crate::steady::solve_order0(&s2)?.iter().copied().collect());
        }
        let e = solve(&s2, &s4_matrix(&s).s4)?;
        Ok(e.p0.iter().chain(e.p2.iter()).copied().collect())
    })?;
    Ok(Table { columns: with_sweep_column(sweep, cols), rows })
}

fn current_table(source: &SetupSource, a: &RunArgs, sweep: Option<&Sweep>, tol: Tolerances) -> Result<Table, Error> {
    let setup = build(source, tol)?;
    let mut cols = Vec::new();
    for r in setup.reservoirs() {
        let r = r.reservoir();
        cols.push(format!("I2_{r}"));
        if a.order == 4 {
            for c in ["I4", "I4_seq_corr", "I4_cot_inelastic", "I4_cot_elastic", "I4_virtual"] {
                cols.push(format!("{c}_{r}"));
            }
        }
    }
    let order = a.order;
    let rows = rows_for(source, sweep, |src| {
        let s = build(src, tol)?;
        let rep = current_report(&s)?;
        let mut out = Vec::new();
        for e in &rep.entries {
            out.push(e.i2);
            if order == 4 {
                let c = &e.channels;
                out.extend([
                    e.i4,
                    c.sequential_correction,
                    c.cotunnelling_inelastic,
                    c.cotunnelling_elastic,
                    c.virtual_assisted,
                ]);
            }
        }
        Ok(out)
    })?;
    Ok(Table { columns: with_sweep_column(sweep, cols), rows })
}

fn rl_config(source: &SetupSource) -> Result<ResonantLevelConfig, Error> {
    match source {
        SetupSource::ResonantLevel(r) => Ok(*r),
        SetupSource::General(_) => Err(Error::Config("figure subcommands need a resonant_level config".into())),
    }
}

fn fig_occupation_row(src: &SetupSource, tol: Tolerances) -> Result<Vec<f64>, Error> {
    let r = rl_config(src)?;
    let s = Setup::new(r.spec()?, tol)?;
    let e = solve(&s2_matrix(&s), &s4_matrix(&s).s4)?;
    let p = r.params();
    let exact = exact_occupation(&p)?;
    let c = taylor_in_gamma0(ExactQuantity::Occupation, &p, 1)?;
    Ok(vec![e.p0[1], e.p2[1], e.p0[1] + e.p2[1], exact, c[0], c[0] + c[1] * r.gamma0])
}

fn fig_current_row(src: &SetupSource, tol: Tolerances) -> Result<Vec<f64>, Error> {
    let r = rl_config(src)?;
    let s = Setup::new(r.spec()?, tol)?;
    let rep = current_report(&s)?;
    let e = rep
        .entries
        .iter()
        .find(|e| e.reservoir == LEAD_R)
        .ok_or_else(|| Error::Lookup("right lead missing".into()))?;
    let p = r.params();
    let exact = exact_current(&p)?;
    let c = taylor_in_gamma0(ExactQuantity::Current, &p, 2)?;
    let g = r.gamma0;
    Ok(vec![e.i2, e.i4, e.i2 + e.i4, exact, c[1] * g, c[1] * g + c[2] * g * g])
}

fn fig_table(
    source: &SetupSource,
    sweep: Option<&Sweep>,
    tol: Tolerances,
    cols: &[&str],
    row: fn(&SetupSource, Tolerances) -> Result<Vec<f64>, Error>,
) -> Result<Table, Error> {
    rl_config(source)?;
    let rows = rows_for(source, sweep, |s| row(s, tol))?;
    let cols = cols.iter().map(|s| s.to_string()).collect();
    Ok(Table { columns: with_sweep_column(sweep, cols), rows })
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), passed, detail: detail.into() }
}

/// Invariants that hold for every valid setup.
pub fn verify_setup(name: &str, setup: &Setup) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let s2 = s2_matrix(setup);
    out.push(check(
        format!("{name}: S2 row sums"),
        s2.max_row_sum_rel() < 1e-12,
        format!("{:.3e}", s2.max_row_sum_rel()),
    ));
    let b = s4_matrix(setup);
    out.push(check(
        format!("{name}: S4 row sums"),
        b.s4.max_row_sum_rel() < 1e-12,
        format!("{:.3e}", b.s4.max_row_sum_rel()),
    ));
    let n = setup.n_states();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for f in 0..n {
            for l in 0..setup.n_labels() {
                let a = s31(setup, i, f, l).total();
                let c = s13(setup, i, f, l);
                worst = worst.max((a.conj() - c).norm());
                scale = scale.max(a.norm());
            }
        }
    }
    let rel = worst / scale.max(f64::MIN_POSITIVE);
    out.push(check(format!("{name}: S13 = conj(S31)"), rel < 1e-12, format!("{rel:.3e}")));
    match solve(&s2, &b.s4) {
        Ok(e) => out.push(check(
            format!("{name}: steady state"),
            (e.p0.sum() - 1.0).abs() < 1e-12 && e.p2.sum().abs() < 1e-12,
            format!("sum P0 - 1 = {:.3e}, sum P2 = {:.3e}", e.p0.sum() - 1.0, e.p2.sum()),
        )),
        Err(e) => out.push(check(format!("{name}: steady state"), false, e.to_string())),
    }
    match cutoff_check(setup) {
        Ok(c) => out.push(check(
            format!("{name}: cutoff independence"),
            c.passed || !c.violated_sum_rules.is_empty(),
            c.warning().unwrap_or_else(|| format!("{:.3e}", c.max_rel_change)),
        )),
        Err(e) => out.push(check(format!("{name}: cutoff independence"), false, e.to_string())),
    }
    out
}

/// Resonant-level benchmarks against the closed forms.
pub fn verify_resonant_level(tol: Tolerances) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let g = PI;
    let mut worst2: f64 = 0.0;
    let mut worst4: f64 = 0.0;
    let mut worst_i: f64 = 0.0;
    for k in 0..=20 {
        let eps0 = -10.0 + k as f64;
        let r = |mu: f64| ResonantLevelConfig { eps0, gamma0: g, mu_bias: mu, temperature: 1.0, cutoff: 1e5 };
        let run = || -> Result<(f64, f64, f64), Error> {
            let occ = fig_occupation_row(&SetupSource::ResonantLevel(r(0.0)), tol)?;
            let cur = fig_current_row(&SetupSource::ResonantLevel(r(6.0)), tol)?;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            let nf = Thermal::new(1.0)?.fermi(eps0);
            Ok((rel(occ[0], nf), (occ[2] - occ[5]).abs(), rel(cur[2], cur[5])))
        };
        match run() {
            Ok((a, b, c)) => {
                worst2 = worst2.max(a);
                worst4 = worst4.max(b);
                worst_i = worst_i.max(c);
            }
            Err(e) => out.push(check(format!("resonant level eps0={eps0}"), false, e.to_string())),
        }
    }
    out.push(check("resonant level: P0 vs n_F", worst2 < 1e-12, format!("{worst2:.3e}")));
    out.push(check("resonant level: P0+P2 vs exact Taylor", worst4 < 1e-9, format!("{worst4:.3e}")));
    out.push(check("resonant level: I2+I4 vs exact Taylor", worst_i < 1e-6, format!("{worst_i:.3e}")));
    out
}

/// Quadrature of the basic finite-γ integral against its digamma closed form.
pub fn verify_oracle() -> CheckResult {
    let run = || -> Result<f64, Error> {
        let th = Thermal::new(1.0)?;
        let mut worst: f64 = 0.0;
        for (m1, m2, g) in [(0.7, -1.3, 0.01), (-2.0, 0.4, 0.1), (3.0, 2.5, 0.05)] {
            let q = i0_quadrature(&th, m1, m2, g)?;
            let psi = |mu: f64| digamma(Complex64::new(0.5 + g / (2.0 * PI), mu / (2.0 * PI)));
            let closed = (psi(m2)? - psi(m1)?) * th.bose(m2 - m1)?;
            worst = worst.max((q - closed).norm() / closed.norm());
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => check("oracle: I0 quadrature vs digamma form", w < 1e-8, format!("{w:.3e}")),
        Err(e) => check("oracle: I0 quadrature vs digamma form", false, e.to_string()),
    }
}

fn verify(a: &VerifyArgs) -> Result<(String, bool), Error> {
    let tol = tolerances(&a.tol)?;
    let mut results = verify_resonant_level(tol);
    results.push(verify_oracle());
    let rl = Setup::new(resonant_level(1.0, PI, 2.0, 1.0, 1e5)?, tol)?;
    results.extend(verify_setup("resonant level", &rl));
    for path in &a.setup {
        let src = SetupSource::load(path)?;
        let s = build(&src, tol)?;
        results.extend(verify_setup(&path.display().to_string(), &s));
    }
    let mut text = String::new();
    for r in &results {
        let _ = writeln!(text, "{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok((text, results.iter().all(|r| r.passed)))
}

/// Run a parsed command. Returns the text for stdout, warnings for stderr
/// and the exit code.
pub fn run(cli: &Cli) -> Result<(String, Vec<String>, i32), Error> {
    let mut warnings = Vec::new();
    let (a, occupation) = match &cli.command {
        Command::Verify(v) => {
            let (text, ok) = verify(v)?;
            if !ok {
                warnings.push("verification failed".into());
            }
            return Ok((text, warnings, if ok { 0 } else { 2 }));
        }
        Command::Rates(a) | Command::Steady(a) | Command::Current(a) => (a, None),
        Command::FigOccupation(a) => (a, Some(true)),
        Command::FigCurrent(a) => (a, Some(false)),
    };
    let tol = tolerances(&a.tol)?;
    let sweep = a.sweep.as_deref().map(Sweep::parse).transpose()?;
    let source = match (&a.setup, occupation) {
        (Some(p), _) => SetupSource::load(p)?,
        (None, Some(occ)) => figure_default(if occ { 0.0 } else { 6.0 }),
        (None, None) => return Err(Error::Config("--setup is required".into())),
    };
    let sweep = match (sweep, occupation) {
        (None, Some(_)) => Some(Sweep { var: SweepVar::Eps0, lo: -10.0, hi: 10.0, n: 41 }),
        (s, _) => s,
    };
    if a.check_cutoff {
        let c = cutoff_check(&build(&source, tol)?)?;
        if let Some(w) = c.warning() {
            warnings.push(w);
        }
    }
    let sw = sweep.as_ref();
    let table = match &cli.command {
        Command::Rates(_) => rates_table(&source, a, sw, tol)?,
        Command::Steady(_) => steady_table(&source, a, sw, tol)?,
        Command::Current(_) => current_table(&source, a, sw, tol)?,
        Command::FigOccupation(_) => fig_table(
            &source,
            sw,
            tol,
            &["P1_0", "P1_2", "P1", "P1_exact", "P1_taylor0", "P1_taylor1"],
            fig_occupation_row,
        )?,
        Command::FigCurrent(_) => fig_table(
            &source,
            sw,
            tol,
            &["IR_2", "IR_4", "IR", "IR_exact", "IR_taylor1", "IR_taylor2"],
            fig_current_row,
        )?,
        Command::Verify(_) => unreachable!("handled above"),
    };
    Ok((table.render(a.format), warnings, 0))
}
