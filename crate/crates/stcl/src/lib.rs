//! Pauli steady-state time-convolutionless (STCL) master equation to fourth
//! order in the system–reservoir coupling.
//!
//! A small quantum system with eigenenergies χ_n exchanges fermions with
//! reservoirs through bilinear couplings V_{nmλ}. The crate computes
//! second- and fourth-order Pauli rates, the steady-state occupations
//! P = P⁽⁰⁾ + P⁽²⁾ and the reservoir currents I⁽²⁾ + I⁽⁴⁾, all in the
//! analytic η → 0 limit. The [`oracle`] module evaluates the same rates at
//! finite switch-on rate η by brute-force quadrature, and [`bench_exact`]
//! holds the closed-form solution of the resonant level.
//!
//! Units: ℏ = k_B = 1, all energies in one arbitrary unit.

pub mod bench_exact;
pub mod cli;
pub mod currents;
pub mod model;
pub mod oracle;
pub mod rates2;
pub mod rates4;
pub mod specfun;
pub mod steady;

pub use model::{Label, Setup, SetupSpec, Tolerances};
pub use specfun::{Sign, Thermal};

/// Library error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("pole: {0}")]
    Pole(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("ergodicity error: {0}")]
    Ergodicity(String),
    #[error("numerical consistency failure ({invariant}): {detail}")]
    Consistency { invariant: String, detail: String },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("extrapolation did not converge: {0}")]
    Accuracy(String),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// CLI exit code: 1 for input problems, 2 for numerical-consistency failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Consistency { .. } | Error::Quadrature(_) | Error::Accuracy(_) => 2,
            _ => 1,
        }
    }
}
