//! Random setup generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stcl::model::{CouplingEntry, ReservoirSpec, Statistics, SystemSpec};
use stcl::{Setup, SetupSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn reservoirs(rng: &mut ChaCha8Rng, count: u32, mu_scale: f64, cutoff: f64) -> Vec<ReservoirSpec> {
    (1..=count)
        .map(|label| ReservoirSpec {
            label,
            name: None,
            mu: mu_scale * rng.gen_range(-2.0..2.0),
            dos: rng.gen_range(0.5..1.5),
            cutoff,
            charge: 1.0,
        })
        .collect()
}

/// Well-separated random levels in [−4, 4]·T.
fn energies(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let ok = (0..n).all(|a| (a + 1..n).all(|b| (e[a] - e[b]).abs() > 0.3));
        if ok {
            return e;
        }
    }
}

fn push_hermitian(c: &mut Vec<CouplingEntry>, n: usize, m: usize, r: u32, re: f64, im: f64) {
    c.push(CouplingEntry { n, m, lambda: r as i32, re, im });
    c.push(CouplingEntry { n: m, m: n, lambda: -(r as i32), re, im: -im });
}

/// Generic N-state setup: every ordered state pair couples to every
/// reservoir with an independent complex amplitude. `mu_scale = 0` gives
/// equilibrium.
pub fn generic_setup(seed: u64, n: usize, n_res: u32, mu_scale: f64) -> SetupSpec {
    let mut r = rng(seed);
    let energies = energies(&mut r, n);
    let reservoir = reservoirs(&mut r, n_res, mu_scale, 1e6);
    let mut coupling = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            for res in 1..=n_res {
                push_hermitian(&mut coupling, a, b, res, r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4));
            }
        }
    }
    SetupSpec {
        temperature: 1.0,
        statistics: Statistics::Fermion,
        system: SystemSpec { energies, labels: vec![] },
        reservoirs: reservoir,
        couplings: coupling,
    }
}

/// Many-body eigenbasis of `modes` spinless fermion modes with diagonal
/// interactions, each mode tunnel-coupled to every reservoir through
/// d_j = Jordan–Wigner annihilators. Particle number is conserved, so the
/// coupling sum rule (and hence cutoff independence) holds.
pub fn fock_setup(seed: u64, modes: usize, n_res: u32, mu_scale: f64) -> SetupSpec {
    let mut r = rng(seed);
    let eps: Vec<f64> = (0..modes).map(|_| r.gen_range(-3.0..3.0)).collect();
    let u: Vec<Vec<f64>> = (0..modes).map(|_| (0..modes).map(|_| r.gen_range(0.0..3.0)).collect()).collect();
    let n = 1usize << modes;
    let mut energies: Vec<f64> = (0..n)
        .map(|s| {
            let mut e = 0.0;
            for i in 0..modes {
                if s >> i & 1 == 1 {
                    e += eps[i];
                    for j in i + 1..modes {
                        if s >> j & 1 == 1 {
                            e += u[i][j];
                        }
                    }
                }
            }
            e
        })
        .collect();
    // Split exact degeneracies (empty state vs. others cannot coincide generically, but guard anyway).
    for (k, e) in energies.iter_mut().enumerate() {
        *e += 1e-3 * k as f64;
    }
    let reservoir = reservoirs(&mut r, n_res, mu_scale, 1e5);
    let mut coupling = Vec::new();
    for res in 1..=n_res {
        for j in 0..modes {
            let (tre, tim): (f64, f64) = (r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4));
            // As in the resonant level, +r labels fill the system:
            // V_{m,n,+r} = t ⟨m|d_j|n⟩ with n = m plus a particle in mode j.
            for m in 0..n {
                if m >> j & 1 == 0 {
                    let nstate = m | (1 << j);
                    let sign = if (m & ((1 << j) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    push_hermitian(&mut coupling, m, nstate, res, sign * tre, sign * tim);
                }
            }
        }
    }
    SetupSpec {
        temperature: 1.0,
        statistics: Statistics::Fermion,
        system: SystemSpec { energies, labels: vec![] },
        reservoirs: reservoir,
        couplings: coupling,
    }
}

pub fn build(spec: SetupSpec) -> Setup {
    stcl::model::build_setup(spec).expect("valid random setup")
}
