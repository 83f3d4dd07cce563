//! Closed-form checks on the non-interacting resonant level.

use std::f64::consts::PI;

use num_complex::Complex64;
use stcl::currents::{current_rates_2, current_report};
use stcl::model::{build_setup, resonant_level, LEAD_L, LEAD_R};
use stcl::rates2::{s11_constrained, s2_matrix};
use stcl::rates4::{s22b_constrained, s31_constrained, s4_matrix};
use stcl::specfun::trigamma;
use stcl::steady::solve;
use stcl::{Label, Setup};

const G0: f64 = PI;

fn rl(eps0: f64, mu: f64) -> Setup {
    build_setup(resonant_level(eps0, G0, mu, 1.0, 1e5).unwrap()).unwrap()
}

/// Im ψ′(1/2 − iε0/2πT) at T = 1.
fn im_tri(eps0: f64) -> f64 {
    trigamma(Complex64::new(0.5, -eps0 / (2.0 * PI))).unwrap().im
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn golden_rule_rates() {
    for eps0 in [-3.0, 0.0, 1.0, 4.5] {
        let s = rl(eps0, 0.0);
        let nf = s.th.fermi(eps0);
        for lead in [LEAD_L, LEAD_R] {
            let v = s11_constrained(&s, 0, 1, lead).unwrap().value;
            assert!(close(v.re, G0 / 2.0 * nf, 1e-14) && v.im == 0.0);
        }
        let m = s2_matrix(&s).entries;
        assert!(close(m[(0, 1)], G0 * nf, 1e-14));
        assert!(close(m[(1, 0)], G0 * s.th.fermi(-eps0), 1e-14));
    }
}

#[test]
fn fourth_order_rate_is_the_trigamma_expression() {
    let s = rl(1.0, 0.0);
    let s4 = s4_matrix(&s).s4.entries;
    let expected = G0 * G0 / (4.0 * PI * PI) * im_tri(1.0);
    assert!(close(s4[(0, 1)], expected, 1e-12), "{} vs {expected}", s4[(0, 1)]);
    assert!(close(s4[(1, 0)], -expected, 1e-12));
    // The whole off-diagonal entry comes from the 3+1 diagrams.
    let labels: Vec<Label> = s.labels().to_vec();
    let v31: Complex64 = labels.iter().map(|&l| s31_constrained(&s, 0, 1, l).unwrap().value).sum();
    assert!(close(2.0 * v31.re, expected, 1e-12));
}

#[test]
fn crossed_contraction_vanishes_for_every_index_chain() {
    let s = rl(0.7, 2.0);
    let labels: Vec<Label> = s.labels().to_vec();
    for i in 0..2 {
        for f in 0..2 {
            for &l1 in &labels {
                for &l2 in &labels {
                    assert_eq!(s22b_constrained(&s, i, f, l1, l2).unwrap().value, Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn particle_hole_symmetric_point() {
    let s = rl(0.0, 0.0);
    assert!(s4_matrix(&s).s4.entries.amax() < 1e-15);
    let e = solve(&s2_matrix(&s), &s4_matrix(&s).s4).unwrap();
    assert!((e.p0[1] - 0.5).abs() < 1e-15);
    assert!(e.p2.amax() < 1e-15);
}

#[test]
fn occupations_match_expansion_of_exact_result() {
    for eps0 in [-6.0, -1.0, 0.5, 2.0, 8.0] {
        let s = rl(eps0, 0.0);
        let e = solve(&s2_matrix(&s), &s4_matrix(&s).s4).unwrap();
        assert!(close(e.p0[1], s.th.fermi(eps0), 1e-12));
        assert!(close(e.p2[1], G0 / (4.0 * PI * PI) * im_tri(eps0), 1e-10), "eps0 = {eps0}");
        assert!((e.p2[0] + e.p2[1]).abs() < 1e-14);
    }
}

#[test]
fn golden_rule_current_of_right_lead() {
    let mu = 6.0;
    for eps0 in [-4.0, 0.0, 1.5] {
        let s = rl(eps0, mu);
        let r = current_report(&s).unwrap();
        let right = r.entries.iter().find(|e| e.reservoir == LEAD_R).unwrap();
        let left = r.entries.iter().find(|e| e.reservoir == LEAD_L).unwrap();
        let expected = G0 / 4.0 * (s.th.fermi(eps0 - mu / 2.0) - s.th.fermi(eps0 + mu / 2.0));
        assert!(close(right.i2, expected, 1e-13), "{} vs {expected}", right.i2);
        assert!((left.i2 + right.i2).abs() < 1e-13 * expected.abs());
        assert!((left.i4 + right.i4).abs() < 1e-11 * right.i4.abs().max(1e-3));
        assert_eq!(right.name.as_deref(), Some("R"));
    }
}

#[test]
fn golden_rule_current_rates_of_right_lead() {
    // S̃_{R2}^{01} = 2π|V|² n_F(ε0 + μ/2) fills from R; S̃_{R2}^{10} empties into it.
    let (eps0, mu) = (0.8, 6.0);
    let s = rl(eps0, mu);
    let r2 = current_rates_2(&s, LEAD_R).unwrap();
    assert!(close(r2[(0, 1)], -G0 / 2.0 * s.th.fermi(eps0 + mu / 2.0), 1e-14));
    assert!(close(r2[(1, 0)], G0 / 2.0 * s.th.fermi(-eps0 - mu / 2.0), 1e-14));
}

#[test]
fn equilibrium_currents_vanish() {
    for eps0 in [-2.0, 0.0, 3.0] {
        let r = current_report(&rl(eps0, 0.0)).unwrap();
        for e in &r.entries {
            assert!(e.i2.abs() < 1e-12 && e.i4.abs() < 1e-12, "{e:?}");
        }
    }
}

#[test]
fn lead_swap_leaves_rates_unchanged() {
    let spec = resonant_level(1.3, G0, 0.0, 1.0, 1e5).unwrap();
    let mut swapped = spec.clone();
    for r in &mut swapped.reservoirs {
        r.label = 3 - r.label;
    }
    for c in &mut swapped.couplings {
        c.lambda = c.lambda.signum() * (3 - c.lambda.abs());
    }
    let (a, b) = (build_setup(spec).unwrap(), build_setup(swapped).unwrap());
    assert_eq!(s2_matrix(&a), s2_matrix(&b));
    assert_eq!(s4_matrix(&a).s4, s4_matrix(&b).s4);
}

#[test]
fn factory_parameters() {
    let s = rl(1.0, 6.0);
    let width: f64 = s
        .reservoirs()
        .map(|l| {
            let li = s.label_index(l).unwrap();
            2.0 * PI * s.v(0, 1, li).norm_sqr() * s.dos(li)
        })
        .sum();
    assert!(close(width, G0, 1e-15));
    let mus: Vec<f64> = s.spec().reservoirs.iter().map(|r| r.mu).collect();
    assert_eq!(mus, vec![3.0, -3.0]);
    assert!(resonant_level(1.0, 0.0, 0.0, 1.0, 1e5).is_err());
}
