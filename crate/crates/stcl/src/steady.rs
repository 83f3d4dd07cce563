//! Order-by-order steady state: S̃₂ᵀP⁽⁰⁾ = 0 and S̃₂ᵀP⁽²⁾ = −S̃₄ᵀP⁽⁰⁾.

use nalgebra::{DMatrix, DVector};

use crate::rates2::RateMatrix;
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateExpansion {
    pub p0: DVector<f64>,
    pub p2: DVector<f64>,
}

const CLAMP: f64 = -1e-14;

/// Solve the bordered system [Aᵀ; 1ᵀ] x = [rhs; total] in the least-squares
/// sense (exact when consistent) and return x with the residual norm.
fn bordered_solve(s: &DMatrix<f64>, rhs: &DVector<f64>, total: f64) -> (DVector<f64>, f64) {
    let n = s.nrows();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&s.transpose());
    a.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from(rhs);
    b[n] = total;
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let x = qr.r().solve_upper_triangular(&qtb).unwrap_or_else(|| DVector::from_element(n, f64::NAN));
    let res = (&a * &x - &b).norm();
    (x, res)
}

/// Connected components of the undirected transition graph.
fn components(s: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = s.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        comp[start] = id;
        while let Some(k) = stack.pop() {
            members.push(k);
            for j in 0..n {
                if comp[j] == usize::MAX && (s[(k, j)] != 0.0 || s[(j, k)] != 0.0) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Stationary distribution of the order-2 rates.
pub fn solve_order0(s2: &RateMatrix) -> Result<DVector<f64>, Error> {
    let s = &s2.entries;
    let n = s.nrows();
    let comps = components(s);
    if comps.len() > 1 {
        let blocks: Vec<String> = comps.iter().map(|c| format!("{c:?}")).collect();
        return Err(Error::Ergodicity(format!("rate graph splits into blocks {}", blocks.join(" "))));
    }
    let rank = s.clone().svd(false, false).rank(1e-12 * s.amax().max(f64::MIN_POSITIVE));
    if rank + 1 < n {
        return Err(Error::Ergodicity(format!("zero eigenvalue of S2^T has multiplicity {}", n - rank)));
    }
    let (mut p, res) = bordered_solve(s, &DVector::zeros(n), 1.0);
    if !(res <= 1e-10) {
        return Err(Error::Consistency { invariant: "order-0 stationarity".into(), detail: format!("residual {res:e}") });
    }
    for (k, x) in p.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x < CLAMP {
                return Err(Error::Consistency {
                    invariant: "P0 >= 0".into(),
                    detail: format!("P0[{k}] = {x:e} from invalid rates"),
                });
            }
            *x = 0.0;
        }
    }
    Ok(p)
}

/// Second-order correction with Σ P⁽²⁾ = 0.
pub fn solve_order2(s2: &RateMatrix, s4: &RateMatrix, p0: &DVector<f64>) -> Result<DVector<f64>, Error> {
    let rhs = -(s4.entries.transpose() * p0);
    let (p, res) = bordered_solve(&s2.entries, &rhs, 0.0);
    let scale = rhs.norm();
    // Residual must sit at round-off relative to the largest matrix-vector product involved.
    let floor = 1e-12 * scale.max(s2.entries.amax() * p.amax());
    if !(res <= floor) && res > 0.0 {
        return Err(Error::Consistency {
            invariant: "S4^T P0 in range of S2^T".into(),
            detail: format!("residual {res:e} vs |S4^T P0| = {scale:e}"),
        });
    }
    Ok(p)
}

/// Both orders at once.
pub fn solve(s2: &RateMatrix, s4: &RateMatrix) -> Result<SteadyStateExpansion, Error> {
    let p0 = solve_order0(s2)?;
    let p2 = solve_order2(s2, s4, &p0)?;
    Ok(SteadyStateExpansion { p0, p2 })
}
