//! Small dense complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn ones(n: usize) -> CVec {
    CVec::from_element(n, ONE)
}

/// Induced sup-norm of a matrix acting on column vectors: max row sum of moduli.
pub fn inf_norm(m: &CMat) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn sup_norm(v: &CVec) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `|M| 1`: row sums of entry moduli.
pub fn abs_row_sums(m: &CMat) -> Vec<f64> {
    m.row_iter().map(|row| row.iter().map(|c| c.norm()).sum()).collect()
}

/// Dominant eigenpair with a certified residual `||M v - rho v||` (v unit sup-norm).
#[derive(Debug, Clone)]
pub struct DominantPair {
    pub eigenvalue: Complex64,
    pub radius: f64,
    pub eigenvector: CVec,
    pub residual: f64,
}

/// Spectral radius via complex Schur decomposition, refined by inverse iteration.
pub fn dominant_pair(m: &CMat) -> Result<DominantPair> {
    let n = m.nrows();
    if n == 1 {
        let ev = m[(0, 0)];
        return Ok(DominantPair { eigenvalue: ev, radius: ev.norm(), eigenvector: ones(1), residual: 0.0 });
    }
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    let mut eigenvalue = t[(0, 0)];
    for i in 1..n {
        if t[(i, i)].norm() > eigenvalue.norm() {
            eigenvalue = t[(i, i)];
        }
    }
    let scale = inf_norm(m).max(1e-300);
    let shift = eigenvalue + Complex64::new(scale * 1e-13, scale * 1e-13);
    let shifted = m - CMat::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = ones(n);
    for k in 0..n {
        v[k] += Complex64::new(0.1 * k as f64, 0.05 * k as f64);
    }
    for _ in 0..8 {
        match lu.solve(&v) {
            Some(x) => {
                let s = sup_norm(&x);
                if !s.is_finite() || s == 0.0 {
                    break;
                }
                v = x / Complex64::new(s, 0.0);
            }
            None => break,
        }
    }
    let mv = m * &v;
    let denom = v.dot(&v.map(|c| c.conj()));
    let rayleigh = if denom.norm() > 0.0 { v.map(|c| c.conj()).dot(&mv) / denom } else { eigenvalue };
    let eig = if (rayleigh - eigenvalue).norm() <= 1e-8 * scale.max(1.0) { rayleigh } else { eigenvalue };
    let residual = sup_norm(&(mv - &v * eig));
    if !residual.is_finite() {
        return Err(Error::Numerical("dominant eigenpair residual not finite".into()));
    }
    Ok(DominantPair { eigenvalue: eig, radius: eig.norm(), eigenvector: v, residual })
}

/// Ordinary least squares of `y` on `x`; returns `(intercept, slope, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (intercept, slope, r2)
}
