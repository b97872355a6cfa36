//! Lattice / non-lattice classification by the operators `R_it` at a
//! periodic base point.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::{periodic_point, PeriodicBasePoint};
use crate::error::{Error, Result};
use crate::linalg::{dominant_pair, inf_norm, CMat};
use crate::rpf::StepSource;
use crate::system::{FiberSystem, Twisted};

/// Residual bound required of every dominant pair.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOperatorFamily {
    pub cycle: Vec<usize>,
    pub n0: usize,
    pub t: Vec<f64>,
    /// Spectral radius of `R_it / ρ(R_0)`.
    pub radii: Vec<f64>,
    /// `ρ(R_0) = λ_{ω_0, n_0}(0)`.
    pub radius0: f64,
    pub residuals: Vec<f64>,
    /// Grid points whose radius is a certified upper bound from operator
    /// norms instead of an eigenpair.
    pub by_norm_bound: Vec<f64>,
}

/// `R_it = M_{n0-1}(it) ⋯ M_0(it)` along the periodic orbit.
pub fn periodic_operator(sys: &dyn FiberSystem, point: &PeriodicBasePoint, t: f64) -> Result<CMat> {
    let n0 = point.period() as i64;
    let window = point.window(-1, n0 + 1)?;
    let src = sys.source(&window)?;
    let tw = Twisted { src: src.as_ref(), z: Complex64::new(0.0, t) };
    let mut m = CMat::identity(sys.dim(), sys.dim());
    for j in 0..n0 {
        m = tw.step(j) * m;
    }
    Ok(m)
}

pub fn periodic_family(sys: &dyn FiberSystem, point: &PeriodicBasePoint, t_grid: &[f64]) -> Result<PeriodicOperatorFamily> {
    let p0 = dominant_pair(&periodic_operator(sys, point, 0.0)?)?;
    let radius0 = p0.radius;
    if !(radius0 > 0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    let mut radii = Vec::with_capacity(t_grid.len());
    let mut residuals = Vec::with_capacity(t_grid.len());
    let mut by_norm_bound = Vec::new();
    for &t in t_grid {
        let r = periodic_operator(sys, point, t)? / Complex64::new(radius0, 0.0);
        let p = dominant_pair(&r)?;
        if p.residual <= RESIDUAL_TOL {
            radii.push(p.radius);
            residuals.push(p.residual);
            continue;
        }
        // Defective spectra (e.g. nilpotent R_it) defeat the eigenvector
        // residual; Gelfand's bound ‖R^k‖^{1/k} still certifies a small radius.
        let bound = power_norm_bound(&r);
        if bound >= 1.0 - NORM_BOUND_MARGIN {
            return Err(Error::Numerical(format!("dominant pair of R_it at t = {t} has residual {:e}", p.residual)));
        }
        radii.push(bound);
        residuals.push(0.0);
        by_norm_bound.push(t);
    }
    Ok(PeriodicOperatorFamily { cycle: point.cycle().to_vec(), n0: point.period(), t: t_grid.to_vec(), radii, radius0, residuals, by_norm_bound })
}

/// Only norm bounds this far below 1 are accepted in place of an eigenpair.
const NORM_BOUND_MARGIN: f64 = 1e-3;

/// `min_k ‖R^{2^k}‖_∞^{2^{−k}}` for `k ≤ 6`, an upper bound on `ρ(R)`.
fn power_norm_bound(r: &CMat) -> f64 {
    let mut m = r.clone();
    let mut best = inf_norm(&m);
    let mut k = 1.0;
    for _ in 0..6 {
        m = &m * &m;
        k *= 2.0;
        best = best.min(inf_norm(&m).powf(1.0 / k));
    }
    best
}

/// Multiples of `π / (h m)` strictly inside `(-2π/h, 2π/h)`, minus `[-ε, ε]`.
/// The grid always contains `±π/h`. Without a lattice the same spacing (with
/// `h = 1`) covers the compact `[-j_max, j_max]`.
pub fn classifier_grid(h: Option<f64>, m: usize, eps: f64, j_max: f64) -> Vec<f64> {
    let step = PI / (h.unwrap_or(1.0) * m as f64);
    let limit = match h {
        Some(h) => 2.0 * PI / h - eps,
        None => j_max,
    };
    let k_max = (limit / step).floor() as i64;
    (-k_max..=k_max)
        .map(|k| k as f64 * step)
        .filter(|t| t.abs() > eps && t.abs() <= limit && (h.is_none() || t.abs() < 2.0 * PI / h.unwrap()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub lattice: bool,
    pub h: Option<f64>,
    pub passed: bool,
    /// Every grid point has radius 1: `u` carries no oscillation at all.
    pub degenerate: bool,
    /// `1 − max radius` over the grid.
    pub min_gap: f64,
    pub worst_t: f64,
    pub worst_radius: f64,
    /// Grid points with radius `≥ 1 − gap_tol`.
    pub offending: Vec<f64>,
}

pub fn lattice_classify(pf: &PeriodicOperatorFamily, h: Option<f64>, eps: f64, gap_tol: f64) -> Result<Classification> {
    if pf.t.is_empty() {
        return Err(Error::InvalidGrid);
    }
    for &t in &pf.t {
        if t.abs() <= eps {
            return Err(Error::GridTouchesExcludedPoint(t));
        }
        if let Some(h) = h {
            if t.abs() >= 2.0 * PI / h - eps {
                return Err(Error::GridTouchesExcludedPoint(t));
            }
        }
    }
    let (wi, &wr) = pf.radii.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
    let offending: Vec<f64> = pf.t.iter().zip(&pf.radii).filter(|(_, &r)| r >= 1.0 - gap_tol).map(|(&t, _)| t).collect();
    Ok(Classification {
        lattice: h.is_some(),
        h,
        passed: offending.is_empty(),
        degenerate: offending.len() == pf.t.len(),
        min_gap: 1.0 - wr,
        worst_t: pf.t[wi],
        worst_radius: wr,
        offending,
    })
}

/// Where and how finely the classifier looks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Base cycle of the periodic point.
    pub cycle: Vec<usize>,
    /// Grid points per `π/h`.
    pub m: usize,
    pub eps: f64,
    pub gap_tol: f64,
    /// Half-width of the compact set checked without a lattice.
    pub j_max: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { cycle: vec![0], m: 16, eps: 1e-3, gap_tol: 1e-6, j_max: 2.0 * PI }
    }
}

pub fn classify_system(sys: &dyn FiberSystem, cfg: &ClassifierConfig) -> Result<Classification> {
    let point = periodic_point(sys.chain(), &cfg.cycle)?;
    let h = sys.lattice_h();
    let grid = classifier_grid(h, cfg.m, cfg.eps, cfg.j_max);
    lattice_classify(&periodic_family(sys, &point, &grid)?, h, cfg.eps, cfg.gap_tol)
}

impl Classification {
    /// `ClassifierFailed` at the worst grid point unless the check passed.
    pub fn require(&self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::ClassifierFailed { t: self.worst_t, radius: self.worst_radius })
        }
    }
}
