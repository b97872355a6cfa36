//! Rate of the annealed normal approximation, `e_n √n` over an `n` grid.
//!
//! The annealed scan is a diagnostic: the rate statement it mirrors is a
//! quenched one for self-normalized sums.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::linear_fit;
use crate::system::FiberSystem;

use super::clt::clt_test;
use super::stats::lattice_ks;
use super::{exact_annealed, Ensemble};

/// Maximal log-log slope of `e_n √n` still read as bounded.
pub const BOUNDED_SLOPE: f64 = 0.1;
/// Same for the Monte Carlo fallback, whose `e_n` carries sampling noise.
pub const BOUNDED_SLOPE_MC: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerryEsseenReport {
    pub n_list: Vec<usize>,
    pub e_n: Vec<f64>,
    pub scaled: Vec<f64>,
    pub log_slope: f64,
    pub slope_tolerance: f64,
    pub bounded: bool,
    pub mode: RateMode,
    pub diagnostic: bool,
}

/// Exact mixture laws for lattice instances, pooled samples otherwise.
pub fn berry_esseen_scan(sys: &dyn FiberSystem, n_list: &[usize], ens: &Ensemble, replicates: usize) -> Result<BerryEsseenReport> {
    let (e_n, mode) = match sys.lattice_h() {
        Some(_) => {
            let laws = exact_annealed(sys, n_list, ens)?;
            (laws.iter().map(|a| lattice_ks(&a.law, a.law.variance().sqrt())).collect::<Vec<_>>(), RateMode::Exact)
        }
        None => (clt_test(sys, n_list, ens, replicates)?.ks, RateMode::MonteCarlo),
    };
    let scaled: Vec<f64> = e_n.iter().zip(n_list).map(|(e, &n)| e * (n as f64).sqrt()).collect();
    let log_slope = if n_list.len() > 1 {
        let x: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = scaled.iter().map(|s| s.ln()).collect();
        linear_fit(&x, &y).1
    } else {
        0.0
    };
    let slope_tolerance = if mode == RateMode::Exact { BOUNDED_SLOPE } else { BOUNDED_SLOPE_MC };
    Ok(BerryEsseenReport { n_list: n_list.to_vec(), e_n, scaled, log_slope, slope_tolerance, bounded: log_slope < slope_tolerance, mode, diagnostic: true })
}
