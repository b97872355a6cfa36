//! Lattice local limit theorem on exact annealed laws.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::LatticeDistribution;
use crate::system::FiberSystem;

use super::classify::{classify_system, Classification, ClassifierConfig};
use super::{exact_annealed, Ensemble};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltReport {
    pub n_list: Vec<usize>,
    /// `sup_a |σ√(2πn) P(S_n − nγ = a) − h e^{−a²/(2nσ²)}|`.
    pub sup_dev: Vec<f64>,
    /// Point where the supremum is attained.
    pub worst_a: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub mean: f64,
    pub classification: Classification,
    /// Annealed law at the largest `n`.
    #[serde(skip)]
    pub last_law: Option<LatticeDistribution>,
}

/// Deviation from the Gaussian profile over the support of `law`, restricted
/// to `|a| ≤ a_window` when given.
pub fn llt_deviation(law: &LatticeDistribution, sigma2: f64, a_window: Option<f64>) -> (f64, f64) {
    let n = law.n as f64;
    let s = (sigma2 * n).sqrt() * (2.0 * PI).sqrt();
    let mut worst = (0.0, 0.0);
    for (i, p) in law.probs.iter().enumerate() {
        let a = law.value(i);
        if a_window.is_some_and(|w| a.abs() > w) {
            continue;
        }
        let d = (s * p - law.h * (-a * a / (2.0 * n * sigma2)).exp()).abs();
        if d > worst.0 {
            worst = (d, a);
        }
    }
    worst
}

/// Classifies first: a failed classification is an error, and one that fails
/// everywhere is reported as degenerate variance.
pub fn llt_scan(sys: &dyn FiberSystem, n_list: &[usize], a_window: Option<f64>, ens: &Ensemble, cls: &ClassifierConfig) -> Result<LltReport> {
    if sys.lattice_h().is_none() {
        return Err(Error::NotLattice("the local limit check covers lattice instances only".into()));
    }
    let classification = classify_system(sys, cls)?;
    if classification.degenerate {
        // Surfaces DegenerateVariance when σ² really vanishes.
        exact_annealed(sys, &n_list[n_list.len() - 1..], ens)?;
    }
    classification.require()?;
    let laws = exact_annealed(sys, n_list, ens)?;
    let (sup_dev, worst_a) = laws.iter().map(|a| llt_deviation(&a.law, a.sigma2, a_window)).unzip();
    Ok(LltReport {
        n_list: n_list.to_vec(),
        sup_dev,
        worst_a,
        sigma2: laws.iter().map(|a| a.sigma2).collect(),
        mean: laws[0].mean,
        classification,
        last_law: laws.last().map(|a| a.law.clone()),
    })
}
