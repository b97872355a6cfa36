//! Annealed limit theorems checked against exact or sampled laws.
//!
//! Every runner draws a stratified ω-ensemble, works on each ω independently
//! (in parallel, collected in order) and reduces sequentially, so results
//! depend only on the seed.

pub mod berry_esseen;
pub mod cf;
pub mod classify;
pub mod clt;
pub mod decay;
pub mod llt;
pub mod renewal;
pub mod stats;
pub mod variance;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{exact_law, path_moments, prepare, step_means, LatticeDistribution, MarkovPath};
use crate::system::{sample_omegas, FiberSystem, OmegaSample};

/// Step means must agree with each other to this tolerance.
pub const PIN_TOL: f64 = 1e-9;
/// Asymptotic variances below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// How an annealed average is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub omega_samples: usize,
    /// Length of the origin cylinders used as strata.
    pub strata_depth: usize,
    pub seed: u64,
}

impl Ensemble {
    /// Base windows good for steps `lo ..= hi`.
    pub fn draw(&self, sys: &dyn FiberSystem, lo: i64, hi: i64) -> Result<Vec<OmegaSample>> {
        sample_omegas(sys, self.omega_samples, self.strata_depth, lo, hi, self.seed)
    }
}

/// Maps `f` over the ω-samples in parallel and keeps their order. The first
/// failing sample (by index) decides the error.
pub(crate) fn per_omega<T: Send>(omegas: &[OmegaSample], f: impl Fn(usize, &OmegaSample) -> Result<T> + Sync) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = omegas.par_iter().enumerate().map(|(i, o)| f(i, o)).collect();
    out.into_iter().collect()
}

pub(crate) fn total_weight(omegas: &[OmegaSample]) -> f64 {
    omegas.iter().map(|o| o.weight).sum()
}

/// The common mean of every step of `path`.
pub fn pinned_mean(path: &MarkovPath) -> Result<f64> {
    let means = step_means(path);
    let Some(&first) = means.first() else { return Ok(0.0) };
    if let Some((k, m)) = means.iter().enumerate().find(|(_, m)| (*m - first).abs() > PIN_TOL) {
        return Err(Error::MeanNotPinned(format!("step {k} has mean {m} but step 0 has {first}")));
    }
    Ok(first)
}

/// Checks that all ω share the same pinned mean.
pub fn common_mean(means: &[f64]) -> Result<f64> {
    let Some(&first) = means.first() else { return Ok(0.0) };
    if let Some((i, m)) = means.iter().enumerate().find(|(_, m)| (*m - first).abs() > PIN_TOL) {
        return Err(Error::MeanNotPinned(format!("ω-sample {i} has mean {m} but sample 0 has {first}")));
    }
    Ok(first)
}

/// Exact annealed law of `S_n − n γ` at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedLaw {
    pub law: LatticeDistribution,
    /// ω-averaged quenched variance over `n`.
    pub sigma2: f64,
    pub mean: f64,
}

/// Mixes the exact per-ω laws over the ensemble for every `n` in `n_list`.
pub fn exact_annealed(sys: &dyn FiberSystem, n_list: &[usize], ens: &Ensemble) -> Result<Vec<AnnealedLaw>> {
    let h = sys.lattice_h().ok_or_else(|| Error::NotLattice("exact laws need a declared lattice spacing".into()))?;
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::InvalidModel("n values must be positive".into()));
    }
    let n_max = *n_list.iter().max().unwrap();
    let omegas = ens.draw(sys, 0, n_max as i64)?;
    let per = per_omega(&omegas, |_, o| {
        let p = prepare(sys, &o.window, 0, n_max as i64)?;
        n_list
            .iter()
            .map(|&n| {
                let path = p.law_path(n)?;
                let var = path_moments(&path).last().unwrap().1;
                let q = clt::Quenched { pinned: pinned_mean(&path), mean: 0.0, var, samples: Vec::new() };
                Ok((q, exact_law(&path, h, 0.0)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let weights: Vec<f64> = omegas.iter().map(|o| o.weight).collect();
    let tw = total_weight(&omegas);
    n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let q: Vec<&clt::Quenched> = per.iter().map(|v| &v[k].0).collect();
            let c = clt::centering(sys, &weights, &q, n)?;
            let parts: Vec<(f64, LatticeDistribution)> = per.iter().zip(&weights).map(|(v, w)| (w / tw, v[k].1.clone())).collect();
            let mut law = LatticeDistribution::mixture(&parts)?;
            let mean = c.mean.expect("lattice instances are pinned");
            law.center = mean;
            Ok(AnnealedLaw { law, sigma2: c.sigma2, mean })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::base::build_markov_base;
    use crate::doeblin::{build_doeblin_family, DoeblinSystem};
    use crate::fiber::{FiberModel, PotentialTable};
    use crate::system::SymbolicSystem;

    use super::Ensemble;

    pub fn ensemble(omega_samples: usize, seed: u64) -> Ensemble {
        Ensemble { omega_samples, strata_depth: 1, seed }
    }

    /// Fair coin flips carrying values `u`, over a two-symbol iid base.
    pub fn scalar(u: [f64; 2]) -> SymbolicSystem {
        let chain = build_markov_base(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12).unwrap();
        let m = FiberModel::new(2, 1).unwrap();
        let l = -(2f64.ln());
        let p = PotentialTable::new(&m, vec![vec![l; 2]; 2], vec![u.to_vec(); 2], Some(1.0)).unwrap();
        SymbolicSystem::new(chain, m, p).unwrap()
    }

    /// Two base symbols with different fiber dynamics, `{0, 1}`-valued `u`
    /// with mean 1/2, plus `shift`.
    pub fn two_state(shift: f64) -> SymbolicSystem {
        let chain = build_markov_base(&[vec![0.7, 0.3], vec![0.4, 0.6]], 1e-12).unwrap();
        let m = FiberModel::new(2, 2).unwrap();
        let (a, b) = (0.75f64.ln(), 0.25f64.ln());
        let l = -(2f64.ln());
        let phi = vec![vec![l; 4], vec![a, b, b, a]];
        let u = vec![vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]];
        let u = u.into_iter().map(|r| r.into_iter().map(|x| x + shift).collect()).collect();
        let p = PotentialTable::new(&m, phi, u, Some(1.0)).unwrap();
        SymbolicSystem::new(chain, m, p).unwrap()
    }

    /// `u = q(ω_0) − q(ω_1)` with no fiber dependence.
    pub fn base_coboundary() -> SymbolicSystem {
        let chain = build_markov_base(&[vec![0.6, 0.4], vec![0.3, 0.7]], 1e-12).unwrap();
        let m = FiberModel::new(2, 1).unwrap();
        let l = -(2f64.ln());
        let p = PotentialTable::new(&m, vec![vec![l; 2]; 2], vec![vec![0.0; 2]; 2], Some(1.0))
            .unwrap()
            .with_base_pair(&m, vec![vec![0.0, -1.0], vec![1.0, 0.0]])
            .unwrap();
        SymbolicSystem::new(chain, m, p).unwrap()
    }

    pub fn doeblin(u: [f64; 2]) -> DoeblinSystem {
        let chain = build_markov_base(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12).unwrap();
        let k = vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![0.7, 0.3], vec![0.3, 0.7]]];
        let fam = build_doeblin_family(k, vec![u.to_vec(); 2], 0.3, Some(1.0)).unwrap();
        DoeblinSystem::new(chain, fam, None).unwrap()
    }
}
