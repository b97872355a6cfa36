//! Pooled annealed central limit check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{path_moments, prepare, PathSampler};
use crate::seed;
use crate::system::FiberSystem;

use super::{common_mean, per_omega, pinned_mean, total_weight, Ensemble, DEGENERATE_TOL};
use crate::limits::stats::normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub n_list: Vec<usize>,
    pub ks: Vec<f64>,
    /// `σ̂²_n`: ω-averaged exact `V_n(ω) / n`.
    pub sigma2: Vec<f64>,
    /// Pinned mean for lattice instances; otherwise every ω is centered by its
    /// exact quenched mean.
    pub mean: Option<f64>,
    pub samples_per_n: usize,
}

/// One ω's contribution at one `n`.
pub(crate) struct Quenched {
    pub pinned: Result<f64>,
    pub mean: f64,
    pub var: f64,
    pub samples: Vec<f64>,
}

pub(crate) struct Centering {
    pub sigma2: f64,
    pub mean: Option<f64>,
}

/// `σ̂²_n` and the centering rule; degenerate variance wins over an unpinned
/// mean, so a coboundary reports as degenerate.
pub(crate) fn centering(sys: &dyn FiberSystem, weights: &[f64], q: &[&Quenched], n: usize) -> Result<Centering> {
    let tw: f64 = weights.iter().sum();
    let sigma2 = weights.iter().zip(q).map(|(w, x)| w * x.var).sum::<f64>() / (tw * n as f64);
    if !(sigma2 >= DEGENERATE_TOL) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    let mean = match sys.lattice_h() {
        Some(_) => {
            let means = q.iter().map(|x| x.pinned.clone()).collect::<Result<Vec<f64>>>()?;
            Some(common_mean(&means)?)
        }
        None => None,
    };
    Ok(Centering { sigma2, mean })
}

/// Kolmogorov–Smirnov distance of a weighted sample to `N(0, 1)`; ties are
/// merged so lattice samples are handled exactly.
pub fn weighted_ks(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let (mut acc, mut worst, mut i) = (0.0, 0.0f64, 0);
    while i < pts.len() {
        let x = pts[i].0;
        let f = normal_cdf(x);
        worst = worst.max((f - acc / total).abs());
        while i < pts.len() && pts[i].0 == x {
            acc += pts[i].1;
            i += 1;
        }
        worst = worst.max((acc / total - f).abs());
    }
    worst
}

/// Draws `replicates` samples of `S_n` for every ω-sample and `n`, then
/// compares the pooled `(S_n − center) / (σ̂ √n)` with `N(0, 1)`.
pub fn clt_test(sys: &dyn FiberSystem, n_list: &[usize], ens: &Ensemble, replicates: usize) -> Result<CltReport> {
    if n_list.is_empty() || n_list.contains(&0) || replicates == 0 {
        return Err(Error::InvalidModel("clt needs positive n values and replicates".into()));
    }
    let n_max = *n_list.iter().max().unwrap();
    let omegas = ens.draw(sys, 0, n_max as i64)?;
    let per = per_omega(&omegas, |i, o| {
        let p = prepare(sys, &o.window, 0, n_max as i64)?;
        n_list
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let path = p.law_path(n)?;
                let (mean, var) = *path_moments(&path).last().unwrap();
                let sampler = PathSampler::new(&path);
                let mut rng = seed::rng(seed::derive2(ens.seed ^ 0xC17, i as u64, k as u64));
                let samples = (0..replicates).map(|_| sampler.sample(&mut rng).value).collect();
                Ok(Quenched { pinned: pinned_mean(&path), mean, var, samples })
            })
            .collect::<Result<Vec<Quenched>>>()
    })?;
    let weights: Vec<f64> = omegas.iter().map(|o| o.weight).collect();
    let tw = total_weight(&omegas);
    let mut report = CltReport { n_list: n_list.to_vec(), ks: Vec::new(), sigma2: Vec::new(), mean: None, samples_per_n: omegas.len() * replicates };
    for (k, &n) in n_list.iter().enumerate() {
        let q: Vec<&Quenched> = per.iter().map(|v| &v[k]).collect();
        let c = centering(sys, &weights, &q, n)?;
        let scale = (c.sigma2 * n as f64).sqrt();
        let mut pts = Vec::with_capacity(report.samples_per_n);
        for (x, w) in q.iter().zip(&weights) {
            let center = c.mean.map_or(x.mean, |g| g * n as f64);
            let sw = w / (tw * replicates as f64);
            pts.extend(x.samples.iter().map(|s| ((s - center) / scale, sw)));
        }
        report.ks.push(weighted_ks(pts));
        report.sigma2.push(c.sigma2);
        report.mean = c.mean;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::fixtures;

    #[test]
    fn weighted_ks_merges_ties() {
        // All mass at 0: the CDF jumps from 0 to 1 where Φ = 1/2.
        assert!((weighted_ks(vec![(0.0, 1.0), (0.0, 3.0)]) - 0.5).abs() < 1e-15);
        let unweighted = super::super::stats::ks_normal(&[-1.0, 0.2, 0.5]);
        assert!((weighted_ks(vec![(0.5, 1.0), (-1.0, 1.0), (0.2, 1.0)]) - unweighted).abs() < 1e-15);
    }

    #[test]
    fn scalar_walk_is_normal() {
        let sys = fixtures::scalar([1.0, -1.0]);
        let r = clt_test(&sys, &[100, 1600], &fixtures::ensemble(4, 5), 5000).unwrap();
        assert_eq!(r.mean, Some(0.0));
        assert!((r.sigma2[1] - 1.0).abs() < 1e-9);
        assert!(r.ks[1] < 0.03, "{:?}", r.ks);
    }

    #[test]
    fn two_state_ks_small() {
        let sys = fixtures::two_state(0.0);
        let r = clt_test(&sys, &[50, 800], &fixtures::ensemble(20, 6), 1000).unwrap();
        assert!((r.mean.unwrap() - 0.5).abs() < 1e-9);
        assert!(r.ks[1] < 0.05 && r.ks[1] < r.ks[0], "{:?}", r.ks);
    }

    #[test]
    fn degenerate_and_unpinned() {
        let sys = fixtures::base_coboundary();
        assert!(matches!(clt_test(&sys, &[20], &fixtures::ensemble(4, 7), 10), Err(Error::DegenerateVariance(_))));
        let mut sys = fixtures::scalar([0.0, 1.0]);
        sys.pot.u[1] = vec![0.0, 2.0];
        assert!(matches!(clt_test(&sys, &[20], &fixtures::ensemble(4, 7), 10), Err(Error::MeanNotPinned(_))));
        // Without a lattice each ω is centered by its own mean instead.
        sys.pot.lattice_h = None;
        assert!(clt_test(&sys, &[20], &fixtures::ensemble(4, 7), 10).unwrap().mean.is_none());
    }

    #[test]
    fn deterministic_in_seed() {
        let sys = fixtures::two_state(0.0);
        let a = clt_test(&sys, &[40], &fixtures::ensemble(6, 9), 50).unwrap();
        let b = clt_test(&sys, &[40], &fixtures::ensemble(6, 9), 50).unwrap();
        assert_eq!(a, b);
    }
}
