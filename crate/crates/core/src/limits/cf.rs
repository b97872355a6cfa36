//! Spectral, exact and Monte Carlo values of `E e^{itS_n}` side by side.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::gibbs::{exact_law, prepare, PathSampler};
use crate::seed;
use crate::system::FiberSystem;

use super::{per_omega, total_weight, Ensemble};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfPoint {
    pub n: usize,
    pub t: f64,
    pub spectral: Complex64,
    pub exact: Option<Complex64>,
    pub monte_carlo: Complex64,
    pub mc_se: f64,
    /// Largest per-ω `|spectral − exact|`.
    pub exact_gap: f64,
    /// `|spectral − MC| / se` and `|exact − MC| / se` of the annealed values.
    pub z_spectral: f64,
    pub z_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfReport {
    pub points: Vec<CfPoint>,
    pub max_exact_gap: Option<f64>,
    pub max_z: f64,
}

/// Annealed characteristic functions on the `(t, n)` grid. Each ω is sampled
/// `replicates` times; the exact column needs a lattice.
pub fn cf_identity(sys: &dyn FiberSystem, n_list: &[usize], t_list: &[f64], ens: &Ensemble, replicates: usize) -> Result<CfReport> {
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let omegas = ens.draw(sys, 0, n_max as i64)?;
    let h = sys.lattice_h();
    // [n][t] -> (spectral, exact, mc mean, mc variance of one draw)
    let per = per_omega(&omegas, |i, o| {
        let p = prepare(sys, &o.window, 0, n_max as i64)?;
        n_list
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let path = p.law_path(n)?;
                let law = h.map(|h| exact_law(&path, h, 0.0)).transpose()?;
                let sampler = PathSampler::new(&path);
                let mut rng = seed::rng(seed::derive2(ens.seed ^ 0xCF, i as u64, k as u64));
                let samples: Vec<f64> = (0..replicates).map(|_| sampler.sample(&mut rng).value).collect();
                t_list
                    .iter()
                    .map(|&t| {
                        let e: Vec<Complex64> = samples.iter().map(|s| Complex64::from_polar(1.0, t * s)).collect();
                        let m = e.iter().sum::<Complex64>() / replicates as f64;
                        let v = e.iter().map(|x| (x - m).norm_sqr()).sum::<f64>() / (replicates as f64 - 1.0).max(1.0);
                        Ok((p.cf_spectral(n, t)?, law.as_ref().map(|l| l.char_function(t)), m, v))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let tw = total_weight(&omegas);
    let mut points = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        for (j, &t) in t_list.iter().enumerate() {
            let mut spectral = Complex64::new(0.0, 0.0);
            let mut exact = h.map(|_| Complex64::new(0.0, 0.0));
            let (mut mc, mut var, mut gap) = (Complex64::new(0.0, 0.0), 0.0, 0.0f64);
            for (o, x) in omegas.iter().zip(&per) {
                let (s, e, m, v) = x[k][j];
                let w = o.weight / tw;
                spectral += w * s;
                if let (Some(acc), Some(e)) = (exact.as_mut(), e) {
                    *acc += w * e;
                    gap = gap.max((s - e).norm());
                }
                mc += w * m;
                var += w * w * v / replicates as f64;
            }
            let se = var.sqrt();
            let z = |a: Complex64| (a - mc).norm() / se.max(f64::MIN_POSITIVE);
            points.push(CfPoint {
                n,
                t,
                spectral,
                exact,
                monte_carlo: mc,
                mc_se: se,
                exact_gap: gap,
                z_spectral: z(spectral),
                z_exact: exact.map(z),
            });
        }
    }
    let max_exact_gap = h.map(|_| points.iter().map(|p| p.exact_gap).fold(0.0, f64::max));
    let max_z = points.iter().flat_map(|p| [Some(p.z_spectral), p.z_exact]).flatten().fold(0.0, f64::max);
    Ok(CfReport { points, max_exact_gap, max_z })
}
