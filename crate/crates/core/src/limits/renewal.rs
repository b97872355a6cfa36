//! Truncated renewal sums `U(g_a) = Σ_{n=1}^{N} E[f(ξ_n) 1(S_n = a)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{gibbs_at, lattice_sweep, path_moments, prepare};
use crate::system::FiberSystem;

use super::stats::normal_cdf;
use super::{common_mean, per_omega, pinned_mean, total_weight, Ensemble, DEGENERATE_TOL, PIN_TOL};

/// Terms with `|a − nγ| > TAIL_SIGMAS · σ√n` are treated as negligible.
pub const TAIL_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalConfig {
    pub truncation: usize,
    /// Lattice points `a` (uncentered values of `S_n`).
    pub a_list: Vec<f64>,
    /// `f[symbol][state]`; `f ≡ 1` when absent.
    #[serde(default)]
    pub f: Option<Vec<Vec<f64>>>,
    /// Also accumulate the Abel sum with `ρ = 1 − 1/N`.
    #[serde(default)]
    pub abel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalAccumulator {
    pub truncation: usize,
    pub a_list: Vec<f64>,
    pub values: Vec<f64>,
    pub abel_values: Option<Vec<f64>>,
    /// Partial sums of `U(g_a)` after `partial_n[i]` terms.
    pub partial_n: Vec<usize>,
    pub partial: Vec<Vec<f64>>,
    pub gamma: f64,
    pub sigma2: f64,
    pub f_mean: f64,
    /// `μ(f) h / γ`, the limit as `a → ∞`; the limit as `a → −∞` is 0.
    pub limit_plus: f64,
    pub limit_minus: f64,
    /// Smallest `N` covering `max a` within the Gaussian envelope.
    pub required_truncation: usize,
    /// Gaussian estimate of the mass beyond `N`.
    pub tail_bound: f64,
    /// Zero variance: the steps are deterministic given ω.
    pub degenerate: bool,
}

/// Largest `n` with `n γ − 6σ√n ≤ a`.
pub fn required_truncation(a: f64, gamma: f64, sigma: f64) -> usize {
    let disc = (TAIL_SIGMAS * sigma).powi(2) + 4.0 * gamma * a;
    if disc < 0.0 {
        return 0;
    }
    let x = (TAIL_SIGMAS * sigma + disc.sqrt()) / (2.0 * gamma);
    (x * x).floor() as usize
}

fn tail_estimate(a: f64, gamma: f64, sigma: f64, f_max: f64, from: usize) -> f64 {
    let mut total = 0.0;
    for n in from + 1..=from.max(1) * 100 {
        let term = normal_cdf((a - n as f64 * gamma) / (sigma * (n as f64).sqrt()));
        total += term;
        if term < 1e-300 {
            break;
        }
    }
    f_max * total
}

struct PerOmega {
    pinned: Result<f64>,
    var: f64,
    f_means: Vec<f64>,
    values: Vec<f64>,
    abel: Vec<f64>,
    partial: Vec<Vec<f64>>,
}

pub fn renewal_curve(sys: &dyn FiberSystem, cfg: &RenewalConfig, ens: &Ensemble) -> Result<RenewalAccumulator> {
    let h = sys.lattice_h().ok_or_else(|| Error::NotLattice("renewal sums are computed for lattice instances".into()))?;
    let n = cfg.truncation;
    if n == 0 || cfg.a_list.is_empty() {
        return Err(Error::InvalidModel("renewal needs a positive truncation and at least one a".into()));
    }
    let levels = cfg
        .a_list
        .iter()
        .map(|&a| {
            let l = (a / h).round();
            if (a / h - l).abs() > 1e-9 {
                Err(Error::NotLattice(format!("a = {a} is not a multiple of h = {h}")))
            } else {
                Ok(l as i64)
            }
        })
        .collect::<Result<Vec<i64>>>()?;
    let dim = sys.dim();
    let f_table = |s: usize| -> Result<Vec<f64>> {
        match &cfg.f {
            None => Ok(vec![1.0; dim]),
            Some(t) => {
                let row = t.get(s).ok_or(Error::MissingSymbol(s))?;
                if row.len() != dim || row.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::InvalidModel(format!("f row for symbol {s} must hold {dim} positive values")));
                }
                Ok(row.clone())
            }
        }
    };
    let checkpoints: Vec<usize> = [n / 4, n / 2, 3 * n / 4, n].into_iter().filter(|&k| k > 0).collect();
    let rho = 1.0 - 1.0 / n as f64;

    let omegas = ens.draw(sys, -(n as i64), n as i64)?;
    let per = per_omega(&omegas, |_, o| {
        let p = prepare(sys, &o.window, -(n as i64), n as i64)?;
        let path = p.renewal_path(n)?;
        let var = path_moments(&path).last().unwrap().1;
        let mut fs = Vec::with_capacity(n);
        let mut f_means = Vec::with_capacity(n);
        for &idx in &path.indices {
            let f = f_table(p.src.symbol(idx))?;
            let mu = gibbs_at(&p.orbit, idx)?;
            f_means.push(mu.iter().zip(&f).map(|(m, x)| m * x).sum());
            fs.push(f);
        }
        let mut values = vec![0.0; levels.len()];
        let mut abel = vec![0.0; levels.len()];
        let mut partial = Vec::new();
        let mut weight_k = 1.0;
        lattice_sweep(&path, |k, off, per_state| {
            let f = &fs[k - 1];
            for (li, &level) in levels.iter().enumerate() {
                let i = level - off;
                if i < 0 || i as usize >= per_state[0].len() {
                    continue;
                }
                let m: f64 = per_state.iter().zip(f).map(|(row, fx)| row[i as usize] * fx).sum();
                values[li] += m;
                abel[li] += weight_k * m;
            }
            weight_k *= rho;
            if checkpoints.contains(&k) {
                partial.push(values.clone());
            }
        })?;
        Ok(PerOmega { pinned: pinned_mean(&path), var, f_means, values, abel, partial })
    })?;

    let tw = total_weight(&omegas);
    let sigma2 = omegas.iter().zip(&per).map(|(o, x)| o.weight * x.var).sum::<f64>() / (tw * n as f64);
    let pinned = per.iter().map(|x| x.pinned.clone()).collect::<Result<Vec<f64>>>().and_then(|m| common_mean(&m));
    // Deterministic positive steps are a valid (counting measure) renewal
    // process; zero variance without a positive pinned mean is a coboundary.
    let degenerate = !(sigma2 >= DEGENERATE_TOL);
    if degenerate && !matches!(pinned, Ok(g) if g > 0.0) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    let gamma = pinned?;
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveMean(gamma));
    }
    let f_mean = per[0].f_means[0];
    for x in &per {
        if let Some(m) = x.f_means.iter().find(|m| (*m - f_mean).abs() > PIN_TOL) {
            return Err(Error::MeanNotPinned(format!("μ(f) = {m} differs from {f_mean}")));
        }
    }
    let a_max = cfg.a_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sigma = sigma2.sqrt();
    let required = required_truncation(a_max, gamma, sigma);
    if n < required {
        return Err(Error::TruncationInsufficient { n, required });
    }
    let f_max = match &cfg.f {
        None => 1.0,
        Some(t) => t.iter().flatten().cloned().fold(0.0, f64::max),
    };
    let mix = |pick: &dyn Fn(&PerOmega) -> &Vec<f64>| -> Vec<f64> {
        (0..levels.len()).map(|li| omegas.iter().zip(&per).map(|(o, x)| o.weight * pick(x)[li]).sum::<f64>() / tw).collect()
    };
    let partial = (0..checkpoints.len()).map(|c| mix(&|x: &PerOmega| &x.partial[c])).collect();
    Ok(RenewalAccumulator {
        truncation: n,
        a_list: cfg.a_list.clone(),
        values: mix(&|x: &PerOmega| &x.values),
        abel_values: cfg.abel.then(|| mix(&|x: &PerOmega| &x.abel)),
        partial_n: checkpoints,
        partial,
        gamma,
        sigma2,
        f_mean,
        limit_plus: f_mean * h / gamma,
        limit_minus: 0.0,
        required_truncation: required,
        tail_bound: if degenerate { 0.0 } else { tail_estimate(a_max, gamma, sigma, f_max, n) },
        degenerate,
    })
}
