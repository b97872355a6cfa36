//! Ensemble survey of `|λ_{ω,n}(it)|` near `t = 0` and of `‖A_it^{ω,n}‖_∞`
//! away from it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::prepare;
use crate::linalg::{inf_norm, linear_fit, CMat};
use crate::rpf::{normalized_steps, orbit_rpf};
use crate::system::{FiberSystem, Twisted};

use super::stats::non_increasing;
use super::{per_omega, total_weight, Ensemble};

/// Fitted rates below this count as "no decay".
pub const RATE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub small_t: Vec<f64>,
    pub large_t: Vec<f64>,
    pub n_grid: Vec<usize>,
}

/// 10%, 50% and 90% weighted quantiles.
pub type Quantiles = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySurvey {
    pub small_t: Vec<f64>,
    pub large_t: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// `[t][n]`: quantiles of `log |λ_{ω,n}(it)|`.
    pub small_log_lambda: Vec<Vec<Quantiles>>,
    /// `[t][n]`: quantiles of `log₂ ‖A_it^{ω,n}‖_∞`.
    pub large_log2_norm: Vec<Vec<Quantiles>>,
    /// Least-squares slope of the median `−log |λ|` against `n t²`.
    pub d2_fit: f64,
    /// Constants used for the violation count: `d₂ = d2_fit / 2`, `A ≥ 1`.
    pub d2: f64,
    pub a_const: f64,
    /// `−median log |λ_{ω,n}(it)| / (n t²)` at the largest `n`.
    pub d2_per_t: Vec<f64>,
    /// Per `n`: weighted fraction of `(ω, t)` above `A e^{−d₂ n t²}`.
    pub small_violating: Vec<f64>,
    /// Slowest per-t rate of the median `log₂` norm; `u = u_fit / 2`, and
    /// `4B₀ ≥ 1` is the largest per-t intercept.
    pub u_fit: f64,
    pub u_rate: f64,
    pub b0: f64,
    /// Per `n`: weighted fraction of `(ω, t)` above `4B₀ 2^{−un}`.
    pub large_violating: Vec<f64>,
    pub degenerate: bool,
    pub small_trend_ok: bool,
    pub large_trend_ok: bool,
}

fn quantiles(mut v: Vec<(f64, f64)>) -> Quantiles {
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = v.iter().map(|x| x.1).sum();
    let pick = |q: f64| {
        let mut acc = 0.0;
        for &(x, w) in &v {
            acc += w;
            if acc >= q * total - 1e-15 {
                return x;
            }
        }
        v.last().unwrap().0
    };
    [pick(0.1), pick(0.5), pick(0.9)]
}

struct OmegaDecay {
    /// `[t][n]`
    small: Vec<Vec<f64>>,
    large: Vec<Vec<f64>>,
}

pub fn decay_survey(sys: &dyn FiberSystem, cfg: &DecayConfig, ens: &Ensemble) -> Result<DecaySurvey> {
    let ns = &cfg.n_grid;
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) || ns[0] == 0 {
        return Err(Error::InvalidGrid);
    }
    if cfg.small_t.iter().chain(&cfg.large_t).any(|&t| t == 0.0) || cfg.small_t.is_empty() || cfg.large_t.is_empty() {
        return Err(Error::InvalidGrid);
    }
    let n_max = *ns.last().unwrap() as i64;
    let omegas = ens.draw(sys, 0, n_max)?;
    let per = per_omega(&omegas, |_, o| {
        let p = prepare(sys, &o.window, 0, n_max)?;
        let len = p.len as i64;
        let twisted = |t: f64| Twisted { src: p.src.as_ref(), z: Complex64::new(0.0, t) };
        let small = cfg
            .small_t
            .iter()
            .map(|&t| {
                let steps = normalized_steps(&twisted(t), &p.orbit, -len, n_max + len - 1)?;
                let orbit = orbit_rpf(&steps, 0, n_max - 1, p.len)?;
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(ns.len());
                let mut j = 0;
                for &n in ns {
                    while j < n as i64 {
                        acc += orbit.lambda(j).norm().ln();
                        j += 1;
                    }
                    out.push(acc);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let large = cfg
            .large_t
            .iter()
            .map(|&t| {
                let steps = normalized_steps(&twisted(t), &p.orbit, 0, n_max - 1)?;
                let d = sys.dim();
                let mut prod = CMat::identity(d, d);
                let mut log2_scale = 0.0;
                let mut out = Vec::with_capacity(ns.len());
                let mut j = 0;
                for &n in ns {
                    while j < n as i64 {
                        prod = steps.get(j) * prod;
                        let s = inf_norm(&prod);
                        if s < 1e-100 {
                            prod /= Complex64::new(s, 0.0);
                            log2_scale += s.log2();
                        }
                        j += 1;
                    }
                    out.push(log2_scale + inf_norm(&prod).log2());
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OmegaDecay { small, large })
    })?;

    let tw = total_weight(&omegas);
    let table = |pick: &dyn Fn(&OmegaDecay) -> &Vec<Vec<f64>>, tk: usize| -> Vec<Quantiles> {
        (0..ns.len()).map(|k| quantiles(omegas.iter().zip(&per).map(|(o, x)| (pick(x)[tk][k], o.weight)).collect())).collect()
    };
    let small_log_lambda: Vec<Vec<Quantiles>> = (0..cfg.small_t.len()).map(|tk| table(&|x| &x.small, tk)).collect();
    let large_log2_norm: Vec<Vec<Quantiles>> = (0..cfg.large_t.len()).map(|tk| table(&|x| &x.large, tk)).collect();

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (tk, &t) in cfg.small_t.iter().enumerate() {
        for (k, &n) in ns.iter().enumerate() {
            xs.push(n as f64 * t * t);
            ys.push(small_log_lambda[tk][k][1]);
        }
    }
    let (a_fit, b_fit, _) = linear_fit(&xs, &ys);
    let d2_fit = -b_fit;
    let d2 = d2_fit / 2.0;
    let a_const = a_fit.exp().max(1.0);
    let n_last = *ns.last().unwrap() as f64;
    let d2_per_t = cfg.small_t.iter().enumerate().map(|(tk, &t)| -small_log_lambda[tk][ns.len() - 1][1] / (n_last * t * t)).collect();
    let small_violating: Vec<f64> = (0..ns.len())
        .map(|k| {
            let n = ns[k] as f64;
            let bad: f64 = omegas
                .iter()
                .zip(&per)
                .map(|(o, x)| {
                    let c = cfg.small_t.iter().enumerate().filter(|(tk, &t)| x.small[*tk][k] > a_const.ln() - d2 * n * t * t).count();
                    o.weight * c as f64
                })
                .sum();
            bad / (tw * cfg.small_t.len() as f64)
        })
        .collect();

    // The bound is uniform in t: slowest per-t rate, largest intercept.
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let per_t: Vec<(f64, f64)> = (0..cfg.large_t.len())
        .map(|tk| {
            let ys: Vec<f64> = (0..ns.len()).map(|k| large_log2_norm[tk][k][1]).collect();
            let (c, s, _) = if ns.len() > 1 { linear_fit(&xs, &ys) } else { (0.0, ys[0] / xs[0], 1.0) };
            (-s, c)
        })
        .collect();
    let u_fit = per_t.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let u_rate = u_fit / 2.0;
    let log2_4b0 = per_t.iter().map(|p| p.1).fold(0.0, f64::max);
    let large_violating: Vec<f64> = (0..ns.len())
        .map(|k| {
            let n = ns[k] as f64;
            let bad: f64 = omegas
                .iter()
                .zip(&per)
                .map(|(o, x)| o.weight * (0..cfg.large_t.len()).filter(|&tk| x.large[tk][k] > log2_4b0 - u_rate * n).count() as f64)
                .sum();
            bad / (tw * cfg.large_t.len() as f64)
        })
        .collect();
    let degenerate = d2_fit < RATE_FLOOR;
    Ok(DecaySurvey {
        small_t: cfg.small_t.clone(),
        large_t: cfg.large_t.clone(),
        n_grid: ns.clone(),
        small_log_lambda,
        large_log2_norm,
        d2_fit,
        d2,
        a_const,
        d2_per_t,
        small_trend_ok: non_increasing(&small_violating),
        small_violating,
        u_fit,
        u_rate,
        b0: 2f64.powf(log2_4b0) / 4.0,
        large_trend_ok: non_increasing(&large_violating),
        large_violating,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::fixtures;

    fn cfg() -> DecayConfig {
        DecayConfig { small_t: vec![0.05, 0.1, 0.2], large_t: vec![1.0, 2.0], n_grid: vec![50, 100, 200] }
    }

    #[test]
    fn scalar_closed_form() {
        let sys = fixtures::scalar([1.0, -1.0]);
        let s = decay_survey(&sys, &cfg(), &fixtures::ensemble(2, 1)).unwrap();
        for (t, d) in s.small_t.iter().zip(&s.d2_per_t) {
            assert!((d + t.cos().ln() / (t * t)).abs() < 1e-9, "t = {t}");
        }
        for (k, &n) in s.n_grid.iter().enumerate() {
            let want = n as f64 * 1f64.cos().abs().log2();
            assert!((s.large_log2_norm[0][k][1] - want).abs() < 1e-8);
        }
        assert!(s.d2 > 0.0 && s.u_rate > 0.0 && !s.degenerate);
        assert!(s.small_trend_ok && s.large_trend_ok);
    }

    #[test]
    fn zero_observable_does_not_decay() {
        let sys = fixtures::scalar([0.0, 0.0]);
        let s = decay_survey(&sys, &cfg(), &fixtures::ensemble(2, 1)).unwrap();
        assert!(s.degenerate && s.d2_fit.abs() < 1e-12);
    }

    #[test]
    fn two_state_survey() {
        let sys = fixtures::two_state(0.0);
        let s = decay_survey(&sys, &cfg(), &fixtures::ensemble(12, 2)).unwrap();
        assert!(s.d2 > 0.0 && s.u_rate > 0.0);
        assert!(s.small_trend_ok && s.large_trend_ok, "{:?} {:?}", s.small_violating, s.large_violating);
        let q = &s.small_log_lambda[1][2];
        assert!(q[0] <= q[1] && q[1] <= q[2]);
    }

    #[test]
    fn bad_grids() {
        let sys = fixtures::scalar([1.0, -1.0]);
        let mut c = cfg();
        c.small_t.push(0.0);
        assert!(matches!(decay_survey(&sys, &c, &fixtures::ensemble(2, 1)), Err(Error::InvalidGrid)));
        let mut c = cfg();
        c.n_grid = vec![100, 50];
        assert!(decay_survey(&sys, &c, &fixtures::ensemble(2, 1)).is_err());
    }
}
