//! Growth of the quenched variances `V_n(ω)` and the asymptotic variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{path_moments, prepare};
use crate::linalg::linear_fit;
use crate::system::FiberSystem;

use super::{per_omega, total_weight, Ensemble, DEGENERATE_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceCurve {
    pub n_list: Vec<usize>,
    /// ω-average of the exact `V_n(ω)`.
    pub v_exact: Vec<f64>,
    /// ω-average of `Π''_{ω,n}(0)`.
    pub v_pressure: Vec<f64>,
    /// `max_{ω, n} |Π''_{ω,n}(0) − V_n(ω)|`.
    pub max_gap: f64,
    pub sigma2: f64,
    /// Spread of the per-ω slopes (±2 standard errors).
    pub sigma2_ci: (f64, f64),
    /// Weighted fraction of ω with `V_n(ω) ≤ σ² n / 2`.
    pub tail_fraction: Vec<f64>,
    pub degenerate: bool,
}

impl VarianceCurve {
    /// `σ²` unless it is numerically zero.
    pub fn certify(&self) -> Result<f64> {
        if self.degenerate {
            Err(Error::DegenerateVariance(self.sigma2))
        } else {
            Ok(self.sigma2)
        }
    }
}

fn slope(n_list: &[usize], v: &[f64]) -> f64 {
    if n_list.len() == 1 {
        return v[0] / n_list[0] as f64;
    }
    let x: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    linear_fit(&x, v).1
}

pub fn variance_curve(sys: &dyn FiberSystem, n_list: &[usize], ens: &Ensemble) -> Result<VarianceCurve> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidModel("n_list must be positive and strictly increasing".into()));
    }
    let n_max = *n_list.last().unwrap();
    let omegas = ens.draw(sys, 0, n_max as i64)?;
    let per = per_omega(&omegas, |_, o| {
        let p = prepare(sys, &o.window, 0, n_max as i64)?;
        n_list
            .iter()
            .map(|&n| {
                let exact = path_moments(&p.law_path(n)?).last().map_or(0.0, |m| m.1);
                Ok((exact, p.pressure(n)?.1))
            })
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;
    let tw = total_weight(&omegas);
    let avg = |k: usize, pick: fn(&(f64, f64)) -> f64| omegas.iter().zip(&per).map(|(o, v)| o.weight * pick(&v[k])).sum::<f64>() / tw;
    let v_exact: Vec<f64> = (0..n_list.len()).map(|k| avg(k, |v| v.0)).collect();
    let v_pressure: Vec<f64> = (0..n_list.len()).map(|k| avg(k, |v| v.1)).collect();
    let max_gap = per.iter().flatten().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sigma2 = slope(n_list, &v_exact);

    let slopes: Vec<f64> = per.iter().map(|v| slope(n_list, &v.iter().map(|x| x.0).collect::<Vec<_>>())).collect();
    let w2: f64 = omegas.iter().map(|o| (o.weight / tw).powi(2)).sum();
    let mean_s: f64 = omegas.iter().zip(&slopes).map(|(o, s)| o.weight * s).sum::<f64>() / tw;
    let var_s: f64 = omegas.iter().zip(&slopes).map(|(o, s)| o.weight * (s - mean_s).powi(2)).sum::<f64>() / tw;
    let half = 2.0 * (var_s * w2).sqrt();

    let tail_fraction = n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let c = sigma2 * n as f64 / 2.0;
            omegas.iter().zip(&per).filter(|(_, v)| v[k].0 <= c).map(|(o, _)| o.weight).sum::<f64>() / tw
        })
        .collect();
    Ok(VarianceCurve {
        n_list: n_list.to_vec(),
        v_exact,
        v_pressure,
        max_gap,
        sigma2,
        sigma2_ci: (sigma2 - half, sigma2 + half),
        tail_fraction,
        degenerate: sigma2.abs() < DEGENERATE_TOL,
    })
}
