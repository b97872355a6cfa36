//! Audits over random symbolic instances: RPF residuals and normalization,
//! convergence rates, pressure derivatives against quadrature, and matrix
//! cocycles against brute-force branch sums.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{build_markov_base_with, sample_base_path, BaseSymbolChain};
use crate::error::{Error, Result};
use crate::fiber::{random_potentials, CylinderFunction, FiberModel, Normalization, PotentialTable};
use crate::gibbs::{path_moments, prepare};
use crate::linalg::{linear_fit, ZERO};
use crate::rpf::{exp_convergence_ensemble, exp_convergence_probe, solve_rpf, DEFAULT_LEN};
use crate::seed;
use crate::system::{window_span, SymbolicSystem};
use crate::transfer::{branch_enumeration, compose_cocycle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    pub count: usize,
    pub max_alphabet: usize,
    pub max_depth: usize,
    pub max_symbols: usize,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec { count: 20, max_alphabet: 3, max_depth: 3, max_symbols: 3, seed: 0 }
    }
}

/// One random instance. `raw` and `column` share the observable; `column`
/// is the same draw of `φ` after column normalization.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub seed: u64,
    pub chain: BaseSymbolChain,
    pub model: FiberModel,
    pub raw: PotentialTable,
    pub column: PotentialTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceShape {
    pub index: usize,
    pub alphabet: usize,
    pub depth: usize,
    pub symbols: usize,
}

impl Instance {
    pub fn shape(&self) -> InstanceShape {
        InstanceShape { index: self.index, alphabet: self.model.alphabet, depth: self.model.depth, symbols: self.chain.states() }
    }
}

fn random_chain<R: Rng>(rng: &mut R, m: usize) -> Result<BaseSymbolChain> {
    let q: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let row: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    build_markov_base_with(&q, 1e-12, m == 1)
}

/// Instance `i` depends only on `(spec.seed, i)`. Alphabets start at 2 and
/// depths at 1.
pub fn random_instances(spec: &InstanceSpec) -> Result<Vec<Instance>> {
    if spec.max_alphabet < 2 || spec.max_depth < 1 || spec.max_symbols < 1 {
        return Err(Error::InvalidModel("instance bounds need alphabet >= 2, depth >= 1, symbols >= 1".into()));
    }
    (0..spec.count)
        .map(|i| {
            let s = seed::derive(spec.seed, i as u64);
            let mut rng = seed::rng(s);
            let d = rng.gen_range(2..=spec.max_alphabet);
            let r = rng.gen_range(1..=spec.max_depth);
            let m = rng.gen_range(1..=spec.max_symbols);
            let chain = random_chain(&mut rng, m)?;
            let model = FiberModel::new(d, r)?;
            let pot_seed = seed::derive(s, 1);
            let raw = random_potentials(&model, m, Normalization::Raw, pot_seed)?;
            let column = random_potentials(&model, m, Normalization::Column, pot_seed)?;
            Ok(Instance { index: i, seed: s, chain, model, raw, column })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpfRow {
    pub shape: InstanceShape,
    pub raw_residual: f64,
    pub column_residual: f64,
    /// `max_i |ν_i − 1/dim|` for the column-normalized potential.
    pub nu_uniform_gap: f64,
    pub lambda_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpfAudit {
    pub rows: Vec<RpfRow>,
    pub max_residual: f64,
    pub max_nu_gap: f64,
    pub max_lambda_gap: f64,
}

const AUDIT_HALF_WIDTH: i64 = 400;

/// Triplets at `z = 0` on a sampled window per instance.
pub fn rpf_audit(instances: &[Instance]) -> Result<RpfAudit> {
    let rows = instances
        .par_iter()
        .map(|inst| {
            let w = sample_base_path(&inst.chain, -AUDIT_HALF_WIDTH, AUDIT_HALF_WIDTH, seed::derive(inst.seed, 2))?;
            let raw = solve_rpf(&w, ZERO, DEFAULT_LEN, DEFAULT_LEN, &inst.raw, &inst.model)?;
            let col = solve_rpf(&w, ZERO, DEFAULT_LEN, DEFAULT_LEN, &inst.column, &inst.model)?;
            let dim = col.nu.len() as f64;
            Ok(RpfRow {
                shape: inst.shape(),
                raw_residual: raw.residuals.max(),
                column_residual: col.residuals.max(),
                nu_uniform_gap: col.nu.iter().map(|v| (v - Complex64::new(1.0 / dim, 0.0)).norm()).fold(0.0, f64::max),
                lambda_gap: (col.lambda - Complex64::new(1.0, 0.0)).norm(),
            })
        })
        .collect::<Vec<Result<RpfRow>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&RpfRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(RpfAudit {
        max_residual: max(|r| r.raw_residual.max(r.column_residual)),
        max_nu_gap: max(|r| r.nu_uniform_gap),
        max_lambda_gap: max(|r| r.lambda_gap),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub shape: InstanceShape,
    /// `None` when every error sits below the noise floor, as happens for
    /// one-dimensional cocycles where the normalized product is exact.
    pub c_fit: Option<f64>,
    pub r_squared: Option<f64>,
    /// `(n, ω-geometric-mean error)`.
    pub errors: Vec<(usize, f64)>,
}

/// Ensemble fit of `‖A^n q / λ_n − ν(q) h_n‖ ≈ C c^n` per instance, with a
/// random real `q` and `windows` base samples.
pub fn convergence_audit(instances: &[Instance], n_list: &[usize], windows: usize) -> Result<Vec<ConvergenceRow>> {
    instances
        .par_iter()
        .map(|inst| {
            let m = &inst.model;
            let mut rng = seed::rng(seed::derive(inst.seed, 3));
            let values: Vec<f64> = (0..m.function_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = CylinderFunction::from_real(m.alphabet, m.depth - 1, &values)?;
            let fits: Vec<_> = (0..windows)
                .map(|k| {
                    let w = sample_base_path(&inst.chain, -AUDIT_HALF_WIDTH, AUDIT_HALF_WIDTH, seed::derive2(inst.seed, 4, k as u64))?;
                    exp_convergence_probe(&w, ZERO, &q, n_list, &inst.raw, m)
                })
                .collect();
            let fits = match fits.into_iter().collect::<Result<Vec<_>>>() {
                Ok(f) => f,
                Err(Error::DegenerateFit(_)) => return Ok(ConvergenceRow { shape: inst.shape(), c_fit: None, r_squared: None, errors: vec![] }),
                Err(e) => return Err(e),
            };
            match exp_convergence_ensemble(&fits) {
                Ok(f) => Ok(ConvergenceRow { shape: inst.shape(), c_fit: Some(f.c_fit), r_squared: Some(f.r_squared), errors: f.errors }),
                Err(Error::DegenerateFit(_)) => Ok(ConvergenceRow { shape: inst.shape(), c_fit: None, r_squared: None, errors: vec![] }),
                Err(e) => Err(e),
            }
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureRow {
    pub shape: InstanceShape,
    /// `max_k |Π'_k(0) − μ(S_k u)|`.
    pub first_gap: f64,
    /// `|Π''_k(0) − Var_μ(S_k u)|` per `k`.
    pub second_gap: Vec<f64>,
    /// Least-squares slope of `second_gap` in `k`.
    pub second_gap_slope: f64,
    /// `Var_μ(S_K u) / K` at the largest `k`.
    pub variance_rate: f64,
}

/// Jet derivatives of the pressure against the exact moments of `S_k u`
/// under the Gibbs measure, for `k = 1 ..= k_max`.
pub fn pressure_audit(instances: &[Instance], k_max: usize) -> Result<Vec<PressureRow>> {
    instances
        .par_iter()
        .map(|inst| {
            let sys = SymbolicSystem::new(inst.chain.clone(), inst.model, inst.raw.clone())?;
            let (a, b) = window_span(&sys, 0, k_max as i64);
            let w = sample_base_path(&inst.chain, a, b, seed::derive(inst.seed, 5))?;
            let p = prepare(&sys, &w, 0, k_max as i64)?;
            let mut first_gap: f64 = 0.0;
            let mut second_gap = Vec::with_capacity(k_max);
            let mut last_var = 0.0;
            for k in 1..=k_max {
                let (mean, var) = *path_moments(&p.law_path(k)?).last().ok_or(Error::Numerical("empty path".into()))?;
                let (d1, d2) = p.pressure(k)?;
                first_gap = first_gap.max((d1 - mean).abs());
                second_gap.push((d2 - var).abs());
                last_var = var;
            }
            let ks: Vec<f64> = (1..=k_max).map(|k| k as f64).collect();
            let slope = if k_max > 1 { linear_fit(&ks, &second_gap).1 } else { 0.0 };
            Ok(PressureRow { shape: inst.shape(), first_gap, second_gap, second_gap_slope: slope, variance_rate: last_var / k_max as f64 })
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub shape: InstanceShape,
    pub n: usize,
    pub z: Complex64,
    /// `max |cocycle − enumeration| / max |enumeration|`.
    pub relative_gap: f64,
}

/// Composed cocycles against [`branch_enumeration`] for `n = 1 ..= n_max` and
/// each `z`. Instances with more than one base symbol also get a random
/// base-pair term.
pub fn cocycle_oracle(instances: &[Instance], n_max: usize, z_list: &[Complex64]) -> Result<Vec<OracleRow>> {
    let per = instances
        .par_iter()
        .map(|inst| {
            let m = &inst.model;
            let mut pot = inst.raw.clone();
            let s = inst.chain.states();
            if s > 1 {
                let mut rng = seed::rng(seed::derive(inst.seed, 6));
                let pair = (0..s).map(|_| (0..s).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
                pot = pot.with_base_pair(m, pair)?;
            }
            let w = sample_base_path(&inst.chain, -4, n_max as i64 + 4, seed::derive(inst.seed, 7))?;
            let mut rows = Vec::new();
            for n in 1..=n_max {
                for &z in z_list {
                    let got = compose_cocycle(&w, n, z, &pot, m)?.full_matrix();
                    let want = branch_enumeration(&w, n, z, &pot, m);
                    let scale = want.camax().max(f64::MIN_POSITIVE);
                    rows.push(OracleRow { shape: inst.shape(), n, z, relative_gap: (&got - &want).camax() / scale });
                }
            }
            Ok(rows)
        })
        .collect::<Vec<Result<Vec<_>>>>();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}
