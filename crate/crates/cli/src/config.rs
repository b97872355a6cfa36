//! Experiment configuration: parsing, validation and system construction.

use std::path::Path;

use serde::{Deserialize, Serialize};
use skewprod::audit::InstanceSpec;
use skewprod::base::{build_markov_base_with, BaseSymbolChain};
use skewprod::doeblin::{build_doeblin_family, DoeblinFamily, DoeblinSystem};
use skewprod::fiber::{FiberModel, PotentialTable};
use skewprod::limits::classify::ClassifierConfig;
use skewprod::limits::decay::DecayConfig;
use skewprod::system::{FiberSystem, SymbolicSystem};
use skewprod::Error as LibError;

use crate::CliError;

const ROW_TOL: f64 = 1e-9;
const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub base: Option<BaseSpec>,
    #[serde(default)]
    pub fiber: Option<FiberSpec>,
    #[serde(default)]
    pub doeblin: Option<DoeblinSpec>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub omega_samples: usize,
    pub strata_depth: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { omega_samples: 64, strata_depth: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    pub transition: Vec<Vec<f64>>,
    #[serde(default)]
    pub allow_deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub alphabet: usize,
    pub depth: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub metric_base: Option<f64>,
    pub phi: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    #[serde(default)]
    pub lattice_h: Option<f64>,
    #[serde(default)]
    pub base_pair: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeblinSpec {
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub u: Vec<Vec<f64>>,
    pub alpha: f64,
    #[serde(default)]
    pub lattice_h: Option<f64>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

/// Replaces the observable of the configured system for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableOverride {
    pub u: Vec<Vec<f64>>,
    #[serde(default)]
    pub lattice_h: Option<f64>,
}

/// Outcome an experiment is expected to reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    /// The runner completes and its statistics meet the tolerances.
    #[default]
    Pass,
    /// The runner refuses the instance (lattice check fails).
    Refused,
    /// The runner reports degenerate variance.
    Degenerate,
}

fn d_rpf_n() -> Vec<usize> {
    (2..=30).collect()
}
fn d_windows() -> usize {
    16
}
fn d_1e8() -> f64 {
    1e-8
}
fn d_1e9() -> f64 {
    1e-9
}
fn d_c_max() -> f64 {
    0.9
}
fn d_r2() -> f64 {
    0.99
}
fn d_k_max() -> usize {
    50
}
fn d_slope_ratio() -> f64 {
    0.05
}
fn d_oracle_instances() -> InstanceSpec {
    InstanceSpec { count: 8, max_alphabet: 2, ..Default::default() }
}
fn d_n_max() -> usize {
    8
}
fn d_z_list() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [0.0, 0.9], [0.3, -1.2]]
}
fn d_1e10() -> f64 {
    1e-10
}
fn d_z_max() -> f64 {
    4.0
}
fn d_ks() -> f64 {
    0.02
}
fn d_llt() -> f64 {
    0.05
}
fn d_rel5() -> f64 {
    0.05
}
fn d_far() -> f64 {
    0.01
}
fn d_order_z() -> [f64; 2] {
    [0.2, 0.9]
}
fn d_order_tol() -> f64 {
    1e-14
}
fn d_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// RPF triplets and convergence rates on random instances.
    RpfAudit {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        instances: InstanceSpec,
        #[serde(default = "d_rpf_n")]
        n_list: Vec<usize>,
        #[serde(default = "d_windows")]
        windows: usize,
        #[serde(default = "d_1e8")]
        max_residual: f64,
        #[serde(default = "d_1e9")]
        normalization_tol: f64,
        #[serde(default = "d_c_max")]
        max_rate: f64,
        #[serde(default = "d_r2")]
        min_r_squared: f64,
    },
    /// Jet derivatives of the pressure against exact moments.
    PressureAudit {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        instances: InstanceSpec,
        #[serde(default = "d_k_max")]
        k_max: usize,
        #[serde(default = "d_1e8")]
        first_tol: f64,
        /// Allowed slope of `|Π'' − V_k|` in `k`, relative to `V_K / K`.
        #[serde(default = "d_slope_ratio")]
        slope_ratio: f64,
    },
    /// Composed cocycles against brute-force branch sums.
    CocycleOracle {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "d_oracle_instances")]
        instances: InstanceSpec,
        #[serde(default = "d_n_max")]
        n_max: usize,
        #[serde(default = "d_z_list")]
        z_list: Vec<[f64; 2]>,
        #[serde(default = "d_1e10")]
        tol: f64,
    },
    CfIdentity {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        n_list: Vec<usize>,
        t_list: Vec<f64>,
        #[serde(default = "d_replicates")]
        replicates: usize,
        #[serde(default = "d_1e9")]
        exact_tol: f64,
        #[serde(default = "d_z_max")]
        z_max: f64,
    },
    Clt {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        n_list: Vec<usize>,
        #[serde(default = "d_replicates")]
        replicates: usize,
        #[serde(default = "d_ks")]
        ks_tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    BerryEsseen {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        n_list: Vec<usize>,
        #[serde(default = "d_replicates")]
        replicates: usize,
        #[serde(default)]
        expect: Expect,
    },
    Llt {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        n_list: Vec<usize>,
        #[serde(default)]
        a_window: Option<f64>,
        #[serde(default)]
        classifier: ClassifierConfig,
        #[serde(default = "d_llt")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    Classify {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        #[serde(default)]
        classifier: ClassifierConfig,
        #[serde(default)]
        expect: Expect,
    },
    Renewal {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        truncation: usize,
        a_list: Vec<f64>,
        #[serde(default)]
        f: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        abel: bool,
        /// `a` at or above this must be within `near_tol` of the limit.
        #[serde(default)]
        near_from: Option<f64>,
        #[serde(default = "d_rel5")]
        near_tol: f64,
        /// `a` at or below this must have `|U| < far_tol`.
        #[serde(default)]
        far_below: Option<f64>,
        #[serde(default = "d_far")]
        far_tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    DecaySurvey {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        small_t: Vec<f64>,
        large_t: Vec<f64>,
        n_grid: Vec<usize>,
        #[serde(default)]
        expect: Expect,
    },
    Variance {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        omega_samples: Option<usize>,
        #[serde(default)]
        observable: Option<ObservableOverride>,
        n_list: Vec<usize>,
        #[serde(default = "d_1e10")]
        degenerate_tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    /// Two-step composition order of the Doeblin operators.
    DoeblinOrder {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "d_order_z")]
        z: [f64; 2],
        #[serde(default = "d_order_tol")]
        tol: f64,
    },
    DoeblinContraction {
        #[serde(default)]
        name: Option<String>,
        n_list: Vec<usize>,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::RpfAudit { .. } => "rpf-audit",
            Experiment::PressureAudit { .. } => "pressure-audit",
            Experiment::CocycleOracle { .. } => "cocycle-oracle",
            Experiment::CfIdentity { .. } => "cf-identity",
            Experiment::Clt { .. } => "clt",
            Experiment::BerryEsseen { .. } => "berry-esseen",
            Experiment::Llt { .. } => "llt",
            Experiment::Classify { .. } => "classify",
            Experiment::Renewal { .. } => "renewal",
            Experiment::DecaySurvey { .. } => "decay-survey",
            Experiment::Variance { .. } => "variance",
            Experiment::DoeblinOrder { .. } => "doeblin-order",
            Experiment::DoeblinContraction { .. } => "doeblin-contraction",
        }
    }

    fn name_field(&self) -> &Option<String> {
        match self {
            Experiment::RpfAudit { name, .. }
            | Experiment::PressureAudit { name, .. }
            | Experiment::CocycleOracle { name, .. }
            | Experiment::CfIdentity { name, .. }
            | Experiment::Clt { name, .. }
            | Experiment::BerryEsseen { name, .. }
            | Experiment::Llt { name, .. }
            | Experiment::Classify { name, .. }
            | Experiment::Renewal { name, .. }
            | Experiment::DecaySurvey { name, .. }
            | Experiment::Variance { name, .. }
            | Experiment::DoeblinOrder { name, .. }
            | Experiment::DoeblinContraction { name, .. } => name,
        }
    }

    pub fn name(&self) -> String {
        self.name_field().clone().unwrap_or_else(|| self.kind().to_string())
    }

    pub fn observable(&self) -> Option<&ObservableOverride> {
        match self {
            Experiment::CfIdentity { observable, .. }
            | Experiment::Clt { observable, .. }
            | Experiment::BerryEsseen { observable, .. }
            | Experiment::Llt { observable, .. }
            | Experiment::Classify { observable, .. }
            | Experiment::Renewal { observable, .. }
            | Experiment::DecaySurvey { observable, .. }
            | Experiment::Variance { observable, .. } => observable.as_ref(),
            _ => None,
        }
    }

    pub fn omega_samples(&self) -> Option<usize> {
        match self {
            Experiment::CfIdentity { omega_samples, .. }
            | Experiment::Clt { omega_samples, .. }
            | Experiment::BerryEsseen { omega_samples, .. }
            | Experiment::Llt { omega_samples, .. }
            | Experiment::Renewal { omega_samples, .. }
            | Experiment::DecaySurvey { omega_samples, .. }
            | Experiment::Variance { omega_samples, .. } => *omega_samples,
            _ => None,
        }
    }

    /// Whether the experiment runs on the configured system.
    pub fn needs_system(&self) -> bool {
        !matches!(self, Experiment::RpfAudit { .. } | Experiment::PressureAudit { .. } | Experiment::CocycleOracle { .. })
    }
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), msg: msg.into() }
}

/// Parses TOML, or JSON when the file name ends in `.json`.
pub fn parse_config(text: &str, json: bool) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = if json {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| config_err(e.path().to_string(), e.inner().to_string()))?
    } else {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err(".", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| config_err(e.path().to_string(), e.inner().message().to_string()))?
    };
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config(&text, json)
}

/// The fiber system of a config, with either symbolic or Doeblin fibers.
pub enum System {
    Symbolic(SymbolicSystem),
    Doeblin(DoeblinSystem),
}

impl System {
    pub fn as_dyn(&self) -> &dyn FiberSystem {
        match self {
            System::Symbolic(s) => s,
            System::Doeblin(s) => s,
        }
    }

    pub fn doeblin(&self) -> Option<&DoeblinSystem> {
        match self {
            System::Doeblin(s) => Some(s),
            System::Symbolic(_) => None,
        }
    }
}

fn check_finite(path: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(config_err(format!("{path}[{i}][{j}]"), format!("value {v} is not finite")));
            }
        }
    }
    Ok(())
}

fn check_lattice(path: &str, rows: &[Vec<f64>], h: Option<f64>) -> Result<(), CliError> {
    let Some(h) = h else { return Ok(()) };
    if !(h > 0.0 && h.is_finite()) {
        return Err(config_err(path.replace(".u", ".lattice_h"), format!("lattice spacing must be positive (got {h})")));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if (v / h - (v / h).round()).abs() > LATTICE_TOL {
                return Err(config_err(format!("{path}[{i}][{j}]"), format!("{v} is not a multiple of lattice_h = {h}")));
            }
        }
    }
    Ok(())
}

fn check_table(path: &str, rows: &[Vec<f64>], count: usize, len: usize, what: &str) -> Result<(), CliError> {
    if rows.len() < count {
        return Err(config_err(path, format!("{} rows given but the base chain has {count} symbols", rows.len())));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
        return Err(config_err(format!("{path}[{i}]"), format!("expected {len} {what}, found {}", r.len())));
    }
    check_finite(path, rows)
}

pub fn build_base(spec: &BaseSpec) -> Result<BaseSymbolChain, CliError> {
    check_finite("base.transition", &spec.transition)?;
    build_markov_base_with(&spec.transition, ROW_TOL, spec.allow_deterministic).map_err(|e| match e {
        LibError::ZeroTransition { row, col, value } => {
            config_err(format!("base.transition[{row}][{col}]"), format!("entry {value} must be strictly positive"))
        }
        LibError::NonStochasticRow { row, sum, .. } => config_err(format!("base.transition[{row}]"), format!("row sums to {sum}")),
        LibError::NotSquare { row, len, expected } => {
            config_err(format!("base.transition[{row}]"), format!("row has {len} entries, expected {expected}"))
        }
        other => config_err("base.transition", other.to_string()),
    })
}

fn build_fiber(spec: &FiberSpec, states: usize, obs: Option<(&ObservableOverride, String)>) -> Result<(FiberModel, PotentialTable), CliError> {
    let mut model = FiberModel::new(spec.alphabet, spec.depth).map_err(|e| config_err("fiber.alphabet", e.to_string()))?;
    if let Some(a) = spec.alpha {
        model = model.with_alpha(a).map_err(|e| config_err("fiber.alpha", e.to_string()))?;
    }
    if let Some(b) = spec.metric_base {
        model = model.with_metric_base(b).map_err(|e| config_err("fiber.metric_base", e.to_string()))?;
    }
    let words = model.word_count();
    check_table("fiber.phi", &spec.phi, states, words, "words")?;
    let (u, h, upath) = match obs {
        Some((o, p)) => (o.u.clone(), o.lattice_h, format!("{p}.u")),
        None => (spec.u.clone(), spec.lattice_h, "fiber.u".to_string()),
    };
    check_table(&upath, &u, spec.phi.len(), words, "words")?;
    check_lattice(&upath, &u, h)?;
    let mut pot = PotentialTable::new(&model, spec.phi.clone(), u, h).map_err(|e| config_err(upath.clone(), e.to_string()))?;
    if let Some(pair) = &spec.base_pair {
        check_table("fiber.base_pair", pair, states, states, "entries")?;
        if h.is_some() {
            check_lattice("fiber.base_pair", pair, h)?;
        }
        pot = pot.with_base_pair(&model, pair.clone()).map_err(|e| config_err("fiber.base_pair", e.to_string()))?;
    }
    Ok((model, pot))
}

fn build_family(spec: &DoeblinSpec, obs: Option<(&ObservableOverride, String)>) -> Result<DoeblinFamily, CliError> {
    let (u, h, upath) = match obs {
        Some((o, p)) => (o.u.clone(), o.lattice_h, format!("{p}.u")),
        None => (spec.u.clone(), spec.lattice_h, "doeblin.u".to_string()),
    };
    let q = spec.kernels.first().map_or(0, |k| k.len());
    for (s, k) in spec.kernels.iter().enumerate() {
        check_table(&format!("doeblin.kernels[{s}]"), k, q, q, "entries")?;
    }
    check_table(&upath, &u, spec.kernels.len(), q, "states")?;
    check_lattice(&upath, &u, h)?;
    build_doeblin_family(spec.kernels.clone(), u, spec.alpha, h).map_err(|e| match e {
        LibError::DoeblinViolated { symbol, row, col, value, alpha, inv_alpha } => config_err(
            format!("doeblin.kernels[{symbol}][{row}][{col}]"),
            format!("entry {value} lies outside [{alpha}, {inv_alpha}]"),
        ),
        other => config_err("doeblin", other.to_string()),
    })
}

/// Builds the system an experiment runs on; `index` locates its override.
pub fn build_system(cfg: &ExperimentConfig, index: Option<usize>) -> Result<System, CliError> {
    let base = cfg.base.as_ref().ok_or_else(|| config_err("base", "missing [base] section"))?;
    let chain = build_base(base)?;
    let states = chain.states();
    let obs = index.and_then(|i| cfg.experiments[i].observable().map(|o| (o, format!("experiment[{i}].observable"))));
    match (&cfg.fiber, &cfg.doeblin) {
        (Some(f), None) => {
            let (model, pot) = build_fiber(f, states, obs)?;
            Ok(System::Symbolic(SymbolicSystem::new(chain, model, pot).map_err(|e| config_err("fiber", e.to_string()))?))
        }
        (None, Some(d)) => {
            let family = build_family(d, obs)?;
            if family.symbols() < states {
                return Err(config_err("doeblin.kernels", format!("{} kernels given but the base chain has {states} symbols", family.symbols())));
            }
            let sys = DoeblinSystem::new(chain, family, d.initial.clone()).map_err(|e| config_err("doeblin.initial", e.to_string()))?;
            Ok(System::Doeblin(sys))
        }
        (Some(_), Some(_)) => Err(config_err("doeblin", "give either [fiber] or [doeblin], not both")),
        (None, None) => Err(config_err("fiber", "missing [fiber] or [doeblin] section")),
    }
}

fn check_grid(path: String, n: &[usize]) -> Result<(), CliError> {
    if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(path, "must be a non-empty, strictly increasing list of positive integers"));
    }
    Ok(())
}

/// Everything that can be checked before computation starts.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.experiments.is_empty() {
        return Err(config_err("experiment", "at least one experiment is required"));
    }
    if cfg.ensemble.omega_samples == 0 {
        return Err(config_err("ensemble.omega_samples", "must be positive"));
    }
    let mut names = std::collections::BTreeSet::new();
    for (i, e) in cfg.experiments.iter().enumerate() {
        let p = |f: &str| format!("experiment[{i}].{f}");
        if !names.insert(e.name()) {
            return Err(config_err(p("name"), format!("duplicate experiment name {:?}", e.name())));
        }
        if e.omega_samples() == Some(0) {
            return Err(config_err(p("omega_samples"), "must be positive"));
        }
        if e.needs_system() {
            build_system(cfg, Some(i))?;
        }
        match e {
            Experiment::DoeblinOrder { .. } | Experiment::DoeblinContraction { .. } if cfg.doeblin.is_none() => {
                return Err(config_err(p("kind"), "needs a [doeblin] section"));
            }
            Experiment::RpfAudit { n_list, windows, .. } => {
                check_grid(p("n_list"), n_list)?;
                if *windows == 0 {
                    return Err(config_err(p("windows"), "must be positive"));
                }
            }
            Experiment::CfIdentity { n_list, t_list, replicates, .. } => {
                check_grid(p("n_list"), n_list)?;
                if t_list.is_empty() {
                    return Err(config_err(p("t_list"), "must not be empty"));
                }
                if *replicates < 2 {
                    return Err(config_err(p("replicates"), "need at least 2"));
                }
            }
            Experiment::Clt { n_list, replicates, .. } | Experiment::BerryEsseen { n_list, replicates, .. } => {
                check_grid(p("n_list"), n_list)?;
                if *replicates == 0 {
                    return Err(config_err(p("replicates"), "must be positive"));
                }
            }
            Experiment::Llt { n_list, .. } | Experiment::Variance { n_list, .. } | Experiment::DoeblinContraction { n_list, .. } => {
                check_grid(p("n_list"), n_list)?
            }
            Experiment::DecaySurvey { n_grid, small_t, large_t, .. } => {
                check_grid(p("n_grid"), n_grid)?;
                if let Some(k) = small_t.iter().position(|&t| t == 0.0) {
                    return Err(config_err(format!("experiment[{i}].small_t[{k}]"), "t = 0 is excluded"));
                }
                if let Some(k) = large_t.iter().position(|&t| t == 0.0) {
                    return Err(config_err(format!("experiment[{i}].large_t[{k}]"), "t = 0 is excluded"));
                }
            }
            Experiment::Renewal { truncation, a_list, .. } => {
                if *truncation == 0 {
                    return Err(config_err(p("truncation"), "must be positive"));
                }
                if a_list.is_empty() {
                    return Err(config_err(p("a_list"), "must not be empty"));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// The decay grid in library form.
pub fn decay_config(small_t: &[f64], large_t: &[f64], n_grid: &[usize]) -> DecayConfig {
    DecayConfig { small_t: small_t.to_vec(), large_t: large_t.to_vec(), n_grid: n_grid.to_vec() }
}
