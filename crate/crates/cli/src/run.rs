//! Experiment execution, verdicts and result persistence.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use skewprod::audit::{cocycle_oracle, convergence_audit, pressure_audit, random_instances, rpf_audit, InstanceSpec};
use skewprod::base::{sample_base_path, OmegaWindow};
use skewprod::doeblin::{composition_order_check, doeblin_contraction};
use skewprod::limits::berry_esseen::berry_esseen_scan;
use skewprod::limits::cf::cf_identity;
use skewprod::limits::classify::classify_system;
use skewprod::limits::clt::clt_test;
use skewprod::limits::llt::llt_scan;
use skewprod::limits::renewal::{renewal_curve, RenewalConfig};
use skewprod::limits::stats::non_increasing;
use skewprod::limits::variance::variance_curve;
use skewprod::limits::decay::decay_survey;
use skewprod::limits::Ensemble;
use skewprod::seed;
use skewprod::Error as LibError;

use crate::config::{build_system, decay_config, validate, Expect, Experiment, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic only; never fails a run.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

fn below(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, relation: "<", threshold, pass: value < threshold }
}

fn above(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, relation: ">", threshold, pass: value > threshold }
}

fn flag(name: impl Into<String>, ok: bool) -> Check {
    Check { name: name.into(), value: f64::from(u8::from(ok)), relation: "==", threshold: 1.0, pass: ok }
}

/// A plot-ready table written to `curves/<file>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub kind: &'static str,
    pub seed: u64,
    /// `completed`, `refused` or `degenerate`.
    pub outcome: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub tasks: usize,
    pub report: serde_json::Value,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
}

/// The deterministic part of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub experiments: Vec<ExperimentRecord>,
}

impl ResultRecord {
    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.experiments.iter().flat_map(|e| e.warnings.iter().map(move |w| (e.name.as_str(), w.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub workers: usize,
    pub per_experiment_seconds: Vec<(String, f64)>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn instance_spec(spec: &InstanceSpec, master: u64) -> InstanceSpec {
    InstanceSpec { seed: seed::derive(master, spec.seed), ..spec.clone() }
}

/// Result of a runner, with the two declared refusal paths split out.
enum Settled<T> {
    Done(T),
    Refused(LibError),
    Degenerate(LibError),
}

fn settle<T>(r: skewprod::Result<T>) -> skewprod::Result<Settled<T>> {
    match r {
        Ok(v) => Ok(Settled::Done(v)),
        Err(e @ LibError::DegenerateVariance(_)) => Ok(Settled::Degenerate(e)),
        Err(e @ LibError::ClassifierFailed { .. }) => Ok(Settled::Refused(e)),
        Err(e) => Err(e),
    }
}

struct Outcome {
    outcome: &'static str,
    checks: Vec<Check>,
    report: serde_json::Value,
    tasks: usize,
    curves: Vec<Curve>,
    warnings: Vec<String>,
    info: bool,
}

impl Outcome {
    fn done(checks: Vec<Check>, report: serde_json::Value, tasks: usize, curves: Vec<Curve>) -> Self {
        Outcome { outcome: "completed", checks, report, tasks, curves, warnings: vec![], info: false }
    }
}

/// Turns a settled runner result into an outcome given the expectation.
fn expect_outcome<T>(expect: Expect, s: Settled<T>, done: impl FnOnce(T) -> Outcome) -> Outcome {
    let refusal = |outcome: &'static str, e: LibError, wanted: bool| Outcome {
        outcome,
        checks: vec![flag(format!("expected {expect:?}, runner reported {outcome}").to_lowercase(), wanted)],
        report: serde_json::json!({ "error": e.to_string() }),
        tasks: 0,
        curves: vec![],
        warnings: vec![],
        info: false,
    };
    match s {
        Settled::Done(v) => {
            let mut o = done(v);
            if expect != Expect::Pass {
                o.checks.push(flag(format!("expected {expect:?}, runner completed").to_lowercase(), false));
            }
            o
        }
        Settled::Refused(e) => refusal("refused", e, expect == Expect::Refused),
        Settled::Degenerate(e) => refusal("degenerate", e, expect == Expect::Degenerate),
    }
}

fn run_one(cfg: &ExperimentConfig, index: usize, exp: &Experiment, exp_seed: u64) -> Result<Outcome, LibError> {
    let ens = Ensemble {
        omega_samples: exp.omega_samples().unwrap_or(cfg.ensemble.omega_samples),
        strata_depth: cfg.ensemble.strata_depth,
        seed: exp_seed,
    };
    let system = if exp.needs_system() {
        Some(build_system(cfg, Some(index)).map_err(|e| LibError::InvalidModel(e.to_string()))?)
    } else {
        None
    };
    let sys = || system.as_ref().expect("system built for this kind").as_dyn();
    let name = exp.name();
    let curve = |suffix: &str, header: Vec<&'static str>, rows: Vec<Vec<String>>| Curve { file: format!("{name}-{suffix}"), header, rows };

    Ok(match exp {
        Experiment::RpfAudit { instances, n_list, windows, max_residual, normalization_tol, max_rate, min_r_squared, .. } => {
            let inst = random_instances(&instance_spec(instances, exp_seed))?;
            let rpf = rpf_audit(&inst)?;
            let conv = convergence_audit(&inst, n_list, *windows)?;
            let fitted: Vec<_> = conv.iter().filter(|c| c.c_fit.is_some()).collect();
            let worst_c = fitted.iter().filter_map(|c| c.c_fit).fold(0.0, f64::max);
            let worst_r2 = fitted.iter().filter_map(|c| c.r_squared).fold(1.0, f64::min);
            let checks = vec![
                below("max RPF residual", rpf.max_residual, *max_residual),
                below("max |ν − uniform| (column-normalized)", rpf.max_nu_gap, *normalization_tol),
                below("max |λ − 1| (column-normalized)", rpf.max_lambda_gap, *normalization_tol),
                below("max fitted rate c", worst_c, *max_rate),
                above("min R²", worst_r2, *min_r_squared),
            ];
            let rows = rpf
                .rows
                .iter()
                .zip(&conv)
                .map(|(r, c)| {
                    let s = r.shape;
                    vec![
                        s.index.to_string(),
                        s.alphabet.to_string(),
                        s.depth.to_string(),
                        s.symbols.to_string(),
                        num(r.raw_residual),
                        num(r.column_residual),
                        num(r.nu_uniform_gap),
                        num(r.lambda_gap),
                        c.c_fit.map_or(String::new(), num),
                        c.r_squared.map_or(String::new(), num),
                    ]
                })
                .collect();
            let err_rows = conv
                .iter()
                .flat_map(|c| c.errors.iter().map(move |&(n, e)| vec![c.shape.index.to_string(), n.to_string(), num(e)]))
                .collect();
            let tasks = inst.len() * (windows + 1);
            let exact = conv.len() - fitted.len();
            Outcome::done(
                checks,
                serde_json::json!({ "rpf": json(&rpf), "convergence": json(&conv), "exactly_converged": exact }),
                tasks,
                vec![
                    curve(
                        "instances",
                        vec!["instance", "alphabet", "depth", "symbols", "raw_residual", "column_residual", "nu_gap", "lambda_gap", "c_fit", "r_squared"],
                        rows,
                    ),
                    curve("errors", vec!["instance", "n", "error"], err_rows),
                ],
            )
        }
        Experiment::PressureAudit { instances, k_max, first_tol, slope_ratio, .. } => {
            let inst = random_instances(&instance_spec(instances, exp_seed))?;
            let rows = pressure_audit(&inst, *k_max)?;
            let first = rows.iter().map(|r| r.first_gap).fold(0.0, f64::max);
            let excess = rows.iter().map(|r| r.second_gap_slope - slope_ratio * r.variance_rate).fold(f64::NEG_INFINITY, f64::max);
            let sup2 = rows.iter().flat_map(|r| r.second_gap.iter().copied()).fold(0.0, f64::max);
            let checks = vec![
                below("max |Π' − mean|", first, *first_tol),
                below("max (slope of |Π'' − variance| − ratio · variance rate)", excess, 1e-9),
            ];
            let table = rows
                .iter()
                .flat_map(|r| r.second_gap.iter().enumerate().map(move |(k, g)| vec![r.shape.index.to_string(), (k + 1).to_string(), num(*g)]))
                .collect();
            Outcome::done(
                checks,
                serde_json::json!({ "rows": json(&rows), "sup_second_gap": sup2 }),
                inst.len() * k_max,
                vec![curve("second-gap", vec!["instance", "k", "gap"], table)],
            )
        }
        Experiment::CocycleOracle { instances, n_max, z_list, tol, .. } => {
            let inst = random_instances(&instance_spec(instances, exp_seed))?;
            let z: Vec<Complex64> = z_list.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            let rows = cocycle_oracle(&inst, *n_max, &z)?;
            let worst = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
            let table = rows
                .iter()
                .map(|r| vec![r.shape.index.to_string(), r.shape.depth.to_string(), r.n.to_string(), num(r.z.re), num(r.z.im), num(r.relative_gap)])
                .collect();
            Outcome::done(
                vec![below("max relative gap", worst, *tol)],
                serde_json::json!({ "comparisons": rows.len(), "max_relative_gap": worst }),
                rows.len(),
                vec![curve("gaps", vec!["instance", "depth", "n", "z_re", "z_im", "relative_gap"], table)],
            )
        }
        Experiment::CfIdentity { n_list, t_list, replicates, exact_tol, z_max, .. } => {
            let r = cf_identity(sys(), n_list, t_list, &ens, *replicates)?;
            let mut checks = vec![below("max MC z-score", r.max_z, *z_max)];
            if let Some(g) = r.max_exact_gap {
                checks.insert(0, below("max |spectral − exact|", g, *exact_tol));
            }
            let rows = r
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.n.to_string(),
                        num(p.t),
                        num(p.spectral.re),
                        num(p.spectral.im),
                        p.exact.map_or(String::new(), |e| num(e.re)),
                        p.exact.map_or(String::new(), |e| num(e.im)),
                        num(p.monte_carlo.re),
                        num(p.monte_carlo.im),
                        num(p.mc_se),
                    ]
                })
                .collect();
            Outcome::done(
                checks,
                json(&r),
                ens.omega_samples * n_list.len(),
                vec![curve("cf", vec!["n", "t", "spectral_re", "spectral_im", "exact_re", "exact_im", "mc_re", "mc_im", "mc_se"], rows)],
            )
        }
        Experiment::Clt { n_list, replicates, ks_tol, expect, .. } => {
            let s = settle(clt_test(sys(), n_list, &ens, *replicates))?;
            expect_outcome(*expect, s, |r| {
                let last = *r.ks.last().unwrap();
                let rows = r.n_list.iter().zip(&r.ks).zip(&r.sigma2).map(|((n, k), s)| vec![n.to_string(), num(*k), num(*s)]).collect();
                Outcome::done(
                    vec![below(format!("KS at n = {}", r.n_list.last().unwrap()), last, *ks_tol)],
                    json(&r),
                    ens.omega_samples * n_list.len(),
                    vec![curve("ks", vec!["n", "ks", "sigma2"], rows)],
                )
            })
        }
        Experiment::BerryEsseen { n_list, replicates, expect, .. } => {
            let s = settle(berry_esseen_scan(sys(), n_list, &ens, *replicates))?;
            let mut o = expect_outcome(*expect, s, |r| {
                let rows = r.n_list.iter().zip(&r.e_n).zip(&r.scaled).map(|((n, e), s)| vec![n.to_string(), num(*e), num(*s)]).collect();
                let mut o = Outcome::done(
                    vec![below("log-log slope of e_n √n", r.log_slope, r.slope_tolerance)],
                    json(&r),
                    ens.omega_samples * n_list.len(),
                    vec![curve("rate", vec!["n", "e_n", "e_n_sqrt_n"], rows)],
                );
                if !r.bounded {
                    o.warnings.push(format!("e_n √n grows with slope {}", r.log_slope));
                }
                o.info = true;
                o
            });
            if *expect != Expect::Pass {
                o.info = false;
            }
            o
        }
        Experiment::Llt { n_list, a_window, classifier, tol, expect, .. } => {
            let s = settle(llt_scan(sys(), n_list, *a_window, &ens, classifier))?;
            expect_outcome(*expect, s, |r| {
                let mut rows: Vec<Vec<String>> =
                    r.n_list.iter().zip(&r.sup_dev).zip(&r.worst_a).map(|((n, d), a)| vec![n.to_string(), num(*d), num(*a)]).collect();
                rows.iter_mut().zip(&r.sigma2).for_each(|(row, s)| row.push(num(*s)));
                let mut curves = vec![curve("deviation", vec!["n", "sup_dev", "worst_a", "sigma2"], rows)];
                if let Some(law) = &r.last_law {
                    let probs = law.probs.iter().enumerate().map(|(i, p)| vec![num(law.value(i)), num(*p)]).collect();
                    curves.push(curve("law", vec!["centered_value", "probability"], probs));
                }
                let mut o = Outcome::done(
                    vec![below(format!("sup deviation at n = {}", r.n_list.last().unwrap()), *r.sup_dev.last().unwrap(), *tol)],
                    json(&r),
                    ens.omega_samples * n_list.len(),
                    curves,
                );
                if !non_increasing(&r.sup_dev) {
                    o.warnings.push("sup deviation is not non-increasing in n".into());
                }
                o
            })
        }
        Experiment::Classify { classifier, expect, .. } => {
            let c = classify_system(sys(), classifier)?;
            let ok = match expect {
                Expect::Pass => c.passed,
                Expect::Refused => !c.passed && !c.degenerate,
                Expect::Degenerate => c.degenerate,
            };
            let outcome = if c.passed {
                "completed"
            } else if c.degenerate {
                "degenerate"
            } else {
                "refused"
            };
            let mut o = Outcome::done(vec![flag(format!("classification matches {expect:?}").to_lowercase(), ok)], json(&c), 1, vec![]);
            o.outcome = outcome;
            o
        }
        Experiment::Renewal { truncation, a_list, f, abel, near_from, near_tol, far_below, far_tol, expect, .. } => {
            let rc = RenewalConfig { truncation: *truncation, a_list: a_list.clone(), f: f.clone(), abel: *abel };
            let s = settle(renewal_curve(sys(), &rc, &ens))?;
            expect_outcome(*expect, s, |r| {
                let mut checks = Vec::new();
                if let Some(lo) = near_from {
                    let rel = r
                        .a_list
                        .iter()
                        .zip(&r.values)
                        .filter(|(a, _)| **a >= *lo)
                        .map(|(_, v)| (v - r.limit_plus).abs() / r.limit_plus)
                        .fold(0.0, f64::max);
                    checks.push(below(format!("max relative error to μ(f)h/γ for a ≥ {lo}"), rel, *near_tol));
                }
                if let Some(hi) = far_below {
                    let m = r.a_list.iter().zip(&r.values).filter(|(a, _)| **a <= *hi).map(|(_, v)| v.abs()).fold(0.0, f64::max);
                    checks.push(below(format!("max |U| for a ≤ {hi}"), m, *far_tol));
                }
                let rows = r
                    .a_list
                    .iter()
                    .enumerate()
                    .map(|(i, a)| vec![num(*a), num(r.values[i]), r.abel_values.as_ref().map_or(String::new(), |v| num(v[i]))])
                    .collect();
                let mut o = Outcome::done(checks, json(&r), ens.omega_samples, vec![curve("renewal", vec!["a", "value", "abel"], rows)]);
                if r.degenerate {
                    o.warnings.push("zero variance: renewal measure is a counting measure".into());
                }
                o
            })
        }
        Experiment::DecaySurvey { small_t, large_t, n_grid, expect, .. } => {
            let r = decay_survey(sys(), &decay_config(small_t, large_t, n_grid), &ens)?;
            let checks = match expect {
                Expect::Degenerate => vec![flag("small-t decay rate vanishes", r.degenerate)],
                _ => vec![
                    above("d₂", r.d2, 0.0),
                    flag("small-t violating fraction non-increasing", r.small_trend_ok),
                    above("u", r.u_rate, 0.0),
                    flag("large-t violating fraction non-increasing", r.large_trend_ok),
                ],
            };
            let mut small = Vec::new();
            for (i, t) in r.small_t.iter().enumerate() {
                for (k, n) in r.n_grid.iter().enumerate() {
                    let q = r.small_log_lambda[i][k];
                    small.push(vec![num(*t), n.to_string(), num(q[0]), num(q[1]), num(q[2])]);
                }
            }
            let mut large = Vec::new();
            for (i, t) in r.large_t.iter().enumerate() {
                for (k, n) in r.n_grid.iter().enumerate() {
                    let q = r.large_log2_norm[i][k];
                    large.push(vec![num(*t), n.to_string(), num(q[0]), num(q[1]), num(q[2])]);
                }
            }
            let viol = r.n_grid.iter().enumerate().map(|(k, n)| vec![n.to_string(), num(r.small_violating[k]), num(r.large_violating[k])]).collect();
            let mut o = Outcome::done(
                checks,
                json(&r),
                ens.omega_samples * (small_t.len() + large_t.len()),
                vec![
                    curve("small-t", vec!["t", "n", "q10", "q50", "q90"], small),
                    curve("large-t", vec!["t", "n", "q10", "q50", "q90"], large),
                    curve("violating", vec!["n", "small_t", "large_t"], viol),
                ],
            );
            if r.degenerate {
                o.outcome = "degenerate";
            }
            o
        }
        Experiment::Variance { n_list, degenerate_tol, expect, .. } => {
            let r = variance_curve(sys(), n_list, &ens)?;
            let checks = match expect {
                Expect::Degenerate => vec![below("|σ²|", r.sigma2.abs(), *degenerate_tol)],
                _ => vec![above("σ²", r.sigma2, *degenerate_tol)],
            };
            let rows = r
                .n_list
                .iter()
                .enumerate()
                .map(|(k, n)| vec![n.to_string(), num(r.v_exact[k]), num(r.v_pressure[k]), num(r.tail_fraction[k])])
                .collect();
            let mut o = Outcome::done(
                checks,
                json(&r),
                ens.omega_samples * n_list.len(),
                vec![curve("variance", vec!["n", "v_exact", "v_pressure", "tail_fraction"], rows)],
            );
            if r.degenerate {
                o.outcome = "degenerate";
            }
            o
        }
        Experiment::DoeblinOrder { z, tol, .. } => {
            let d = system_doeblin(cfg)?;
            let q = d.chain.states();
            // A window that visits distinct symbols when the base has them.
            let w = OmegaWindow::new(0, vec![0, 1 % q, 0])?;
            let c = composition_order_check(&d.family, &w, Complex64::new(z[0], z[1]))?;
            Outcome::done(
                vec![below("|R^{ω,2} − double sum|", c.reversed_gap, *tol), below("|(K₁K₀)ᵀ − double sum|", c.transposed_gap, *tol)],
                json(&c),
                1,
                vec![],
            )
        }
        Experiment::DoeblinContraction { n_list, .. } => {
            let d = system_doeblin(cfg)?;
            let n_max = *n_list.iter().max().unwrap() as i64;
            let w = sample_base_path(&d.chain, 0, n_max + 1, exp_seed)?;
            let r = doeblin_contraction(&d.family, &w, n_list)?;
            let rows = r.tv.iter().map(|(n, tv)| vec![n.to_string(), num(*tv), num(r.factor.powi(*n as i32))]).collect();
            Outcome::done(vec![flag("TV ≤ (1 − qα)^n", r.holds)], json(&r), n_list.len(), vec![curve("contraction", vec!["n", "tv", "bound"], rows)])
        }
    })
}

fn system_doeblin(cfg: &ExperimentConfig) -> Result<skewprod::doeblin::DoeblinSystem, LibError> {
    match build_system(cfg, None).map_err(|e| LibError::InvalidModel(e.to_string()))? {
        crate::config::System::Doeblin(d) => Ok(d),
        crate::config::System::Symbolic(_) => Err(LibError::InvalidDoeblin("the config has no [doeblin] section".into())),
    }
}

/// Runs every experiment in order. Parallelism lives inside the library
/// calls, on the ambient rayon pool.
pub fn execute(cfg: &ExperimentConfig) -> Result<(ResultRecord, Vec<(String, f64)>), CliError> {
    validate(cfg)?;
    let mut records = Vec::with_capacity(cfg.experiments.len());
    let mut timings = Vec::with_capacity(cfg.experiments.len());
    for (i, exp) in cfg.experiments.iter().enumerate() {
        let start = Instant::now();
        let exp_seed = seed::derive(cfg.seed, i as u64);
        let o = run_one(cfg, i, exp, exp_seed).map_err(|e| CliError::Numerical { experiment: exp.name(), source: e })?;
        let all = o.checks.iter().all(|c| c.pass);
        let status = if o.info {
            Status::Info
        } else if all {
            Status::Pass
        } else {
            Status::Fail
        };
        timings.push((exp.name(), start.elapsed().as_secs_f64()));
        records.push(ExperimentRecord {
            name: exp.name(),
            kind: exp.kind(),
            seed: exp_seed,
            outcome: o.outcome,
            status,
            checks: o.checks,
            tasks: o.tasks,
            report: o.report,
            warnings: o.warnings,
            curves: o.curves,
        });
    }
    let passed = records.iter().all(|r| r.status != Status::Fail);
    Ok((
        ResultRecord { tool: "skewprod", version: env!("CARGO_PKG_VERSION"), config_hash: config_hash(cfg), seed: cfg.seed, passed, experiments: records },
        timings,
    ))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.display().to_string(), source: e }
}

fn write_csv(path: &Path, c: &Curve) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
    let csv_err = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
    w.write_record(&c.header).map_err(csv_err)?;
    for row in &c.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `results.json`, `run_info.json` and `curves/*.csv` under `out`.
pub fn persist(out: &Path, record: &ResultRecord, info: &RunInfo) -> Result<(), CliError> {
    let curves = out.join("curves");
    std::fs::create_dir_all(&curves).map_err(io_err(&curves))?;
    let results = out.join("results.json");
    let mut text = serde_json::to_string_pretty(record).expect("record serializes");
    text.push('\n');
    std::fs::write(&results, text).map_err(io_err(&results))?;
    let run_info = out.join("run_info.json");
    let mut text = serde_json::to_string_pretty(info).expect("info serializes");
    text.push('\n');
    std::fs::write(&run_info, text).map_err(io_err(&run_info))?;
    for e in &record.experiments {
        for c in &e.curves {
            write_csv(&curves.join(format!("{}.csv", c.file)), c)?;
        }
    }
    Ok(())
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}
