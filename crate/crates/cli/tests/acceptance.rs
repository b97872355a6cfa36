//! Runs the bundled presets and prints one verdict line per acceptance
//! criterion. Exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use serde_json::Value;
use skewprod_cli::run::{ExperimentRecord, ResultRecord, Status};
use skewprod_cli::{presets, run_config, RunOptions};

struct Run {
    record: ResultRecord,
    bytes: Vec<u8>,
    seconds: BTreeMap<String, f64>,
    omegas: BTreeMap<String, usize>,
}

impl Run {
    fn exp(&self, name: &str) -> &ExperimentRecord {
        self.record.experiments.iter().find(|e| e.name == name).unwrap_or_else(|| panic!("no experiment `{name}`"))
    }

    fn check(&self, exp: &str, prefix: &str) -> (f64, bool) {
        let c = self.exp(exp).checks.iter().find(|c| c.name.starts_with(prefix)).unwrap_or_else(|| panic!("no check `{prefix}` in `{exp}`"));
        (c.value, c.pass)
    }

    fn report(&self, exp: &str, key: &str) -> &Value {
        &self.exp(exp).report[key]
    }
}

fn run(preset: &str, workers: usize, dir: &Path) -> Run {
    let p = presets::find(preset).unwrap_or_else(|| panic!("unknown preset {preset}"));
    let cfg = p.config().expect("preset validates");
    let omegas = cfg.experiments.iter().map(|e| (e.name(), e.omega_samples().unwrap_or(cfg.ensemble.omega_samples))).collect();
    let out = dir.join(format!("{preset}-{workers}"));
    let opts = RunOptions { workers: Some(workers), out: Some(out.clone()), ..Default::default() };
    let summary = run_config(cfg, &opts).expect("preset runs");
    let info: Value = serde_json::from_slice(&std::fs::read(out.join("run_info.json")).unwrap()).unwrap();
    let seconds = info["per_experiment_seconds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_str().unwrap().to_string(), p[1].as_f64().unwrap()))
        .collect();
    Run { record: summary.record, bytes: std::fs::read(out.join("results.json")).unwrap(), seconds, omegas }
}

struct Verdicts(Vec<(u8, bool, String)>);

impl Verdicts {
    fn add(&mut self, n: u8, pass: bool, detail: String) {
        println!("criterion {n:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push((n, pass, detail));
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut v = Verdicts(Vec::new());

    let audit = run("random-audit", 1, dir);
    let scalar = run("scalar-iid", 1, dir);
    let two = run("two-state-base-lattice", 1, dir);
    let span2 = run("span-2-counterexample", 1, dir);
    let renewal = run("renewal-γ-3/2", 1, dir);
    let cob = run("coboundary-degenerate", 1, dir);
    let doeb = run("doeblin-iid", 1, dir);

    {
        let (res, r_ok) = audit.check("rpf-audit", "max RPF residual");
        let (nu, nu_ok) = audit.check("rpf-audit", "max |ν");
        let (lam, lam_ok) = audit.check("rpf-audit", "max |λ");
        let count = audit.report("rpf-audit", "rpf")["rows"].as_array().map_or(0, |r| r.len());
        let secs = audit.seconds["rpf-audit"];
        v.add(
            1,
            r_ok && nu_ok && lam_ok && count == 20 && secs < 60.0,
            format!("{count} instances, residual {res:.2e} < 1e-8, |ν − uniform| {nu:.2e}, |λ − 1| {lam:.2e} < 1e-9, {secs:.2}s < 60s"),
        );
    }
    {
        let (c, c_ok) = audit.check("rpf-audit", "max fitted rate");
        let (r2, r2_ok) = audit.check("rpf-audit", "min R²");
        v.add(2, c_ok && r2_ok, format!("c_fit {c:.3} < 0.9, R² {r2:.4} > 0.99 over n = 2..30"));
    }
    {
        let (g1, ok1) = audit.check("pressure-audit", "max |Π'");
        let (g2, ok2) = audit.check("pressure-audit", "max (slope");
        v.add(3, ok1 && ok2, format!("|Π' − mean| {g1:.2e} < 1e-8, Π'' gap slope margin {g2:.2e} ≤ 0 over k = 1..50"));
    }
    {
        let (g, ok) = audit.check("cocycle-oracle", "max relative gap");
        v.add(4, ok, format!("oracle relative gap {g:.2e} < 1e-10 for n ≤ 8, d = 2"));
    }
    {
        let mut ok = true;
        let mut parts = Vec::new();
        for (label, r) in [("scalar", &scalar), ("two-state", &two), ("doeblin", &doeb)] {
            let (gap, g_ok) = r.check("cf-identity", "max |spectral");
            let (z, z_ok) = r.check("cf-identity", "max MC z-score");
            ok &= g_ok && z_ok;
            parts.push(format!("{label}: exact {gap:.1e}, z {z:.2}"));
        }
        v.add(5, ok, format!("{} (exact < 1e-9, z < 4)", parts.join("; ")));
    }
    {
        let (ks1, ok1) = scalar.check("clt", "KS at n = 10000");
        let samples = scalar.report("clt", "samples_per_n").as_u64().unwrap_or(0);
        let (ks2, ok2) = two.check("clt", "KS at n = 4000");
        let secs = scalar.seconds["clt"].max(two.seconds["clt"]);
        v.add(
            6,
            ok1 && ok2 && samples >= 100_000 && secs < 300.0,
            format!("scalar KS {ks1:.4} < 0.02 ({samples} samples at n = 1e4), two-state KS {ks2:.4} < 0.04 at n = 4000, {secs:.1}s < 300s"),
        );
    }
    {
        let (dev, ok) = two.check("llt", "sup deviation at n = 2000");
        let omegas = two.omegas["llt"];
        let classify_refused = span2.exp("classify").outcome == "refused" && span2.exp("classify").status == Status::Pass;
        let llt_refused = span2.exp("llt").outcome == "refused" && span2.exp("llt").status == Status::Pass;
        v.add(
            7,
            ok && omegas >= 500 && classify_refused && llt_refused,
            format!("sup deviation {dev:.2e} < 0.05 at n = 2000 over {omegas} ω; span-2 classifier refused {classify_refused}, runner refused {llt_refused}"),
        );
    }
    {
        let (near, ok1) = renewal.check("renewal", "max relative error");
        let (far, ok2) = renewal.check("renewal", "max |U|");
        let gamma = renewal.report("renewal", "gamma").as_f64().unwrap_or(f64::NAN);
        let trunc = renewal.report("renewal", "truncation").as_u64().unwrap_or(0);
        let secs = renewal.seconds["renewal"];
        v.add(
            8,
            ok1 && ok2 && gamma == 1.5 && trunc == 200 && secs < 300.0,
            format!("γ = {gamma}, N = {trunc}: rel err {near:.2e} < 0.05 on [40, 60], |U| {far:.1e} < 0.01 for a ≤ −10, {secs:.2}s"),
        );
    }
    {
        let e = two.exp("decay-survey");
        let (d2, _) = two.check("decay-survey", "d₂");
        let (u, _) = two.check("decay-survey", "u");
        let viol = |k: &str| two.report("decay-survey", k).to_string();
        v.add(
            9,
            e.status == Status::Pass,
            format!("d₂ {d2:.4} > 0, violating {}; u {u:.4} > 0, violating {}", viol("small_violating"), viol("large_violating")),
        );
    }
    {
        let sigma2 = cob.report("variance", "sigma2").as_f64().unwrap_or(f64::NAN);
        let all = cob.record.experiments.iter().all(|e| e.outcome == "degenerate" && e.status == Status::Pass);
        let kinds: Vec<&str> = cob.record.experiments.iter().map(|e| e.kind).collect();
        v.add(10, sigma2.abs() < 1e-10 && all, format!("σ² {sigma2:.1e} < 1e-10; degenerate path taken by {}", kinds.join(", ")));
    }
    {
        let order = doeb.exp("doeblin-order");
        let kinds = ["cf-identity", "clt", "llt", "renewal"];
        let reproduced = kinds.iter().all(|k| doeb.exp(k).status == Status::Pass);
        let (gap, _) = doeb.check("doeblin-order", "|R^{ω,2}");
        v.add(
            11,
            doeb.record.passed && reproduced && order.status == Status::Pass,
            format!("{} pass on Doeblin fibers; n = 2 order gap {gap:.1e}", kinds.join(", ")),
        );
    }
    {
        let audit_again = run("random-audit", 1, &dir.join("again"));
        let two_again = run("two-state-base-lattice", 1, &dir.join("again"));
        let two_wide = run("two-state-base-lattice", 8, dir);
        let rerun = audit_again.bytes == audit.bytes && two_again.bytes == two.bytes;
        let workers = two_wide.bytes == two.bytes;
        v.add(12, rerun && workers, format!("rerun byte-identical {rerun}; 1 vs 8 workers identical {workers}"));
    }

    let failed: Vec<u8> = v.0.iter().filter(|x| !x.1).map(|x| x.0).collect();
    println!("acceptance: {}/{} criteria pass", v.0.len() - failed.len(), v.0.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {failed:?}");
        ExitCode::FAILURE
    }
}
