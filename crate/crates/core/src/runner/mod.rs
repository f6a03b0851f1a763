//! Config-driven experiment runs with artifact files, and static plot emission.

mod config;
mod plot;

pub use config::{
    BorovkovConfig, CltConfig, ContractivityConfig, CouplingConfig, DriftConfig, DriftKernel, ExperimentConfig,
    FcltConfig, FelsmannConfig, FloorConfig, LlnConfig, LoynesConfig, MixingTableConfig, QueueSuiteConfig,
    TransferBoundConfig, KINDS,
};
pub use plot::{emit_plots, PlotSummary};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::counterexample::felsmann_report;
use crate::error::{Error, Result};
use crate::limits::{coverage, fclt_ensemble, lln_report, weak_approach_report, PartialSumEnsemble};
use crate::mcre::{contractivity_rate, drift_verify, AffineKernel, DriftData};
use crate::mixing::{alpha_table, cesaro_mixing, transfer_bound};
use crate::queue::{
    assumption_report, borovkov_rate, loynes_stationary, queue_coupling_experiment, queue_drift_coeffs,
    simulate_queue, variance_floor, CouplingExperimentOptions, QueueKernel, QueueModel,
};
use crate::stats::{mean, variance};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MCRE_LAB_OUT";

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// `--out`, then `MCRE_LAB_OUT`, then `./mcre-lab-out`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match (flag, std::env::var_os(OUT_ENV)) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("mcre-lab-out"),
    }
}

/// A fresh `<root>/<kind>/<timestamp>` directory; a numeric suffix avoids collisions.
fn fresh_dir(root: &Path, kind: &str) -> Result<PathBuf> {
    let base = root.join(kind);
    fs::create_dir_all(&base)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    for i in 0.. {
        let name = if i == 0 { stamp.clone() } else { format!("{stamp}-{i}") };
        match fs::create_dir(base.join(&name)) {
            Ok(()) => return Ok(base.join(name)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

/// Runs one experiment under `root`, writing the resolved config echo first.
/// Assumption failures are returned as errors after the report is on disk.
pub fn run_experiment(config: &ExperimentConfig, root: &Path) -> Result<RunOutcome> {
    let mut config = config.clone();
    config.resolve();
    let dir = fresh_dir(root, config.kind())?;
    let mut art = Artifacts { dir: dir.clone(), files: Vec::new() };
    art.text("config.toml", &config.to_toml()?)?;
    let checks = dispatch(&config, &mut art)?;
    art.json("checks.json", &checks)?;
    Ok(RunOutcome { dir, files: art.files, checks })
}

fn dispatch(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    match config {
        ExperimentConfig::MixingTable(c) => run_mixing_table(c, art),
        ExperimentConfig::TransferBound(c) => run_transfer(c, art),
        ExperimentConfig::Drift(c) => run_drift(c, art),
        ExperimentConfig::Contractivity(c) => run_contractivity(c, art),
        ExperimentConfig::Coupling(c) => run_coupling(c, art),
        ExperimentConfig::Lln(c) => run_lln(c, art),
        ExperimentConfig::Clt(c) => run_clt(c, art),
        ExperimentConfig::Fclt(c) => run_fclt(c, art),
        ExperimentConfig::QueueSuite(c) => run_queue_suite(c, art),
        ExperimentConfig::Felsmann(c) => run_felsmann(c, art),
        ExperimentConfig::Borovkov(c) => run_borovkov(c, art),
    }
}

fn run_mixing_table(c: &MixingTableConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let table = alpha_table(&c.environment, c.max_gap, c.block_len, &c.js)?;
    let cesaro = c.cesaro.iter().map(|&n| Ok((n, cesaro_mixing(&table, n)?))).collect::<Result<Vec<_>>>()?;
    art.text("alpha.csv", &table.to_csv())?;
    art.json("summary.json", &json!({ "sup_alpha": table.sup_curve(), "cesaro": cesaro, "all_exact": table.all_exact() }))?;
    Ok(vec![])
}

fn run_transfer(c: &TransferBoundConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let toy = &c.toy;
    let env = toy.alpha_environment()?;
    let b = toy.coupling_bound()?;
    let mut csv = String::from("n,r,alpha_x,alpha_env,b,bound,holds\n");
    let mut violations = 0;
    let mut cells = 0;
    for n in 1..=toy.horizon {
        let ax = toy.alpha_response(n)?;
        for r in 0..=(n - b.threshold) {
            let bound = transfer_bound(&env, &b, n, r)?;
            let holds = ax <= bound + 1e-12;
            violations += !holds as usize;
            cells += 1;
            let _ = writeln!(csv, "{n},{r},{ax},{},{},{bound},{}", env.sup_alpha(r + 1)?, b.at(n - r)?, holds as u8);
        }
    }
    art.text("transfer.csv", &csv)?;
    Ok(vec![Check::new("transfer-bound", violations == 0, format!("{violations} violations over {cells} (n, r) pairs"))])
}

fn run_drift(c: &DriftConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let report = match &c.kernel {
        DriftKernel::Queue { arrival, t } => {
            arrival.validate()?;
            let drift = queue_drift_coeffs(arrival, *t)?;
            drift_verify(&QueueKernel { arrival: arrival.clone() }, &drift, &c.y_grid, &c.x_grid, c.replicas, c.master_seed)
        }
        DriftKernel::Affine { a, noise } => {
            noise.validate()?;
            if noise.mean().abs() > 1e-12 {
                return Err(Error::Config(format!("affine noise must be centered, mean is {}", noise.mean())));
            }
            // E[1 + (ax + ξ)²] = a²(1 + x²) + 1 − a² + Eξ².
            let (g, k) = (a * a, 1.0 - a * a + noise.second_moment());
            let drift = DriftData::new(|x| 1.0 + x * x, move |_| g, move |_| k);
            let kernel = AffineKernel { a: *a, noise: noise.clone() };
            drift_verify(&kernel, &drift, &c.y_grid, &c.x_grid, c.replicas, c.master_seed)
        }
    };
    art.text("drift.csv", &report.to_csv())?;
    let v = report.violations();
    Ok(vec![Check::new("drift-inequality", v == 0, format!("{v} of {} cells above bound + 4 SE", report.rows.len()))])
}

fn run_contractivity(c: &ContractivityConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    c.arrival.validate()?;
    let drift = queue_drift_coeffs(&c.arrival, c.t)?;
    let report = contractivity_rate(&c.service, &drift, c.n_max, c.j_max, c.replicas, c.master_seed)?;
    art.text("contractivity.csv", &report.to_csv())?;
    art.json("summary.json", &json!({ "sup_per_n": report.sup_per_n, "trend": report.trend, "method": report.method }))?;
    let last = *report.sup_per_n.last().unwrap();
    Ok(vec![Check::new("contractive", last < 1.0, format!("sup_j rate at n = {}: {last}", c.n_max))])
}

fn run_coupling(c: &CouplingConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let exp = queue_coupling_experiment(&c.model, &c.experiment)?;
    art.text("tail.csv", &exp.tail.to_csv(exp.coupling.fit_sqrt.as_ref()))?;
    art.text("tv.csv", &exp.tv.to_csv())?;
    art.json(
        "report.json",
        &json!({
            "assumptions": exp.report,
            "coupling": exp.coupling,
            "dominated": exp.dominated,
            "loynes_boundary_rate": exp.loynes_boundary_rate,
        }),
    )?;
    Ok(coupling_checks(&exp, &c.experiment))
}

fn coupling_checks(exp: &crate::queue::CouplingExperiment, opts: &CouplingExperimentOptions) -> Vec<Check> {
    let rss = |f: &Option<crate::mcre::TailFit>| f.as_ref().map(|f| f.rss);
    vec![
        Check::new(
            "sqrt-fit-dominates",
            exp.dominated == Some(true),
            format!("on ({}, {}] within factor {}", opts.fit_hi, opts.dominance_hi, opts.dominance_factor),
        ),
        Check::new(
            "sqrt-fit-residual",
            exp.coupling.better_exponent == Some(0.5),
            format!("rss sqrt {:?} vs cube root {:?}", rss(&exp.coupling.fit_sqrt), rss(&exp.coupling.fit_cuberoot)),
        ),
        Check::new("tv-sandwich", exp.tv.all_within(), format!("record times {:?}", opts.record_times)),
    ]
}

fn require_subcritical(model: &QueueModel) -> Result<()> {
    model.validate()?;
    if model.service_mean_limsup() >= model.arrival.mean() {
        return Err(Error::AssumptionFailed(vec!["subcritical".into()]));
    }
    Ok(())
}

/// Waiting times W_1..W_n from W_0 = 0, one row per replica.
pub fn waiting_ensemble(model: &QueueModel, n: usize, replicas: usize, seed: u64) -> Result<PartialSumEnsemble> {
    require_subcritical(model)?;
    PartialSumEnsemble::generate(replicas, |r| Ok(simulate_queue(model, n, seed, r)?.w[1..].to_vec()))
}

fn run_lln(c: &LlnConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let n = c.n_grid.iter().copied().max().ok_or_else(|| Error::Config("n_grid is empty".into()))?;
    let ens = waiting_ensemble(&c.model, n, c.replicas, c.master_seed)?;
    let rep = lln_report(&ens, &c.n_grid, &c.b_grid)?;
    let mut csv = String::from("n,l1_error,stderr,scaled_variance,running_sup\n");
    for r in &rep.rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.l1_error, r.stderr, r.scaled_variance, r.running_sup);
    }
    let mut ui = String::from("b,tail_mean\n");
    for r in &rep.uniform_integrability {
        let _ = writeln!(ui, "{},{}", r.b, r.tail_mean);
    }
    art.text("lln.csv", &csv)?;
    art.text("ui.csv", &ui)?;
    art.json("report.json", &rep)?;
    let mut checks = vec![Check::new("l1-decreasing", rep.decreasing, "at most one inversion, within 1 SE")];
    if let Some(max) = c.max_final_ratio {
        checks.push(Check::new("final-ratio", rep.final_ratio <= max, format!("{} vs limit {max}", rep.final_ratio)));
    }
    Ok(checks)
}

fn run_clt(c: &CltConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let ens = waiting_ensemble(&c.model, c.n, c.replicas, c.master_seed)?;
    let scale = (c.n as f64).sqrt();
    let terminal: Vec<f64> = ens.sums_at(c.n).iter().map(|s| s / scale).collect();
    let var = ens.variance_curve();
    let sigma_max = (1..=c.n).map(|k| var[k] / k as f64).fold(0.0, f64::max).sqrt();
    let sigma_hat = variance(&terminal).sqrt();
    let a_grid: Vec<f64> = c.a_multiples.iter().map(|m| m * sigma_hat).collect();
    let rows = coverage(&terminal, &a_grid, sigma_max)?;
    let weak = weak_approach_report(&terminal)?;
    let mut csv = String::from("a,empirical,stderr,bound,ok\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.a, r.empirical, r.stderr, r.bound, r.ok as u8);
    }
    let mut wcsv = String::from("name,empirical,stderr,normal,distance\n");
    for w in &weak.witnesses {
        let _ = writeln!(wcsv, "{},{},{},{},{}", w.name, w.empirical, w.stderr, w.normal, w.distance);
    }
    art.text("coverage.csv", &csv)?;
    art.text("witnesses.csv", &wcsv)?;
    art.json("report.json", &json!({ "sigma_hat": sigma_hat, "sigma_max": sigma_max, "coverage": rows, "weak": weak }))?;
    Ok(vec![Check::new("coverage", rows.iter().all(|r| r.ok), "empirical ≤ 2(1 − Φ(a/σ̂_max)) + 4 SE")])
}

fn run_fclt(c: &FcltConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let ens = waiting_ensemble(&c.model, c.n, c.replicas, c.master_seed)?;
    let rep = fclt_ensemble(&ens, &c.fclt)?;
    let mut vcsv = String::from("t,v,var_b\n");
    for ((t, v), vb) in rep.t_grid.iter().zip(&rep.v).zip(&rep.var_b) {
        let _ = writeln!(vcsv, "{t},{v},{vb}");
    }
    art.text("paths.csv", &rep.to_csv(c.dump_paths))?;
    art.text("variance.csv", &vcsv)?;
    art.json("report.json", &rep)?;
    Ok(fclt_checks(&rep))
}

/// Var B(1) ∈ [0.95, 1.05], Var B(1/2) ∈ [0.45, 0.55], |corr| ≤ 0.05 at 1/2 and KS p ≥ 0.01.
pub fn fclt_checks(rep: &crate::limits::FcltReport) -> Vec<Check> {
    let within = |v: Option<f64>, lo: f64, hi: f64| v.is_some_and(|v| (lo..=hi).contains(&v));
    let (v1, vh, corr) = (rep.var_at(1.0), rep.var_at(0.5), rep.corr_at(0.5));
    vec![
        Check::new("var-b1", within(v1, 0.95, 1.05), format!("{v1:?}")),
        Check::new("var-b-half", within(vh, 0.45, 0.55), format!("{vh:?}")),
        Check::new("increment-corr", corr.is_some_and(|c| c.abs() <= 0.05), format!("{corr:?}")),
        Check::new("ks-b1", rep.ks_b1.p_value >= 0.01, format!("p = {}", rep.ks_b1.p_value)),
    ]
}

fn run_queue_suite(c: &QueueSuiteConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let report = assumption_report(&c.model, &c.assumptions)?;
    art.json("assumptions.json", &report)?;
    if !report.all_green() {
        return Err(Error::AssumptionFailed(report.failures()));
    }
    let path = simulate_queue(&c.model, c.steps, c.master_seed, 0)?;
    let mut summary = json!({ "steps": c.steps, "time_average_wait": mean(&path.w[1..]) });
    if let Some(l) = &c.loynes {
        let s = loynes_stationary(&c.model, l.depth, l.samples, c.master_seed)?;
        summary["loynes"] = json!({
            "depth": s.depth,
            "samples": s.values.len(),
            "mean": mean(&s.values),
            "p_zero": s.values.iter().filter(|w| **w == 0.0).count() as f64 / s.values.len() as f64,
            "boundary_rate": s.boundary_rate(),
        });
    }
    let mut checks = vec![];
    if let Some(f) = &c.variance_floor {
        let rows = variance_floor(&c.model, &f.ns, f.replicas, c.master_seed)?;
        let mut csv = String::from("n,estimate,stderr,bound\n");
        for r in &rows {
            let _ = writeln!(csv, "{},{},{},{}", r.n, r.variance, r.variance_se, r.floor);
        }
        art.text("variance_floor.csv", &csv)?;
        summary["variance_floor"] = serde_json::to_value(&rows)?;
        checks.push(Check::new("variance-floor", rows.iter().all(|r| r.ok), "Var ≥ floor − 4 SE at every n"));
    }
    art.json("summary.json", &summary)?;
    Ok(checks)
}

fn run_felsmann(c: &FelsmannConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let rep = felsmann_report(c.epsilon, c.n_max, c.mc_n_max, c.replicas, c.master_seed)?;
    art.text("felsmann.csv", &rep.to_csv())?;
    art.json("report.json", &rep)?;
    Ok(vec![
        Check::new("envelope", rep.envelope_holds, "n-th root ≥ (3/2)·2^{−1/n}"),
        Check::new("mc-agreement", rep.mc_agrees, "MC within 4 SE of the exact value"),
    ])
}

fn run_borovkov(c: &BorovkovConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let horizon = c.ns.iter().copied().max().ok_or_else(|| Error::Config("ns is empty".into()))?;
    let rows = borovkov_rate(&c.model, &c.ns, c.replicas, c.depth, c.master_seed)?;
    let opts = CouplingExperimentOptions {
        horizon,
        replicas: c.coupling_replicas,
        seed: c.master_seed,
        depth: c.depth,
        record_times: vec![],
        fit_lo: 1,
        fit_hi: horizon.max(2) / 2,
        dominance_hi: horizon,
        assumptions: c.assumptions.clone(),
        ..CouplingExperimentOptions::default()
    };
    let exp = queue_coupling_experiment(&c.model, &opts)?;
    let mut csv = String::from("n,estimate,stderr,bound\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.n, r.estimate, r.stderr, exp.tv.points[r.n].bound);
    }
    art.text("borovkov.csv", &csv)?;
    art.json("report.json", &json!({ "rows": rows, "coupling": exp.coupling }))?;
    let mut sorted: Vec<_> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let monotone = sorted.windows(2).all(|w| w[1].estimate <= w[0].estimate);
    Ok(vec![Check::new("nonincreasing", monotone, "estimate nonincreasing in n")])
}
