//! Acceptance run: one line per criterion, full scale, fixed seeds.
//! Criterion 12 re-runs suites 1..=11 on one and four threads and compares their CSV output byte for byte.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use mcre_lab::counterexample::felsmann_report;
use mcre_lab::law::Law;
use mcre_lab::limits::{coverage, fclt_ensemble, lln_report, FcltOptions};
use mcre_lab::mcre::{LevelRule, PointMass, ScalarKernel, SplitSampler};
use mcre_lab::mixing::toy::ThresholdToy;
use mcre_lab::mixing::{alpha_table, transfer_bound};
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{
    loynes_stationary, queue_coupling_experiment, queue_drift_coeffs, simulate_queue, variance_floor,
    CouplingExperimentOptions, QueueKernel, QueueModel,
};
use mcre_lab::rng::derive_stream;
use mcre_lab::runner::{fclt_checks, waiting_ensemble};
use mcre_lab::stats::{ks_one_sample_atoms, ks_two_sample, mean, variance};
use mcre_lab::Result;

const SEED: u64 = 20_240_601;

/// Rounding allowance for probabilities that are not dyadic.
const ROUNDOFF: f64 = 1e-15;

/// Criteria whose failure is understood and documented in the README.
const KNOWN_SHORTFALLS: &[usize] = &[11];

struct Verdict {
    pass: bool,
    detail: String,
    csv: String,
}

type Suite = fn() -> Result<Verdict>;

fn felsmann() -> Result<Verdict> {
    let rep = felsmann_report(0.0, 40, 10, 1_000_000, SEED + 1)?;
    let worst = rep.rows.iter().map(|r| ((r.a_n - 0.5 * 1.5f64.powi(r.n as i32)) / r.a_n).abs()).fold(0.0, f64::max);
    let r10 = &rep.rows[9];
    let (mc, se) = (r10.mc.unwrap(), r10.mc_se.unwrap());
    let z = (mc - 0.5 * 1.5f64.powi(10)).abs() / se;
    Ok(Verdict {
        pass: worst <= 1e-12 && z <= 4.0,
        detail: format!("max rel err {worst:.1e} over n ≤ 40; MC at n = 10 off by {z:.2} SE"),
        csv: rep.to_csv(),
    })
}

fn mixing() -> Result<Verdict> {
    let ms = EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } };
    let iid = EnvironmentSpec::Iid { law: Law::Discrete { values: vec![0.0, 1.0, 2.0], probs: vec![0.2, 0.3, 0.5] } };
    let markov = EnvironmentSpec::FiniteMarkov {
        alphabet: vec![0.0, 1.0],
        transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        initial: vec![0.6, 0.4],
    };
    let js = [0, 1, 3];
    let mut csv = String::new();
    let ms_curve = alpha_table(&ms, 5, 2, &js)?.sup_curve();
    let iid_curve = alpha_table(&iid, 5, 2, &js)?.sup_curve();
    let m_dependent = ms_curve[1..].iter().all(|a| *a == 0.0);
    let independent = iid_curve.iter().all(|a| *a <= ROUNDOFF);
    let _ = writeln!(csv, "moving_sum,{ms_curve:?}\niid,{iid_curve:?}");

    let mut monotone = true;
    for (name, spec, max_len) in [("moving_sum", &ms, 2), ("markov", &markov, 3)] {
        let curves: Vec<Vec<f64>> = (1..=max_len).map(|l| alpha_table(spec, 4, l, &js).map(|t| t.sup_curve())).collect::<Result<_>>()?;
        for w in curves.windows(2) {
            monotone &= w[1].iter().zip(&w[0]).all(|(long, short)| *long >= short - ROUNDOFF);
        }
        let _ = writeln!(csv, "{name},{curves:?}");
    }
    Ok(Verdict {
        pass: m_dependent && independent && monotone,
        detail: format!("moving-sum α(n ≥ 2) exactly zero: {m_dependent}; i.i.d. zero up to {ROUNDOFF:e}: {independent}; block enlargement monotone: {monotone}"),
        csv,
    })
}

fn transfer() -> Result<Verdict> {
    let sticky = ThresholdToy::default();
    let loose = ThresholdToy { y_transition: [[0.5, 0.5], [0.3, 0.7]], p: [[0.1, 0.8], [0.4, 0.6]], anchor: 1, ..ThresholdToy::default() };
    let (mut cells, mut violations) = (0, 0);
    let mut csv = String::from("toy,n,r,alpha_x,bound\n");
    for (i, toy) in [sticky, loose].iter().enumerate() {
        let env = toy.alpha_environment()?;
        let b = toy.coupling_bound()?;
        for n in 1..=toy.horizon {
            let ax = toy.alpha_response(n)?;
            for r in 0..=n {
                let bound = transfer_bound(&env, &b, n, r)?;
                cells += 1;
                violations += usize::from(ax > bound);
                let _ = writeln!(csv, "{i},{n},{r},{ax},{bound}");
            }
        }
    }
    Ok(Verdict { pass: violations == 0, detail: format!("{violations} violations over {cells} (n, r) pairs, horizon 5"), csv })
}

fn split_sampler() -> Result<Verdict> {
    let arrival = Law::Exponential { rate: 1.0 };
    let t = 0.25;
    let kernel = QueueKernel { arrival: arrival.clone() };
    // w ≤ 1 and s ≤ 1.6 give Q(s, w, {0}) ≥ P(Z ≥ 2.6).
    let regen = 0.5 * (-2.6f64).exp();
    let sampler = SplitSampler::new(kernel.clone(), PointMass(0.0), queue_drift_coeffs(&arrival, t)?, LevelRule::Fixed(t.exp_m1()), 1.0 - regen)?;
    let draws = 100_000;
    let cells = [(0.2, 0.0), (0.8, 0.5), (1.6, 1.0), (0.4, 3.0), (1.2, 0.3)];
    let (mut good, mut regenerations, mut coalesced) = (0, 0usize, true);
    let mut csv = String::from("s,w,regenerations,ks_d,ks_p\n");
    for (i, &(s, w)) in cells.iter().enumerate() {
        let mut split_rng = derive_stream(SEED + 4, 2 * i as u64);
        let mut direct_rng = derive_stream(SEED + 4, 2 * i as u64 + 1);
        let mut split = Vec::with_capacity(draws);
        let mut cell_regens = 0;
        for _ in 0..draws {
            let (u1, u2) = (split_rng.uniform(), split_rng.uniform());
            let (x, regenerated) = sampler.split_step(s, w, u1, u2);
            if regenerated {
                cell_regens += 1;
                coalesced &= [0.0, 0.5, 1.0].iter().all(|w2| sampler.split_step(s, *w2, u1, u2) == (x, true));
            }
            split.push(x);
        }
        let direct: Vec<f64> = (0..draws).map(|_| kernel.quantile(s, w, direct_rng.uniform())).collect();
        let ks = ks_two_sample(&split, &direct);
        good += usize::from(ks.p_value >= 0.01);
        regenerations += cell_regens;
        let _ = writeln!(csv, "{s},{w},{cell_regens},{},{}", ks.statistic, ks.p_value);
    }
    Ok(Verdict {
        pass: good >= 4 && coalesced,
        detail: format!("KS p ≥ 0.01 in {good}/5 cells; {regenerations} regenerations, coalescence on all: {coalesced}"),
        csv,
    })
}

fn mm1() -> Result<Verdict> {
    let model = QueueModel::new(EnvironmentSpec::Iid { law: Law::Exponential { rate: 1.0 } }, None, Law::Exponential { rate: 0.5 })?;
    let avg = mean(&simulate_queue(&model, 1_000_000, SEED + 5, 0)?.w[1..]);
    let sample = loynes_stationary(&model, 500, 100_000, SEED + 5)?;
    // P(W ≤ w) = 1 − ρe^{−(μ−λ)w} with ρ = 1/2, atom 1/2 at zero.
    let cdf = |w: f64| if w < 0.0 { 0.0 } else { 1.0 - 0.5 * (-0.5 * w).exp() };
    let cdf_left = |w: f64| if w <= 0.0 { 0.0 } else { cdf(w) };
    let ks = ks_one_sample_atoms(&sample.values, cdf, cdf_left);
    Ok(Verdict {
        pass: (avg - 1.0).abs() <= 0.02 && ks.p_value >= 0.01,
        detail: format!("time average {avg:.4}; Loynes KS p = {:.3}", ks.p_value),
        csv: format!("time_average,ks_d,ks_p,boundary_rate\n{avg},{},{},{}\n", ks.statistic, ks.p_value, sample.boundary_rate()),
    })
}

fn bounded_model() -> Result<QueueModel> {
    QueueModel::new(EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.6 } }, Some(1.6), Law::Exponential { rate: 1.0 })
}

fn coupling_run() -> Result<mcre_lab::queue::CouplingExperiment> {
    let opts = CouplingExperimentOptions { replicas: 100_000, seed: SEED + 6, ..Default::default() };
    queue_coupling_experiment(&bounded_model()?, &opts)
}

fn coupling_tail() -> Result<Verdict> {
    let exp = coupling_run()?;
    let rss = |f: &Option<mcre_lab::mcre::TailFit>| f.as_ref().map_or(f64::INFINITY, |f| f.rss);
    let (sqrt, cube) = (rss(&exp.coupling.fit_sqrt), rss(&exp.coupling.fit_cuberoot));
    Ok(Verdict {
        pass: exp.report.all_green() && exp.dominated == Some(true) && sqrt <= cube,
        detail: format!("dominates on (50, 100] within 3: {:?}; rss √n {sqrt:.1} vs n^(1/3) {cube:.1}", exp.dominated),
        csv: exp.tail.to_csv(exp.coupling.fit_sqrt.as_ref()),
    })
}

fn tv_sandwich() -> Result<Verdict> {
    let exp = coupling_run()?;
    let shown: Vec<String> = exp.tv.points.iter().filter_map(|p| p.tv.map(|tv| format!("n={}: {tv:.4} vs {:.4}", p.n, p.bound))).collect();
    Ok(Verdict { pass: exp.tv.all_within(), detail: shown.join("; "), csv: exp.tv.to_csv() })
}

fn floor() -> Result<Verdict> {
    let model = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 0.5 } }, Some(0.5), Law::Exponential { rate: 1.0 })?;
    let rows = variance_floor(&model, &[100, 300, 1000], 2000, SEED + 8)?;
    let mut csv = String::from("n,variance,stderr,floor\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.n, r.variance, r.variance_se, r.floor);
    }
    let shown: Vec<String> = rows.iter().map(|r| format!("n={}: {:.0} ± {:.0} vs {:.1}", r.n, r.variance, r.variance_se, r.floor)).collect();
    Ok(Verdict { pass: rows.iter().all(|r| r.ok), detail: shown.join("; "), csv })
}

fn moving_sum_model() -> Result<QueueModel> {
    let service = EnvironmentSpec::MovingSum { order: 1, base: Law::Discrete { values: vec![0.0, 0.4], probs: vec![0.5, 0.5] } };
    QueueModel::new(service, Some(0.8), Law::Exponential { rate: 1.0 })
}

fn fclt() -> Result<Verdict> {
    let ens = waiting_ensemble(&moving_sum_model()?, 5000, 2000, SEED + 9)?;
    let rep = fclt_ensemble(&ens, &FcltOptions::default())?;
    let checks = fclt_checks(&rep);
    let shown: Vec<String> = checks.iter().map(|c| format!("{} {}", c.name, c.detail)).collect();
    let mut csv = String::from("t,v,var_b\n");
    for ((t, v), vb) in rep.t_grid.iter().zip(&rep.v).zip(&rep.var_b) {
        let _ = writeln!(csv, "{t},{v},{vb}");
    }
    let _ = writeln!(csv, "ks,{},{}", rep.ks_b1.statistic, rep.ks_b1.p_value);
    Ok(Verdict { pass: checks.iter().all(|c| c.passed), detail: shown.join("; "), csv })
}

fn confidence() -> Result<Verdict> {
    let n = 5000;
    let ens = waiting_ensemble(&moving_sum_model()?, n, 2000, SEED + 10)?;
    let terminal: Vec<f64> = ens.sums_at(n).iter().map(|s| s / (n as f64).sqrt()).collect();
    let var = ens.variance_curve();
    let sigma_max = (1..=n).map(|k| var[k] / k as f64).fold(0.0, f64::max).sqrt();
    let sigma = variance(&terminal).sqrt();
    let rows = coverage(&terminal, &[0.5 * sigma, sigma, 2.0 * sigma], sigma_max)?;
    let mut csv = String::from("a,empirical,stderr,bound\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.a, r.empirical, r.stderr, r.bound);
    }
    let shown: Vec<String> = rows.iter().map(|r| format!("{:.3} ≤ {:.3}", r.empirical, r.bound)).collect();
    Ok(Verdict { pass: rows.iter().all(|r| r.ok), detail: format!("σ̂ {sigma:.3}, σ̂_max {sigma_max:.3}: {}", shown.join(", ")), csv })
}

fn lln() -> Result<Verdict> {
    let ens = waiting_ensemble(&moving_sum_model()?, 10_000, 2000, SEED + 11)?;
    let rep = lln_report(&ens, &[100, 1000, 10_000], &[1.0, 2.0, 5.0, 10.0])?;
    let mut csv = String::from("n,l1_error,stderr\n");
    for r in &rep.rows {
        let _ = writeln!(csv, "{},{},{}", r.n, r.l1_error, r.stderr);
    }
    let shown: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.l1_error)).collect();
    Ok(Verdict {
        pass: rep.decreasing && rep.final_ratio <= 0.1,
        detail: format!("E|S_n/n| = [{}]; decreasing {}; final/initial {:.3} (limit 0.1)", shown.join(", "), rep.decreasing, rep.final_ratio),
        csv,
    })
}

const SUITES: [(usize, &str, Suite, Duration); 11] = [
    (1, "Felsmann exactness", felsmann, Duration::from_secs(10)),
    (2, "mixing exactness", mixing, Duration::from_secs(30)),
    (3, "transfer-bound soundness", transfer, Duration::from_secs(60)),
    (4, "split-sampler correctness", split_sampler, Duration::from_secs(60)),
    (5, "M/M/1 oracle", mm1, Duration::from_secs(60)),
    (6, "coupling-tail decay", coupling_tail, Duration::from_secs(300)),
    (7, "TV sandwich", tv_sandwich, Duration::from_secs(180)),
    (8, "variance floor", floor, Duration::from_secs(180)),
    (9, "FCLT diagnostics", fclt, Duration::from_secs(600)),
    (10, "confidence-bound coverage", confidence, Duration::from_secs(120)),
    (11, "LLN trend", lln, Duration::from_secs(120)),
];

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn main() {
    let four = pool(4);
    let one = pool(1);
    let mut unexpected = Vec::new();
    let mut report = |id: usize, name: &str, pass: bool, elapsed: Duration, detail: &str| {
        let status = match (pass, KNOWN_SHORTFALLS.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => {
                unexpected.push(id);
                "FAIL"
            }
        };
        println!("criterion {id:>2} {name}: {status} [{:.1}s] {detail}", elapsed.as_secs_f64());
    };

    let mut outputs = Vec::new();
    for (id, name, suite, budget) in SUITES {
        let start = Instant::now();
        let result = four.install(suite);
        let elapsed = start.elapsed();
        match result {
            Ok(v) => {
                let in_time = elapsed <= budget;
                let detail = if in_time { v.detail.clone() } else { format!("{} (over {}s budget)", v.detail, budget.as_secs()) };
                report(id, name, v.pass && in_time, elapsed, &detail);
                outputs.push(Some(v.csv));
            }
            Err(e) => {
                report(id, name, false, elapsed, &format!("error: {e}"));
                outputs.push(None);
            }
        }
    }

    let start = Instant::now();
    let mut differing = Vec::new();
    for ((id, _, suite, _), first) in SUITES.iter().zip(&outputs) {
        let again = one.install(suite).ok().map(|v| v.csv);
        if first.is_none() || again != *first {
            differing.push(*id);
        }
    }
    let detail = if differing.is_empty() { "CSV output identical on 4 and 1 threads for suites 1-11".to_string() } else { format!("suites {differing:?} differ") };
    report(12, "determinism", differing.is_empty(), start.elapsed(), &detail);

    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
