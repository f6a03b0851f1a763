use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::law::Law;
use crate::mcre::{
    couple_chains, tv_bound_report, Binning, CouplingOptions, CouplingReport, EnvPath, Histogram,
    LevelRule, PointMass, ResidualMethod, SplitSampler, Start, TailCurve, TvReport,
};
use crate::process::gen_environment_values;
use crate::rng::{derive_stream, stream_id, Purpose, StreamRng};
use crate::stats::{mean, std_error};

use super::{assumption_report, queue_drift_coeffs, tail_ge, AssumptionOptions, QueueAssumptionReport, QueueKernel, QueueModel};

/// W₀′ = max_{0 ≤ n ≤ depth} Σ_{k=1..n} (S_{−k} − Z_{−k+1}) from the service prefix
/// S_{−depth}, ..., S_{−1} (oldest first) and fresh arrivals Z_0, Z_{−1}, ...
/// The flag reports a maximum attained at the truncation depth.
pub fn loynes_from_prefix(prefix: &[f64], arrival: &Law, rng: &mut StreamRng) -> (f64, bool) {
    let depth = prefix.len();
    let (mut y, mut best, mut arg) = (0.0, 0.0, 0);
    for k in 1..=depth {
        y += prefix[depth - k] - arrival.quantile(rng.uniform());
        if y > best {
            best = y;
            arg = k;
        }
    }
    (best, depth > 0 && arg == depth)
}

#[derive(Clone, Debug, Serialize)]
pub struct LoynesSample {
    pub depth: usize,
    pub values: Vec<f64>,
    pub boundary_hits: usize,
}

impl LoynesSample {
    pub fn boundary_rate(&self) -> f64 {
        self.boundary_hits as f64 / self.values.len() as f64
    }
}

pub(crate) fn require_stable(model: &QueueModel) -> Result<()> {
    let mut failed = Vec::new();
    if model.service_mean_limsup() >= model.arrival.mean() {
        failed.push("subcritical".to_string());
    }
    if !model.service.is_stationary() {
        failed.push("stationary-service".to_string());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::AssumptionFailed(failed))
    }
}

/// Independent draws of the truncated Loynes variable.
pub fn loynes_stationary(model: &QueueModel, depth: usize, samples: usize, seed: u64) -> Result<LoynesSample> {
    require_stable(model)?;
    if depth == 0 {
        return invalid("depth must be at least 1");
    }
    let draws = (0..samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut env = derive_stream(seed, stream_id(r, Purpose::Environment));
            let mut arr = derive_stream(seed, stream_id(r, Purpose::Arrivals));
            let prefix = gen_environment_values(&model.service, -(depth as i64), depth - 1, &mut env)?;
            Ok(loynes_from_prefix(&prefix, &model.arrival, &mut arr))
        })
        .collect::<Result<Vec<_>>>()?;
    let boundary_hits = draws.iter().filter(|d| d.1).count();
    Ok(LoynesSample { depth, values: draws.into_iter().map(|d| d.0).collect(), boundary_hits })
}

#[derive(Clone, Debug, Serialize)]
pub struct BorovkovRow {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of P(min_{0<k<n} X_k > max(W_1, W₀′ + ξ_0)) with X_k = Σ_{i=1..k} ξ_i,
/// one joint path per replica (empty minimum = ∞).
pub fn borovkov_rate(model: &QueueModel, ns: &[usize], replicas: usize, depth: usize, seed: u64) -> Result<Vec<BorovkovRow>> {
    require_stable(model)?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    if n_max == 0 || depth == 0 || replicas == 0 {
        return invalid("need n ≥ 1, depth ≥ 1 and at least one replica");
    }
    // First k ≥ 1 with X_k ≤ threshold, or n_max when none below n_max.
    let first_fail: Vec<usize> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut env = derive_stream(seed, stream_id(r, Purpose::Environment));
            let mut arr = derive_stream(seed, stream_id(r, Purpose::Arrivals));
            let s = gen_environment_values(&model.service, -(depth as i64), depth + n_max - 1, &mut env)?;
            let (w0, _) = loynes_from_prefix(&s[..depth], &model.arrival, &mut arr);
            let fwd = &s[depth..];
            let mut xi = |k: usize| fwd[k] - model.arrival.quantile(arr.uniform());
            let xi0 = xi(0);
            let threshold = xi0.max(0.0).max(w0 + xi0);
            let mut x = 0.0;
            for k in 1..n_max {
                x += xi(k);
                if x <= threshold {
                    return Ok(k);
                }
            }
            Ok(n_max)
        })
        .collect::<Result<_>>()?;
    Ok(ns
        .iter()
        .map(|&n| {
            let hits: Vec<f64> = first_fail.iter().map(|k| (*k >= n) as u8 as f64).collect();
            let p = hits.iter().sum::<f64>() / replicas as f64;
            BorovkovRow { n, estimate: p, stderr: std_error(&hits) }
        })
        .collect())
}

/// Split sampler for the queue: κ = δ_0, V(w) = e^{t̄w} − 1, small set {V ≤ 2/r} and
/// 1 − β̄ = P(Z ≥ M + w_R)/2 from the assumption report.
pub fn queue_sampler(model: &QueueModel, report: &QueueAssumptionReport) -> Result<SplitSampler<QueueKernel, PointMass>> {
    let missing = || Error::AssumptionFailed(report.failures());
    let (t, gamma_bar) = report.t_bar.zip(report.gamma_bar).ok_or_else(missing)?;
    let r = report.r.ok_or_else(missing)?;
    let mass = report.regen_mass.filter(|m| *m > 0.0).ok_or_else(missing)?;
    let drift = queue_drift_coeffs(&model.arrival, t)?;
    let level = LevelRule::drift(r, gamma_bar)?;
    Ok(SplitSampler::with_regen_mass(model.kernel(), PointMass(0.0), drift, level, mass)?
        .with_residual(ResidualMethod::LowerEdgeAtom))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingExperimentOptions {
    pub horizon: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Loynes truncation depth for the stationary chain.
    pub depth: usize,
    pub record_times: Vec<usize>,
    pub fit_lo: usize,
    pub fit_hi: usize,
    /// Dominance is checked on (fit_hi, dominance_hi].
    pub dominance_hi: usize,
    pub dominance_factor: f64,
    pub bins: usize,
    pub assumptions: AssumptionOptions,
}

impl Default for CouplingExperimentOptions {
    fn default() -> Self {
        CouplingExperimentOptions {
            horizon: 100,
            replicas: 100_000,
            seed: 0,
            depth: 1000,
            record_times: vec![10, 25, 50],
            fit_lo: 1,
            fit_hi: 50,
            dominance_hi: 100,
            dominance_factor: 3.0,
            bins: 40,
            assumptions: AssumptionOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingExperiment {
    pub report: QueueAssumptionReport,
    pub tail: TailCurve,
    pub coupling: CouplingReport,
    /// Whether the √n fit dominates the tail beyond the fit range within the factor.
    pub dominated: Option<bool>,
    pub tv: TvReport,
    pub loynes_boundary_rate: f64,
}

/// Pooled 99th percentile of both samples, the common upper edge for TV histograms.
fn common_edge(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let q = all[((all.len() - 1) as f64 * 0.99) as usize];
    if q > 0.0 {
        q
    } else {
        1.0
    }
}

/// Couples W from 0 with a chain started at a Loynes draw on the same environment.
pub fn queue_coupling_experiment(model: &QueueModel, opts: &CouplingExperimentOptions) -> Result<CouplingExperiment> {
    let report = assumption_report(model, &opts.assumptions)?;
    if !report.all_green() {
        return Err(Error::AssumptionFailed(report.failures()));
    }
    require_stable(model)?;
    let sampler = queue_sampler(model, &report)?;
    let hits = AtomicUsize::new(0);
    let arrival = model.arrival.clone();
    let init = |path: &EnvPath, rng: &mut StreamRng| {
        let (w, hit) = loynes_from_prefix(path.prefix(), &arrival, rng);
        if hit {
            hits.fetch_add(1, Ordering::Relaxed);
        }
        w
    };
    let copts = CouplingOptions {
        horizon: opts.horizon,
        replicas: opts.replicas,
        master_seed: opts.seed,
        prefix: opts.depth,
        record_times: opts.record_times.clone(),
        keep_paths: 0,
    };
    let set = couple_chains(&sampler, &Start::Fixed(0.0), &Start::Sampled(&init), &model.service, &copts)?;
    let tail = set.tail();
    let coupling = CouplingReport::new(&tail, opts.fit_lo, opts.fit_hi);
    let dominated = coupling
        .fit_sqrt
        .as_ref()
        .map(|f| tail.dominated(f, opts.fit_hi, opts.dominance_hi, opts.dominance_factor));
    let mut pairs = Vec::new();
    for (i, &n) in opts.record_times.iter().enumerate() {
        let (a, b) = set.states_at(i);
        let bin = Binning::with_zero_atom(common_edge(&a, &b), opts.bins);
        pairs.push((n, Histogram::new(bin.clone(), &a), Histogram::new(bin, &b)));
    }
    let tv = tv_bound_report(&tail, &pairs)?;
    Ok(CouplingExperiment {
        report,
        tail,
        coupling,
        dominated,
        tv,
        loynes_boundary_rate: hits.load(Ordering::Relaxed) as f64 / opts.replicas as f64,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaSweepRow {
    pub beta_bar: f64,
    pub median_tau: Option<usize>,
    pub mean_tau: f64,
    pub mean_tau_se: f64,
    pub censored: usize,
}

/// Coupling times from fixed starts for several β̄ on the small set {w ≤ level}.
/// Each β̄ must respect the minorization 1 − β̄ ≤ P(Z ≥ M + level).
#[allow(clippy::too_many_arguments)]
pub fn beta_sweep(
    model: &QueueModel,
    t: f64,
    level: f64,
    betas: &[f64],
    starts: (f64, f64),
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<BetaSweepRow>> {
    let m = model.bound.ok_or_else(|| Error::InvalidSpec("β̄ sweep needs a service bound".into()))?;
    let atom = tail_ge(&model.arrival, m + level);
    let opts = CouplingOptions { horizon, replicas, master_seed: seed, prefix: 0, record_times: vec![], keep_paths: 0 };
    betas
        .iter()
        .map(|&beta| {
            if 1.0 - beta > atom {
                return invalid(format!("β̄ = {beta} needs 1 − β̄ ≤ P(Z ≥ M + level) = {atom}"));
            }
            let drift = queue_drift_coeffs(&model.arrival, t)?;
            let v_level = (t * level).exp_m1();
            let sampler = SplitSampler::new(model.kernel(), PointMass(0.0), drift, LevelRule::Fixed(v_level), beta)?
                .with_residual(ResidualMethod::LowerEdgeAtom);
            let set = couple_chains(&sampler, &Start::Fixed(starts.0), &Start::Fixed(starts.1), &model.service, &opts)?;
            let mut taus: Vec<usize> = set.taus().iter().map(|t| t.unwrap_or(usize::MAX)).collect();
            taus.sort_unstable();
            let censored = taus.iter().filter(|t| **t == usize::MAX).count();
            let median = taus[(taus.len() - 1) / 2];
            let capped: Vec<f64> = taus.iter().map(|t| (*t).min(horizon + 1) as f64).collect();
            Ok(BetaSweepRow {
                beta_bar: beta,
                median_tau: (median != usize::MAX).then_some(median),
                mean_tau: mean(&capped),
                mean_tau_se: std_error(&capped),
                censored,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::EnvironmentSpec;
    use crate::stats::{ks_one_sample_atoms, ks_two_sample};

    fn mm1(service_rate: f64, arrival_rate: f64) -> QueueModel {
        QueueModel::new(
            EnvironmentSpec::Iid { law: Law::Exponential { rate: service_rate } },
            None,
            Law::Exponential { rate: arrival_rate },
        )
        .unwrap()
    }

    #[test]
    fn zero_service_gives_zero() {
        let m = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 0.0 } }, Some(1.0), Law::Exponential { rate: 1.0 })
            .unwrap();
        let s = loynes_stationary(&m, 50, 200, 1).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn supercritical_rejected() {
        let m = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 2.0 } }, Some(2.0), Law::Exponential { rate: 1.0 })
            .unwrap();
        assert!(matches!(loynes_stationary(&m, 50, 10, 1), Err(Error::AssumptionFailed(f)) if f == ["subcritical"]));
    }

    #[test]
    fn mm1_stationary_law() {
        // λ = 0.5, μ = 1: P(W > w) = ρ e^{−(μ−λ)w}.
        let s = loynes_stationary(&mm1(1.0, 0.5), 500, 100_000, 11).unwrap();
        let cdf = |w: f64| if w < 0.0 { 0.0 } else { 1.0 - 0.5 * (-0.5 * w).exp() };
        let ks = ks_one_sample_atoms(&s.values, cdf, |w| if w <= 0.0 { 0.0 } else { cdf(w) });
        assert!(ks.p_value >= 0.01, "{ks:?}");
    }

    #[test]
    fn boundary_rate_falls_with_depth() {
        let m = mm1(1.0, 0.5);
        let rates: Vec<f64> = [1, 4, 16].iter().map(|d| loynes_stationary(&m, *d, 20_000, 5).unwrap().boundary_rate()).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
    }

    #[test]
    fn loynes_law_is_invariant() {
        let m = mm1(1.0, 0.5);
        let s = loynes_stationary(&m, 500, 40_000, 21).unwrap();
        let mut rng = derive_stream(22, 0);
        let service = Law::Exponential { rate: 1.0 };
        let pushed: Vec<f64> = s
            .values
            .iter()
            .map(|w| (w + service.quantile(rng.uniform()) - m.arrival.quantile(rng.uniform())).max(0.0))
            .collect();
        let fresh = loynes_stationary(&m, 500, 40_000, 23).unwrap();
        assert!(ks_two_sample(&pushed, &fresh.values).p_value >= 0.01);
    }

    #[test]
    fn borovkov_conventions() {
        let rows = borovkov_rate(&mm1(1.0, 0.5), &[1, 2, 10, 50], 20_000, 200, 3).unwrap();
        assert_eq!(rows[0].estimate, 1.0);
        assert!(rows.windows(2).all(|w| w[1].estimate <= w[0].estimate));
        let det = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 0.0 } }, Some(1.0), Law::Point { at: 1.0 }).unwrap();
        let rows = borovkov_rate(&det, &[1, 2, 5], 100, 10, 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.estimate).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
    }

    fn bounded() -> QueueModel {
        QueueModel::new(
            EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.6 } },
            Some(1.6),
            Law::Exponential { rate: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn equal_starts_and_red_reports() {
        let m = bounded();
        let rep = assumption_report(&m, &AssumptionOptions::default()).unwrap();
        let s = queue_sampler(&m, &rep).unwrap();
        let opts = CouplingOptions { horizon: 10, replicas: 20, master_seed: 1, prefix: 0, record_times: vec![], keep_paths: 0 };
        let set = couple_chains(&s, &Start::Fixed(0.0), &Start::Fixed(0.0), &m.service, &opts).unwrap();
        assert!(set.taus().iter().all(|t| *t == Some(0)));
        let hot = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 2.0 } }, Some(2.0), Law::Exponential { rate: 1.0 })
            .unwrap();
        let opts = CouplingExperimentOptions { replicas: 10, ..Default::default() };
        assert!(matches!(queue_coupling_experiment(&hot, &opts), Err(Error::AssumptionFailed(_))));
    }

    #[test]
    fn small_coupling_experiment() {
        let opts = CouplingExperimentOptions { replicas: 4000, depth: 300, ..Default::default() };
        let e = queue_coupling_experiment(&bounded(), &opts).unwrap();
        assert!(e.tail.p.windows(2).all(|w| w[1] <= w[0]));
        assert!(e.tail.p[100] < 0.05, "{}", e.tail.p[100]);
        assert!(e.tv.all_within());
    }

    #[test]
    fn regeneration_zone_sweep() {
        let m = bounded();
        let rows = beta_sweep(&m, 0.2, 1.0, &[0.95, 0.99, 0.999], (0.0, 6.0), 400, 4000, 8).unwrap();
        // Shared arrival draws couple the chains at the empty-queue state whatever β̄ is,
        // so τ barely moves across the grid.
        for w in rows.windows(2) {
            assert!((w[1].mean_tau - w[0].mean_tau).abs() <= 3.0 * (w[0].mean_tau_se + w[1].mean_tau_se), "{rows:?}");
        }
        assert!(beta_sweep(&m, 0.2, 1.0, &[0.5], (0.0, 6.0), 10, 10, 8).is_err());
    }
}
