use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::finite::HiddenChain;
use crate::mcre::RateMethod;
use crate::process::{gen_environment_values, EnvironmentSpec};
use crate::rng::{derive_stream, stream_id, Purpose};
use crate::stats::variance;

use super::{tail_ge, QueueModel};

#[derive(Clone, Debug, Serialize)]
pub struct LambdaEstimate {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: RateMethod,
}

/// max_{j ≤ j_max} (1/n) log E exp(t Σ_{k=0..n} (S_{k+j} − Z_{k+j+1})) where the
/// service law allows exact evaluation (finite alphabet or i.i.d.).
pub fn lambda_exact(model: &QueueModel, t: f64, n: usize, j_max: usize) -> Result<Option<f64>> {
    let lz = model.arrival.mgf(-t).unwrap().ln();
    let terms = (n + 1) as f64;
    if model.service.is_finite() {
        let chain = HiddenChain::from_spec(&model.service)?;
        let w: Vec<f64> = chain.alphabet.iter().map(|s| (t * s).exp()).collect();
        let mut best = f64::NEG_INFINITY;
        for j in 0..=j_max as i64 {
            let idx: Vec<i64> = (j..=j + n as i64).collect();
            let ls = chain.log_expect_product(&idx, &vec![w.clone(); idx.len()])?;
            best = best.max((ls + terms * lz) / n as f64);
        }
        return Ok(Some(best));
    }
    if let EnvironmentSpec::Iid { law } = &model.service {
        return Ok(Some(terms * (law.mgf(t).unwrap().ln() + lz) / n as f64));
    }
    Ok(None)
}

/// Monte Carlo version with a log-sum-exp mean and an SE from 10 replica batches.
pub fn lambda_mc(model: &QueueModel, t: f64, n: usize, j_max: usize, replicas: usize, seed: u64) -> Result<LambdaEstimate> {
    const BATCHES: usize = 10;
    if replicas < BATCHES {
        return invalid(format!("need at least {BATCHES} replicas"));
    }
    let len = j_max + n + 1;
    let sums: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut env = derive_stream(seed, stream_id(r, Purpose::Environment));
            let mut arr = derive_stream(seed, stream_id(r, Purpose::Arrivals));
            let s = gen_environment_values(&model.service, 0, len, &mut env)?;
            let xi: Vec<f64> = s.iter().map(|sk| sk - model.arrival.quantile(arr.uniform())).collect();
            Ok((0..=j_max).map(|j| t * xi[j..=j + n].iter().sum::<f64>()).collect())
        })
        .collect::<Result<_>>()?;
    let estimate = |rows: &[Vec<f64>]| -> f64 {
        (0..=j_max)
            .map(|j| {
                let m = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = rows.iter().map(|r| (r[j] - m).exp()).sum();
                (m + (s / rows.len() as f64).ln()) / n as f64
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let size = replicas / BATCHES;
    let batch: Vec<f64> = (0..BATCHES).map(|b| estimate(&sums[b * size..(b + 1) * size])).collect();
    Ok(LambdaEstimate {
        t,
        value: estimate(&sums),
        stderr: (variance(&batch) / BATCHES as f64).sqrt(),
        n,
        method: RateMethod::MonteCarlo,
    })
}

/// Exact evaluation when available, otherwise Monte Carlo.
pub fn lambda_rate(model: &QueueModel, t: f64, n: usize, j_max: usize, replicas: usize, seed: u64) -> Result<LambdaEstimate> {
    if !(t > 0.0) || n == 0 {
        return invalid("lambda needs t > 0 and n ≥ 1");
    }
    match lambda_exact(model, t, n, j_max)? {
        Some(value) => Ok(LambdaEstimate { t, value, stderr: 0.0, n, method: RateMethod::Exact }),
        None => lambda_mc(model, t, n, j_max, replicas, seed),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionOptions {
    /// Horizon of the exact rate, standing in for the limsup.
    pub n_exact: usize,
    pub n_mc: usize,
    pub j_max: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Level parameter of R = 2/r; default (1/γ̄ − 1)/2.
    pub r: Option<f64>,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions { n_exact: 400, n_mc: 10, j_max: 5, replicas: 20_000, seed: 0, r: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QueueAssumptionReport {
    pub service_mean: f64,
    pub arrival_mean: f64,
    pub subcritical_margin: f64,
    pub subcritical: bool,
    pub bound: Option<f64>,
    pub bounded: bool,
    pub arrival_second_moment: f64,
    pub second_moment_finite: bool,
    pub stationary_service: bool,
    pub lambda_grid: Vec<LambdaEstimate>,
    pub t_bar: Option<f64>,
    pub lambda_negative: bool,
    pub gamma_bar: Option<f64>,
    pub r: Option<f64>,
    /// w_R = log(1 + 2/r)/t̄, the waiting-time edge of the small set {V ≤ 2/r}.
    pub small_set_edge: Option<f64>,
    /// P(Z ≥ M + w_R).
    pub small_set_tail: Option<f64>,
    /// τ = M + 4/(γ̄^{-1/2} − 1) and P(Z ≥ τ).
    pub tau: Option<f64>,
    pub tau_tail: Option<f64>,
    pub minorization: bool,
    /// β̄ = (1 + P(Z < M + w_R))/2 and its complement 1 − β̄.
    pub beta_bar: Option<f64>,
    pub regen_mass: Option<f64>,
}

impl QueueAssumptionReport {
    pub fn failures(&self) -> Vec<String> {
        let flags = [
            (self.subcritical, "subcritical"),
            (self.bounded, "bounded-service"),
            (self.second_moment_finite, "arrival-second-moment"),
            (self.lambda_negative, "lambda-negative"),
            (self.minorization, "minorization"),
            (self.small_set_tail.is_some_and(|p| p > 0.0), "small-set-tail"),
        ];
        flags.iter().filter(|(ok, _)| !ok).map(|(_, name)| name.to_string()).collect()
    }

    pub fn all_green(&self) -> bool {
        self.failures().is_empty()
    }
}

pub fn assumption_report(model: &QueueModel, opts: &AssumptionOptions) -> Result<QueueAssumptionReport> {
    model.validate()?;
    let service_mean = model.service_mean_limsup();
    let arrival_mean = model.arrival.mean();
    let arrival_second_moment = model.arrival.second_moment();
    let (_, hi) = model.service.value_range();
    let bounded = model.bound.is_some_and(|m| hi <= m);
    let m = model.bound.unwrap_or(hi);
    let mut lambda_grid = Vec::with_capacity(model.t_grid.len());
    for &t in &model.t_grid {
        let exact = lambda_exact(model, t, opts.n_exact, opts.j_max)?;
        lambda_grid.push(match exact {
            Some(value) => LambdaEstimate { t, value, stderr: 0.0, n: opts.n_exact, method: RateMethod::Exact },
            None => lambda_mc(model, t, opts.n_mc, opts.j_max, opts.replicas, opts.seed)?,
        });
    }
    let chosen = lambda_grid.iter().find(|l| l.value + 2.0 * l.stderr < 0.0);
    let t_bar = chosen.map(|l| l.t);
    let gamma_bar = chosen.map(|l| l.value.exp());
    let r = gamma_bar.map(|g| opts.r.unwrap_or((1.0 / g - 1.0) / 2.0));
    let small_set_edge = t_bar.zip(r).map(|(t, r)| (2.0 / r).ln_1p() / t);
    let small_set_tail = small_set_edge.map(|w| tail_ge(&model.arrival, m + w));
    let tau = gamma_bar.map(|g| m + 4.0 / (g.powf(-0.5) - 1.0));
    let tau_tail = tau.map(|tau| tail_ge(&model.arrival, tau));
    let regen_mass = small_set_tail.map(|p| p / 2.0);
    Ok(QueueAssumptionReport {
        service_mean,
        arrival_mean,
        subcritical_margin: arrival_mean - service_mean,
        subcritical: service_mean < arrival_mean,
        bound: model.bound,
        bounded,
        arrival_second_moment,
        second_moment_finite: arrival_second_moment.is_finite(),
        stationary_service: model.service.is_stationary(),
        lambda_grid,
        t_bar,
        lambda_negative: t_bar.is_some(),
        gamma_bar,
        r,
        small_set_edge,
        small_set_tail,
        tau,
        tau_tail,
        // Underflow aside, P(Z ≥ τ) > 0 whenever τ lies below the top of the support.
        minorization: tau.zip(tau_tail).is_some_and(|(tau, p)| p > 0.0 || model.arrival.support().1 > tau),
        beta_bar: regen_mass.map(|e| 1.0 - e),
        regen_mass,
    })
}
