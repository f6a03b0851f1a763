use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::process::{gen_environment_values, EnvironmentSpec};
use crate::rng::{derive_stream, stream_id, Purpose, StreamRng};
use crate::stats::weighted_line_fit;

use super::kernel::ScalarKernel;
use super::split::{Regeneration, SplitSampler};

/// Environment values Y_start, Y_{start+1}, ...
#[derive(Clone, Debug)]
pub struct EnvPath {
    pub start: i64,
    pub values: Vec<f64>,
}

impl EnvPath {
    pub fn at(&self, t: i64) -> f64 {
        self.values[(t - self.start) as usize]
    }

    /// Values at negative indices, oldest first.
    pub fn prefix(&self) -> &[f64] {
        &self.values[..(-self.start).max(0) as usize]
    }
}

pub type InitSampler<'a> = dyn Fn(&EnvPath, &mut StreamRng) -> f64 + Sync + 'a;

/// Starting point of a chain.
pub enum Start<'a> {
    Fixed(f64),
    /// Drawn from the environment prefix and a dedicated stream.
    Sampled(&'a InitSampler<'a>),
}

#[derive(Clone, Debug)]
pub struct CouplingOptions {
    pub horizon: usize,
    pub replicas: usize,
    pub master_seed: u64,
    /// Number of environment values generated before index 0.
    pub prefix: usize,
    /// Times at which both states are stored.
    pub record_times: Vec<usize>,
    /// Full paths are kept for this many leading replicas.
    pub keep_paths: usize,
}

#[derive(Clone, Debug)]
pub struct CouplingRecord {
    /// First t with equal states; `None` if censored at the horizon.
    pub tau: Option<usize>,
    /// Visit times σ_k to the joint small set.
    pub visits: Vec<u32>,
    pub regenerations: u32,
    /// (Z¹_t, Z²_t) at each record time.
    pub states: Vec<(f64, f64)>,
    pub paths: Option<(Vec<f64>, Vec<f64>)>,
}

pub struct CouplingSet {
    pub records: Vec<CouplingRecord>,
    pub options: CouplingOptions,
}

/// Runs both chains with shared (u1, u2) per step for every replica.
pub fn couple_chains<K: ScalarKernel, R: Regeneration>(
    sampler: &SplitSampler<K, R>,
    x1: &Start,
    x2: &Start,
    env: &EnvironmentSpec,
    opts: &CouplingOptions,
) -> Result<CouplingSet> {
    if opts.replicas == 0 {
        return invalid("at least one replica required");
    }
    if opts.record_times.iter().any(|t| *t > opts.horizon) {
        return invalid("record time beyond horizon");
    }
    let records = (0..opts.replicas as u64)
        .into_par_iter()
        .map(|r| run_replica(sampler, x1, x2, env, opts, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingSet { records, options: opts.clone() })
}

fn run_replica<K: ScalarKernel, R: Regeneration>(
    sampler: &SplitSampler<K, R>,
    x1: &Start,
    x2: &Start,
    env: &EnvironmentSpec,
    opts: &CouplingOptions,
    replica: u64,
) -> Result<CouplingRecord> {
    let seed = opts.master_seed;
    let mut env_rng = derive_stream(seed, stream_id(replica, Purpose::Environment));
    let mut noise = derive_stream(seed, stream_id(replica, Purpose::Noise));
    let mut init_rng = derive_stream(seed, stream_id(replica, Purpose::Init));
    let start = -(opts.prefix as i64);
    let path = EnvPath { start, values: gen_environment_values(env, start, opts.prefix + opts.horizon, &mut env_rng)? };
    let mut draw = |s: &Start| match s {
        Start::Fixed(x) => *x,
        Start::Sampled(f) => f(&path, &mut init_rng),
    };
    let (mut a, mut b) = (draw(x1), draw(x2));
    let keep = (replica as usize) < opts.keep_paths;
    let mut paths = keep.then(|| (vec![a], vec![b]));
    let mut states = Vec::with_capacity(opts.record_times.len());
    let mut rec_iter = opts.record_times.iter().peekable();
    let mut tau = (a == b).then_some(0);
    let mut visits = Vec::new();
    let mut regenerations = 0;
    for t in 0..=opts.horizon {
        while rec_iter.peek() == Some(&&t) {
            states.push((a, b));
            rec_iter.next();
        }
        if t == opts.horizon || (tau.is_some() && rec_iter.peek().is_none() && !keep) {
            break;
        }
        let y = path.at(t as i64);
        let (u1, u2) = (noise.uniform(), noise.uniform());
        let joint = sampler.in_small_set(y, a) && sampler.in_small_set(y, b);
        if joint {
            visits.push(t as u32);
        }
        let (na, ra) = sampler.split_step(y, a, u1, u2);
        let (nb, rb) = sampler.split_step(y, b, u1, u2);
        if joint && sampler.regenerates(u1) && na != nb {
            return Err(Error::CouplingBroken(format!("replica {replica}: regeneration at t={t} gave {na} and {nb}")));
        }
        regenerations += (ra || rb) as u32;
        if tau.is_some() && na != nb {
            return Err(Error::CouplingBroken(format!("replica {replica}: chains separated after t={t}")));
        }
        a = na;
        b = nb;
        if tau.is_none() && a == b {
            tau = Some(t + 1);
        }
        if let Some((pa, pb)) = paths.as_mut() {
            pa.push(a);
            pb.push(b);
        }
    }
    Ok(CouplingRecord { tau, visits, regenerations, states, paths })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailFit {
    pub c1: f64,
    pub c2: f64,
    pub exponent: f64,
    pub rss: f64,
    pub points: usize,
}

impl TailFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.c1 * (-self.c2 * n.powf(self.exponent)).exp()
    }
}

/// Empirical P(τ > n) for n = 0..=horizon; censored replicas count as τ > horizon.
#[derive(Clone, Debug, Serialize)]
pub struct TailCurve {
    pub replicas: usize,
    pub exceed: Vec<usize>,
    pub p: Vec<f64>,
    pub stderr: Vec<f64>,
    pub censored: usize,
}

impl TailCurve {
    pub fn from_taus(taus: &[Option<usize>], horizon: usize) -> Self {
        let replicas = taus.len();
        let mut exceed = vec![0usize; horizon + 1];
        let mut censored = 0;
        for t in taus {
            let last = match t {
                Some(t) => (*t).min(horizon + 1),
                None => {
                    censored += 1;
                    horizon + 1
                }
            };
            // τ > n for n < τ.
            for e in exceed.iter_mut().take(last) {
                *e += 1;
            }
        }
        let nf = replicas as f64;
        let p: Vec<f64> = exceed.iter().map(|c| *c as f64 / nf).collect();
        let stderr = p.iter().map(|q| (q * (1.0 - q) / nf).sqrt()).collect();
        TailCurve { replicas, exceed, p, stderr, censored }
    }

    pub fn censoring_rate(&self) -> f64 {
        self.censored as f64 / self.replicas as f64
    }

    /// Weighted least squares fit of log p = log c1 − c2 n^exponent over n in
    /// [n_lo, n_hi], using points with at least 5 exceedances and weights N p/(1−p).
    pub fn fit(&self, n_lo: usize, n_hi: usize, exponent: f64) -> Option<TailFit> {
        let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
        for n in n_lo..=n_hi.min(self.p.len() - 1) {
            let p = self.p[n];
            if self.exceed[n] < 5 || p >= 1.0 {
                continue;
            }
            xs.push((n as f64).powf(exponent));
            ys.push(p.ln());
            ws.push(self.replicas as f64 * p / (1.0 - p));
        }
        let (a, b, rss) = weighted_line_fit(&xs, &ys, &ws)?;
        Some(TailFit { c1: a.exp(), c2: -b, exponent, rss, points: xs.len() })
    }

    /// Whether p(n) ≤ factor·fit(n) for every n in (n_lo, n_hi].
    pub fn dominated(&self, fit: &TailFit, n_lo: usize, n_hi: usize, factor: f64) -> bool {
        (n_lo + 1..=n_hi.min(self.p.len() - 1)).all(|n| self.p[n] <= factor * fit.eval(n as f64))
    }

    pub fn to_csv(&self, fit: Option<&TailFit>) -> String {
        let mut out = String::from("n,p_tau_gt_n,stderr,bound_fit\n");
        for (n, (p, se)) in self.p.iter().zip(&self.stderr).enumerate() {
            let b = fit.map(|f| f.eval(n as f64).to_string()).unwrap_or_default();
            let _ = writeln!(out, "{n},{p},{se},{b}");
        }
        out
    }
}

impl CouplingSet {
    pub fn taus(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.tau).collect()
    }

    pub fn tail(&self) -> TailCurve {
        TailCurve::from_taus(&self.taus(), self.options.horizon)
    }

    /// States of chain 1 and chain 2 at the `i`-th record time.
    pub fn states_at(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        self.records.iter().map(|r| r.states[i]).unzip()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub replicas: usize,
    pub horizon: usize,
    pub censoring_rate: f64,
    pub fit_sqrt: Option<TailFit>,
    pub fit_cuberoot: Option<TailFit>,
    /// Exponent whose fit has the smaller weighted residual.
    pub better_exponent: Option<f64>,
}

impl CouplingReport {
    pub fn new(tail: &TailCurve, fit_lo: usize, fit_hi: usize) -> Self {
        let fit_sqrt = tail.fit(fit_lo, fit_hi, 0.5);
        let fit_cuberoot = tail.fit(fit_lo, fit_hi, 1.0 / 3.0);
        let better_exponent = match (&fit_sqrt, &fit_cuberoot) {
            (Some(a), Some(b)) => Some(if a.rss <= b.rss { a.exponent } else { b.exponent }),
            _ => None,
        };
        CouplingReport {
            replicas: tail.replicas,
            horizon: tail.p.len() - 1,
            censoring_rate: tail.censoring_rate(),
            fit_sqrt,
            fit_cuberoot,
            better_exponent,
        }
    }
}
