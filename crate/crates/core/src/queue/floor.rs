use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::HiddenChain;
use crate::law::Law;
use crate::process::EnvironmentSpec;
use crate::stats::{integrate, integrate_to_inf, variance, variance_se};

use super::{simulate_queue, QueueModel};

/// r* = sup_z f(z)²/P(Z > z) + ∫ f'(z)²/f(z) dz, closed form for exponential arrivals.
pub fn fisher_radius(law: &Law) -> Result<f64> {
    match law {
        Law::Exponential { rate } => Ok(2.0 * rate * rate),
        _ => fisher_radius_numeric(law),
    }
}

/// Grid search refined by golden section for the sup term; the integral is taken
/// from two inner cut-offs and rejected as divergent when they disagree.
pub fn fisher_radius_numeric(law: &Law) -> Result<f64> {
    let (lo, hi) = law.support();
    if law.density(lo + 1.0).is_none() {
        return Err(Error::Unavailable("arrival law has no density".into()));
    }
    if law.density_derivative(lo + 1e-3).is_none() {
        return Err(Error::Unavailable("arrival density derivative not available".into()));
    }
    let ratio = |z: f64| {
        let s = law.sf(z);
        if s <= 0.0 {
            f64::INFINITY
        } else {
            law.density(z).unwrap().powi(2) / s
        }
    };
    let top = if hi.is_finite() { hi } else { law.upper_quantile(1e-12) };
    const GRID: usize = 4000;
    let step = (top - lo) / GRID as f64;
    let (mut best_i, mut best) = (0, ratio(lo));
    for i in 1..=GRID {
        let v = ratio(lo + i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if !best.is_finite() || best_i >= GRID - 1 && hi.is_finite() {
        return Err(Error::Divergent("f²/P(Z > z) unbounded near the upper edge".into()));
    }
    let (mut a, mut b) = (lo + best_i.saturating_sub(1) as f64 * step, lo + (best_i + 1) as f64 * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if ratio(c) >= ratio(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let sup = best.max(ratio(0.5 * (a + b)));

    let integrand = |z: f64| {
        let f = law.density(z).unwrap();
        if f <= 0.0 {
            0.0
        } else {
            law.density_derivative(z).unwrap().powi(2) / f
        }
    };
    let tail = |from: f64| {
        if hi.is_finite() {
            integrate(integrand, from, hi, 1e-12).0
        } else {
            integrate_to_inf(integrand, from, 1e-12).0
        }
    };
    let (coarse, fine) = (tail(lo + 1e-7), tail(lo + 1e-10));
    if !fine.is_finite() || (fine - coarse).abs() > 1e-6 * fine.abs().max(1.0) {
        return Err(Error::Divergent(format!("∫ f'²/f does not settle ({coarse} vs {fine})")));
    }
    Ok(sup + fine)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceFloorRow {
    pub n: usize,
    /// min over k < n of P(S_k > Z_1).
    pub p_min: f64,
    pub r_star: f64,
    pub floor: f64,
    /// Var(W_1 + ... + W_n) over replicas.
    pub variance: f64,
    pub variance_se: f64,
    /// variance ≥ floor − 4·SE.
    pub ok: bool,
}

/// P(S_k > Z_1) = E F_Z(S_k−) for k in 0..n, exact where the service law is computable.
fn exceed_probs(model: &QueueModel, n: usize, service_paths: &[Vec<f64>]) -> Result<Vec<f64>> {
    let z = &model.arrival;
    let stationary = model.service.is_stationary();
    let count = if stationary { 1 } else { n };
    if model.service.is_finite() {
        let chain = HiddenChain::from_spec(&model.service)?;
        return (0..count as i64)
            .map(|k| {
                let law = chain.symbol_law(k)?;
                Ok(law.iter().zip(&chain.alphabet).map(|(p, s)| p * z.cdf_left(*s)).sum())
            })
            .collect();
    }
    if let EnvironmentSpec::Iid { law } = &model.service {
        let (lo, hi) = law.support();
        let p = match law.atoms() {
            Some((v, p)) => v.iter().zip(&p).map(|(v, p)| p * z.cdf_left(*v)).sum(),
            None => integrate(|s| law.density(s).unwrap_or(0.0) * z.cdf_left(s), lo, hi, 1e-12).0,
        };
        return Ok(vec![p]);
    }
    let reps = service_paths.len() as f64;
    Ok((0..n).map(|k| service_paths.iter().map(|s| z.cdf_left(s[k])).sum::<f64>() / reps).collect())
}

/// Compares the Cramér–Rao floor n·min_k P(S_k > Z_1)/r* with Var(Σ_{k≤n} W_k).
pub fn variance_floor(model: &QueueModel, ns: &[usize], replicas: usize, seed: u64) -> Result<Vec<VarianceFloorRow>> {
    let r_star = fisher_radius(&model.arrival)?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    if n_max == 0 || replicas < 2 {
        return crate::error::invalid("need n ≥ 1 and at least two replicas");
    }
    let paths = (0..replicas as u64)
        .into_par_iter()
        .map(|r| simulate_queue(model, n_max, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let services: Vec<Vec<f64>> = paths.iter().map(|p| p.s.clone()).collect();
    let probs = exceed_probs(model, n_max, &services)?;
    ns.iter()
        .map(|&n| {
            let sums: Vec<f64> = paths.iter().map(|p| p.w[1..=n].iter().sum()).collect();
            let p_min = probs.iter().take(n).copied().fold(f64::INFINITY, f64::min);
            let floor = n as f64 * p_min / r_star;
            let (v, se) = (variance(&sums), variance_se(&sums));
            Ok(VarianceFloorRow { n, p_min, r_star, floor, variance: v, variance_se: se, ok: v >= floor - 4.0 * se })
        })
        .collect()
}
