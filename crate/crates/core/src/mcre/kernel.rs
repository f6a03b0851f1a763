use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::finite::HiddenChain;
use crate::law::Law;
use crate::process::{gen_environment_values, EnvironmentSpec};
use crate::rng::{derive_stream, stream_id, Purpose};
use crate::stats::{integrate, integrate_to_inf};

/// A scalar kernel Q(y, x, ·) on the real line.
pub trait ScalarKernel: Sync + Send {
    /// Q(y, x, (-∞, z]).
    fn cdf(&self, y: f64, x: f64, z: f64) -> f64;

    /// Generalized inverse of [`ScalarKernel::cdf`].
    fn quantile(&self, y: f64, x: f64, u: f64) -> f64;

    /// Q^{-1}(1 - tail); override when 1 - tail loses precision.
    fn upper_quantile(&self, y: f64, x: f64, tail: f64) -> f64 {
        self.quantile(y, x, 1.0 - tail)
    }

    /// Density with respect to the kernel's reference measure, if known.
    fn density(&self, _y: f64, _x: f64, _z: f64) -> Option<f64> {
        None
    }
}

/// x' = a·x + ξ with ξ drawn from `noise` by inversion.
#[derive(Clone, Debug)]
pub struct AffineKernel {
    pub a: f64,
    pub noise: Law,
}

impl ScalarKernel for AffineKernel {
    fn cdf(&self, _y: f64, x: f64, z: f64) -> f64 {
        self.noise.cdf(z - self.a * x)
    }

    fn quantile(&self, _y: f64, x: f64, u: f64) -> f64 {
        self.a * x + self.noise.quantile(u)
    }

    fn density(&self, _y: f64, x: f64, z: f64) -> Option<f64> {
        self.noise.density(z - self.a * x)
    }
}

/// Q(y, x, ·) = δ_x.
#[derive(Clone, Copy, Debug)]
pub struct IdentityKernel;

impl ScalarKernel for IdentityKernel {
    fn cdf(&self, _y: f64, x: f64, z: f64) -> f64 {
        (z >= x) as u8 as f64
    }

    fn quantile(&self, _y: f64, x: f64, _u: f64) -> f64 {
        x
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Lyapunov data of the drift condition [Q(y)V](x) ≤ γ(y)V(x) + K(y).
#[derive(Clone)]
pub struct DriftData {
    pub v: ScalarFn,
    pub gamma: ScalarFn,
    pub k: ScalarFn,
}

impl DriftData {
    pub fn new(
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gamma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        k: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        DriftData { v: Arc::new(v), gamma: Arc::new(gamma), k: Arc::new(k) }
    }

    pub fn bound(&self, y: f64, x: f64) -> f64 {
        (self.gamma)(y) * (self.v)(x) + (self.k)(y)
    }

    /// Same data with K replaced by max(K, 1).
    pub fn with_k_floor(&self) -> Self {
        let k = self.k.clone();
        DriftData { v: self.v.clone(), gamma: self.gamma.clone(), k: Arc::new(move |y| k(y).max(1.0)) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftRow {
    pub y: f64,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub rows: Vec<DriftRow>,
    pub replicas: usize,
    /// Whether K ≥ 1 held at every grid point.
    pub k_at_least_one: bool,
}

impl DriftReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,x,estimate,stderr,bound,violated\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.y, r.x, r.estimate, r.stderr, r.bound, r.violated as u8);
        }
        out
    }
}

/// Monte Carlo check of the drift inequality on a grid, flagging estimates
/// above the bound by more than 4 standard errors.
pub fn drift_verify(
    kernel: &dyn ScalarKernel,
    drift: &DriftData,
    y_grid: &[f64],
    x_grid: &[f64],
    replicas: usize,
    master_seed: u64,
) -> DriftReport {
    let cells: Vec<(f64, f64)> = y_grid.iter().flat_map(|y| x_grid.iter().map(move |x| (*y, *x))).collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(y, x))| {
            let mut rng = derive_stream(master_seed, stream_id(i as u64, Purpose::Aux));
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..replicas {
                let v = (drift.v)(kernel.quantile(y, x, rng.uniform()));
                s += v;
                s2 += v * v;
            }
            let n = replicas as f64;
            let estimate = s / n;
            let stderr = ((s2 / n - estimate * estimate).max(0.0) / (n - 1.0).max(1.0)).sqrt();
            let bound = drift.bound(y, x);
            DriftRow { y, x, estimate, stderr, bound, violated: estimate > bound + 4.0 * stderr }
        })
        .collect();
    let k_at_least_one = y_grid.iter().all(|y| (drift.k)(*y) >= 1.0);
    DriftReport { rows, replicas, k_at_least_one }
}

/// V0·∏γ_r + Σ_r K_r ∏_{j>r} γ_j.
pub fn iterated_drift_bound(gamma_path: &[f64], k_path: &[f64], v0: f64) -> Result<f64> {
    if gamma_path.len() != k_path.len() {
        return invalid(format!("gamma path has {} entries, K path {}", gamma_path.len(), k_path.len()));
    }
    // Horner form: B_{r+1} = γ_r B_r + K_r with B_0 = V0.
    Ok(gamma_path.iter().zip(k_path).fold(v0, |b, (g, k)| g * b + k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    Exact,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractivityReport {
    /// j = -1, 0, ..., j_max; j = -1 uses K(Y_{-1}) := 1.
    pub js: Vec<i64>,
    /// estimates[j][n-1] = E^{1/n}[K(Y_j) ∏_{k=1..n} γ(Y_{k+j})].
    pub estimates: Vec<Vec<f64>>,
    pub sup_per_n: Vec<f64>,
    /// sup at n_max minus sup at ⌈n_max/2⌉.
    pub trend: f64,
    pub method: RateMethod,
}

impl ContractivityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,n,estimate\n");
        for (j, row) in self.js.iter().zip(&self.estimates) {
            for (n, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{j},{},{v}", n + 1);
            }
        }
        out
    }
}

/// Long-term contractivity rates for a drift specification along an environment.
pub fn contractivity_rate(
    spec: &EnvironmentSpec,
    drift: &DriftData,
    n_max: usize,
    j_max: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<ContractivityReport> {
    if n_max == 0 {
        return invalid("n_max must be positive");
    }
    spec.validate()?;
    let js: Vec<i64> = (-1..=j_max as i64).collect();
    let (log_means, method) = if spec.is_finite() {
        (exact_log_means(spec, drift, n_max, &js)?, RateMethod::Exact)
    } else if let EnvironmentSpec::Iid { law } = spec {
        (iid_log_means(law, drift, n_max, &js)?, RateMethod::Quadrature)
    } else {
        (mc_log_means(spec, drift, n_max, &js, replicas, master_seed)?, RateMethod::MonteCarlo)
    };
    let estimates: Vec<Vec<f64>> =
        log_means.iter().map(|row| row.iter().enumerate().map(|(i, l)| (l / (i + 1) as f64).exp()).collect()).collect();
    let sup_per_n: Vec<f64> = (0..n_max).map(|i| estimates.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let trend = sup_per_n[n_max - 1] - sup_per_n[n_max.div_ceil(2) - 1];
    Ok(ContractivityReport { js, estimates, sup_per_n, trend, method })
}

fn exact_log_means(spec: &EnvironmentSpec, drift: &DriftData, n_max: usize, js: &[i64]) -> Result<Vec<Vec<f64>>> {
    let chain = HiddenChain::from_spec(spec)?;
    let g: Vec<f64> = chain.alphabet.iter().map(|y| (drift.gamma)(*y)).collect();
    let k: Vec<f64> = chain.alphabet.iter().map(|y| (drift.k)(*y)).collect();
    js.par_iter()
        .map(|&j| {
            (1..=n_max)
                .map(|n| {
                    let mut idx = Vec::with_capacity(n + 1);
                    let mut w = Vec::with_capacity(n + 1);
                    if j >= 0 {
                        idx.push(j);
                        w.push(k.clone());
                    }
                    for kk in 1..=n as i64 {
                        idx.push(kk + j);
                        w.push(g.clone());
                    }
                    chain.log_expect_product(&idx, &w)
                })
                .collect()
        })
        .collect()
}

fn law_expectation(law: &Law, f: &dyn Fn(f64) -> f64) -> f64 {
    if let Some((vals, probs)) = law.atoms() {
        return vals.iter().zip(&probs).map(|(v, p)| p * f(*v)).sum();
    }
    let (lo, hi) = law.support();
    let g = |x: f64| f(x) * law.density(x).unwrap_or(0.0);
    if hi.is_finite() {
        integrate(g, lo, hi, 1e-12).0
    } else {
        integrate_to_inf(g, lo, 1e-12).0
    }
}

fn iid_log_means(law: &Law, drift: &DriftData, n_max: usize, js: &[i64]) -> Result<Vec<Vec<f64>>> {
    let eg = law_expectation(law, &|y| (drift.gamma)(y));
    let ek = law_expectation(law, &|y| (drift.k)(y));
    Ok(js
        .iter()
        .map(|&j| (1..=n_max).map(|n| n as f64 * eg.ln() + if j >= 0 { ek.ln() } else { 0.0 }).collect())
        .collect())
}

fn mc_log_means(
    spec: &EnvironmentSpec,
    drift: &DriftData,
    n_max: usize,
    js: &[i64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let jmax = *js.last().unwrap();
    // Per replica, the log products for every (j, n).
    let per_rep: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(master_seed, stream_id(r, Purpose::Environment));
            let y = gen_environment_values(spec, -1, (jmax + 1) as usize + n_max, &mut rng)?;
            let at = |t: i64| y[(t + 1) as usize];
            let mut out = Vec::with_capacity(js.len() * n_max);
            for &j in js {
                let mut lp = if j >= 0 { (drift.k)(at(j)).ln() } else { 0.0 };
                for n in 1..=n_max as i64 {
                    lp += (drift.gamma)(at(n + j)).ln();
                    out.push(lp);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let cells = js.len() * n_max;
    let mut result = vec![vec![0.0; n_max]; js.len()];
    for c in 0..cells {
        let m = per_rep.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = per_rep.iter().map(|v| (v[c] - m).exp()).sum();
        result[c / n_max][c % n_max] = m + (s / replicas as f64).ln();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterated_bound_examples() {
        assert_eq!(iterated_drift_bound(&[], &[], 2.5).unwrap(), 2.5);
        assert_eq!(iterated_drift_bound(&[0.5; 3], &[1.0; 3], 0.0).unwrap(), 1.75);
        assert!(iterated_drift_bound(&[0.5; 3], &[1.0; 2], 0.0).is_err());
    }

    #[test]
    fn iterated_bound_matches_display_form() {
        let g = [0.3, 1.7, 0.9, 0.4];
        let k = [1.0, 2.0, 1.5, 1.1];
        let v0 = 3.0;
        let mut direct = v0 * g.iter().product::<f64>();
        for r in 0..g.len() {
            direct += k[r] * g[r + 1..].iter().product::<f64>();
        }
        assert!((iterated_drift_bound(&g, &k, v0).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_drift() {
        let drift = DriftData::new(|x: f64| x * x, |_| 1.0, |_| 1.0);
        let rep = drift_verify(&IdentityKernel, &drift, &[0.0], &[0.0, 1.0, 3.0], 100, 1);
        for r in &rep.rows {
            assert_eq!(r.estimate, r.x * r.x);
            assert!(!r.violated);
        }
    }

    #[test]
    fn affine_drift_against_quadrature() {
        let a = 0.6;
        let kernel = AffineKernel { a, noise: Law::Uniform { lo: 0.0, hi: 1.0 } };
        let drift = DriftData::new(|x: f64| x.abs(), move |_| a, |_| 1.0);
        let xs = [-3.0, -1.2, -0.5, 0.0, 2.0];
        let rep = drift_verify(&kernel, &drift, &[0.0], &xs, 20_000, 3);
        assert_eq!(rep.violations(), 0);
        for r in &rep.rows {
            let exact = integrate(|u| (a * r.x + u).abs(), 0.0, 1.0, 1e-12).0;
            assert!((r.estimate - exact).abs() < 4.0 * r.stderr, "{} vs {exact}", r.estimate);
        }
    }

    #[test]
    fn constant_coefficients_rate() {
        let spec = EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.0 } };
        let drift = DriftData::new(|x: f64| x, |_| 0.7, |_| 1.0);
        let rep = contractivity_rate(&spec, &drift, 6, 2, 10_000, 1).unwrap();
        assert!(rep.estimates.iter().flatten().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn felsmann_rate_is_exact() {
        let spec = EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } };
        let drift = DriftData::new(|x: f64| x, |y| if y == 0.0 { 3.0 } else { 0.0 }, |_| 1.0);
        let rep = contractivity_rate(&spec, &drift, 30, 0, 0, 0).unwrap();
        assert_eq!(rep.method, RateMethod::Exact);
        for n in 1..=30 {
            let exact = (0.5 * 1.5f64.powi(n as i32)).powf(1.0 / n as f64);
            assert!((rep.estimates[0][n - 1] / exact - 1.0).abs() < 1e-12);
        }
        assert!(rep.sup_per_n[29] > 1.4);
    }
}
