//! Single-server FIFO queue W_{n+1} = (W_n + S_n − Z_{n+1})+ with a weakly
//! dependent service sequence S and i.i.d. inter-arrival times Z.

mod assumptions;
mod floor;
mod stationary;

pub use assumptions::{
    assumption_report, AssumptionOptions, lambda_exact, lambda_mc, lambda_rate, LambdaEstimate, QueueAssumptionReport};
pub use floor::{fisher_radius, fisher_radius_numeric, variance_floor, VarianceFloorRow};
pub use stationary::{
    beta_sweep, borovkov_rate, loynes_from_prefix, loynes_stationary, queue_coupling_experiment, queue_sampler,
    BetaSweepRow, BorovkovRow, CouplingExperiment, CouplingExperimentOptions, LoynesSample,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::finite::HiddenChain;
use crate::law::Law;
use crate::mcre::{DriftData, ScalarKernel};
use crate::process::{gen_environment_values, EnvironmentSpec};
use crate::rng::{derive_stream, stream_id, Purpose};
use crate::stats::{integrate, integrate_to_inf};

fn default_t_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueModel {
    pub service: EnvironmentSpec,
    /// Service bound M; `None` for unbounded service (simulation only).
    #[serde(default)]
    pub bound: Option<f64>,
    pub arrival: Law,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
}

impl QueueModel {
    pub fn new(service: EnvironmentSpec, bound: Option<f64>, arrival: Law) -> Result<Self> {
        let m = QueueModel { service, bound, arrival, t_grid: default_t_grid() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.service.validate()?;
        self.arrival.validate()?;
        let (lo, hi) = self.service.value_range();
        if lo < 0.0 {
            return invalid("service times must be nonnegative");
        }
        if let Some(m) = self.bound {
            if !(m > 0.0) || hi > m {
                return invalid(format!("service values reach {hi}, beyond the bound {m:?}"));
            }
        }
        if self.arrival.support().0 < 0.0 {
            return invalid("inter-arrival times must be nonnegative");
        }
        if !self.arrival.second_moment().is_finite() {
            return invalid("inter-arrival law needs a finite second moment");
        }
        if !self.arrival.is_finite() {
            let total = law_mass(&self.arrival);
            if (total - 1.0).abs() > 1e-9 {
                return invalid(format!("arrival density integrates to {total}"));
            }
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0)) {
            return invalid("t grid must be positive");
        }
        Ok(())
    }

    pub fn kernel(&self) -> QueueKernel {
        QueueKernel { arrival: self.arrival.clone() }
    }

    /// limsup of E S_n, exact where the service law is computable.
    pub fn service_mean_limsup(&self) -> f64 {
        match &self.service {
            EnvironmentSpec::Iid { law } => law.mean(),
            EnvironmentSpec::MovingSum { order, base } => (*order as f64 + 1.0) * base.mean(),
            EnvironmentSpec::Scripted { laws } => laws.last().map(|l| l.mean()).unwrap_or(0.0),
            EnvironmentSpec::FiniteMarkov { alphabet, transition, .. } => {
                // Mean over a full cycle of far-out laws covers periodic chains.
                let chain = HiddenChain::from_spec(&self.service).expect("validated");
                let k = transition.len() as i64;
                (10_000..10_000 + k)
                    .map(|i| chain.symbol_law(i).unwrap().iter().zip(alphabet).map(|(p, a)| p * a).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

fn law_mass(law: &Law) -> f64 {
    let (lo, hi) = law.support();
    let f = |x: f64| law.density(x).unwrap_or(0.0);
    if hi.is_finite() {
        integrate(f, lo, hi, 1e-12).0
    } else {
        integrate_to_inf(f, lo, 1e-12).0
    }
}

/// P(Z ≥ x).
pub fn tail_ge(law: &Law, x: f64) -> f64 {
    if law.is_finite() {
        1.0 - law.cdf_left(x)
    } else {
        law.sf(x)
    }
}

/// Q(s, w, ·) = law of (w + s − Z)+.
#[derive(Clone, Debug)]
pub struct QueueKernel {
    pub arrival: Law,
}

impl ScalarKernel for QueueKernel {
    fn cdf(&self, s: f64, w: f64, z: f64) -> f64 {
        if z < 0.0 {
            0.0
        } else {
            tail_ge(&self.arrival, w + s - z)
        }
    }

    fn quantile(&self, s: f64, w: f64, u: f64) -> f64 {
        (w + s - self.arrival.upper_quantile(u)).max(0.0)
    }

    fn upper_quantile(&self, s: f64, w: f64, tail: f64) -> f64 {
        (w + s - self.arrival.quantile(tail)).max(0.0)
    }

    fn density(&self, s: f64, w: f64, z: f64) -> Option<f64> {
        transition_density(&self.arrival, s, w, z).ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WaitPath {
    /// W_0..W_n with W_0 = 0.
    pub w: Vec<f64>,
    /// S_0..S_{n-1}.
    pub s: Vec<f64>,
    /// Z_1..Z_n.
    pub z: Vec<f64>,
    pub master_seed: u64,
    pub replica: u64,
}

/// Lindley recursion from W_0 = w0.
pub fn lindley(w0: f64, s: &[f64], z: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(s.len() + 1);
    w.push(w0);
    let mut cur = w0;
    for (sk, zk) in s.iter().zip(z) {
        cur = (cur + sk - zk).max(0.0);
        w.push(cur);
    }
    w
}

/// Waiting times W_0..W_n of one replica; arrivals by inversion.
pub fn simulate_queue(model: &QueueModel, n: usize, master_seed: u64, replica: u64) -> Result<WaitPath> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let mut env_rng = derive_stream(master_seed, stream_id(replica, Purpose::Environment));
    let mut arr_rng = derive_stream(master_seed, stream_id(replica, Purpose::Arrivals));
    let s = gen_environment_values(&model.service, 0, n - 1, &mut env_rng)?;
    let z: Vec<f64> = (0..n).map(|_| model.arrival.quantile(arr_rng.uniform())).collect();
    Ok(WaitPath { w: lindley(0.0, &s, &z), s, z, master_seed, replica })
}

/// γ(s) = K(s) = E e^{t(s − Z)} with V(w) = e^{tw} − 1.
pub fn queue_drift_coeffs(arrival: &Law, t: f64) -> Result<DriftData> {
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let m = arrival.mgf(-t).filter(|v| v.is_finite()).ok_or_else(|| Error::Divergent("E e^{-tZ}".into()))?;
    Ok(DriftData::new(move |w: f64| (t * w).exp_m1(), move |s| (t * s).exp() * m, move |s| (t * s).exp() * m))
}

/// E e^{-tZ} by quadrature, the oracle for the closed forms.
pub fn laplace_quadrature(arrival: &Law, t: f64) -> f64 {
    if let Some((v, p)) = arrival.atoms() {
        return v.iter().zip(&p).map(|(v, p)| p * (-t * v).exp()).sum();
    }
    let (lo, hi) = arrival.support();
    let f = |z: f64| (-t * z).exp() * arrival.density(z).unwrap_or(0.0);
    if hi.is_finite() {
        integrate(f, lo, hi, 1e-13).0
    } else {
        integrate_to_inf(f, lo, 1e-13).0
    }
}

/// Density of Q(s, w, ·) with respect to δ_0 + Lebesgue.
pub fn transition_density(arrival: &Law, s: f64, w: f64, z: f64) -> Result<f64> {
    if s < 0.0 || w < 0.0 || z < 0.0 {
        return Err(Error::OutOfRange(format!("negative input (s={s}, w={w}, z={z})")));
    }
    if z == 0.0 {
        return Ok(arrival.sf(w + s));
    }
    let x = w + s - z;
    if x < 0.0 {
        return Ok(0.0);
    }
    arrival.density(x).ok_or_else(|| Error::Unavailable("arrival law has no density".into()))
}

/// log p(w_1..w_n | s_0..s_{n-1}) given w_0.
pub fn log_likelihood(arrival: &Law, w: &[f64], s: &[f64]) -> Result<f64> {
    if w.len() != s.len() + 1 {
        return invalid("need one more waiting time than service times");
    }
    let mut total = 0.0;
    for k in 0..s.len() {
        total += transition_density(arrival, s[k], w[k], w[k + 1])?.ln();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(v: f64) -> EnvironmentSpec {
        EnvironmentSpec::Iid { law: Law::Point { at: v } }
    }

    #[test]
    fn deterministic_queues() {
        let m = QueueModel::new(point(1.0), Some(1.0), Law::Point { at: 1.0 }).unwrap();
        assert!(simulate_queue(&m, 50, 1, 0).unwrap().w.iter().all(|w| *w == 0.0));
        let m = QueueModel::new(point(2.0), Some(2.0), Law::Point { at: 1.0 }).unwrap();
        let p = simulate_queue(&m, 20, 1, 0).unwrap();
        assert!(p.w.iter().enumerate().all(|(k, w)| *w == k as f64));
    }

    #[test]
    fn lindley_replays_bit_for_bit() {
        let m = QueueModel::new(
            EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.0 } },
            Some(1.0),
            Law::Exponential { rate: 1.0 },
        )
        .unwrap();
        let p = simulate_queue(&m, 1000, 3, 7).unwrap();
        assert_eq!(lindley(0.0, &p.s, &p.z), p.w);
    }

    #[test]
    fn drift_coefficients() {
        let d = queue_drift_coeffs(&Law::Exponential { rate: 1.0 }, 0.5).unwrap();
        assert!(((d.gamma)(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(((d.gamma)(1.0) - 0.5f64.exp() * 2.0 / 3.0).abs() < 1e-15);
        assert!(((d.gamma)(1.0) - 1.0991).abs() < 1e-4);
        let d = queue_drift_coeffs(&Law::Point { at: 1.0 }, 1.0).unwrap();
        assert!(((d.gamma)(0.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn laplace_closed_forms_match_quadrature() {
        let laws = [
            Law::Exponential { rate: 1.3 },
            Law::Gamma { shape: 2.5, rate: 2.0 },
            Law::Uniform { lo: 0.5, hi: 2.0 },
            Law::TruncExponential { rate: 1.0, upper: 3.0 },
        ];
        for law in &laws {
            for t in [0.1, 0.5, 1.0] {
                let a = law.mgf(-t).unwrap();
                let b = laplace_quadrature(law, t);
                assert!((a / b - 1.0).abs() < 1e-10, "{law:?} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn density_examples_and_normalization() {
        let arr = Law::Exponential { rate: 1.0 };
        assert_eq!(transition_density(&arr, 0.5, 1.0, 0.0).unwrap(), (-1.5f64).exp());
        assert_eq!(transition_density(&arr, 0.5, 1.0, 2.0).unwrap(), 0.0);
        assert!(transition_density(&arr, -0.5, 1.0, 2.0).is_err());
        for (s, w) in [(0.0, 0.0), (0.3, 0.0), (1.0, 2.5), (0.7, 10.0)] {
            let atom = transition_density(&arr, s, w, 0.0).unwrap();
            let cont = integrate(|z| transition_density(&arr, s, w, z).unwrap(), 0.0, w + s, 1e-12).0;
            assert!((atom + cont - 1.0).abs() < 1e-8, "s={s} w={w}");
        }
    }

    #[test]
    fn kernel_inverse_round_trip() {
        let k = QueueKernel { arrival: Law::Gamma { shape: 2.0, rate: 1.5 } };
        let (s, w) = (0.4, 1.3);
        for i in 1..50 {
            let u = i as f64 / 50.0;
            let z = k.quantile(s, w, u);
            if z > 0.0 {
                assert!((k.cdf(s, w, z) - u).abs() < 1e-9);
            } else {
                assert!(k.cdf(s, w, 0.0) >= u - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_out_of_bound_service() {
        let r = QueueModel::new(EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 2.0 } }, Some(1.0), Law::Exponential { rate: 1.0 });
        assert!(r.is_err());
    }
}
