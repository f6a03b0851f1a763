use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats::{integrate, ks_one_sample, mean, normal_cdf, std_error, variance, KsResult};

/// A bounded Lipschitz test function with its norm sup|g| + Lip(g).
pub struct Witness {
    pub name: String,
    pub bl_norm: f64,
    pub f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// The fixed family: cos(ωx) and sin(ωx) for ω = 0.5..2.5, tanh(x − c) for
/// c = ±0.5, ±1.5, Gaussian bumps e^{−(x−c)²} for c = −2..2 and 1/(1 + x²).
pub fn witnesses() -> Vec<Witness> {
    let mut out = Vec::with_capacity(20);
    for k in 1..=5 {
        let w = 0.5 * k as f64;
        out.push(Witness { name: format!("cos({w}x)"), bl_norm: 1.0 + w, f: Box::new(move |x: f64| (w * x).cos()) });
        out.push(Witness { name: format!("sin({w}x)"), bl_norm: 1.0 + w, f: Box::new(move |x: f64| (w * x).sin()) });
    }
    for c in [-1.5, -0.5, 0.5, 1.5] {
        out.push(Witness { name: format!("tanh(x-{c})"), bl_norm: 2.0, f: Box::new(move |x: f64| (x - c).tanh()) });
    }
    let bump_lip = (2.0 / std::f64::consts::E).sqrt();
    for c in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        out.push(Witness {
            name: format!("bump({c})"),
            bl_norm: 1.0 + bump_lip,
            f: Box::new(move |x: f64| (-(x - c) * (x - c)).exp()),
        });
    }
    out.push(Witness { name: "cauchy".into(), bl_norm: 1.0 + 3.0 * 3f64.sqrt() / 8.0, f: Box::new(|x: f64| 1.0 / (1.0 + x * x)) });
    out
}

fn normal_expectation(g: &dyn Fn(f64) -> f64) -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    integrate(|x| g(x) * phi(x), -12.0, 12.0, 1e-14).0
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessRow {
    pub name: String,
    pub empirical: f64,
    pub stderr: f64,
    pub normal: f64,
    /// |empirical − normal| / ‖g‖_BL.
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakApproachReport {
    pub replicas: usize,
    pub sigma_hat: f64,
    pub ks: KsResult,
    pub witnesses: Vec<WitnessRow>,
    /// Max over the family of the normalized distance.
    pub bl_distance: f64,
}

/// Compares terminal values S_n/√n, scaled by their sample standard deviation, with N(0, 1).
pub fn weak_approach_report(terminal: &[f64]) -> Result<WeakApproachReport> {
    if terminal.len() < 500 {
        return invalid("at least 500 replicas required");
    }
    let sigma_hat = variance(terminal).sqrt();
    if !(sigma_hat > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let z: Vec<f64> = terminal.iter().map(|t| t / sigma_hat).collect();
    let ks = ks_one_sample(&z, normal_cdf);
    let witnesses: Vec<WitnessRow> = witnesses()
        .into_iter()
        .map(|w| {
            let vals: Vec<f64> = z.iter().map(|x| (w.f)(*x)).collect();
            let empirical = mean(&vals);
            let normal = normal_expectation(&w.f);
            WitnessRow { name: w.name, empirical, stderr: std_error(&vals), normal, distance: (empirical - normal).abs() / w.bl_norm }
        })
        .collect();
    let bl_distance = witnesses.iter().map(|w| w.distance).fold(0.0, f64::max);
    Ok(WeakApproachReport { replicas: terminal.len(), sigma_hat, ks, witnesses, bl_distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn family_size_and_closed_forms() {
        let w = witnesses();
        assert_eq!(w.len(), 20);
        for v in &w {
            let e = normal_expectation(&v.f);
            if let Some(rest) = v.name.strip_prefix("cos(") {
                let om: f64 = rest.trim_end_matches("x)").parse().unwrap();
                assert_relative_eq!(e, (-0.5 * om * om).exp(), max_relative = 1e-10);
            }
            if v.name.starts_with("sin") {
                assert!(e.abs() < 1e-12);
            }
            if let Some(rest) = v.name.strip_prefix("bump(") {
                let c: f64 = rest.trim_end_matches(')').parse().unwrap();
                assert_relative_eq!(e, (-c * c / 3.0).exp() / 3f64.sqrt(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn exact_normals_pass() {
        let mut rng = derive_stream(1, 2);
        let t: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rep = weak_approach_report(&t).unwrap();
        assert!(rep.ks.p_value >= 0.001);
        assert!(rep.bl_distance < 0.05);
    }

    #[test]
    fn centered_exponential_sums() {
        let n = 5000;
        let exp = Exp::new(1.0).unwrap();
        let t: Vec<f64> = (0..2000u64)
            .map(|r| {
                let mut rng = derive_stream(7, r);
                (0..n).map(|_| exp.sample(&mut rng) - 1.0).sum::<f64>() / (n as f64).sqrt()
            })
            .collect();
        assert!(weak_approach_report(&t).unwrap().ks.p_value >= 0.01);
    }

    #[test]
    fn rejects_small_or_degenerate() {
        assert!(weak_approach_report(&[1.0; 10]).is_err());
        assert!(matches!(weak_approach_report(&[1.0; 600]), Err(Error::DegenerateVariance)));
    }
}
