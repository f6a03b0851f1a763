//! Y_n = Z_n + Z_{n−1} with fair Bernoulli Z and γ on {0, 1, 2}: E γ(Y_0) < 1 while
//! E ∏_{k≤n} γ(Y_k) grows geometrically.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::law::Law;
use crate::process::{gen_environment_values, EnvironmentSpec};
use crate::rng::{derive_stream, stream_id, Purpose};
use crate::stats::{mean, std_error};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FelsmannParams {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
}

impl FelsmannParams {
    /// γ = (3, 0, 0) shifted by ε.
    pub fn standard(epsilon: f64) -> Result<Self> {
        let p = FelsmannParams { gamma0: 3.0, gamma1: 0.0, gamma2: 0.0, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.gamma0, self.gamma1, self.gamma2].iter().any(|g| !(*g >= 0.0)) {
            return invalid("γ values must be nonnegative");
        }
        if !(0.0..0.25).contains(&self.epsilon) {
            return invalid(format!("epsilon = {} outside [0, 1/4)", self.epsilon));
        }
        Ok(())
    }

    /// γ_ε(y) for y ∈ {0, 1, 2}.
    pub fn gamma(&self, y: usize) -> f64 {
        [self.gamma0, self.gamma1, self.gamma2][y] + self.epsilon
    }

    /// E γ_ε(Y_0) with P(Y = 0, 1, 2) = (1/4, 1/2, 1/4).
    pub fn mean_gamma(&self) -> f64 {
        0.25 * self.gamma(0) + 0.5 * self.gamma(1) + 0.25 * self.gamma(2)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FelsmannSequences {
    /// a_n, b_n, c_n for n = 0..=n_max.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// b_{n+1} = (γ₀b_n + γ₁c_n)/2, c_{n+1} = (γ₁b_n + γ₂c_n)/2 from b₀ = c₀ = 1/2, with γ shifted by ε.
pub fn felsmann_exact(p: &FelsmannParams, n_max: usize) -> Result<FelsmannSequences> {
    p.validate()?;
    if n_max == 0 {
        return invalid("n_max must be at least 1");
    }
    let (g0, g1, g2) = (p.gamma(0), p.gamma(1), p.gamma(2));
    let (mut b, mut c) = (vec![0.5], vec![0.5]);
    for n in 0..n_max {
        b.push(0.5 * (g0 * b[n] + g1 * c[n]));
        c.push(0.5 * (g1 * b[n] + g2 * c[n]));
    }
    let a = b.iter().zip(&c).map(|(x, y)| x + y).collect();
    Ok(FelsmannSequences { a, b, c })
}

/// Y_1, ..., Y_n as a moving sum of order 1 over fair Bernoulli values.
pub fn felsmann_environment() -> EnvironmentSpec {
    EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } }
}

#[derive(Clone, Debug, Serialize)]
pub struct FelsmannRow {
    pub n: usize,
    /// Exact ε = 0 value, the lower bound.
    pub a_n: f64,
    /// Exact E ∏ γ_ε(Y_k).
    pub exact: f64,
    pub mc: Option<f64>,
    pub mc_se: Option<f64>,
    /// exact^{1/n} and the envelope (3/2)·2^{−1/n}.
    pub root: f64,
    pub envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FelsmannReport {
    pub params: FelsmannParams,
    pub mean_gamma: f64,
    pub rows: Vec<FelsmannRow>,
    /// exact^{1/n} ≥ (3/2)·2^{−1/n} for every n in range.
    pub envelope_holds: bool,
    /// Every MC value within 4 SE of the exact one.
    pub mc_agrees: bool,
}

impl FelsmannReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,a_n,exact,mc,mc_se\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.n, r.a_n, r.exact, opt(r.mc), opt(r.mc_se));
        }
        out
    }
}

/// Monte Carlo E ∏_{k≤n} γ_ε(Y_k) for n = 1..=n_max from one environment path per replica.
pub fn felsmann_mc(p: &FelsmannParams, n_max: usize, replicas: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let spec = felsmann_environment();
    let products: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(seed, stream_id(r, Purpose::Environment));
            let y = gen_environment_values(&spec, 1, n_max - 1, &mut rng)?;
            let mut prod = 1.0;
            Ok(y.iter().map(|v| {
                prod *= p.gamma(*v as usize);
                prod
            })
            .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..n_max)
        .map(|k| {
            let col: Vec<f64> = products.iter().map(|row| row[k]).collect();
            (mean(&col), std_error(&col))
        })
        .collect())
}

/// Exact sequences for the standard γ at ε and at 0, with an MC check up to `mc_n_max`.
pub fn felsmann_report(epsilon: f64, n_max: usize, mc_n_max: usize, replicas: usize, seed: u64) -> Result<FelsmannReport> {
    if !(epsilon > 0.0 && epsilon < 0.25) && epsilon != 0.0 {
        return invalid(format!("epsilon = {epsilon} outside [0, 1/4)"));
    }
    let params = FelsmannParams::standard(epsilon)?;
    let exact = felsmann_exact(&params, n_max)?;
    let base = felsmann_exact(&FelsmannParams::standard(0.0)?, n_max)?;
    let mc = if mc_n_max > 0 && replicas > 1 { felsmann_mc(&params, mc_n_max.min(n_max), replicas, seed)? } else { vec![] };
    let rows: Vec<FelsmannRow> = (1..=n_max)
        .map(|n| FelsmannRow {
            n,
            a_n: base.a[n],
            exact: exact.a[n],
            mc: mc.get(n - 1).map(|m| m.0),
            mc_se: mc.get(n - 1).map(|m| m.1),
            root: exact.a[n].powf(1.0 / n as f64),
            envelope: 1.5 * 2f64.powf(-1.0 / n as f64),
        })
        .collect();
    let envelope_holds = rows.iter().all(|r| r.root >= r.envelope * (1.0 - 1e-12));
    let mc_agrees = rows.iter().all(|r| match (r.mc, r.mc_se) {
        (Some(m), Some(se)) => (m - r.exact).abs() <= 4.0 * se,
        _ => true,
    });
    Ok(FelsmannReport { mean_gamma: params.mean_gamma(), params, rows, envelope_holds, mc_agrees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute force over (Z_0, ..., Z_n).
    fn enumerate(p: &FelsmannParams, n: usize) -> f64 {
        (0..1u64 << (n + 1))
            .map(|bits| {
                let z = |i: usize| ((bits >> i) & 1) as usize;
                (1..=n).map(|k| p.gamma(z(k) + z(k - 1))).product::<f64>() / (1u64 << (n + 1)) as f64
            })
            .sum()
    }

    #[test]
    fn closed_form_sequence() {
        let s = felsmann_exact(&FelsmannParams::standard(0.0).unwrap(), 40).unwrap();
        // a_0 is the empty product.
        assert_eq!(s.a[0], 1.0);
        for n in 1..=40 {
            assert_relative_eq!(s.a[n], 0.5 * 1.5f64.powi(n as i32), max_relative = 1e-12);
        }
        assert_eq!(s.a[1], 0.75);
    }

    #[test]
    fn constant_gamma_gives_powers() {
        let p = FelsmannParams { gamma0: 0.7, gamma1: 0.7, gamma2: 0.7, epsilon: 0.0 };
        let s = felsmann_exact(&p, 20).unwrap();
        for n in 0..=20 {
            assert_relative_eq!(s.a[n], 0.7f64.powi(n as i32), max_relative = 1e-12);
        }
    }

    #[test]
    fn recursion_matches_enumeration() {
        let p = FelsmannParams { gamma0: 1.3, gamma1: 0.4, gamma2: 2.2, epsilon: 0.1 };
        let s = felsmann_exact(&p, 12).unwrap();
        for n in 1..=12 {
            assert_relative_eq!(s.a[n], enumerate(&p, n), max_relative = 1e-12);
        }
    }

    #[test]
    fn report_at_epsilon() {
        let rep = felsmann_report(0.1, 20, 8, 200_000, 3).unwrap();
        assert_relative_eq!(rep.mean_gamma, 0.85, max_relative = 1e-15);
        assert!(rep.envelope_holds && rep.mc_agrees);
        assert!(rep.rows[19].root > 1.4);
        // (1/2)^{1/n}·(3/2) > 1 exactly when n ≥ 2.
        assert!(rep.rows.iter().all(|r| (r.envelope > 1.0) == (r.n >= 2)));
        assert!(rep.to_csv().starts_with("n,a_n,exact,mc,mc_se\n1,0.75,"));
    }

    #[test]
    fn epsilon_range() {
        assert!(felsmann_report(0.25, 5, 0, 0, 1).is_err());
        assert!(felsmann_report(-0.1, 5, 0, 0, 1).is_err());
        let rep = felsmann_report(0.0, 5, 0, 0, 1).unwrap();
        assert!(rep.rows.iter().all(|r| r.exact == r.a_n));
    }
}
