//! Scalar probability laws used for environment marginals and inter-arrival times.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Law {
    Point { at: f64 },
    Bernoulli { p: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Exponential conditioned on [0, upper].
    TruncExponential { rate: f64, upper: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Point { at } if !at.is_finite() => invalid("point mass must be finite"),
            Law::Bernoulli { p } if !(0.0..=1.0).contains(p) => invalid("bernoulli p outside [0,1]"),
            Law::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return invalid("discrete law needs matching non-empty values/probs");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return invalid("discrete law has negative probability or non-finite value");
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return invalid(format!("discrete probabilities sum to {s}"));
                }
                Ok(())
            }
            Law::Uniform { lo, hi } if !(lo < hi) || !lo.is_finite() || !hi.is_finite() => {
                invalid("uniform needs finite lo < hi")
            }
            Law::Exponential { rate } if !(*rate > 0.0) => invalid("exponential rate must be positive"),
            Law::Gamma { shape, rate } if !(*shape > 0.0 && *rate > 0.0) => {
                invalid("gamma shape and rate must be positive")
            }
            Law::TruncExponential { rate, upper } if !(*rate > 0.0 && *upper > 0.0) => {
                invalid("truncated exponential needs positive rate and upper")
            }
            _ => Ok(()),
        }
    }

    /// Support points and probabilities for laws with finitely many atoms.
    pub fn atoms(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Law::Point { at } => Some((vec![*at], vec![1.0])),
            Law::Bernoulli { p } => Some((vec![0.0, 1.0], vec![1.0 - p, *p])),
            Law::Discrete { values, probs } => Some((values.clone(), probs.clone())),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.atoms().is_some()
    }

    fn gamma(shape: f64, rate: f64) -> Gamma {
        Gamma::new(shape, rate).expect("validated gamma parameters")
    }

    /// Generalized inverse F^{-1}(u) = inf{x : F(x) ≥ u}.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Law::Point { at } => *at,
            Law::Uniform { lo, hi } => lo + (hi - lo) * u,
            Law::Exponential { rate } => -(-u).ln_1p() / rate,
            Law::TruncExponential { rate, upper } => {
                let mass = -(-rate * upper).exp_m1();
                -(-u * mass).ln_1p() / rate
            }
            Law::Gamma { shape, rate } => Self::gamma(*shape, *rate).inverse_cdf(u),
            _ => {
                let (values, probs) = self.atoms().unwrap();
                let mut cum = 0.0;
                for (v, p) in values.iter().zip(&probs) {
                    cum += p;
                    if cum >= u && *p > 0.0 {
                        return *v;
                    }
                }
                let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(values.len() - 1);
                values[last]
            }
        }
    }

    /// Tail quantile F^{-1}(1 - u), accurate for small u.
    pub fn upper_quantile(&self, u: f64) -> f64 {
        match self {
            Law::Exponential { rate } => -u.ln() / rate,
            _ => self.quantile(1.0 - u),
        }
    }

    /// P(X ≤ x).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Point { at } => (x >= *at) as u8 as f64,
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Law::TruncExponential { rate, upper } => {
                if x <= 0.0 {
                    0.0
                } else if x >= *upper {
                    1.0
                } else {
                    (-rate * x).exp_m1() / (-rate * upper).exp_m1()
                }
            }
            Law::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    Self::gamma(*shape, *rate).cdf(x)
                }
            }
            _ => {
                let (values, probs) = self.atoms().unwrap();
                values.iter().zip(&probs).filter(|(v, _)| **v <= x).map(|(_, p)| p).sum::<f64>().min(1.0)
            }
        }
    }

    /// P(X < x).
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self.atoms() {
            Some((values, probs)) => values.iter().zip(&probs).filter(|(v, _)| **v < x).map(|(_, p)| p).sum(),
            None => self.cdf(x),
        }
    }

    /// P(X > x), computed directly where cancellation matters.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Law::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    Self::gamma(*shape, *rate).sf(x)
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Lebesgue density, `None` for laws with atoms.
    pub fn density(&self, x: f64) -> Option<f64> {
        Some(match self {
            Law::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Law::TruncExponential { rate, upper } => {
                if x < 0.0 || x > *upper {
                    0.0
                } else {
                    rate * (-rate * x).exp() / -(-rate * upper).exp_m1()
                }
            }
            Law::Gamma { shape, rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    Self::gamma(*shape, *rate).pdf(x)
                }
            }
            _ => return None,
        })
    }

    /// Derivative of the density on the open support, where it is continuous.
    pub fn density_derivative(&self, x: f64) -> Option<f64> {
        match self {
            Law::Exponential { rate } => Some(-rate * self.density(x)?),
            Law::Gamma { shape, rate } if *shape == 1.0 || *shape >= 2.0 => {
                let f = self.density(x)?;
                if x <= 0.0 {
                    return Some(if *shape == 1.0 { -rate * f } else { 0.0 });
                }
                Some(f * ((shape - 1.0) / x - rate))
            }
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Law::Uniform { lo, hi } => (*lo, *hi),
            Law::Exponential { .. } | Law::Gamma { .. } => (0.0, f64::INFINITY),
            Law::TruncExponential { upper, .. } => (0.0, *upper),
            _ => {
                let (values, probs) = self.atoms().unwrap();
                let live = values.iter().zip(&probs).filter(|(_, p)| **p > 0.0).map(|(v, _)| *v);
                live.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Exponential { rate } => 1.0 / rate,
            Law::Gamma { shape, rate } => shape / rate,
            Law::TruncExponential { rate, upper } => {
                let e = (-rate * upper).exp();
                1.0 / rate - upper * e / (1.0 - e)
            }
            _ => {
                let (values, probs) = self.atoms().unwrap();
                values.iter().zip(&probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Law::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            Law::Exponential { rate } => 2.0 / (rate * rate),
            Law::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
            Law::TruncExponential { rate, upper } => {
                let (l, u) = (*rate, *upper);
                let e = (-l * u).exp();
                (2.0 / (l * l) - e * (u * u + 2.0 * u / l + 2.0 / (l * l))) / (1.0 - e)
            }
            _ => {
                let (values, probs) = self.atoms().unwrap();
                values.iter().zip(&probs).map(|(v, p)| v * v * p).sum()
            }
        }
    }

    /// Closed-form E[e^{tX}] where available; `Some(inf)` when it diverges.
    pub fn mgf(&self, t: f64) -> Option<f64> {
        Some(match self {
            Law::Uniform { lo, hi } => {
                let w = hi - lo;
                if t == 0.0 {
                    1.0
                } else {
                    (t * lo).exp() * (t * w).exp_m1() / (t * w)
                }
            }
            Law::Exponential { rate } => {
                if t >= *rate {
                    f64::INFINITY
                } else {
                    rate / (rate - t)
                }
            }
            Law::Gamma { shape, rate } => {
                if t >= *rate {
                    f64::INFINITY
                } else {
                    (rate / (rate - t)).powf(*shape)
                }
            }
            Law::TruncExponential { rate, upper } => {
                let d = t - rate;
                let mass = -(-rate * upper).exp_m1();
                if d == 0.0 {
                    rate * upper / mass
                } else {
                    rate * (d * upper).exp_m1() / (d * mass)
                }
            }
            _ => {
                let (values, probs) = self.atoms().unwrap();
                values.iter().zip(&probs).map(|(v, p)| p * (t * v).exp()).sum()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laws() -> Vec<Law> {
        vec![
            Law::Uniform { lo: 0.0, hi: 2.0 },
            Law::Exponential { rate: 1.5 },
            Law::Gamma { shape: 2.5, rate: 2.0 },
            Law::TruncExponential { rate: 1.0, upper: 10.0 },
        ]
    }

    #[test]
    fn quantile_inverts_cdf() {
        for law in laws() {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                let x = law.quantile(u);
                assert!((law.cdf(x) - u).abs() < 1e-9, "{law:?} at {u}");
            }
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for law in laws() {
            let (lo, hi) = law.support();
            let f = |x: f64| law.density(x).unwrap();
            let integ = |g: &dyn Fn(f64) -> f64| {
                if hi.is_finite() {
                    crate::stats::integrate(g, lo, hi, 1e-12).0
                } else {
                    crate::stats::integrate_to_inf(g, lo, 1e-12).0
                }
            };
            assert!((integ(&|x| f(x)) - 1.0).abs() < 1e-9);
            assert!((integ(&|x| x * f(x)) - law.mean()).abs() < 1e-8);
            assert!((integ(&|x| x * x * f(x)) - law.second_moment()).abs() < 1e-7);
            let m = integ(&|x| (-0.7 * x).exp() * f(x));
            assert!((m - law.mgf(-0.7).unwrap()).abs() < 1e-9, "{law:?}");
        }
    }

    #[test]
    fn discrete_quantile_is_generalized_inverse() {
        let law = Law::Discrete { values: vec![0.0, 0.25, 0.5], probs: vec![0.25, 0.5, 0.25] };
        assert_eq!(law.quantile(0.1), 0.0);
        assert_eq!(law.quantile(0.25), 0.0);
        assert_eq!(law.quantile(0.26), 0.25);
        assert_eq!(law.quantile(0.9), 0.5);
        assert_eq!(law.cdf_left(0.25), 0.25);
    }
}
