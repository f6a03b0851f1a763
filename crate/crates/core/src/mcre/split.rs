use crate::error::{invalid, Result};
use crate::stats::bisect_increasing;

use super::kernel::{DriftData, ScalarKernel};

/// The regeneration law κ_R(y, ·).
pub trait Regeneration: Sync + Send {
    fn cdf(&self, y: f64, z: f64) -> f64;
    fn quantile(&self, y: f64, u: f64) -> f64;
}

/// κ = δ_c for every y.
#[derive(Clone, Copy, Debug)]
pub struct PointMass(pub f64);

impl Regeneration for PointMass {
    fn cdf(&self, _y: f64, z: f64) -> f64 {
        (z >= self.0) as u8 as f64
    }

    fn quantile(&self, _y: f64, _u: f64) -> f64 {
        self.0
    }
}

/// Level R(y) of the small set {V ≤ R(y)}.
#[derive(Clone, Copy, Debug)]
pub enum LevelRule {
    /// R(y) = 2K(y) / (r γ(y)).
    Drift { r: f64 },
    Fixed(f64),
}

impl LevelRule {
    /// Validated drift rule with 0 < r < 1/γ̄ − 1.
    pub fn drift(r: f64, gamma_bar: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0 / gamma_bar - 1.0) {
            return invalid(format!("r = {r} must lie in (0, 1/γ̄ − 1) with γ̄ = {gamma_bar}"));
        }
        Ok(LevelRule::Drift { r })
    }
}

/// How the residual kernel q_R is inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualMethod {
    /// Bisection on (Q_cdf − (1−β̄)κ_cdf)/β̄.
    Bisection,
    /// Closed form Q^{-1}(β̄u + 1 − β̄), valid when κ = δ_c with c at the
    /// lower edge of the support of every Q(y, x, ·) in the small set.
    LowerEdgeAtom,
}

/// The split map T^R driven by two uniforms per step.
pub struct SplitSampler<K, R> {
    pub kernel: K,
    pub kappa: R,
    pub drift: DriftData,
    pub level: LevelRule,
    /// β̄, and 1 − β̄ kept separately so that β̄ within 2^-53 of 1 stays usable.
    pub beta_bar: f64,
    pub regen_mass: f64,
    pub residual: ResidualMethod,
}

impl<K: ScalarKernel, R: Regeneration> SplitSampler<K, R> {
    pub fn new(kernel: K, kappa: R, drift: DriftData, level: LevelRule, beta_bar: f64) -> Result<Self> {
        Self::with_regen_mass(kernel, kappa, drift, level, 1.0 - beta_bar)
    }

    /// Constructor taking the regeneration mass 1 − β̄ ∈ (0, 1].
    pub fn with_regen_mass(kernel: K, kappa: R, drift: DriftData, level: LevelRule, regen_mass: f64) -> Result<Self> {
        if !(regen_mass > 0.0 && regen_mass <= 1.0) {
            return invalid(format!("beta_bar = {} must lie in [0, 1)", 1.0 - regen_mass));
        }
        if let LevelRule::Fixed(l) = level {
            if !(l > 0.0) {
                return invalid("small-set level must be positive");
            }
        }
        let beta_bar = 1.0 - regen_mass;
        Ok(SplitSampler { kernel, kappa, drift, level, beta_bar, regen_mass, residual: ResidualMethod::Bisection })
    }

    pub fn with_residual(mut self, method: ResidualMethod) -> Self {
        self.residual = method;
        self
    }

    pub fn level_at(&self, y: f64) -> f64 {
        match self.level {
            LevelRule::Drift { r } => 2.0 * (self.drift.k)(y) / (r * (self.drift.gamma)(y)),
            LevelRule::Fixed(l) => l,
        }
    }

    pub fn in_small_set(&self, y: f64, x: f64) -> bool {
        (self.drift.v)(x) <= self.level_at(y)
    }

    /// The coin u1 ≥ β̄, evaluated as 1 − u1 ≤ 1 − β̄ (exact for u1 on the 2^-53 grid).
    pub fn regenerates(&self, u1: f64) -> bool {
        1.0 - u1 <= self.regen_mass
    }

    /// One step of T^R; the flag reports a draw from κ_R.
    pub fn split_step(&self, y: f64, x: f64, u1: f64, u2: f64) -> (f64, bool) {
        if !self.in_small_set(y, x) {
            return (self.kernel.quantile(y, x, u2), false);
        }
        if self.regenerates(u1) {
            return (self.kappa.quantile(y, u2), true);
        }
        (self.residual_quantile(y, x, u2), false)
    }

    /// Generalized inverse of the residual cdf (Q − (1−β̄)κ)/β̄.
    pub fn residual_quantile(&self, y: f64, x: f64, u: f64) -> f64 {
        let b = self.beta_bar;
        match self.residual {
            ResidualMethod::LowerEdgeAtom => self.kernel.upper_quantile(y, x, b * (1.0 - u)),
            ResidualMethod::Bisection => {
                // Q ≥ q_R·β̄ and q_R ≥ u follows from Q ≥ β̄u + 1 − β̄.
                let lo = self.kernel.quantile(y, x, b * u);
                let hi = self.kernel.upper_quantile(y, x, b * (1.0 - u));
                let g = |z: f64| (self.kernel.cdf(y, x, z) - self.regen_mass * self.kappa.cdf(y, z)) / b;
                if g(lo) >= u {
                    return lo;
                }
                bisect_increasing(g, u, lo, hi, 1e-12)
            }
        }
    }
}
