//! Limit-theorem diagnostics over replica ensembles of Φ(X_1), ..., Φ(X_n).

mod fclt;
mod weak;

pub use fclt::{fclt_ensemble, FcltOptions, FcltReport};
pub use weak::{weak_approach_report, witnesses, WeakApproachReport, Witness, WitnessRow};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::{mean, normal_two_sided_tail, std_error, variance, variance_se};

/// Replica-by-time table of Φ(X_k), k = 1..n, with the centering means E Φ(X_k).
#[derive(Clone, Debug)]
pub struct PartialSumEnsemble {
    replicas: usize,
    n: usize,
    /// Row-major, one row of length n per replica.
    phi: Vec<f64>,
    means: Vec<f64>,
}

impl PartialSumEnsemble {
    /// Centered by cross-replica means.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let replicas = rows.len();
        if replicas < 2 {
            return invalid("an ensemble needs at least two replicas");
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return invalid("replica rows must share a positive length");
        }
        let phi: Vec<f64> = rows.into_iter().flatten().collect();
        let means = (0..n)
            .into_par_iter()
            .map(|k| (0..replicas).map(|r| phi[r * n + k]).sum::<f64>() / replicas as f64)
            .collect();
        Ok(PartialSumEnsemble { replicas, n, phi, means })
    }

    /// Centered by supplied expectations.
    pub fn with_means(rows: Vec<Vec<f64>>, means: Vec<f64>) -> Result<Self> {
        let mut e = Self::from_rows(rows)?;
        if means.len() != e.n {
            return invalid("one mean per time index required");
        }
        e.means = means;
        Ok(e)
    }

    /// Rows generated in parallel; row r depends on r only.
    pub fn generate(replicas: usize, f: impl Fn(u64) -> Result<Vec<f64>> + Sync + Send) -> Result<Self> {
        let rows = (0..replicas as u64).into_par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.phi[r * self.n..(r + 1) * self.n]
    }

    /// S_0 = 0, S_1, ..., S_n for one replica.
    pub fn partial_sums(&self, r: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut s = 0.0;
        out.push(0.0);
        for (x, m) in self.row(r).iter().zip(&self.means) {
            s += x - m;
            out.push(s);
        }
        out
    }

    /// S_k across replicas.
    pub fn sums_at(&self, k: usize) -> Vec<f64> {
        (0..self.replicas)
            .into_par_iter()
            .map(|r| self.row(r)[..k].iter().zip(&self.means).map(|(x, m)| x - m).sum())
            .collect()
    }

    /// All partial sums, replica-major, each row of length n + 1.
    pub fn all_sums(&self) -> Vec<Vec<f64>> {
        (0..self.replicas).into_par_iter().map(|r| self.partial_sums(r)).collect()
    }

    /// Cross-replica Var(S_k) for k = 0..n, centered at the ensemble mean of S_k.
    pub fn variance_curve(&self) -> Vec<f64> {
        let sums = self.all_sums();
        (0..=self.n)
            .into_par_iter()
            .map(|k| {
                let col: Vec<f64> = sums.iter().map(|s| s[k]).collect();
                if k == 0 {
                    0.0
                } else {
                    variance(&col)
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnRow {
    pub n: usize,
    /// Ê|S_n / n|.
    pub l1_error: f64,
    pub stderr: f64,
    /// V̂ar(S_n) / n and its running sup along the grid.
    pub scaled_variance: f64,
    pub running_sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UiRow {
    pub b: f64,
    /// (1/n) Σ_k Ê[|Φ(X_k)| 1{|Φ(X_k)| ≥ b}] at the full horizon.
    pub tail_mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnReport {
    pub rows: Vec<LlnRow>,
    pub uniform_integrability: Vec<UiRow>,
    /// Decreasing along the grid up to one inversion within 1 SE.
    pub decreasing: bool,
    /// Last over first L¹ error.
    pub final_ratio: f64,
    /// Last two running sups of V̂ar(n^{-1/2} S_n) within 10%.
    pub variance_sup_stable: bool,
}

/// At most one increase along the curve, and that one within one standard error.
pub fn trend_decreasing(values: &[f64], stderrs: &[f64]) -> bool {
    let mut inversions = 0;
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            inversions += 1;
            let se = (stderrs[i].powi(2) + stderrs[i - 1].powi(2)).sqrt();
            if inversions > 1 || values[i] - values[i - 1] > se {
                return false;
            }
        }
    }
    true
}

/// L¹ error curve on `n_grid` and the truncated-mean tail on `b_grid`.
pub fn lln_report(ens: &PartialSumEnsemble, n_grid: &[usize], b_grid: &[f64]) -> Result<LlnReport> {
    if n_grid.is_empty() || n_grid.iter().any(|n| *n == 0 || *n > ens.n) {
        return invalid(format!("grid points must lie in 1..={}", ens.n));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut sup = f64::NEG_INFINITY;
    for &n in n_grid {
        let sums = ens.sums_at(n);
        let abs: Vec<f64> = sums.iter().map(|s| (s / n as f64).abs()).collect();
        let scaled = variance(&sums) / n as f64;
        sup = sup.max(scaled);
        rows.push(LlnRow { n, l1_error: mean(&abs), stderr: std_error(&abs), scaled_variance: scaled, running_sup: sup });
    }
    let count = (ens.replicas * ens.n) as f64;
    let uniform_integrability = b_grid
        .iter()
        .map(|&b| UiRow { b, tail_mean: ens.phi.iter().filter(|x| x.abs() >= b).map(|x| x.abs()).sum::<f64>() / count })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.l1_error).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
    let k = rows.len();
    let variance_sup_stable = k < 2 || rows[k - 1].running_sup <= 1.1 * rows[k - 2].running_sup;
    Ok(LlnReport {
        decreasing: trend_decreasing(&values, &ses),
        final_ratio: values[k - 1] / values[0],
        rows,
        uniform_integrability,
        variance_sup_stable,
    })
}

/// ∫ 1{|σt| > a} φ(t) dt = 2(1 − Φ(a/σ)).
pub fn confidence_bound(a: f64, sigma: f64) -> Result<f64> {
    if !(a > 0.0 && sigma > 0.0) {
        return invalid("a and sigma must be positive");
    }
    Ok(normal_two_sided_tail(a / sigma))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageRow {
    pub a: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    /// empirical ≤ bound + 4 SE.
    pub ok: bool,
}

/// Empirical P(|T| ≥ a) for terminal values T = n^{-1/2} S_n against the normal bound.
pub fn coverage(terminal: &[f64], a_grid: &[f64], sigma: f64) -> Result<Vec<CoverageRow>> {
    a_grid
        .iter()
        .map(|&a| {
            let bound = confidence_bound(a, sigma)?;
            let hits: Vec<f64> = terminal.iter().map(|t| (t.abs() >= a) as u8 as f64).collect();
            let (p, se) = (mean(&hits), std_error(&hits));
            Ok(CoverageRow { a, empirical: p, stderr: se, bound, ok: p <= bound + 4.0 * se })
        })
        .collect()
}

/// Per-step Fisher spectral-radius bounds r*_k and gradient lower bounds g_k.
#[derive(Clone, Debug, Serialize)]
pub struct FisherFloorInputs {
    pub r_star: Vec<f64>,
    pub g: Vec<f64>,
}

impl FisherFloorInputs {
    pub fn constant(n: usize, r_star: f64, g: f64) -> Self {
        FisherFloorInputs { r_star: vec![r_star; n], g: vec![g; n] }
    }
}

/// Σ_k g_k / r*_k.
pub fn cramer_rao_floor(inputs: &FisherFloorInputs) -> Result<f64> {
    if inputs.r_star.len() != inputs.g.len() {
        return invalid("r* and g must have equal length");
    }
    if inputs.r_star.iter().any(|r| !(*r > 0.0)) || inputs.g.iter().any(|g| !(*g >= 0.0)) {
        return invalid("need r*_k > 0 and g_k ≥ 0");
    }
    Ok(inputs.g.iter().zip(&inputs.r_star).map(|(g, r)| g / r).sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct FloorCheck {
    pub floor: f64,
    pub variance: f64,
    pub stderr: f64,
    pub ok: bool,
}

/// V̂ar(samples) ≥ floor − 4 SE.
pub fn check_floor(floor: f64, samples: &[f64]) -> FloorCheck {
    let (v, se) = (variance(samples), variance_se(samples));
    FloorCheck { floor, variance: v, stderr: se, ok: v >= floor - 4.0 * se }
}
