use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{correlation, ks_one_sample, mean, normal_cdf, variance, KsResult};

use super::PartialSumEnsemble;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcltOptions {
    /// Times in (0, 1]; the last should be 1.
    pub t_grid: Vec<f64>,
    /// Allowed dip of the variance curve below its running max, relative to Var(S_n).
    pub monotone_tolerance: f64,
}

impl Default for FcltOptions {
    fn default() -> Self {
        FcltOptions { t_grid: (1..=10).map(|i| i as f64 / 10.0).collect(), monotone_tolerance: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FcltReport {
    pub t_grid: Vec<f64>,
    /// v_n(t) = min{k ≥ 1 : Var(S_k) ≥ t Var(S_n)}.
    pub v: Vec<usize>,
    pub var_sn: f64,
    /// B_n(t) per replica on the grid.
    #[serde(skip)]
    pub paths: Vec<Vec<f64>>,
    /// Var(B_n(t)) on the grid.
    pub var_b: Vec<f64>,
    /// (s, corr(B_n(s), B_n(1) − B_n(s))) for grid points s < 1.
    pub increment_corr: Vec<(f64, f64)>,
    pub ks_b1: KsResult,
    /// Replica average of Σ_k ξ_{k,n}².
    pub xi_square_mean: f64,
}

impl FcltReport {
    fn index_of(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|s| (s - t).abs() < 1e-12)
    }

    pub fn var_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|i| self.var_b[i])
    }

    pub fn corr_at(&self, s: f64) -> Option<f64> {
        self.increment_corr.iter().find(|(u, _)| (u - s).abs() < 1e-12).map(|(_, c)| *c)
    }

    /// Rows `replica,t,B_n` for the first `max_replicas` replicas.
    pub fn to_csv(&self, max_replicas: usize) -> String {
        let mut out = String::from("replica,t,B_n\n");
        for (r, path) in self.paths.iter().take(max_replicas).enumerate() {
            for (t, b) in self.t_grid.iter().zip(path) {
                let _ = writeln!(out, "{r},{t},{b}");
            }
        }
        out
    }
}

/// Builds B_n(t) = Σ_{k ≤ v_n(t)} ξ_{k,n} from the ensemble's own variance curve.
pub fn fclt_ensemble(ens: &PartialSumEnsemble, opts: &FcltOptions) -> Result<FcltReport> {
    let grid = &opts.t_grid;
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("t grid must be increasing within (0, 1]");
    }
    let n = ens.horizon();
    let var = ens.variance_curve();
    let var_sn = var[n];
    if !(var_sn > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let mut running = 0.0f64;
    for (k, v) in var.iter().enumerate() {
        if *v < running - opts.monotone_tolerance * var_sn {
            return Err(Error::NonMonotoneVariance { k, value: *v, reference: running });
        }
        running = running.max(*v);
    }
    let v: Vec<usize> = grid.iter().map(|t| (1..=n).find(|k| var[*k] >= t * var_sn).unwrap_or(n)).collect();
    let scale = var_sn.sqrt();
    let sums = ens.all_sums();
    let paths: Vec<Vec<f64>> = sums.iter().map(|s| v.iter().map(|k| s[*k] / scale).collect()).collect();
    let column = |i: usize| -> Vec<f64> { paths.iter().map(|p| p[i]).collect() };
    let var_b = (0..grid.len()).map(|i| variance(&column(i))).collect();
    let last = column(grid.len() - 1);
    let increment_corr = (0..grid.len() - 1)
        .map(|i| {
            let bs = column(i);
            let inc: Vec<f64> = last.iter().zip(&bs).map(|(a, b)| a - b).collect();
            (grid[i], correlation(&bs, &inc))
        })
        .collect();
    let xi_sq: Vec<f64> = sums
        .iter()
        .map(|s| s.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / var_sn)
        .collect();
    Ok(FcltReport {
        t_grid: grid.clone(),
        v,
        var_sn,
        var_b,
        increment_corr,
        ks_b1: ks_one_sample(&last, normal_cdf),
        xi_square_mean: mean(&xi_sq),
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::normal_ensemble;
    use super::*;

    #[test]
    fn iid_normal_scaling() {
        let n = 400;
        let e = normal_ensemble(2000, n, 3);
        let rep = fclt_ensemble(&e, &FcltOptions::default()).unwrap();
        // v_n(1) can stop short of n where the curve first reaches Var(S_n).
        let v1 = rep.var_at(1.0).unwrap();
        assert!(v1 >= 1.0 - 1e-12 && v1 < 1.05, "{v1}");
        for (t, k) in rep.t_grid.iter().zip(&rep.v) {
            assert!((*k as f64 - t * n as f64).abs() <= 0.05 * n as f64, "t={t} v={k}");
        }
        assert!(rep.corr_at(0.5).unwrap().abs() < 0.08);
        assert!(rep.ks_b1.p_value >= 0.01);
        assert!((rep.xi_square_mean - 1.0).abs() < 0.05);
        assert!(rep.v.windows(2).all(|w| w[0] <= w[1]) && rep.v[rep.v.len() - 1] <= n);
    }

    #[test]
    fn degenerate_and_non_monotone_rejected() {
        let flat = PartialSumEnsemble::from_rows(vec![vec![1.0; 20]; 4]).unwrap();
        assert!(matches!(fclt_ensemble(&flat, &FcltOptions::default()), Err(Error::DegenerateVariance)));
        // Large variance early, cancelled later.
        let rows = vec![vec![5.0, -5.0, 0.1], vec![-5.0, 5.0, -0.1], vec![5.0, -5.0, -0.1], vec![-5.0, 5.0, 0.1]];
        let e = PartialSumEnsemble::from_rows(rows).unwrap();
        assert!(matches!(fclt_ensemble(&e, &FcltOptions::default()), Err(Error::NonMonotoneVariance { k: 2, .. })));
    }

    #[test]
    fn csv_layout() {
        let e = normal_ensemble(10, 50, 1);
        let rep = fclt_ensemble(&e, &FcltOptions { t_grid: vec![0.5, 1.0], monotone_tolerance: 1.0 }).unwrap();
        let csv = rep.to_csv(2);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("replica,t,B_n\n0,0.5,"));
    }
}
