//! LLN, confidence-bound and FCLT diagnostics for waiting times driven by
//! 1-dependent service S_n = ζ_n + ζ_{n−1}.

use mcre_lab::law::Law;
use mcre_lab::limits::{coverage, fclt_ensemble, lln_report, weak_approach_report, FcltOptions};
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::QueueModel;
use mcre_lab::runner::waiting_ensemble;
use mcre_lab::stats::variance;

fn main() -> mcre_lab::Result<()> {
    let service = EnvironmentSpec::MovingSum {
        order: 1,
        base: Law::Discrete { values: vec![0.0, 0.4], probs: vec![0.5, 0.5] },
    };
    let model = QueueModel::new(service, Some(0.8), Law::Exponential { rate: 1.0 })?;
    let n = 5000;
    let ens = waiting_ensemble(&model, n, 1000, 31)?;

    let lln = lln_report(&ens, &[50, 500, 5000], &[1.0, 5.0])?;
    for r in &lln.rows {
        println!("n = {:>4}: E|S_n/n| = {:.5} ± {:.5}, Var(S_n)/n = {:.3}", r.n, r.l1_error, r.stderr, r.scaled_variance);
    }

    let terminal: Vec<f64> = ens.sums_at(n).iter().map(|s| s / (n as f64).sqrt()).collect();
    let sigma = variance(&terminal).sqrt();
    for row in coverage(&terminal, &[0.5 * sigma, sigma, 2.0 * sigma], sigma)? {
        println!("P(|T| ≥ {:.3}) = {:.4} ± {:.4}, normal bound {:.4}", row.a, row.empirical, row.stderr, row.bound);
    }
    let weak = weak_approach_report(&terminal)?;
    println!("KS vs N(0,1): p = {:.3}; BL distance over the witness family {:.4}", weak.ks.p_value, weak.bl_distance);

    let fclt = fclt_ensemble(&ens, &FcltOptions::default())?;
    println!("Var B(0.5) = {:.3}, Var B(1) = {:.3}, corr(B(.5), B(1)−B(.5)) = {:.3}", fclt.var_at(0.5).unwrap(), fclt.var_at(1.0).unwrap(), fclt.corr_at(0.5).unwrap());
    println!("v_n on the grid: {:?}", fclt.v);
    Ok(())
}
