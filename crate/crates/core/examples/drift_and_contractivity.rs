//! The queue's drift condition with V(w) = e^{tw} − 1, checked by simulation on
//! a grid, and its long-term contractivity rate along a dependent service sequence.

use mcre_lab::law::Law;
use mcre_lab::mcre::{contractivity_rate, drift_verify, iterated_drift_bound};
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{queue_drift_coeffs, QueueKernel};

fn main() -> mcre_lab::Result<()> {
    let arrival = Law::Exponential { rate: 1.0 };
    let t = 0.25;
    let drift = queue_drift_coeffs(&arrival, t)?;
    let report = drift_verify(&QueueKernel { arrival }, &drift, &[0.0, 0.4, 0.8], &[0.0, 1.0, 4.0], 50_000, 3);
    for r in &report.rows {
        println!("s={:.1} w={:.1}  E V(W') = {:.4} ± {:.4}  bound {:.4}", r.y, r.x, r.estimate, r.stderr, r.bound);
    }
    println!("violations: {}", report.violations());

    let service = EnvironmentSpec::MovingSum {
        order: 1,
        base: Law::Discrete { values: vec![0.0, 0.4], probs: vec![0.5, 0.5] },
    };
    let rate = contractivity_rate(&service, &drift, 30, 3, 0, 0)?;
    println!("\ncontractivity ({:?}): n=1 {:.4}, n=10 {:.4}, n=30 {:.4}", rate.method, rate.sup_per_n[0], rate.sup_per_n[9], rate.sup_per_n[29]);

    let gammas: Vec<f64> = [0.0, 0.4, 0.8, 0.4, 0.0].iter().map(|s| (drift.gamma)(*s)).collect();
    let ks: Vec<f64> = [0.0, 0.4, 0.8, 0.4, 0.0].iter().map(|s| (drift.k)(*s)).collect();
    println!("iterated bound from V0 = 10 over five steps: {:.4}", iterated_drift_bound(&gammas, &ks, 10.0)?);
    Ok(())
}
