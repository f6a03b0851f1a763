//! The Borovkov event probability next to the coupling bound 2P(τ > n).

use mcre_lab::law::Law;
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{borovkov_rate, queue_coupling_experiment, CouplingExperimentOptions, QueueModel};

fn main() -> mcre_lab::Result<()> {
    let model = QueueModel::new(
        EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.6 } },
        Some(1.6),
        Law::Exponential { rate: 1.0 },
    )?;
    let ns = [1, 2, 5, 10, 20, 40];
    let rows = borovkov_rate(&model, &ns, 20_000, 500, 51)?;
    let opts = CouplingExperimentOptions { horizon: 40, replicas: 20_000, seed: 52, record_times: vec![], fit_hi: 20, dominance_hi: 40, ..Default::default() };
    let exp = queue_coupling_experiment(&model, &opts)?;
    println!(" n  borovkov          2P(tau > n)");
    for r in rows {
        println!("{:>2}  {:.5} ± {:.5}  {:.5}", r.n, r.estimate, r.stderr, exp.tv.points[r.n].bound);
    }
    Ok(())
}
