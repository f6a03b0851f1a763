//! Forward coupling of the queue from W₀ = 0 with a stationary copy: empirical
//! P(τ > n), the c₁e^{−c₂√n} and c₁e^{−c₂n^{1/3}} fits, and the TV sandwich.

use mcre_lab::law::Law;
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{queue_coupling_experiment, CouplingExperimentOptions, QueueModel};

fn main() -> mcre_lab::Result<()> {
    let model = QueueModel::new(
        EnvironmentSpec::Iid { law: Law::Uniform { lo: 0.0, hi: 1.6 } },
        Some(1.6),
        Law::Exponential { rate: 1.0 },
    )?;
    let opts = CouplingExperimentOptions { replicas: 20_000, seed: 4, ..Default::default() };
    let exp = queue_coupling_experiment(&model, &opts)?;
    let r = &exp.report;
    println!("t_bar {:?}, gamma_bar {:?}, regen mass {:?}", r.t_bar, r.gamma_bar, r.regen_mass);
    for n in [0, 5, 10, 25, 50, 75, 100] {
        println!("P(tau > {n:>3}) = {:.5} ± {:.5}", exp.tail.p[n], exp.tail.stderr[n]);
    }
    for fit in [&exp.coupling.fit_sqrt, &exp.coupling.fit_cuberoot].into_iter().flatten() {
        println!("exponent {:.3}: c1 = {:.3}, c2 = {:.3}, weighted rss = {:.1}", fit.exponent, fit.c1, fit.c2, fit.rss);
    }
    println!("sqrt fit dominates beyond n = 50: {:?}", exp.dominated);
    for p in exp.tv.points.iter().filter(|p| p.tv.is_some()) {
        println!("n = {:>2}: TV {:.4} ≤ 2P(tau > n) = {:.4}", p.n, p.tv.unwrap(), p.bound);
    }
    Ok(())
}
