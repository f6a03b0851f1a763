//! The split map T^R for the queue kernel: its draws match direct draws from
//! Q(s, w, ·), and every regeneration lands on κ = δ₀ whatever the state.

use mcre_lab::law::Law;
use mcre_lab::mcre::{LevelRule, PointMass, ScalarKernel, SplitSampler};
use mcre_lab::queue::{queue_drift_coeffs, QueueKernel};
use mcre_lab::rng::derive_stream;
use mcre_lab::stats::ks_two_sample;

fn main() -> mcre_lab::Result<()> {
    let arrival = Law::Exponential { rate: 1.0 };
    let t = 0.25;
    let kernel = QueueKernel { arrival: arrival.clone() };
    // Small set w ≤ 1 and service ≤ 1.6 give Q(s, w, {0}) ≥ P(Z ≥ 2.6).
    let regen = 0.5 * (-2.6f64).exp();
    let sampler = SplitSampler::new(kernel.clone(), PointMass(0.0), queue_drift_coeffs(&arrival, t)?, LevelRule::Fixed(t.exp_m1()), 1.0 - regen)?;
    let n = 50_000;
    for (s, w) in [(0.2, 0.0), (0.8, 0.5), (1.6, 1.0), (0.4, 3.0)] {
        let mut rng = derive_stream(5, (s * 10.0 + w * 100.0) as u64);
        let mut split = Vec::with_capacity(n);
        let mut direct = Vec::with_capacity(n);
        let mut regenerations = 0;
        for _ in 0..n {
            let (u1, u2) = (rng.uniform(), rng.uniform());
            let (x, regen) = sampler.split_step(s, w, u1, u2);
            if regen {
                regenerations += 1;
                assert_eq!(sampler.split_step(s, 0.0, u1, u2).0, x);
            }
            split.push(x);
            direct.push(kernel.quantile(s, w, rng.uniform()));
        }
        let ks = ks_two_sample(&split, &direct);
        println!("s={s:.1} w={w:.1}: small set {}, regenerations {regenerations}, KS D={:.4} p={:.3}", sampler.in_small_set(s, w), ks.statistic, ks.p_value);
    }
    Ok(())
}
