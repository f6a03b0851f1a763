//! M/M/1 with ρ = 1/2 as an oracle: the time-average wait approaches 1 and
//! Loynes draws follow P(W > w) = ρe^{−(μ−λ)w}.

use mcre_lab::law::Law;
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{loynes_stationary, simulate_queue, QueueModel};
use mcre_lab::stats::{ks_one_sample_atoms, mean};

fn main() -> mcre_lab::Result<()> {
    let model = QueueModel::new(EnvironmentSpec::Iid { law: Law::Exponential { rate: 1.0 } }, None, Law::Exponential { rate: 0.5 })?;
    let path = simulate_queue(&model, 1_000_000, 21, 0)?;
    println!("time-average wait over 1e6 steps: {:.4} (stationary mean 1)", mean(&path.w[1..]));

    let sample = loynes_stationary(&model, 500, 50_000, 22)?;
    let cdf = |w: f64| if w < 0.0 { 0.0 } else { 1.0 - 0.5 * (-0.5 * w).exp() };
    let cdf_left = |w: f64| if w <= 0.0 { 0.0 } else { cdf(w) };
    let ks = ks_one_sample_atoms(&sample.values, cdf, cdf_left);
    println!("Loynes sample: mean {:.4}, KS D = {:.4}, p = {:.3}, boundary rate {:.1e}", mean(&sample.values), ks.statistic, ks.p_value, sample.boundary_rate());
    for depth in [1, 4, 16, 64] {
        println!("depth {depth:>2}: argmax at the boundary in {:.4} of draws", loynes_stationary(&model, depth, 20_000, 23)?.boundary_rate());
    }
    Ok(())
}
