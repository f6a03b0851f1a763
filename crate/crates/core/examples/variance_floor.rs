//! Fisher radius of the inter-arrival law and the Cramér–Rao floor on Var(ΣW_k).

use mcre_lab::law::Law;
use mcre_lab::process::EnvironmentSpec;
use mcre_lab::queue::{fisher_radius, fisher_radius_numeric, variance_floor, QueueModel};

fn main() -> mcre_lab::Result<()> {
    let exp = Law::Exponential { rate: 1.0 };
    println!("r* for exp(1): closed form {}, numeric {:.8}", fisher_radius(&exp)?, fisher_radius_numeric(&Law::Gamma { shape: 1.0, rate: 1.0 })?);
    for law in [Law::Gamma { shape: 2.0, rate: 1.0 }, Law::Uniform { lo: 0.0, hi: 2.0 }] {
        println!("r* for {law:?}: {}", fisher_radius_numeric(&law).map(|r| r.to_string()).unwrap_or_else(|e| e.to_string()));
    }
    let model = QueueModel::new(EnvironmentSpec::Iid { law: Law::Point { at: 0.5 } }, Some(0.5), exp)?;
    for r in variance_floor(&model, &[100, 300, 1000], 2000, 41)? {
        println!("n = {:>4}: Var = {:>9.2} ± {:>7.2}, floor {:>7.2}, ok {}", r.n, r.variance, r.variance_se, r.floor, r.ok);
    }
    Ok(())
}
