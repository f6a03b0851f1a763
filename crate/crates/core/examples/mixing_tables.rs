//! Exact α-mixing tables for finite environments, and the transfer bound
//! α^X(n) ≤ α^Ỹ(r+1) + b(n−r) on a fully enumerable toy chain.

use mcre_lab::law::Law;
use mcre_lab::mixing::toy::ThresholdToy;
use mcre_lab::mixing::{alpha_table, cesaro_mixing, transfer_bound};
use mcre_lab::process::EnvironmentSpec;

fn main() -> mcre_lab::Result<()> {
    let ms = EnvironmentSpec::MovingSum { order: 1, base: Law::Bernoulli { p: 0.5 } };
    let table = alpha_table(&ms, 5, 2, &[0, 1, 3])?;
    println!("moving sum, sup_j alpha(n): {:?}", table.sup_curve());
    println!("Cesaro average at n = 5: {}", cesaro_mixing(&table, 5)?);

    let markov = EnvironmentSpec::FiniteMarkov {
        alphabet: vec![0.0, 1.0],
        transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        initial: vec![0.6, 0.4],
    };
    let table = alpha_table(&markov, 6, 2, &[0, 2, 4])?;
    let curve: Vec<String> = table.sup_curve().iter().map(|a| format!("{a:.3e}")).collect();
    println!("two-state Markov, sup_j alpha(n): [{}]", curve.join(", "));

    let toy = ThresholdToy::default();
    let env = toy.alpha_environment()?;
    let b = toy.coupling_bound()?;
    println!("\n n  alpha_X(n)  best bound  (r)");
    for n in 1..=toy.horizon {
        let ax = toy.alpha_response(n)?;
        let (r, bound) = (0..=n)
            .map(|r| (r, transfer_bound(&env, &b, n, r).unwrap()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("{n:>2}  {ax:>10.6}  {bound:>10.6}  ({r})");
    }
    Ok(())
}
