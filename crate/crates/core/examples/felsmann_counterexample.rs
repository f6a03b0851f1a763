//! E γ(Y₀) < 1 does not give long-term contractivity: exact products along
//! Y_n = Z_n + Z_{n−1} grow like (3/2)^n, checked against Monte Carlo.

use mcre_lab::counterexample::felsmann_report;

fn main() -> mcre_lab::Result<()> {
    let rep = felsmann_report(0.1, 40, 12, 200_000, 11)?;
    println!("E gamma_eps(Y_0) = {:.4}", rep.mean_gamma);
    println!("{:>3} {:>14} {:>14} {:>10} {:>10}", "n", "exact", "mc", "root", "envelope");
    for r in rep.rows.iter().filter(|r| [1, 2, 5, 10, 12, 20, 40].contains(&r.n)) {
        let mc = r.mc.map(|m| format!("{m:.6}")).unwrap_or_else(|| "-".into());
        println!("{:>3} {:>14.6} {:>14} {:>10.4} {:>10.4}", r.n, r.exact, mc, r.root, r.envelope);
    }
    println!("envelope holds: {}, MC agrees: {}", rep.envelope_holds, rep.mc_agrees);
    Ok(())
}
