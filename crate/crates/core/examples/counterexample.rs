//! On a non-convex domain the maximum principle fails for small `λ`.

use entrobar::stats::counterexample;
use entrobar::SolverConfig;

fn main() -> entrobar::Result<()> {
    let report = counterexample(&[0.01, 0.1, 1.0, 10.0, 100.0], 801, &SolverConfig::default())?;
    println!("bound max ν = {}", report.bound);
    for r in &report.rows {
        println!("λ = {:>6}  max ρ̄ = {:.4}  exceeds: {}", r.lambda, r.max_density, r.exceeds);
    }
    match report.crossing {
        Some(l) => println!("largest λ above the bound: {l}"),
        None => println!("no crossing in the sweep"),
    }
    Ok(())
}
