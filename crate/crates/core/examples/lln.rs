//! Empirical barycenters of growing samples approach the barycenter of the law.

use std::sync::Arc;

use entrobar::stats::{lln_experiment, reference_barycenter, MeasureSampler, SamplerFamily};
use entrobar::{Domain, SolverConfig};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::interval(-1.0, 1.0, 81)?);
    let cfg = SolverConfig::default();
    let lambda = 0.2;
    let bumps = MeasureSampler::new(
        SamplerFamily::RandomBumpMixture {
            bumps: 2,
            center: [-0.5, 0.5],
            width: [0.15, 0.35],
            amplitude: [0.5, 1.5],
            floor: 0.3,
        },
        11,
    )?;
    let law = bumps.freeze(16, u64::MAX - 1)?;
    let reference = reference_barycenter(&law, lambda, &domain, &cfg)?.density;

    let table = lln_experiment(&law, lambda, &domain, &cfg, &reference, &[2, 8, 32], 12)?;
    for (n, w2, gap) in &table.medians {
        println!("n = {n:3}  median W2 {w2:.4e}  median log-gradient gap {gap:.4e}");
    }
    for t in &table.sign_tests {
        println!("{} -> {}: {}/{} decreases, p = {:.3}", t.from_n, t.to_n, t.decreases, t.trials, t.p_value);
    }
    println!("trend holds: {}", table.trend_holds());
    Ok(())
}
