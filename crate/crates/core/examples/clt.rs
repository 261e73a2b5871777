//! Fluctuations of empirical barycenters against the plug-in covariance.

use std::sync::Arc;

use entrobar::stats::{clt_experiment, MeasureSampler, SamplerFamily};
use entrobar::{AtomSpec, Domain, SolverConfig};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::interval(-1.0, 1.0, 61)?);
    let atoms = [-0.4, -0.1, 0.2, 0.5]
        .iter()
        .map(|&c| AtomSpec::Bumps {
            centers: vec![c],
            widths: vec![0.3],
            amplitudes: vec![1.0],
            floor: 0.3,
        })
        .collect();
    let law = MeasureSampler::new(SamplerFamily::FiniteAtoms { atoms }, 7)?;

    let report = clt_experiment(&law, 0.4, &domain, &SolverConfig::default(), 64, 100, 3)?;
    println!("relative Frobenius gap {:.3}", report.relative_frobenius);
    println!(
        "bootstrap radius {:.3e}, distance {:.3e}, within band: {}",
        report.bootstrap.radius, report.bootstrap.distance, report.bootstrap.within_band
    );
    println!("leading share {:.3} (plug-in {:.3})", report.leading_share, report.plugin_leading_share);
    for (k, s) in report.normality_stats.iter().enumerate() {
        println!("coefficient {k}: skewness {:+.3}, excess kurtosis {:+.3}", s.skewness, s.excess_kurtosis);
    }
    Ok(())
}
