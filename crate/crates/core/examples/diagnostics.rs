//! A-priori bounds evaluated on a solved barycenter.

use std::sync::Arc;

use entrobar::stats::diagnostics;
use entrobar::{solve_barycenter, Atom, Domain, GaussianMeasure, Population, SolverConfig};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::full_space_1d(10.0, 801)?);
    let atoms = [(-1.5, 0.6), (0.5, 0.8), (2.0, 1.0)]
        .iter()
        .map(|&(m, v)| Ok(Atom::Grid(GaussianMeasure::scalar(m, v)?.discretize(domain.clone())?)))
        .collect::<entrobar::Result<Vec<_>>>()?;
    let pop = Population::uniform(0.4, domain, atoms)?;
    let res = solve_barycenter(&pop, &SolverConfig::default())?;

    // the least log-concave atom has variance 1
    let report = diagnostics(&res, &pop, Some(1.0));
    for c in &report.checks {
        let mark = if !c.applicable { "n/a " } else if c.holds { "ok  " } else { "FAIL" };
        println!("{mark} {:14} {:.4e} <= {:.4e} + {:.1e}", c.name, c.lhs, c.rhs, c.slack);
    }
    println!("all applicable checks pass: {}", report.all_passed);
    Ok(())
}
