//! Grid solver on the line, checked against the scalar Gaussian root.

use std::sync::Arc;

use entrobar::gaussian::scalar_barycenter_variance;
use entrobar::solver::{gradient_residual, gradient_residual_bound};
use entrobar::{solve_barycenter, Atom, Domain, GaussianMeasure, Population, SolverConfig};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::full_space_1d(10.0, 801)?);
    let lambda = 0.3;
    let (vars, means) = ([0.5, 1.5], [-1.0, 2.0]);
    let atoms = means
        .iter()
        .zip(vars)
        .map(|(&m, v)| Ok(Atom::Grid(GaussianMeasure::scalar(m, v)?.discretize(domain.clone())?)))
        .collect::<entrobar::Result<Vec<_>>>()?;
    let pop = Population::uniform(lambda, domain.clone(), atoms)?;

    let cfg = SolverConfig::default();
    let res = solve_barycenter(&pop, &cfg)?;
    let rho = &res.density;
    let mean = rho.mean()[0];
    let var = rho.second_moment() - mean * mean;
    println!("{} iterations, L1 residual {:.2e}", res.iterations, res.final_residual);
    println!("grid      mean {mean:.5} variance {var:.5}");
    println!("closed    mean {:.5} variance {:.5}", 0.5, scalar_barycenter_variance(lambda, &[0.5, 0.5], &vars));
    println!(
        "gradient residual {:.3e} (bound {:.3e})",
        gradient_residual(&res, &pop),
        gradient_residual_bound(&domain, lambda, cfg.tol_l1)
    );
    Ok(())
}
