//! Linearized operator `G` at a barycenter and its spectrum.

use std::sync::Arc;

use entrobar::linma::build_g;
use entrobar::{solve_barycenter, AtomSpec, Domain, Population, SolverConfig};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::interval(-1.0, 1.0, 61)?);
    let atoms = [-0.3, 0.4]
        .iter()
        .map(|&c| {
            AtomSpec::Bumps {
                centers: vec![c],
                widths: vec![0.3],
                amplitudes: vec![1.0],
                floor: 0.2,
            }
            .to_atom(&domain, false)
        })
        .collect::<entrobar::Result<Vec<_>>>()?;
    let pop = Population::uniform(0.5, domain, atoms)?;
    let res = solve_barycenter(&pop, &SolverConfig::default())?;

    let g = build_g(&res.density, &res.potentials, &pop)?;
    let eig = g.eigenvalues();
    println!("G on {} nodes, symmetry defect {:.1e}", g.domain().len(), g.symmetry_defect());
    println!("smallest eigenvalues {:?}", &eig[..4]);
    println!("condition number {:.3e}", g.condition_number());
    Ok(())
}
