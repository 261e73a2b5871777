//! Domains, densities, Gaussian measures and populations.

mod atom_spec;
mod density;
mod domain;
mod gaussian_measure;
mod population;

pub use atom_spec::AtomSpec;
pub use density::{read_grid_csv, write_grid_csv, DensityGrid, LOG_FLOOR};
pub use domain::{Domain, DomainKind, DomainSpec};
pub use gaussian_measure::{isotropic_moment, GaussianMeasure, SPD_TOL};
pub(crate) use gaussian_measure::validate_psd;
pub use population::{Atom, Population, WEIGHT_TOL};

use crate::error::{Error, Result};

/// `½ Σ p_i W₂²(ρ, ν_i) + λ Ent(ρ)` for a grid population.
pub fn objective(pop: &Population, rho: &DensityGrid) -> Result<f64> {
    if rho.domain() != pop.domain() {
        return Err(Error::invalid("rho", "density is not on the population grid"));
    }
    let mut transport = 0.0;
    for (w, nu) in pop.grid_atoms()? {
        transport += w * crate::ot::w2_squared(rho, nu)?;
    }
    Ok(0.5 * transport + pop.lambda() * rho.entropy())
}
