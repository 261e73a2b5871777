use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{AtomSpec, Atom, Domain, Population};
use crate::solver::{solve_barycenter, SolverConfig};

/// `‖ν_±‖_∞` for the two uniform atoms.
pub const ATOM_SUP: f64 = 0.25;

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleRow {
    pub lambda: f64,
    pub max_density: f64,
    pub exceeds: bool,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub bound: f64,
    pub rows: Vec<CounterexampleRow>,
    /// Largest swept `λ` whose barycenter exceeds the bound, when the sweep also
    /// contains one that does not.
    pub crossing: Option<f64>,
}

/// `Ω = [-8,-4] ∪ [-1,1] ∪ [4,8]` with `ν_± = U(±[4, 8])`, weights ½.
pub fn counterexample_population(lambda: f64, points: usize) -> Result<Population> {
    let d = Arc::new(Domain::intervals(-8.0, 8.0, points, vec![[-8.0, -4.0], [-1.0, 1.0], [4.0, 8.0]])?);
    let atoms = [[-8.0, -4.0], [4.0, 8.0]]
        .iter()
        .map(|&[a, b]| {
            Ok(Atom::Grid(
                AtomSpec::Uniform {
                    lower: vec![a],
                    upper: vec![b],
                }
                .render(&d)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Population::uniform(lambda, d, atoms)
}

/// Sweeps `λ` on the non-convex example and records `max ρ̄` against `¼`.
pub fn counterexample(lambdas: &[f64], points: usize, cfg: &SolverConfig) -> Result<CounterexampleReport> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambdas", "sweep is empty"));
    }
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let pop = counterexample_population(lambda, points)?;
            let res = match solve_barycenter(&pop, cfg) {
                Err(Error::NotConverged { result }) => *result,
                other => other?,
            };
            let max_density = res.density.max_value();
            Ok(CounterexampleRow {
                lambda,
                max_density,
                exceeds: max_density > ATOM_SUP,
                converged: res.converged,
                iterations: res.iterations,
                final_residual: res.final_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossing = if rows.iter().any(|r| !r.exceeds) {
        rows.iter().filter(|r| r.exceeds).map(|r| r.lambda).reduce(f64::max)
    } else {
        None
    };
    Ok(CounterexampleReport {
        bound: ATOM_SUP,
        rows,
        crossing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_have_the_stated_height() {
        let pop = counterexample_population(1.0, 1601).unwrap();
        for (_, nu) in pop.grid_atoms().unwrap() {
            assert!((nu.max_value() - ATOM_SUP).abs() < 1e-12);
        }
        assert!(!pop.domain().is_convex());
    }
}
