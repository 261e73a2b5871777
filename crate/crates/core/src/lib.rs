//! Entropic-Wasserstein barycenters: closed-form Gaussian solver, grid solver,
//! linearized operators and Monte-Carlo validation harness.

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod linma;
pub mod measures;
pub mod ot;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use measures::{Atom, AtomSpec, DensityGrid, Domain, DomainKind, DomainSpec, GaussianMeasure, Population};
pub use solver::{solve_barycenter, BarycenterResult, PotentialBackend, SolverConfig};
