//! Damped Picard iteration on the self-consistency equation
//! `ρ̄ ∝ exp((Σ p_i φ_i - |x|²/2) / λ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{objective, DensityGrid, Domain, DomainKind, Population, LOG_FLOOR};
use crate::ot::{ot_1d, ot_discrete, potential_from_duals, PointCloud, Potential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialBackend {
    #[serde(rename = "exact-1d")]
    Exact1d,
    DiscreteLp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `∫|Ψ(ρ_k) - ρ_k| ≤ tol_l1`, where `Ψ` is the undamped update.
    pub tol_l1: f64,
    /// Largest weight given to the new log-density in the damped update.
    pub damping: f64,
    pub potential_backend: PotentialBackend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 20_000,
            tol_l1: 1e-10,
            damping: 0.7,
            potential_backend: PotentialBackend::Exact1d,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_l1 > 0.0 && self.tol_l1.is_finite()) {
            return Err(Error::invalid("solver.tol_l1", "must be > 0"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("solver.damping", "must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver.max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BarycenterResult {
    pub density: DensityGrid,
    /// `φ_ρ̄^{ν_i}`, one per atom, in population order.
    pub potentials: Vec<Potential>,
    pub iterations: usize,
    pub final_residual: f64,
    pub objective_value: f64,
    pub converged: bool,
    /// Accepted residuals, one per accepted step.
    pub residual_history: Vec<f64>,
}

/// Brenier potentials from `rho` to every atom, computed in parallel and
/// returned in atom order.
pub fn atom_potentials(
    rho: &DensityGrid,
    pop: &Population,
    backend: PotentialBackend,
) -> Result<Vec<Potential>> {
    let atoms = pop.grid_atoms()?;
    atoms
        .par_iter()
        .map(|(_, nu)| potential(rho, nu, backend))
        .collect()
}

fn potential(rho: &DensityGrid, nu: &DensityGrid, backend: PotentialBackend) -> Result<Potential> {
    Ok(potential_and_cost(rho, nu, backend)?.0)
}

/// Potential together with the backend's own `W₂²`.
fn potential_and_cost(
    rho: &DensityGrid,
    nu: &DensityGrid,
    backend: PotentialBackend,
) -> Result<(Potential, f64)> {
    match backend {
        PotentialBackend::Exact1d => {
            let (p, w2) = ot_1d(rho, nu)?;
            Ok((p, w2 * w2))
        }
        PotentialBackend::DiscreteLp => {
            let a = PointCloud::from_grid(rho);
            let mut b = PointCloud::from_grid(nu);
            b.rescale(a.total());
            let t = ot_discrete(&a, &b)?;
            Ok((potential_from_duals(&t, rho.domain_arc().clone())?, t.w2 * t.w2))
        }
    }
}

/// `(Σ p_i φ_i - |x|²/2) / λ` at every node.
pub fn gibbs_exponent(pop: &Population, potentials: &[Potential]) -> Vec<f64> {
    let d = pop.domain();
    let mut out: Vec<f64> = d.norms_squared().iter().map(|n| -0.5 * n).collect();
    for ((w, _), pot) in pop.atoms().iter().zip(potentials) {
        for (o, p) in out.iter_mut().zip(pot.phi()) {
            *o += w * p;
        }
    }
    let lambda = pop.lambda();
    out.iter_mut().for_each(|v| *v /= lambda);
    out
}

/// Undamped image `normalize(exp((Σ p_i φ_i - |x|²/2)/λ))`.
pub fn gibbs_density(pop: &Population, potentials: &[Potential]) -> Result<DensityGrid> {
    DensityGrid::from_log(pop.domain_arc().clone(), &gibbs_exponent(pop, potentials))
}

struct Iterate {
    rho: DensityGrid,
    pots: Vec<Potential>,
    image: DensityGrid,
    residual: f64,
    /// Objective with transport costs from the same backend.
    value: f64,
}

fn evaluate(rho: DensityGrid, pop: &Population, backend: PotentialBackend) -> Result<Iterate> {
    let atoms = pop.grid_atoms()?;
    let (pots, costs): (Vec<_>, Vec<_>) = atoms
        .par_iter()
        .map(|(_, nu)| potential_and_cost(&rho, nu, backend))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let image = gibbs_density(pop, &pots)?;
    let residual = rho.l1_distance(&image);
    let transport: f64 = atoms.iter().zip(&costs).map(|((w, _), c)| w * c).sum();
    let value = 0.5 * transport + pop.lambda() * rho.entropy();
    Ok(Iterate {
        rho,
        pots,
        image,
        residual,
        value,
    })
}

/// Geometric blend `ρ^{1-θ} ψ^θ`, renormalized.
fn blend(rho: &DensityGrid, image: &DensityGrid, theta: f64) -> Result<DensityGrid> {
    let logs: Vec<f64> = rho
        .log_values()
        .iter()
        .zip(image.log_values())
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    DensityGrid::from_log(rho.domain_arc().clone(), &logs)
}

/// Normalized mixture of the atoms with underflowed nodes lifted to [`LOG_FLOOR`].
pub fn initial_density(pop: &Population) -> Result<DensityGrid> {
    let mix = pop.mixture()?;
    let values = mix.values().iter().map(|v| v.max(LOG_FLOOR)).collect();
    DensityGrid::new(pop.domain_arc().clone(), values)
}

fn check_population(pop: &Population, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !pop.is_grid() {
        return Err(Error::invalid("atoms", "the grid solver needs grid atoms"));
    }
    let dim = pop.domain().dim();
    match cfg.potential_backend {
        PotentialBackend::Exact1d if dim != 1 => Err(Error::invalid(
            "solver.potential_backend",
            "exact-1d needs a one-dimensional domain",
        )),
        PotentialBackend::DiscreteLp if dim > 2 => Err(Error::Unsupported(format!(
            "grid barycenters in dimension {dim}"
        ))),
        _ => Ok(()),
    }
}

/// Entropic barycenter of a grid population, started from the atom mixture.
pub fn solve_barycenter(pop: &Population, cfg: &SolverConfig) -> Result<BarycenterResult> {
    check_population(pop, cfg)?;
    solve_from(pop, cfg, initial_density(pop)?)
}

/// As [`solve_barycenter`], started from `init`.
pub fn solve_barycenter_from(
    pop: &Population,
    cfg: &SolverConfig,
    init: &DensityGrid,
) -> Result<BarycenterResult> {
    check_population(pop, cfg)?;
    if init.domain() != pop.domain() {
        return Err(Error::invalid("init", "initial density is not on the population grid"));
    }
    let values = init.values().iter().map(|v| v.max(LOG_FLOOR)).collect();
    solve_from(pop, cfg, DensityGrid::new(pop.domain_arc().clone(), values)?)
}

fn solve_from(pop: &Population, cfg: &SolverConfig, rho0: DensityGrid) -> Result<BarycenterResult> {
    let backend = cfg.potential_backend;
    let mut cur = evaluate(rho0, pop, backend)?;
    let mut theta = cfg.damping;
    let mut iterations = 1;
    let mut history = vec![cur.residual];
    let mut stalled = false;

    while cur.residual > cfg.tol_l1 && !stalled && iterations < cfg.max_iters {
        let step = blend(&cur.rho, &cur.image, theta)?;
        let moved = step.l1_distance(&cur.rho);
        let cand = evaluate(step, pop, backend)?;
        iterations += 1;
        let accept = match backend {
            // a residual saturated at its maximum only moves by rounding, which
            // says nothing; there the objective decides
            PotentialBackend::Exact1d => {
                let noise = 1e-10 * cur.value.abs().max(1.0);
                cand.residual < cur.residual * (1.0 - 1e-12)
                    || cand.value < cur.value - 4.0 * f64::EPSILON * cur.value.abs()
                    || (cand.residual <= cur.residual && cand.value <= cur.value + noise)
                    || theta < 1e-8
            }
            // the LP map jumps across faces of the transport polytope, so its
            // residual need not vanish; descend on the objective instead
            PotentialBackend::DiscreteLp => {
                cand.value <= cur.value + 4.0 * f64::EPSILON * cur.value.abs()
            }
        };
        if accept {
            cur = cand;
            history.push(cur.residual);
            theta = (theta * 1.25).min(cfg.damping);
        } else {
            theta *= 0.5;
        }
        if backend == PotentialBackend::DiscreteLp && moved <= cfg.tol_l1 {
            stalled = true;
        }
    }

    let converged = cur.residual <= cfg.tol_l1 || stalled;
    let objective_value = objective(pop, &cur.rho)?;
    let result = BarycenterResult {
        density: cur.rho,
        potentials: cur.pots,
        iterations,
        final_residual: cur.residual,
        objective_value,
        converged,
        residual_history: history,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged {
            result: Box::new(result),
        })
    }
}

/// `∫|ρ̄ - normalize(exp((Σ p_i φ_i - |x|²/2)/λ))|` for the stored potentials.
pub fn fixed_point_residual(result: &BarycenterResult, pop: &Population) -> Result<f64> {
    Ok(result.density.l1_distance(&gibbs_density(pop, &result.potentials)?))
}

/// Oscillation of `log ρ̄ + (|x|²/2 - Σ p_i φ_i)/λ` over nodes where `ρ̄` exceeds
/// `rel_floor · max ρ̄`; zero at an exact fixed point.
pub fn log_consistency(result: &BarycenterResult, pop: &Population, rel_floor: f64) -> f64 {
    let expo = gibbs_exponent(pop, &result.potentials);
    let rho = result.density.values();
    let cut = rel_floor * result.density.max_value();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, (&r, e)) in rho.iter().zip(&expo).enumerate() {
        if pop.domain().is_active(i) && r > cut {
            let v = r.ln() - e;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (hi - lo).max(0.0)
}

/// Constant `C` in the gradient residual contract `C·h + 2·tol_l1/λ`.
pub const GRADIENT_RESIDUAL_C: f64 = 5.0;

/// Relative density below which a node is outside the bulk of `ρ̄`.
pub const BULK_FLOOR: f64 = 1e-6;

/// Bulk nodes whose stencil neighbours are active and also in the bulk, and
/// whose neighbours are not boundary nodes. The map has layers thinner than
/// one cell in the far tails and in the half cells at a wall, where its second
/// difference is not resolved by the grid.
pub(crate) fn interior_nodes(domain: &Domain, rho: &DensityGrid) -> Vec<usize> {
    let pts = domain.points();
    let cut = BULK_FLOOR * rho.max_value();
    let v = rho.values();
    (0..domain.len())
        .filter(|&i| {
            domain.is_active(i)
                && v[i] >= cut
                && (0..domain.dim()).all(|a| {
                    let j = domain.axis_index(i, a);
                    let s = domain.strides()[a];
                    j > 1
                        && j + 2 < pts[a]
                        && domain.is_active(i - 2 * s)
                        && domain.is_active(i - s)
                        && domain.is_active(i + s)
                        && domain.is_active(i + 2 * s)
                        && v[i - s] >= cut
                        && v[i + s] >= cut
                })
        })
        .collect()
}

/// `sup_x |x + λ ∇log ρ̄(x) - Σ p_i T_i(x)|` over bulk interior nodes, with central
/// differences for the gradient.
pub fn gradient_residual(result: &BarycenterResult, pop: &Population) -> f64 {
    let d = result.density.domain();
    let dim = d.dim();
    let logs = result.density.log_values();
    let lambda = pop.lambda();
    let weights = pop.weights();
    let mut worst: f64 = 0.0;
    for i in interior_nodes(d, &result.density) {
        let mut norm2 = 0.0;
        for a in 0..dim {
            let s = d.strides()[a];
            let h = d.spacing()[a];
            let g = (logs[i + s] - logs[i - s]) / (2.0 * h);
            let t: f64 = weights
                .iter()
                .zip(&result.potentials)
                .map(|(w, p)| w * p.grad_at(i)[a])
                .sum();
            norm2 += (d.coord(i, a) + lambda * g - t).powi(2);
        }
        worst = worst.max(norm2.sqrt());
    }
    worst
}

/// Right-hand side `C·h + 2·tol_l1/λ` of the gradient residual contract.
pub fn gradient_residual_bound(domain: &Domain, lambda: f64, tol_l1: f64) -> f64 {
    let h = domain.spacing().iter().cloned().fold(0.0, f64::max);
    GRADIENT_RESIDUAL_C * h + 2.0 * tol_l1 / lambda
}

/// `(E_ρ̄[X], Σ p_i E_{ν_i}[X])`; only meaningful on a full-space truncation.
pub fn mean_identity_check(result: &BarycenterResult, pop: &Population) -> Result<(Vec<f64>, Vec<f64>)> {
    if pop.domain().kind() != DomainKind::FullSpaceTruncation {
        return Err(Error::invalid(
            "domain.kind",
            "the mean identity holds on a full-space truncation only",
        ));
    }
    Ok((result.density.mean(), pop.expected_mean()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::measures::{Atom, GaussianMeasure};

    fn dom(r: f64, n: usize) -> Arc<Domain> {
        Arc::new(Domain::full_space_1d(r, n).unwrap())
    }

    fn gaussian_pop(lambda: f64, d: &Arc<Domain>, atoms: &[(f64, f64)]) -> Population {
        let atoms = atoms
            .iter()
            .map(|&(m, v)| Atom::Grid(GaussianMeasure::scalar(m, v).unwrap().discretize(d.clone()).unwrap()))
            .collect();
        Population::uniform(lambda, d.clone(), atoms).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.damping = 0.0;
        assert!(c.validate().is_err());
        c.damping = 0.5;
        c.tol_l1 = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_gaussian_atom_matches_scalar_fixed_point() {
        let d = dom(10.0, 1025);
        let pop = gaussian_pop(0.5, &d, &[(0.0, 1.0)]);
        let res = solve_barycenter(&pop, &SolverConfig::default()).unwrap();
        let s = crate::gaussian::scalar_barycenter_variance(0.5, &[1.0], &[1.0]);
        let var = res.density.expect(|x| x[0] * x[0]);
        assert!((var - s).abs() < 1e-3, "{var} vs {s}");
        assert!(fixed_point_residual(&res, &pop).unwrap() <= 2.0 * 1e-10);
    }

    #[test]
    fn translation_equivariance() {
        let d = dom(10.0, 801);
        let pop = gaussian_pop(0.4, &d, &[(-1.0, 0.5), (1.5, 0.8)]);
        let cfg = SolverConfig::default();
        let a = solve_barycenter(&pop, &cfg).unwrap();
        let b = solve_barycenter(&pop.shifted(&[0.75]).unwrap(), &cfg).unwrap();
        assert!((b.density.mean()[0] - a.density.mean()[0] - 0.75).abs() < 1e-3);
        let shifted = a.density.shift(&[0.75]).unwrap();
        assert!(shifted.sup_distance(&b.density) < 5e-3);
    }

    #[test]
    fn non_convergence_returns_best_iterate() {
        let d = dom(8.0, 257);
        let pop = gaussian_pop(0.3, &d, &[(-1.0, 0.5), (1.0, 0.5)]);
        let cfg = SolverConfig {
            max_iters: 3,
            ..SolverConfig::default()
        };
        match solve_barycenter(&pop, &cfg) {
            Err(Error::NotConverged { result }) => {
                assert!(!result.converged);
                assert_eq!(result.iterations, 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_gaussian_atoms_and_wrong_backend() {
        let d = dom(8.0, 65);
        let g = Atom::Gaussian(GaussianMeasure::scalar(0.0, 1.0).unwrap());
        let pop = Population::uniform(1.0, d.clone(), vec![g]).unwrap();
        assert!(solve_barycenter(&pop, &SolverConfig::default()).is_err());
        let d2 = Arc::new(Domain::full_space(vec![-1.0; 2], vec![1.0; 2], vec![5; 2]).unwrap());
        let u = Atom::Grid(DensityGrid::uniform(d2.clone()));
        let pop = Population::uniform(1.0, d2, vec![u]).unwrap();
        assert!(solve_barycenter(&pop, &SolverConfig::default()).is_err());
    }

    #[test]
    fn discrete_backend_in_two_dimensions() {
        let d = Arc::new(Domain::full_space(vec![-3.0; 2], vec![3.0; 2], vec![11; 2]).unwrap());
        let g = GaussianMeasure::isotropic(2, 0.5).unwrap();
        let nu = g.discretize(d.clone()).unwrap();
        let pop = Population::uniform(0.5, d.clone(), vec![Atom::Grid(nu)]).unwrap();
        let cfg = SolverConfig {
            potential_backend: PotentialBackend::DiscreteLp,
            tol_l1: 1e-8,
            ..SolverConfig::default()
        };
        let res = solve_barycenter(&pop, &cfg).unwrap();
        let m = res.density.mean();
        assert!(m[0].abs() < 1e-2 && m[1].abs() < 1e-2, "{m:?}");
        for (a, b) in [(0.3, 0.0), (0.0, -0.3), (0.2, 0.2)] {
            let values = (0..d.len())
                .map(|i| {
                    let x = d.node(i);
                    res.density.values()[i] * (1.0 + 0.05 * (a * x[0] + b * x[1]).tanh())
                })
                .collect();
            let bumped = DensityGrid::new(d.clone(), values).unwrap();
            assert!(res.objective_value <= objective(&pop, &bumped).unwrap() + 1e-6);
        }
    }
}
