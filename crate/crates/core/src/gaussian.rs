//! Bures–Wasserstein geometry and the Gaussian barycenter fixed point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::{validate_psd, GaussianMeasure, Population};

/// Eigenvalues below this (relative to the matrix scale) are treated as zero.
const EIG_ZERO: f64 = 1e-12;

/// Unique PSD square root through a symmetric eigendecomposition.
pub fn sqrt_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = validate_psd("matrix", s)?;
    Ok(sqrt_psd_unchecked(&s))
}

fn sqrt_psd_unchecked(s: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = s.amax().max(1.0);
    let eig = s.clone().symmetric_eigen();
    let vals = eig
        .eigenvalues
        .map(|v| if v <= EIG_ZERO * scale { 0.0 } else { v.sqrt() });
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&vals) * q.transpose();
    (&r + r.transpose()) * 0.5
}

fn inv_sqrt_pd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = s.amax().max(1.0);
    let eig = s.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= EIG_ZERO * scale {
        return Err(Error::invalid("covariance", "matrix is singular"));
    }
    let vals = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// `(S^{1/2} S_ν S^{1/2})^{1/2}` given `S^{1/2}`.
fn cross_root(s_half: &DMatrix<f64>, s_nu: &DMatrix<f64>) -> DMatrix<f64> {
    let m = s_half * s_nu * s_half;
    sqrt_psd_unchecked(&((&m + m.transpose()) * 0.5))
}

/// Linear optimal map `T` between `N(0, S)` and `N(0, S_ν)`, so that `T S T = S_ν`.
pub fn bures_map(s: &DMatrix<f64>, s_nu: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = validate_psd("S", s)?;
    let s_nu = validate_psd("S_nu", s_nu)?;
    if s.nrows() != s_nu.nrows() {
        return Err(Error::invalid("S_nu", "dimension mismatch"));
    }
    let inv = inv_sqrt_pd(&s)?;
    let half = sqrt_psd_unchecked(&s);
    let t = &inv * cross_root(&half, &s_nu) * &inv;
    Ok((&t + t.transpose()) * 0.5)
}

/// Bures–Wasserstein distance between two Gaussians.
pub fn w2_gaussian(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("gaussian", "dimension mismatch"));
    }
    let dm = (a.mean() - b.mean()).norm_squared();
    let half = sqrt_psd_unchecked(a.covariance());
    let cross = cross_root(&half, b.covariance()).trace();
    let cov = a.covariance().trace() + b.covariance().trace() - 2.0 * cross;
    Ok((dm + cov.max(0.0)).sqrt())
}

/// Fixed-point iteration settings for [`gaussian_barycenter_with`].
#[derive(Clone, Debug)]
pub struct GaussianSolverConfig {
    pub damping: f64,
    /// Iterations without residual improvement before divergence is declared.
    pub stall_limit: usize,
    pub max_iters: usize,
    /// Relative residual at which iteration stops early.
    pub target: f64,
    /// Relative residual the returned fixed point is guaranteed to satisfy.
    pub contract: f64,
}

impl Default for GaussianSolverConfig {
    fn default() -> Self {
        GaussianSolverConfig {
            damping: 0.5,
            stall_limit: 10_000,
            max_iters: 1_000_000,
            target: 1e-14,
            contract: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaussianBarycenter {
    pub measure: GaussianMeasure,
    pub iterations: usize,
    /// `‖S - Φ(S)‖_F / ‖S‖_F` at the returned iterate.
    pub relative_residual: f64,
    /// Frobenius distance between the fixed points reached from `λI` and from `αI`.
    pub restart_gap: f64,
    /// The `αI` restart result, kept only when it differs by more than `1e-8`.
    pub alternate: Option<DMatrix<f64>>,
    /// Upper bracket `α = 2λ + dσ²`.
    pub alpha: f64,
}

pub fn gaussian_barycenter(pop: &Population) -> Result<GaussianBarycenter> {
    gaussian_barycenter_with(pop, &GaussianSolverConfig::default())
}

/// Barycenter `N(m̄, S̄)` of a Gaussian population by damped Picard iteration on
/// `S ↦ λI + Σ p_i (S^{1/2} S_i S^{1/2})^{1/2}`, started from `λI`.
pub fn gaussian_barycenter_with(
    pop: &Population,
    cfg: &GaussianSolverConfig,
) -> Result<GaussianBarycenter> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::invalid("damping", "must lie in (0, 1]"));
    }
    let atoms = pop.gaussian_atoms()?;
    let d = pop.domain().dim();
    let lambda = pop.lambda();
    let mut mean = DVector::zeros(d);
    let mut avg_cov = DMatrix::zeros(d, d);
    for (w, g) in &atoms {
        mean += g.mean() * *w;
        avg_cov += g.covariance() * *w;
    }
    let sigma2 = avg_cov.symmetric_eigen().eigenvalues.max().max(0.0);
    let alpha = 2.0 * lambda + d as f64 * sigma2;
    let covs: Vec<(f64, &DMatrix<f64>)> = atoms.iter().map(|(w, g)| (*w, g.covariance())).collect();

    let start = DMatrix::identity(d, d) * lambda;
    let (s, iterations, residual) = picard(&covs, lambda, alpha, start, cfg)?;
    let (s_alt, _, _) = picard(&covs, lambda, alpha, DMatrix::identity(d, d) * alpha, cfg)?;
    let restart_gap = (&s - &s_alt).norm();

    Ok(GaussianBarycenter {
        measure: GaussianMeasure::new(mean, s)?,
        iterations,
        relative_residual: residual,
        restart_gap,
        alternate: (restart_gap > 1e-8).then_some(s_alt),
        alpha,
    })
}

/// `Φ(S) = λI + Σ p_i (S^{1/2} S_i S^{1/2})^{1/2}`.
pub fn fixed_point_map(covs: &[(f64, &DMatrix<f64>)], lambda: f64, s: &DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    let half = sqrt_psd_unchecked(s);
    let mut out = DMatrix::identity(d, d) * lambda;
    for (w, c) in covs {
        out += cross_root(&half, c) * *w;
    }
    out
}

fn picard(
    covs: &[(f64, &DMatrix<f64>)],
    lambda: f64,
    alpha: f64,
    mut s: DMatrix<f64>,
    cfg: &GaussianSolverConfig,
) -> Result<(DMatrix<f64>, usize, f64)> {
    let slack = 1e-9 * alpha.max(1.0);
    let mut best = f64::INFINITY;
    let mut best_s = s.clone();
    let mut since_best = 0usize;
    for it in 0..cfg.max_iters {
        let eig = s.clone().symmetric_eigen().eigenvalues;
        if eig.min() < lambda - slack || eig.max() > alpha + slack {
            return Err(Error::Divergence(format!(
                "iterate {it} left the bracket [{lambda}, {alpha}] (spectrum [{}, {}])",
                eig.min(),
                eig.max()
            )));
        }
        let phi = fixed_point_map(covs, lambda, &s);
        let rel = (&phi - &s).norm() / s.norm();
        if rel < best {
            best = rel;
            best_s = s.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if rel <= cfg.target {
            return Ok((s, it, rel));
        }
        // round-off floor reached
        if since_best >= 100 && best <= cfg.contract {
            return Ok((best_s, it, best));
        }
        if since_best >= cfg.stall_limit {
            return Err(Error::Divergence(format!(
                "residual stalled at {best:.3e} for {} iterations",
                cfg.stall_limit
            )));
        }
        s = &s * (1.0 - cfg.damping) + phi * cfg.damping;
        s = (&s + s.transpose()) * 0.5;
    }
    if best <= cfg.contract {
        return Ok((best_s, cfg.max_iters, best));
    }
    Err(Error::Divergence(format!(
        "no fixed point within {} iterations (residual {best:.3e})",
        cfg.max_iters
    )))
}

/// Scalar fixed point of `s = λ + √s · Σ p_i √s_i`, solved as a quadratic in `√s`.
pub fn scalar_barycenter_variance(lambda: f64, weights: &[f64], variances: &[f64]) -> f64 {
    let c: f64 = weights.iter().zip(variances).map(|(p, s)| p * s.sqrt()).sum();
    let r = 0.5 * (c + (c * c + 4.0 * lambda).sqrt());
    r * r
}

/// Barycenter covariance when all `S_i` are diagonal in a shared basis `Q`:
/// `S_i = Q diag(spectra_i) Qᵀ`.
pub fn commuting_barycenter(
    lambda: f64,
    weights: &[f64],
    q: &DMatrix<f64>,
    spectra: &[Vec<f64>],
) -> DMatrix<f64> {
    let d = q.nrows();
    let diag: Vec<f64> = (0..d)
        .map(|k| {
            let col: Vec<f64> = spectra.iter().map(|s| s[k]).collect();
            scalar_barycenter_variance(lambda, weights, &col)
        })
        .collect();
    q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose()
}

/// Relative residual `‖S - Φ(S)‖_F / ‖S‖_F` for a Gaussian population.
pub fn fixed_point_residual(pop: &Population, s: &DMatrix<f64>) -> Result<f64> {
    let atoms = pop.gaussian_atoms()?;
    let covs: Vec<(f64, &DMatrix<f64>)> = atoms.iter().map(|(w, g)| (*w, g.covariance())).collect();
    let phi = fixed_point_map(&covs, pop.lambda(), s);
    Ok((&phi - s).norm() / s.norm())
}
