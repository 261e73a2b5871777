use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::measures::density::check_order;
use crate::measures::{DensityGrid, Domain};

/// Tolerance for symmetry and eigenvalue clamping of covariances.
pub const SPD_TOL: f64 = 1e-12;

/// A (possibly degenerate) Gaussian `N(mean, covariance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRecord", into = "GaussianRecord")]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianRecord {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRecord> for GaussianMeasure {
    type Error = Error;

    fn try_from(r: GaussianRecord) -> Result<Self> {
        let d = r.mean.len();
        if r.covariance.len() != d || r.covariance.iter().any(|row| row.len() != d) {
            return Err(Error::invalid("covariance", format!("expected a {d}x{d} matrix")));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| r.covariance[i][j]);
        GaussianMeasure::new(DVector::from_vec(r.mean), cov)
    }
}

impl From<GaussianMeasure> for GaussianRecord {
    fn from(g: GaussianMeasure) -> Self {
        let d = g.dim();
        GaussianRecord {
            mean: g.mean.iter().cloned().collect(),
            covariance: (0..d)
                .map(|i| (0..d).map(|j| g.covariance[(i, j)]).collect())
                .collect(),
        }
    }
}

/// Symmetrizes `s` and clamps eigenvalues in `[-tol, 0)` to zero. Rejects asymmetric
/// input and eigenvalues below `-tol`, where `tol` is relative to `max(1, |s|)`.
pub(crate) fn validate_psd(field: &str, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(Error::invalid(field, "matrix is not square"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(field, "non-finite entry"));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > SPD_TOL * scale {
        return Err(Error::invalid(field, format!("not symmetric (asymmetry {asym:.3e})")));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -SPD_TOL * scale {
        return Err(Error::invalid(field, format!("negative eigenvalue {min:.3e}")));
    }
    if min < 0.0 {
        let vals = eig.eigenvalues.map(|v| v.max(0.0));
        let q = &eig.eigenvectors;
        return Ok(q * DMatrix::from_diagonal(&vals) * q.transpose());
    }
    Ok(sym)
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::invalid("covariance", "dimension does not match mean"));
        }
        if mean.is_empty() {
            return Err(Error::invalid("mean", "dimension must be at least 1"));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean", "non-finite entry"));
        }
        let covariance = validate_psd("covariance", &covariance)?;
        Ok(GaussianMeasure { mean, covariance })
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    /// Centered `N(0, variance · I)`.
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::new(
            DVector::zeros(dim),
            DMatrix::identity(dim, dim) * variance,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn second_moment(&self) -> f64 {
        self.covariance.trace() + self.mean.norm_squared()
    }

    /// `E|X|^p`. Closed forms for `p ∈ {2, 4}` and for centered isotropic
    /// Gaussians; one-dimensional quadrature otherwise.
    pub fn p_moment(&self, p: f64) -> Result<f64> {
        check_order(p)?;
        let d = self.dim();
        let m2 = self.mean.norm_squared();
        let tr = self.covariance.trace();
        if p == 2.0 {
            return Ok(tr + m2);
        }
        if p == 4.0 {
            let s = &self.covariance;
            let msm = (self.mean.transpose() * s * &self.mean)[(0, 0)];
            let tr_s2 = (s * s).trace();
            return Ok(m2 * m2 + 4.0 * msm + tr * tr + 2.0 * tr_s2 + 2.0 * m2 * tr);
        }
        let iso = self.covariance[(0, 0)];
        let is_iso = (&self.covariance - DMatrix::identity(d, d) * iso).amax() <= SPD_TOL * iso.max(1.0);
        if m2 == 0.0 && is_iso {
            if iso == 0.0 {
                return Ok(0.0);
            }
            return Ok(isotropic_moment(d, iso, p));
        }
        if d == 1 {
            return Ok(scalar_abs_moment(self.mean[0], iso.sqrt(), p));
        }
        Err(Error::Unsupported(format!(
            "moment of order {p} for a non-isotropic {d}-dimensional Gaussian"
        )))
    }

    pub fn shift(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.dim() {
            return Err(Error::invalid("shift", "dimension mismatch"));
        }
        Ok(GaussianMeasure {
            mean: &self.mean + DVector::from_column_slice(s),
            covariance: self.covariance.clone(),
        })
    }

    /// Conjugation `x ↦ Q x` by a square matrix.
    pub fn transform(&self, q: &DMatrix<f64>) -> Result<Self> {
        Self::new(q * &self.mean, q * &self.covariance * q.transpose())
    }

    /// Log-density; fails when the covariance is singular.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let chol = self
            .covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DegenerateDensity("singular covariance has no density".into()))?;
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = chol.l().solve_lower_triangular(&diff).expect("triangular solve");
        let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let d = self.dim() as f64;
        Ok(-0.5 * (z.norm_squared() + log_det + d * (2.0 * std::f64::consts::PI).ln()))
    }

    /// Samples the density at the nodes of `domain` and renormalizes.
    pub fn discretize(&self, domain: Arc<Domain>) -> Result<DensityGrid> {
        if domain.dim() != self.dim() {
            return Err(Error::invalid("domain", "dimension does not match Gaussian"));
        }
        let logs: Vec<f64> = (0..domain.len())
            .map(|i| self.log_pdf(&domain.node(i)))
            .collect::<Result<_>>()?;
        DensityGrid::from_log(domain, &logs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `E|X|^p` for `X ~ N(0, s I_d)`.
pub fn isotropic_moment(d: usize, s: f64, p: f64) -> f64 {
    let d = d as f64;
    (2.0 * s).powf(p / 2.0) * (ln_gamma((d + p) / 2.0) - ln_gamma(d / 2.0)).exp()
}

fn scalar_abs_moment(m: f64, sigma: f64, p: f64) -> f64 {
    if sigma == 0.0 {
        return m.abs().powf(p);
    }
    // Simpson on the standardized variable over ±40σ
    let n = 40_000usize;
    let (a, b) = (-40.0, 40.0);
    let h = (b - a) / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let f = |z: f64| (m + sigma * z).abs().powf(p) * norm * (-0.5 * z * z).exp();
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let z = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_moments() {
        let g = GaussianMeasure::isotropic(1, 0.5).unwrap();
        assert!((g.second_moment() - 0.5).abs() < 1e-15);
        let g = GaussianMeasure::scalar(0.0, 1.0).unwrap();
        assert!((g.p_moment(4.0).unwrap() - 3.0).abs() < 1e-14);
        let g = GaussianMeasure::isotropic(2, 0.25).unwrap();
        assert!((g.p_moment(2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((isotropic_moment(2, 0.25, 2.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fourth_moment_with_mean_matches_quadrature() {
        let g = GaussianMeasure::scalar(0.7, 1.3).unwrap();
        let q = scalar_abs_moment(0.7, 1.3f64.sqrt(), 4.0);
        assert!((g.p_moment(4.0).unwrap() - q).abs() < 1e-9);
    }

    #[test]
    fn odd_moment_of_shifted_gaussian() {
        // E|X|^1 for N(m, 1) = sqrt(2/pi) e^{-m^2/2} + m (1 - 2 Phi(-m))
        let m: f64 = 0.4;
        let g = GaussianMeasure::scalar(m, 1.0).unwrap();
        let phi = 0.5 * statrs::function::erf::erfc(m / 2f64.sqrt());
        let exact = (2.0 / std::f64::consts::PI).sqrt() * (-m * m / 2.0).exp() + m * (1.0 - 2.0 * phi);
        assert!((g.p_moment(1.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianMeasure::new(DVector::zeros(2), asym).is_err());
        let neg = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(GaussianMeasure::new(DVector::zeros(1), neg).is_err());
        let tiny = DMatrix::from_row_slice(1, 1, &[-1e-14]);
        let g = GaussianMeasure::new(DVector::zeros(1), tiny).unwrap();
        assert_eq!(g.covariance()[(0, 0)], 0.0);
    }

    #[test]
    fn json_round_trip() {
        let g = GaussianMeasure::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let s = g.to_json().unwrap();
        assert!(s.contains("\"covariance\""));
        assert_eq!(GaussianMeasure::from_json(&s).unwrap(), g);
    }

    #[test]
    fn shift_moves_mean_only() {
        let g = GaussianMeasure::scalar(0.0, 2.0).unwrap();
        let s = g.shift(&[1.5]).unwrap();
        assert_eq!(s.mean()[0], 1.5);
        assert_eq!(s.covariance(), g.covariance());
    }
}
