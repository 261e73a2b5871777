use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Atom, DensityGrid, Domain, GaussianMeasure};
use crate::error::{Error, Result};

/// Declarative description of one population atom, rendered onto a grid on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AtomSpec {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    /// `floor + Σ a_k exp(-(x - c_k)² / 2w_k²)` on a line, normalized.
    Bumps {
        centers: Vec<f64>,
        widths: Vec<f64>,
        amplitudes: Vec<f64>,
        floor: f64,
    },
    /// Product hat of half-width one grid step, the grid stand-in for a Dirac mass.
    Spike { at: Vec<f64> },
    /// Normalized indicator of the box `[lower, upper]`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Density CSV with the grid coordinates in the leading columns.
    File { path: PathBuf },
}

impl AtomSpec {
    pub fn gaussian_1d(mean: f64, variance: f64) -> Self {
        AtomSpec::Gaussian {
            mean: vec![mean],
            covariance: vec![vec![variance]],
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            AtomSpec::Gaussian { mean, .. } => Some(mean.len()),
            AtomSpec::Bumps { .. } => Some(1),
            AtomSpec::Spike { at } => Some(at.len()),
            AtomSpec::Uniform { lower, .. } => Some(lower.len()),
            AtomSpec::File { .. } => None,
        }
    }

    /// The Gaussian measure, if this atom is one.
    pub fn as_gaussian(&self) -> Result<Option<GaussianMeasure>> {
        match self {
            AtomSpec::Gaussian { mean, covariance } => {
                let d = mean.len();
                if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("covariance", "must be a square matrix matching the mean"));
                }
                let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
                Ok(Some(GaussianMeasure::new(DVector::from_column_slice(mean), cov)?))
            }
            _ => Ok(None),
        }
    }

    /// Largest `A` with `-D² log ν ≥ A`, when known in closed form.
    pub fn log_concavity(&self) -> Option<f64> {
        let g = self.as_gaussian().ok()??;
        let top = g.covariance().symmetric_eigenvalues().max();
        (top > 0.0).then(|| 1.0 / top)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AtomSpec::Gaussian { .. } => self.as_gaussian().map(|_| ()),
            AtomSpec::Bumps {
                centers,
                widths,
                amplitudes,
                floor,
            } => {
                if centers.len() != widths.len() || centers.len() != amplitudes.len() {
                    return Err(Error::invalid("bumps", "centers, widths and amplitudes differ in length"));
                }
                if widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::invalid("bumps.widths", "must be > 0"));
                }
                if amplitudes.iter().any(|a| !(*a >= 0.0)) || !(*floor >= 0.0) {
                    return Err(Error::invalid("bumps", "amplitudes and floor must be ≥ 0"));
                }
                Ok(())
            }
            AtomSpec::Uniform { lower, upper } => {
                if lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return Err(Error::invalid("uniform", "needs lower < upper on every axis"));
                }
                Ok(())
            }
            AtomSpec::Spike { .. } | AtomSpec::File { .. } => Ok(()),
        }
    }

    pub fn render(&self, domain: &Arc<Domain>) -> Result<DensityGrid> {
        self.validate()?;
        if let Some(d) = self.dim() {
            if d != domain.dim() {
                return Err(Error::invalid("atoms", "atom dimension does not match the domain"));
            }
        }
        match self {
            AtomSpec::Gaussian { .. } => {
                let g = self.as_gaussian()?.expect("gaussian variant");
                g.discretize(domain.clone())
            }
            AtomSpec::Bumps {
                centers,
                widths,
                amplitudes,
                floor,
            } => DensityGrid::from_fn(domain.clone(), |x| {
                floor
                    + centers
                        .iter()
                        .zip(widths)
                        .zip(amplitudes)
                        .map(|((c, w), a)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
                        .sum::<f64>()
            }),
            AtomSpec::Spike { at } => {
                let h = domain.spacing().to_vec();
                DensityGrid::from_fn(domain.clone(), |x| {
                    x.iter()
                        .zip(at)
                        .zip(&h)
                        .map(|((xi, c), hi)| {
                            let t = 1.0 - (xi - c).abs() / hi;
                            if t > 1e-9 {
                                t
                            } else {
                                0.0
                            }
                        })
                        .product()
                })
            }
            AtomSpec::Uniform { lower, upper } => {
                let tol = 1e-9 * domain.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
                DensityGrid::from_fn(domain.clone(), |x| {
                    let inside = x
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol);
                    f64::from(u8::from(inside))
                })
            }
            AtomSpec::File { path } => DensityGrid::load_csv(domain.clone(), path),
        }
    }

    /// A Gaussian atom stays exact when `gaussian` is set; everything else is rendered.
    pub fn to_atom(&self, domain: &Arc<Domain>, gaussian: bool) -> Result<Atom> {
        if gaussian {
            return self
                .as_gaussian()?
                .map(Atom::Gaussian)
                .ok_or_else(|| Error::invalid("atoms", "closed-form solver needs Gaussian atoms"));
        }
        Ok(Atom::Grid(self.render(domain)?))
    }

    /// Translation by `s`, exact for every analytic variant.
    pub fn shifted(&self, s: &[f64]) -> Result<Self> {
        let add = |v: &[f64]| -> Result<Vec<f64>> {
            if v.len() != s.len() {
                return Err(Error::invalid("shift", "dimension mismatch"));
            }
            Ok(v.iter().zip(s).map(|(a, b)| a + b).collect())
        };
        Ok(match self {
            AtomSpec::Gaussian { mean, covariance } => AtomSpec::Gaussian {
                mean: add(mean)?,
                covariance: covariance.clone(),
            },
            AtomSpec::Bumps {
                centers,
                widths,
                amplitudes,
                floor,
            } => {
                if s.len() != 1 {
                    return Err(Error::invalid("shift", "bumps live on a line"));
                }
                AtomSpec::Bumps {
                    centers: centers.iter().map(|c| c + s[0]).collect(),
                    widths: widths.clone(),
                    amplitudes: amplitudes.clone(),
                    floor: *floor,
                }
            }
            AtomSpec::Spike { at } => AtomSpec::Spike { at: add(at)? },
            AtomSpec::Uniform { lower, upper } => AtomSpec::Uniform {
                lower: add(lower)?,
                upper: add(upper)?,
            },
            AtomSpec::File { .. } => {
                return Err(Error::Unsupported("translating a density read from file".into()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_parses() {
        let d = Arc::new(Domain::interval(-2.0, 2.0, 41).unwrap());
        let spike = AtomSpec::Spike { at: vec![0.0] }.render(&d).unwrap();
        assert_eq!(spike.values().iter().filter(|v| **v > 0.0).count(), 1);
        let u = AtomSpec::Uniform {
            lower: vec![-1.0],
            upper: vec![1.0],
        }
        .render(&d)
        .unwrap();
        // the two edge cells carry half mass
        assert!((u.max_value() - 1.0 / 2.1).abs() < 1e-12);
        let spec: AtomSpec = toml::from_str("kind = \"bumps\"\ncenters = [0.0]\nwidths = [0.2]\namplitudes = [1.0]\nfloor = 0.1").unwrap();
        let b = spec.render(&d).unwrap();
        assert!(b.values().iter().all(|v| *v > 0.0));
        let moved = spec.shifted(&[0.5]).unwrap().render(&d).unwrap();
        let peak = |g: &DensityGrid| g.values().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak(&moved), peak(&b) + 5);
    }

    #[test]
    fn gaussian_helpers() {
        let g = AtomSpec::gaussian_1d(1.0, 0.25);
        assert_eq!(g.log_concavity(), Some(4.0));
        let d = Arc::new(Domain::interval(-2.0, 2.0, 41).unwrap());
        assert!(matches!(g.to_atom(&d, true).unwrap(), Atom::Gaussian(_)));
        assert!(AtomSpec::Spike { at: vec![0.0] }.to_atom(&d, true).is_err());
        let bad = AtomSpec::Gaussian {
            mean: vec![0.0, 0.0],
            covariance: vec![vec![1.0]],
        };
        assert!(bad.validate().is_err());
    }
}
