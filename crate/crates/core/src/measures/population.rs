use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{DensityGrid, Domain, GaussianMeasure};

/// Relative tolerance on `Σ p_i = 1` before renormalization.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    Grid(DensityGrid),
    Gaussian(GaussianMeasure),
}

impl Atom {
    pub fn dim(&self) -> usize {
        match self {
            Atom::Grid(g) => g.dim(),
            Atom::Gaussian(g) => g.dim(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Atom::Grid(g) => g.mean(),
            Atom::Gaussian(g) => g.mean().iter().cloned().collect(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Atom::Grid(g) => g.second_moment(),
            Atom::Gaussian(g) => g.second_moment(),
        }
    }

    pub fn p_moment(&self, p: f64) -> Result<f64> {
        match self {
            Atom::Grid(g) => g.p_moment(p),
            Atom::Gaussian(g) => g.p_moment(p),
        }
    }

    pub fn shift(&self, s: &[f64]) -> Result<Atom> {
        Ok(match self {
            Atom::Grid(g) => Atom::Grid(g.shift(s)?),
            Atom::Gaussian(g) => Atom::Gaussian(g.shift(s)?),
        })
    }

    pub fn as_grid(&self) -> Option<&DensityGrid> {
        match self {
            Atom::Grid(g) => Some(g),
            Atom::Gaussian(_) => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianMeasure> {
        match self {
            Atom::Gaussian(g) => Some(g),
            Atom::Grid(_) => None,
        }
    }
}

impl From<DensityGrid> for Atom {
    fn from(g: DensityGrid) -> Self {
        Atom::Grid(g)
    }
}

impl From<GaussianMeasure> for Atom {
    fn from(g: GaussianMeasure) -> Self {
        Atom::Gaussian(g)
    }
}

/// A finitely supported law `P = Σ p_i δ_{ν_i}` together with the entropy weight
/// `λ` and the domain `Ω`.
#[derive(Clone, Debug)]
pub struct Population {
    lambda: f64,
    domain: Arc<Domain>,
    atoms: Vec<(f64, Atom)>,
}

impl Population {
    pub fn new(lambda: f64, domain: Arc<Domain>, atoms: Vec<(f64, Atom)>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "population is empty"));
        }
        let mut total = 0.0;
        for (k, (w, a)) in atoms.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::invalid("weights", format!("weight {k} must be > 0, got {w}")));
            }
            if a.dim() != domain.dim() {
                return Err(Error::invalid("atoms", format!("atom {k} has the wrong dimension")));
            }
            if let Atom::Grid(g) = a {
                if g.domain() != &*domain {
                    return Err(Error::invalid("atoms", format!("atom {k} lives on a different grid")));
                }
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_TOL * atoms.len() as f64 {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        let grid = matches!(atoms[0].1, Atom::Grid(_));
        if atoms.iter().any(|(_, a)| matches!(a, Atom::Grid(_)) != grid) {
            return Err(Error::invalid("atoms", "mixing grid and Gaussian atoms"));
        }
        let atoms = atoms.into_iter().map(|(w, a)| (w / total, a)).collect();
        Ok(Population { lambda, domain, atoms })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(lambda: f64, domain: Arc<Domain>, atoms: Vec<Atom>) -> Result<Self> {
        let n = atoms.len() as f64;
        Self::new(lambda, domain, atoms.into_iter().map(|a| (1.0 / n, a)).collect())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn atoms(&self) -> &[(f64, Atom)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|(w, _)| *w).collect()
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.atoms[0].1, Atom::Grid(_))
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.domain.clone(), self.atoms.clone())
    }

    /// Weighted grid atoms; fails on a Gaussian population.
    pub fn grid_atoms(&self) -> Result<Vec<(f64, &DensityGrid)>> {
        self.atoms
            .iter()
            .map(|(w, a)| {
                a.as_grid()
                    .map(|g| (*w, g))
                    .ok_or_else(|| Error::invalid("atoms", "expected grid atoms"))
            })
            .collect()
    }

    pub fn gaussian_atoms(&self) -> Result<Vec<(f64, &GaussianMeasure)>> {
        self.atoms
            .iter()
            .map(|(w, a)| {
                a.as_gaussian()
                    .map(|g| (*w, g))
                    .ok_or_else(|| Error::invalid("atoms", "expected Gaussian atoms"))
            })
            .collect()
    }

    /// Replaces Gaussian atoms by their discretizations on the population grid.
    pub fn discretized(&self) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|(w, a)| {
                Ok((
                    *w,
                    match a {
                        Atom::Grid(g) => Atom::Grid(g.clone()),
                        Atom::Gaussian(g) => Atom::Grid(g.discretize(self.domain.clone())?),
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.lambda, self.domain.clone(), atoms)
    }

    /// Translates every atom by `s`.
    pub fn shifted(&self, s: &[f64]) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|(w, a)| Ok((*w, a.shift(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.lambda, self.domain.clone(), atoms)
    }

    /// `Σ p_i m_p(ν_i)`.
    pub fn expected_moment(&self, p: f64) -> Result<f64> {
        self.atoms
            .iter()
            .map(|(w, a)| Ok(w * a.p_moment(p)?))
            .sum()
    }

    /// `Σ p_i E_{ν_i}[X]`.
    pub fn expected_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.dim()];
        for (w, a) in &self.atoms {
            for (o, m) in out.iter_mut().zip(a.mean()) {
                *o += w * m;
            }
        }
        out
    }

    /// Normalized mixture `Σ p_i ν_i` of grid atoms.
    pub fn mixture(&self) -> Result<DensityGrid> {
        DensityGrid::mixture(&self.grid_atoms()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> Arc<Domain> {
        Arc::new(Domain::interval(-4.0, 4.0, 81).unwrap())
    }

    #[test]
    fn validates_lambda_and_weights() {
        let g = Atom::Gaussian(GaussianMeasure::scalar(0.0, 1.0).unwrap());
        assert!(Population::new(0.0, dom(), vec![(1.0, g.clone())]).is_err());
        assert!(Population::new(1.0, dom(), vec![(0.6, g.clone())]).is_err());
        assert!(Population::new(1.0, dom(), vec![(-1.0, g.clone()), (2.0, g.clone())]).is_err());
        assert!(Population::new(1.0, dom(), vec![]).is_err());
        let u = Atom::Grid(DensityGrid::uniform(dom()));
        assert!(Population::new(1.0, dom(), vec![(0.5, g), (0.5, u)]).is_err());
    }

    #[test]
    fn expected_quantities() {
        let a = Atom::Gaussian(GaussianMeasure::scalar(-1.0, 0.5).unwrap());
        let b = Atom::Gaussian(GaussianMeasure::scalar(3.0, 0.5).unwrap());
        let p = Population::uniform(0.3, dom(), vec![a, b]).unwrap();
        assert_eq!(p.expected_mean(), vec![1.0]);
        assert!((p.expected_moment(2.0).unwrap() - (0.5 + 5.0)).abs() < 1e-14);
    }

    #[test]
    fn discretized_population_is_grid() {
        let a = Atom::Gaussian(GaussianMeasure::scalar(0.0, 0.5).unwrap());
        let p = Population::uniform(0.3, dom(), vec![a]).unwrap().discretized().unwrap();
        assert!(p.is_grid());
        assert!((p.mixture().unwrap().mass() - 1.0).abs() < 1e-12);
    }
}
