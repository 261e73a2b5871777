//! Exact optimal transport: quantile coupling in 1D, network simplex for point clouds.

mod discrete;
mod one_d;
mod simplex;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub use discrete::{ot_discrete, potential_from_duals, DiscreteTransport, PointCloud, MAX_POINTS};
pub use one_d::{ot_1d, w2_squared_1d};

use crate::error::{Error, Result};
use crate::measures::{write_grid_csv, DensityGrid, Domain};

/// A Brenier potential `φ` on a grid together with its map `T = ∇φ`.
///
/// `φ` has zero quadrature mean over the domain.
#[derive(Clone, Debug)]
pub struct Potential {
    domain: Arc<Domain>,
    phi: Vec<f64>,
    grad: Vec<f64>,
}

impl Potential {
    /// Assembles a potential and re-centers `phi` to zero mean. `grad` is node-major,
    /// `dim` entries per node.
    pub fn new(domain: Arc<Domain>, mut phi: Vec<f64>, grad: Vec<f64>) -> Result<Self> {
        if phi.len() != domain.len() || grad.len() != domain.len() * domain.dim() {
            return Err(Error::invalid("potential", "length does not match the grid"));
        }
        domain.center(&mut phi);
        Ok(Potential { domain, phi, grad })
    }

    /// `φ(x) = |x|²/2` with the identity map.
    pub fn identity(domain: Arc<Domain>) -> Self {
        let phi = domain.norms_squared().iter().map(|v| 0.5 * v).collect();
        let grad = (0..domain.len()).flat_map(|i| domain.node(i)).collect();
        Self::new(domain, phi, grad).expect("lengths match")
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Flattened map values, `dim` entries per node.
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_at(&self, i: usize) -> &[f64] {
        let d = self.domain.dim();
        &self.grad[i * d..(i + 1) * d]
    }

    /// Kantorovich potential `u = |x|²/2 - φ`.
    pub fn kantorovich(&self) -> Vec<f64> {
        self.domain
            .norms_squared()
            .iter()
            .zip(&self.phi)
            .map(|(n, p)| 0.5 * n - p)
            .collect()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_grid_csv(&self.domain, "phi", &self.phi, w)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Squared Wasserstein distance between two grid densities: exact quantile
/// integral in 1D, network simplex on the active nodes in 2D.
pub fn w2_squared(rho: &DensityGrid, nu: &DensityGrid) -> Result<f64> {
    match rho.dim() {
        1 => w2_squared_1d(rho, nu),
        2 => {
            let a = PointCloud::from_grid(rho);
            let mut b = PointCloud::from_grid(nu);
            b.rescale(a.total());
            Ok(ot_discrete(&a, &b)?.w2.powi(2))
        }
        d => Err(Error::Unsupported(format!("transport in dimension {d}"))),
    }
}
