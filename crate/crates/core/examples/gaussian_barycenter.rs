//! Closed-form barycenter of two planar Gaussians.

use std::sync::Arc;

use entrobar::gaussian::{gaussian_barycenter, w2_gaussian};
use entrobar::{Atom, Domain, GaussianMeasure, Population};
use nalgebra::{dmatrix, dvector};

fn main() -> entrobar::Result<()> {
    let domain = Arc::new(Domain::full_space(vec![-6.0; 2], vec![6.0; 2], vec![2, 2])?);
    let a = GaussianMeasure::new(dvector![-1.0, 0.0], dmatrix![1.0, 0.3; 0.3, 0.5])?;
    let b = GaussianMeasure::new(dvector![1.0, 0.5], dmatrix![0.4, -0.1; -0.1, 1.2])?;
    let pop = Population::uniform(0.2, domain, vec![Atom::Gaussian(a.clone()), Atom::Gaussian(b.clone())])?;

    let bary = gaussian_barycenter(&pop)?;
    println!("mean       {:?}", bary.measure.mean().as_slice());
    println!("covariance {}", bary.measure.covariance());
    println!("{} iterations, relative residual {:.1e}", bary.iterations, bary.relative_residual);
    println!("W2 to atoms: {:.4} {:.4}", w2_gaussian(&bary.measure, &a)?, w2_gaussian(&bary.measure, &b)?);
    Ok(())
}
