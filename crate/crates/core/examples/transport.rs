//! Exact transport on the line and network-simplex transport between point clouds.

use std::sync::Arc;

use entrobar::ot::{ot_1d, ot_discrete, PointCloud};
use entrobar::{Domain, GaussianMeasure};

fn main() -> entrobar::Result<()> {
    let line = Arc::new(Domain::full_space_1d(8.0, 1001)?);
    let rho = GaussianMeasure::scalar(0.0, 1.0)?.discretize(line.clone())?;
    let nu = GaussianMeasure::scalar(1.0, 4.0)?.discretize(line.clone())?;
    let (pot, w2) = ot_1d(&rho, &nu)?;
    let mid = line.len() / 2;
    println!("1D: W2 = {w2:.5} (exact {:.5}), T(0) = {:.4}", 2f64.sqrt(), pot.grad()[mid]);

    let a = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0.5, 0.25, 0.25])?;
    let b = PointCloud::new(2, vec![2.0, 2.0, 3.0, 2.0], vec![0.5, 0.5])?;
    let t = ot_discrete(&a, &b)?;
    println!("2D: W2 = {:.5} after {} pivots", t.w2, t.pivots);
    for (i, j, m) in &t.plan {
        println!("  {i} -> {j}: {m:.3}");
    }
    println!("  dual value {:.6}, primal {:.6}", t.dual_value(&a), t.cost);
    Ok(())
}
