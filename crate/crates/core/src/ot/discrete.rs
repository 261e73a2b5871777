use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{DensityGrid, Domain};
use crate::ot::simplex;
use crate::ot::Potential;

/// Largest number of points accepted on either side of a discrete problem.
pub const MAX_POINTS: usize = 4096;

/// Weighted points in `R^d`, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    /// Grid node of each point, when built from a grid.
    nodes: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != dim * weights.len() {
            return Err(Error::invalid("cloud", "coordinate count does not match weights"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("cloud", "weights must be finite and nonnegative"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cloud", "non-finite coordinate"));
        }
        Ok(PointCloud {
            dim,
            coords,
            weights,
            nodes: None,
        })
    }

    /// Quadrature masses `w_k ρ_k` at the nodes where they are positive.
    pub fn from_grid(g: &DensityGrid) -> Self {
        let d = g.domain();
        let dim = d.dim();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut nodes = Vec::new();
        for i in 0..d.len() {
            let mass = d.weights()[i] * g.values()[i];
            if mass > 0.0 {
                coords.extend(d.node(i));
                weights.push(mass);
                nodes.push(i);
            }
        }
        PointCloud {
            dim,
            coords,
            weights,
            nodes: Some(nodes),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> Option<&[usize]> {
        self.nodes.as_deref()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Scales the weights to sum to `total`.
    pub fn rescale(&mut self, total: f64) {
        let s = total / self.total();
        self.weights.iter_mut().for_each(|w| *w *= s);
    }
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
}

/// Optimal coupling of two point clouds for the cost `|x - y|²/2`.
#[derive(Clone, Debug)]
pub struct DiscreteTransport {
    /// `(i, j, mass)` triplets with positive mass.
    pub plan: Vec<(usize, usize, f64)>,
    /// Source duals.
    pub u: Vec<f64>,
    /// Target duals; `u_i + v_j ≤ |x_i - y_j|²/2` with equality on the plan.
    pub v: Vec<f64>,
    /// Primal value `Σ γ_ij |x_i - y_j|²/2`.
    pub cost: f64,
    pub w2: f64,
    pub pivots: usize,
    target: PointCloud,
}

impl DiscreteTransport {
    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    /// `Σ a_i u_i + Σ b_j v_j`.
    pub fn dual_value(&self, source: &PointCloud) -> f64 {
        let a: f64 = source.weights().iter().zip(&self.u).map(|(w, u)| w * u).sum();
        let b: f64 = self.target.weights().iter().zip(&self.v).map(|(w, v)| w * v).sum();
        a + b
    }

    pub fn write_plan_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "i,j,mass")?;
        for (i, j, m) in &self.plan {
            writeln!(w, "{i},{j},{m:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact discrete optimal transport by network simplex.
pub fn ot_discrete(mu: &PointCloud, nu: &PointCloud) -> Result<DiscreteTransport> {
    if mu.dim != nu.dim {
        return Err(Error::invalid("cloud", "dimension mismatch"));
    }
    if mu.len() > MAX_POINTS || nu.len() > MAX_POINTS {
        return Err(Error::SizeOverflow {
            sources: mu.len(),
            sinks: nu.len(),
            limit: MAX_POINTS,
        });
    }
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::Infeasible("empty point cloud".into()));
    }
    let (ta, tb) = (mu.total(), nu.total());
    if (ta - tb).abs() > 1e-12 * ta.max(tb).max(1.0) {
        return Err(Error::Infeasible(format!("total masses differ: {ta} vs {tb}")));
    }
    let cost = |i: usize, j: usize| half_sq_dist(mu.point(i), nu.point(j));
    let sol = simplex::solve(&mu.weights, &nu.weights, &cost);
    if sol.artificial_flow > 1e-12 * ta.max(1.0) {
        return Err(Error::Infeasible(format!(
            "{:.3e} mass left on artificial edges",
            sol.artificial_flow
        )));
    }
    let n = mu.len();
    let mut u: Vec<f64> = sol.potentials[..n].to_vec();
    let mut v: Vec<f64> = sol.potentials[n..n + nu.len()].iter().map(|p| -p).collect();
    // balance the additive freedom between the two sides
    let su: f64 = mu.weights.iter().zip(&u).map(|(w, x)| w * x).sum();
    let sv: f64 = nu.weights.iter().zip(&v).map(|(w, x)| w * x).sum();
    let shift = 0.5 * (su - sv) / ta;
    u.iter_mut().for_each(|x| *x -= shift);
    v.iter_mut().for_each(|x| *x += shift);

    let primal: f64 = sol.plan.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
    Ok(DiscreteTransport {
        plan: sol.plan,
        u,
        v,
        cost: primal,
        w2: (2.0 * primal.max(0.0) / ta).sqrt(),
        pivots: sol.pivots,
        target: nu.clone(),
    })
}

/// Convex potential on the grid from the target duals through the c-transform
/// `φ(x) = max_j (x·y_j - |y_j|²/2 + v_j)`, with map `∇φ(x) = y_{argmax}`.
pub fn potential_from_duals(ot: &DiscreteTransport, domain: Arc<Domain>) -> Result<Potential> {
    let cloud = &ot.target;
    if cloud.dim != domain.dim() {
        return Err(Error::invalid("domain", "dimension does not match the transport"));
    }
    let dim = domain.dim();
    let offsets: Vec<f64> = (0..cloud.len())
        .map(|j| {
            let y = cloud.point(j);
            ot.v[j] - 0.5 * y.iter().map(|c| c * c).sum::<f64>()
        })
        .collect();
    let mut phi = vec![0.0; domain.len()];
    let mut grad = vec![0.0; domain.len() * dim];
    let mut x = vec![0.0; dim];
    for i in 0..domain.len() {
        domain.node_into(i, &mut x);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (j, off) in offsets.iter().enumerate() {
            let y = cloud.point(j);
            let val = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + off;
            if val > best {
                best = val;
                arg = j;
            }
        }
        phi[i] = best;
        grad[i * dim..(i + 1) * dim].copy_from_slice(cloud.point(arg));
    }
    Potential::new(domain, phi, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GaussianMeasure;
    use crate::ot::ot_1d;

    fn cloud1(points: &[f64], weights: &[f64]) -> PointCloud {
        PointCloud::new(1, points.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn identical_clouds() {
        let a = cloud1(&[0.0, 1.0, 2.5], &[0.2, 0.5, 0.3]);
        let t = ot_discrete(&a, &a).unwrap();
        assert!(t.w2 < 1e-12);
        assert!(t.plan.iter().all(|&(i, j, _)| i == j));
    }

    #[test]
    fn two_point_monotone_matching() {
        let a = cloud1(&[0.0, 1.0], &[0.5, 0.5]);
        let b = cloud1(&[2.0, 3.0], &[0.5, 0.5]);
        let t = ot_discrete(&a, &b).unwrap();
        // brute force over the two matchings
        let straight: f64 = 0.5 * 4.0 + 0.5 * 4.0;
        let crossed = 0.5 * 9.0 + 0.5 * 1.0;
        assert!((t.w2.powi(2) - straight.min(crossed)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = cloud1(&[0.0], &[1.0]);
        let b = cloud1(&[0.0], &[0.5]);
        assert!(matches!(ot_discrete(&a, &b), Err(Error::Infeasible(_))));
        let big = cloud1(&vec![0.0; MAX_POINTS + 1], &vec![1.0; MAX_POINTS + 1]);
        assert!(matches!(ot_discrete(&big, &big), Err(Error::SizeOverflow { .. })));
    }

    #[test]
    fn strong_duality_and_marginals() {
        let xs: Vec<f64> = (0..40).map(|k| (k as f64 * 0.77).sin() * 3.0).collect();
        let ys: Vec<f64> = (0..50).map(|k| (k as f64 * 1.31).cos() * 2.0 + 0.5).collect();
        let wa: Vec<f64> = (0..40).map(|k| 1.0 + (k % 3) as f64).collect();
        let wb: Vec<f64> = (0..50).map(|k| 1.0 + (k % 4) as f64).collect();
        let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
        let a = cloud1(&xs, &wa.iter().map(|w| w / sa).collect::<Vec<_>>());
        let b = cloud1(&ys, &wb.iter().map(|w| w / sb).collect::<Vec<_>>());
        let t = ot_discrete(&a, &b).unwrap();
        assert!((t.cost - t.dual_value(&a)).abs() <= 1e-9 * (1.0 + t.cost));
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, f) in &t.plan {
            rows[i] += f;
            cols[j] += f;
            let c = half_sq_dist(a.point(i), b.point(j));
            assert!((c - t.u[i] - t.v[j]).abs() < 1e-9);
        }
        for (r, w) in rows.iter().zip(a.weights()) {
            assert!((r - w).abs() < 1e-9);
        }
        for (c, w) in cols.iter().zip(b.weights()) {
            assert!((c - w).abs() < 1e-9);
        }
        for i in 0..a.len() {
            for j in 0..b.len() {
                assert!(t.u[i] + t.v[j] <= half_sq_dist(a.point(i), b.point(j)) + 1e-9);
            }
        }
    }

    #[test]
    fn agrees_with_quantile_transport_in_1d() {
        let d = Arc::new(Domain::interval(-5.0, 5.0, 201).unwrap());
        let h = d.h();
        let rho = GaussianMeasure::scalar(-0.5, 0.6).unwrap().discretize(d.clone()).unwrap();
        let nu = GaussianMeasure::scalar(1.0, 1.2).unwrap().discretize(d.clone()).unwrap();
        let a = PointCloud::from_grid(&rho);
        let mut b = PointCloud::from_grid(&nu);
        b.rescale(a.total());
        let t = ot_discrete(&a, &b).unwrap();
        let (pot, w2) = ot_1d(&rho, &nu).unwrap();
        assert!((t.w2 - w2).abs() <= 2.0 * h);

        let lp = potential_from_duals(&t, d.clone()).unwrap();
        let err = lp
            .phi()
            .iter()
            .zip(pot.phi())
            .zip(rho.values())
            .filter(|(_, &r)| r > 1e-3)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 20.0 * h, "sup error {err}");
        assert!(lp.grad().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn translation_potential_is_linear_plus_quadratic() {
        let d = Arc::new(Domain::interval(-4.0, 4.0, 81).unwrap());
        let pts: Vec<f64> = d.xs()[10..60].to_vec();
        let w = vec![1.0 / 50.0; 50];
        let a = cloud1(&pts, &w);
        let b = cloud1(&pts.iter().map(|x| x + 0.5).collect::<Vec<_>>(), &w);
        let t = ot_discrete(&a, &b).unwrap();
        assert!((t.w2 - 0.5).abs() < 1e-12);
        let pot = potential_from_duals(&t, d.clone()).unwrap();
        let (x, h) = (d.xs(), d.h());
        for k in 10..60 {
            assert!((pot.grad()[k] - x[k] - 0.5).abs() < 1e-12, "node {k}");
        }
        // subgradient brackets of a convex function
        for k in 10..59 {
            let rise = pot.phi()[k + 1] - pot.phi()[k];
            assert!(rise >= h * pot.grad()[k] - 1e-12 && rise <= h * pot.grad()[k + 1] + 1e-12);
        }
        // duals of a permutation problem are not unique, only the shape up to O(h)
        let dev: Vec<f64> = (10..60).map(|k| pot.phi()[k] - 0.5 * x[k] * x[k] - 0.5 * x[k]).collect();
        let mean = dev.iter().sum::<f64>() / dev.len() as f64;
        assert!(dev.iter().all(|v| (v - mean).abs() <= 25.0 * h * h));
    }
}
