use crate::error::{Error, Result};
use crate::measures::DensityGrid;
use crate::ot::Potential;

/// Cell masses of a 1D density treated as piecewise constant between nodes,
/// with normalized cumulative sums from the left and from the right.
struct Cells {
    x0: f64,
    h: f64,
    /// Normalized mass per cell.
    mass: Vec<f64>,
    /// `left[k]`: normalized mass to the left of node `k`.
    left: Vec<f64>,
    /// `right[k]`: normalized mass to the right of node `k`.
    right: Vec<f64>,
}

impl Cells {
    fn new(g: &DensityGrid) -> Self {
        let d = g.domain();
        let n = d.len();
        let h = d.h();
        let v = g.values();
        let mut mass: Vec<f64> = (0..n - 1)
            .map(|k| {
                if d.is_active(k) && d.is_active(k + 1) {
                    0.5 * h * (v[k] + v[k + 1])
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        let mut left = vec![0.0; n];
        for k in 0..n - 1 {
            left[k + 1] = left[k] + mass[k];
        }
        let mut right = vec![0.0; n];
        for k in (0..n - 1).rev() {
            right[k] = right[k + 1] + mass[k];
        }
        // exact endpoints regardless of rounding
        left[n - 1] = 1.0;
        right[0] = 1.0;
        Cells {
            x0: d.lower()[0],
            h,
            mass,
            left,
            right,
        }
    }

    fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.h
    }

    fn next_positive(&self, mut j: usize) -> usize {
        while j < self.mass.len() && self.mass[j] <= 0.0 {
            j += 1;
        }
        j
    }

    /// Left quantile inside cell `j` at level `t`.
    fn q_left(&self, j: usize, t: f64) -> f64 {
        let frac = ((t - self.left[j]) / self.mass[j]).clamp(0.0, 1.0);
        self.x(j) + self.h * frac
    }
}

fn check_1d(g: &DensityGrid, name: &str) -> Result<()> {
    if g.dim() != 1 {
        return Err(Error::invalid(name, "1D transport needs one-dimensional densities"));
    }
    Ok(())
}

/// Rejects a density whose CDF has a flat stretch strictly inside a connected
/// run of the domain, where the quantile coupling is not invertible.
fn check_no_holes(g: &DensityGrid, cells: &Cells) -> Result<()> {
    let d = g.domain();
    let n = cells.mass.len();
    let mut k = 0;
    while k < n {
        if !(d.is_active(k) && d.is_active(k + 1)) {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && d.is_active(k) && d.is_active(k + 1) {
            k += 1;
        }
        let run = &cells.mass[start..k];
        if let (Some(a), Some(b)) = (
            run.iter().position(|&m| m > 0.0),
            run.iter().rposition(|&m| m > 0.0),
        ) {
            if let Some(z) = run[a..=b].iter().position(|&m| m == 0.0) {
                return Err(Error::DegenerateDensity(format!(
                    "zero-mass cell at x = {} inside the support",
                    cells.x(start + a + z)
                )));
            }
        }
    }
    Ok(())
}

/// Monotone rearrangement `T = Q_ν ∘ F_ρ` with its zero-mean potential and the exact
/// distance `W₂(ρ, ν)` between the piecewise-constant interpretations of the two grids.
pub fn ot_1d(rho: &DensityGrid, nu: &DensityGrid) -> Result<(Potential, f64)> {
    check_1d(rho, "rho")?;
    check_1d(nu, "nu")?;
    let a = Cells::new(rho);
    let b = Cells::new(nu);
    check_no_holes(rho, &a)?;

    let n = rho.domain().len();
    let mut t_map = vec![0.0; n];

    // left-CDF matching for the lower half, survival matching for the upper half
    let split = a.left.partition_point(|&f| f <= 0.5);
    let mut j = b.next_positive(0);
    for k in 0..split {
        let t = a.left[k];
        while j + 1 < b.mass.len() && b.left[j + 1] < t {
            j = b.next_positive(j + 1);
        }
        t_map[k] = b.q_left(j, t);
    }
    let mut j = b.mass.iter().rposition(|&m| m > 0.0).unwrap_or(0);
    for k in (split..n).rev() {
        let s = a.right[k];
        while j > 0 && b.right[j] < s {
            j -= 1;
            while j > 0 && b.mass[j] <= 0.0 {
                j -= 1;
            }
        }
        let frac = ((s - b.right[j + 1]) / b.mass[j]).clamp(0.0, 1.0);
        t_map[k] = b.x(j + 1) - b.h * frac;
    }
    for k in 1..n {
        if t_map[k] < t_map[k - 1] {
            t_map[k] = t_map[k - 1];
        }
    }

    let h = a.h;
    let mut phi = vec![0.0; n];
    for k in 1..n {
        phi[k] = phi[k - 1] + 0.5 * h * (t_map[k - 1] + t_map[k]);
    }
    let w2 = merged_quantile_w2(&a, &b).sqrt();
    Ok((Potential::new(rho.domain_arc().clone(), phi, t_map)?, w2))
}

/// `W₂²` between two 1D grid densities.
pub fn w2_squared_1d(rho: &DensityGrid, nu: &DensityGrid) -> Result<f64> {
    check_1d(rho, "rho")?;
    check_1d(nu, "nu")?;
    Ok(merged_quantile_w2(&Cells::new(rho), &Cells::new(nu)))
}

/// `∫₀¹ (Q_a - Q_b)²` for two piecewise-linear quantile functions.
fn merged_quantile_w2(a: &Cells, b: &Cells) -> f64 {
    let (na, nb) = (a.mass.len(), b.mass.len());
    let mut i = a.next_positive(0);
    let mut j = b.next_positive(0);
    let mut t = 0.0;
    let mut acc = 0.0;
    while i < na && j < nb {
        let end_a = a.left[i + 1];
        let end_b = b.left[j + 1];
        let end = end_a.min(end_b);
        if end > t {
            let d0 = a.q_left(i, t) - b.q_left(j, t);
            let d1 = a.q_left(i, end) - b.q_left(j, end);
            acc += (end - t) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            t = end;
        }
        if end_a <= end {
            i = a.next_positive(i + 1);
        }
        if end_b <= end {
            j = b.next_positive(j + 1);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gaussian::w2_gaussian;
    use crate::measures::{Domain, GaussianMeasure};

    fn dom(r: f64, n: usize) -> Arc<Domain> {
        Arc::new(Domain::interval(-r, r, n).unwrap())
    }

    fn gauss(d: &Arc<Domain>, m: f64, v: f64) -> DensityGrid {
        GaussianMeasure::scalar(m, v).unwrap().discretize(d.clone()).unwrap()
    }

    #[test]
    fn identity_transport() {
        let d = dom(6.0, 601);
        let g = gauss(&d, 0.3, 1.0);
        let (pot, w2) = ot_1d(&g, &g).unwrap();
        assert!(w2 < 1e-7);
        let x = d.xs();
        for (k, xk) in x.iter().enumerate().skip(1).take(598) {
            assert!((pot.grad()[k] - xk).abs() < 1e-9, "node {k}");
        }
        let mut expect: Vec<f64> = x.iter().map(|v| 0.5 * v * v).collect();
        d.center(&mut expect);
        let err = pot.phi().iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3);
        assert!(d.integrate(pot.phi()).abs() < 1e-10);
    }

    #[test]
    fn translation_and_scaling() {
        let d = dom(10.0, 2001);
        let a = gauss(&d, 0.0, 1.0);
        let b = gauss(&d, 1.5, 1.0);
        let (pot, w2) = ot_1d(&a, &b).unwrap();
        assert!((w2 - 1.5).abs() < 1e-4);
        let c = gauss(&d, 0.0, 4.0);
        let (pot2, w2) = ot_1d(&a, &c).unwrap();
        let oracle = w2_gaussian(
            &GaussianMeasure::scalar(0.0, 1.0).unwrap(),
            &GaussianMeasure::scalar(0.0, 4.0).unwrap(),
        )
        .unwrap();
        assert!((w2 - oracle).abs() < 1e-3);
        let x = d.xs();
        for k in (600..1400).step_by(50) {
            assert!((pot.grad()[k] - x[k] - 1.5).abs() < 1e-3);
            assert!((pot2.grad()[k] - 2.0 * x[k]).abs() < 5e-3);
        }
    }

    #[test]
    fn pushforward_preserves_integrals() {
        let d = dom(8.0, 4001);
        let rho = gauss(&d, -0.5, 0.8);
        let nu = DensityGrid::from_fn(d.clone(), |x| {
            (-(x[0] - 1.0).powi(2)).exp() + 0.5 * (-(x[0] + 2.0).powi(2) / 0.5).exp()
        })
        .unwrap();
        let (pot, _) = ot_1d(&rho, &nu).unwrap();
        let fs: [fn(f64) -> f64; 3] = [|x| x, |x| x * x, f64::cos];
        for f in fs {
            let lhs: f64 = d
                .weights()
                .iter()
                .zip(rho.values())
                .zip(pot.grad())
                .map(|((w, r), t)| w * r * f(*t))
                .sum();
            let rhs = nu.expect(|x| f(x[0]));
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn quantile_w2_agrees_with_map_integral() {
        let d = dom(8.0, 2001);
        let rho = gauss(&d, 0.0, 1.0);
        let nu = gauss(&d, 1.0, 0.3);
        let (pot, w2) = ot_1d(&rho, &nu).unwrap();
        let direct: f64 = d
            .weights()
            .iter()
            .zip(rho.values())
            .zip(pot.grad().iter().zip(d.xs()))
            .map(|((w, r), (t, x))| w * r * (t - x).powi(2))
            .sum();
        assert!((w2 * w2 - direct).abs() < 1e-5);
    }

    #[test]
    fn holes_are_degenerate() {
        let d = dom(3.0, 301);
        let rho = DensityGrid::from_fn(d.clone(), |x| f64::from(u8::from(x[0].abs() > 1.0))).unwrap();
        let nu = gauss(&d, 0.0, 1.0);
        assert!(matches!(ot_1d(&rho, &nu), Err(Error::DegenerateDensity(_))));
        let two = Arc::new(Domain::boxed(vec![0.0, 0.0], vec![1.0, 1.0], vec![3, 3]).unwrap());
        let g = DensityGrid::uniform(two);
        assert!(ot_1d(&g, &g).is_err());
    }

    #[test]
    fn maps_cross_domain_gaps() {
        let d = Arc::new(
            Domain::intervals(-8.0, 8.0, 1025, vec![[-8.0, -4.0], [-1.0, 1.0], [4.0, 8.0]]).unwrap(),
        );
        let rho = DensityGrid::uniform(d.clone());
        let nu = DensityGrid::from_fn(d.clone(), |x| f64::from(u8::from(x[0] >= 4.0))).unwrap();
        let (pot, w2) = ot_1d(&rho, &nu).unwrap();
        assert!(pot.grad().windows(2).all(|w| w[0] <= w[1]));
        assert!(pot.grad().iter().all(|&t| (4.0 - 1e-9..=8.0 + 1e-9).contains(&t)));
        assert!(w2 > 0.0);
    }
}
