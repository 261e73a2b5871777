use std::sync::Arc;

use entrobar::gaussian::{commuting_barycenter, fixed_point_residual, gaussian_barycenter};
use entrobar::linma::{build_g, mixture_covariance, phi_prime, sigma_from};
use entrobar::measures::objective;
use entrobar::ot::{ot_1d, w2_squared};
use entrobar::{solve_barycenter, Atom, DensityGrid, Domain, GaussianMeasure, Population, SolverConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn interval(n: usize) -> Arc<Domain> {
    Arc::new(Domain::interval(-2.0, 2.0, n).unwrap())
}

/// `floor + Σ a exp(-(x-c)²/2w²)`, strictly positive on the interval.
fn bumps(d: &Arc<Domain>, params: &[(f64, f64, f64)], floor: f64) -> DensityGrid {
    DensityGrid::from_fn(d.clone(), |x| {
        floor
            + params
                .iter()
                .map(|(c, w, a)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
                .sum::<f64>()
    })
    .unwrap()
}

fn bump_params() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1.5..1.5f64, 0.15..0.6f64, 0.1..2.0f64), 1..4)
}

fn blend(a: &DensityGrid, b: &DensityGrid, t: f64) -> DensityGrid {
    let v = a.values().iter().zip(b.values()).map(|(x, y)| (1.0 - t) * x + t * y).collect();
    DensityGrid::new(a.domain_arc().clone(), v).unwrap()
}

fn spd(entries: &[f64], d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(d, d, &entries[..d * d]);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn gaussian_population(lambda: f64, covs: &[DMatrix<f64>]) -> Population {
    let d = covs[0].nrows();
    let domain = Arc::new(Domain::full_space(vec![-10.0; d], vec![10.0; d], vec![2; d]).unwrap());
    let atoms = covs
        .iter()
        .map(|c| Atom::Gaussian(GaussianMeasure::new(DVector::zeros(d), c.clone()).unwrap()))
        .collect();
    Population::uniform(lambda, domain, atoms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn construction_and_shift_normalize(params in bump_params(), floor in 0.0..0.5f64, k in -10i32..10) {
        let d = interval(161);
        let rho = bumps(&d, &params, floor + 1e-3);
        prop_assert!((rho.mass() - 1.0).abs() < 1e-10);
        prop_assert!(rho.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        let wide = Arc::new(Domain::full_space_1d(10.0, 401).unwrap());
        let g = GaussianMeasure::scalar(0.0, 0.5).unwrap().discretize(wide.clone()).unwrap();
        let moved = g.shift(&[0.37 * k as f64]).unwrap();
        prop_assert!((moved.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moments_are_monotone_in_the_order(params in bump_params(), inside in any::<bool>()) {
        let d = Arc::new(Domain::interval(-3.0, 3.0, 241).unwrap());
        // mass only where |x| ≥ 1, or only inside the unit ball
        let base = bumps(&d, &params, 0.2);
        let v = base
            .values()
            .iter()
            .zip(d.xs())
            .map(|(v, x)| if (x.abs() <= 1.0) == inside { *v } else { 0.0 })
            .collect();
        let rho = DensityGrid::new(d.clone(), v).unwrap();
        let m: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0].iter().map(|p| rho.p_moment(*p).unwrap()).collect();
        for w in m.windows(2) {
            if inside {
                prop_assert!(w[1] <= w[0] + 1e-12);
            } else {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn entropy_is_shift_invariant(mean in -2.0..2.0f64, var in 0.2..1.0f64, k in -100i32..100) {
        let d = Arc::new(Domain::full_space_1d(10.0, 1001).unwrap());
        let g = GaussianMeasure::scalar(mean, var).unwrap().discretize(d.clone()).unwrap();
        let moved = g.shift(&[k as f64 * d.h()]).unwrap();
        prop_assert!((moved.entropy() - g.entropy()).abs() < 1e-8);
    }

    #[test]
    fn objective_is_convex(
        atoms in prop::collection::vec(bump_params(), 1..3),
        a in bump_params(),
        b in bump_params(),
        lambda in 0.05..2.0f64,
    ) {
        let d = interval(121);
        let atoms = atoms.iter().map(|p| Atom::Grid(bumps(&d, p, 0.05))).collect();
        let pop = Population::uniform(lambda, d.clone(), atoms).unwrap();
        let (r0, r1) = (bumps(&d, &a, 0.02), bumps(&d, &b, 0.02));
        let (o0, o1) = (objective(&pop, &r0).unwrap(), objective(&pop, &r1).unwrap());
        for t in [0.25, 0.5, 0.75] {
            let mid = objective(&pop, &blend(&r0, &r1, t)).unwrap();
            prop_assert!(mid <= (1.0 - t) * o0 + t * o1 + 1e-8, "t = {t}: {mid} vs {o0}, {o1}");
        }
    }

    #[test]
    fn w2_is_a_metric(a in bump_params(), b in bump_params(), c in bump_params()) {
        let d = interval(201);
        let (a, b, c) = (bumps(&d, &a, 0.01), bumps(&d, &b, 0.01), bumps(&d, &c, 0.01));
        let w = |x: &DensityGrid, y: &DensityGrid| w2_squared(x, y).unwrap().sqrt();
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-12);
        prop_assert!(w(&a, &a) < 1e-7);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-8);
    }

    #[test]
    fn transport_dominates_moment_gap(a in bump_params(), b in bump_params()) {
        let d = interval(201);
        let (rho, nu) = (bumps(&d, &a, 0.01), bumps(&d, &b, 0.01));
        let lhs = 0.5 * w2_squared(&rho, &nu).unwrap();
        prop_assert!(lhs >= 0.25 * rho.second_moment() - nu.second_moment() - 1e-12);
    }

    #[test]
    fn monge_ampere_holds_in_the_interior(a in bump_params(), b in bump_params()) {
        let d = interval(401);
        let (rho, nu) = (bumps(&d, &a, 0.2), bumps(&d, &b, 0.2));
        let (pot, _) = ot_1d(&rho, &nu).unwrap();
        let h = d.h();
        let phi = pot.phi();
        let top = rho.max_value().max(nu.max_value());
        for i in 2..d.len() - 2 {
            let second = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
            let t = pot.grad_at(i)[0];
            let lhs = second * d.interpolate(nu.values(), &[t]);
            prop_assert!((lhs - rho.values()[i]).abs() <= 20.0 * h * top * top, "node {i}: {lhs} vs {}", rho.values()[i]);
        }
        // a target filling the interval sends the ends to the ends
        prop_assert!((pot.grad_at(0)[0] + 2.0).abs() <= 2.0 * h);
        prop_assert!((pot.grad_at(d.len() - 1)[0] - 2.0).abs() <= 2.0 * h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_barycenter_contracts(
        entries in prop::collection::vec(prop::collection::vec(-1.5..1.5f64, 4), 1..4),
        lambda in 0.05..2.0f64,
        theta in 0.0..std::f64::consts::PI,
    ) {
        let covs: Vec<DMatrix<f64>> = entries.iter().map(|e| spd(e, 2)).collect();
        let pop = gaussian_population(lambda, &covs);
        let bary = gaussian_barycenter(&pop).unwrap();
        let s = bary.measure.covariance().clone();
        prop_assert!(fixed_point_residual(&pop, &s).unwrap() <= 1e-10);
        let eig = s.clone().symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= lambda - 1e-10);
        prop_assert!(eig.max() <= bary.alpha + 1e-10);

        let q = rotation(theta);
        let rotated: Vec<DMatrix<f64>> = covs.iter().map(|c| &q * c * q.transpose()).collect();
        let turned = gaussian_barycenter(&gaussian_population(lambda, &rotated)).unwrap();
        let expect = &q * &s * q.transpose();
        prop_assert!((turned.measure.covariance() - expect).amax() <= 1e-9);
    }

    #[test]
    fn commuting_populations_match_the_scalar_solver(
        spectra in prop::collection::vec(prop::collection::vec(0.05..4.0f64, 2), 1..4),
        lambda in 0.05..2.0f64,
        theta in 0.0..std::f64::consts::PI,
    ) {
        let q = rotation(theta);
        let covs: Vec<DMatrix<f64>> = spectra
            .iter()
            .map(|s| &q * DMatrix::from_diagonal(&DVector::from_column_slice(s)) * q.transpose())
            .collect();
        let n = covs.len();
        let weights = vec![1.0 / n as f64; n];
        let closed = commuting_barycenter(lambda, &weights, &q, &spectra);
        let bary = gaussian_barycenter(&gaussian_population(lambda, &covs)).unwrap();
        let gap = (bary.measure.covariance() - &closed).norm() / closed.norm();
        prop_assert!(gap <= 1e-10, "{gap}");
    }

    #[test]
    fn linearized_operators_are_consistent(
        a in bump_params(),
        b in bump_params(),
        f in prop::collection::vec(-1.0..1.0f64, 6),
        g in prop::collection::vec(-1.0..1.0f64, 6),
        lambda in 0.1..1.0f64,
    ) {
        let d = interval(121);
        let (rho, nu) = (bumps(&d, &a, 0.3), bumps(&d, &b, 0.3));
        let (pot, _) = ot_1d(&rho, &nu).unwrap();
        let op = phi_prime(&rho, &pot, &nu).unwrap();
        // smooth zero-mean test functions from random Fourier coefficients
        let field = |c: &[f64]| {
            let mut v: Vec<f64> = d
                .xs()
                .iter()
                .map(|x| c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * x).cos()).sum())
                .collect();
            d.center(&mut v);
            v
        };
        let (f, g) = (field(&f), field(&g));
        prop_assert!((op.form(&f, &g) - op.form(&g, &f)).abs() <= 1e-9);

        let other = bumps(&d, &a.iter().map(|(c, w, s)| (-c, *w, *s)).collect::<Vec<_>>(), 0.3);
        let pop = Population::uniform(lambda, d.clone(), vec![Atom::Grid(nu.clone()), Atom::Grid(other.clone())]).unwrap();
        let pots = vec![pot, ot_1d(&rho, &other).unwrap().0];
        let gop = build_g(&rho, &pots, &pop).unwrap();
        let back = gop.apply(&gop.solve(&f).unwrap());
        let err: f64 = back.iter().zip(&f).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * norm);

        let sigma = sigma_from(&gop, &mixture_covariance(&pots, &pop.weights()).unwrap()).unwrap();
        let eig = sigma.symmetric_form().symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-10 * sigma.symmetric_form().norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solved_barycenters_are_optimal_and_symmetric(
        atoms in prop::collection::vec((-2.0..2.0f64, 0.2..1.5f64), 2..4),
        lambda in 0.2..1.0f64,
    ) {
        let d = Arc::new(Domain::full_space_1d(12.0, 481).unwrap());
        let grid = |list: &[(f64, f64)]| -> Vec<Atom> {
            list.iter()
                .map(|&(m, v)| Atom::Grid(GaussianMeasure::scalar(m, v).unwrap().discretize(d.clone()).unwrap()))
                .collect()
        };
        let pop = Population::uniform(lambda, d.clone(), grid(&atoms)).unwrap();
        let res = solve_barycenter(&pop, &SolverConfig::default()).unwrap();
        let rho = &res.density;
        prop_assert!(rho.values().iter().all(|v| *v > 0.0));

        let value = objective(&pop, rho).unwrap();
        for (_, nu) in pop.grid_atoms().unwrap() {
            prop_assert!(value <= objective(&pop, nu).unwrap());
        }
        prop_assert!(value <= objective(&pop, &pop.mixture().unwrap()).unwrap());

        // λ D² log ρ̄ ≥ -1 up to the grid, on the bulk
        let logs = rho.log_values();
        let h = d.h();
        let cut = 1e-6 * rho.max_value();
        for i in 2..d.len() - 2 {
            if (i - 1..=i + 1).all(|j| rho.values()[j] >= cut) {
                let second = lambda * (logs[i + 1] - 2.0 * logs[i] + logs[i - 1]) / (h * h);
                prop_assert!(second >= -1.0 - 5.0 * h, "node {i}: {second}");
            }
        }

        let mut reversed = atoms.clone();
        reversed.reverse();
        let swapped = Population::uniform(lambda, d.clone(), grid(&reversed)).unwrap();
        let other = solve_barycenter(&swapped, &SolverConfig::default()).unwrap();
        prop_assert!(rho.sup_distance(&other.density) <= 1e-10);
    }
}
