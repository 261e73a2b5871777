use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use super::sampler::{empirical_population, MeasureSampler};
use crate::error::{Error, Result};
use crate::linma::{build_g, mixture_covariance, potential_covariance, sigma_from};
use crate::measures::{DensityGrid, Domain};
use crate::ot::{ot_1d, w2_squared};
use crate::solver::{solve_barycenter, solve_barycenter_from, BarycenterResult, SolverConfig};

pub const MIN_CLT_REPLICATES: usize = 50;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const SIGN_TEST_LEVEL: f64 = 0.05;
/// Fraction of the domain width trimmed from each end to form the compact `K`.
pub const INTERIOR_MARGIN: f64 = 0.1;

/// Accepts a non-converged iterate; callers see the flag.
fn settle(r: Result<BarycenterResult>) -> Result<BarycenterResult> {
    match r {
        Err(Error::NotConverged { result }) => Ok(*result),
        other => other,
    }
}

/// Barycenter of `n` draws from `sampler`, stream 0, started from the mixture.
pub fn empirical_barycenter(
    sampler: &MeasureSampler,
    n: usize,
    lambda: f64,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
) -> Result<BarycenterResult> {
    empirical_barycenter_stream(sampler, n, lambda, domain, cfg, 0, None)
}

/// As [`empirical_barycenter`] on a given stream, optionally warm-started.
pub fn empirical_barycenter_stream(
    sampler: &MeasureSampler,
    n: usize,
    lambda: f64,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    stream: u64,
    init: Option<&DensityGrid>,
) -> Result<BarycenterResult> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let draws = sampler.draw_n(n, stream)?;
    let pop = empirical_population(&draws, lambda, domain)?;
    match init {
        Some(rho) => solve_barycenter_from(&pop, cfg, rho),
        None => solve_barycenter(&pop, cfg),
    }
}

/// Barycenter of the law itself for a finite sampler.
pub fn reference_barycenter(
    sampler: &MeasureSampler,
    lambda: f64,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
) -> Result<BarycenterResult> {
    solve_barycenter(&sampler.population(lambda, domain)?, cfg)
}

/// Nodes at least [`INTERIOR_MARGIN`] of the width away from the domain ends.
pub fn interior_compact(domain: &Domain) -> Vec<usize> {
    let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
    let m = INTERIOR_MARGIN * (hi - lo);
    (1..domain.len().saturating_sub(1))
        .filter(|&i| {
            let x = domain.coord(i, 0);
            x >= lo + m && x <= hi - m && (i - 1..=i + 1).all(|j| domain.is_active(j))
        })
        .collect()
}

/// `‖∇log a - ∇log b‖_{L²(K)}` with central differences.
pub fn log_gradient_gap(a: &DensityGrid, b: &DensityGrid) -> f64 {
    let d = a.domain();
    let (la, lb) = (a.log_values(), b.log_values());
    let h = d.h();
    interior_compact(d)
        .into_iter()
        .map(|i| {
            let ga = (la[i + 1] - la[i - 1]) / (2.0 * h);
            let gb = (lb[i + 1] - lb[i - 1]) / (2.0 * h);
            d.weights()[i] * (ga - gb).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnRow {
    pub n: usize,
    pub replicate: usize,
    pub w2: f64,
    pub log_gradient_gap: f64,
    pub converged: bool,
}

/// One-sided sign test that distances drop from `from_n` to `to_n`.
#[derive(Clone, Debug, Serialize)]
pub struct SignTest {
    pub from_n: usize,
    pub to_n: usize,
    pub decreases: usize,
    pub trials: usize,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LlnTable {
    pub rows: Vec<LlnRow>,
    /// `(n, median W₂, median log-gradient gap)` per schedule entry.
    pub medians: Vec<(usize, f64, f64)>,
    pub sign_tests: Vec<SignTest>,
    pub level: f64,
}

impl LlnTable {
    pub fn trend_holds(&self) -> bool {
        self.medians.windows(2).all(|w| w[1].1 < w[0].1) && self.sign_tests.iter().all(|t| t.passed)
    }

    /// CSV with `header` lines written first as `#` comments.
    pub fn write_csv(&self, header: &[String], mut w: impl Write) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "n,replicate,w2,log_gradient_gap,converged")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{}",
                r.n, r.replicate, r.w2, r.log_gradient_gap, r.converged
            )?;
        }
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `P(X ≥ k)` for `X ~ Bin(trials, ½)`.
pub fn sign_test_p_value(k: usize, trials: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, trials as u64).expect("valid binomial");
    b.sf(k as u64 - 1)
}

/// Distances of empirical barycenters to `reference` over a schedule of sample
/// sizes, with paired sign tests between consecutive sizes.
pub fn lln_experiment(
    sampler: &MeasureSampler,
    lambda: f64,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    reference: &DensityGrid,
    n_schedule: &[usize],
    replicates: usize,
) -> Result<LlnTable> {
    if n_schedule.is_empty() || n_schedule.contains(&0) {
        return Err(Error::invalid("n_schedule", "needs positive sample sizes"));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates", "must be at least 1"));
    }
    if domain.dim() != 1 {
        return Err(Error::Unsupported("LLN experiments off the line".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..n_schedule.len())
        .flat_map(|k| (0..replicates).map(move |r| (k, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, r)| {
            let n = n_schedule[k];
            let stream = ((k as u64) << 32) | r as u64;
            let res = settle(empirical_barycenter_stream(
                sampler,
                n,
                lambda,
                domain,
                cfg,
                stream,
                Some(reference),
            ))?;
            Ok(LlnRow {
                n,
                replicate: r,
                w2: w2_squared(&res.density, reference)?.sqrt(),
                log_gradient_gap: log_gradient_gap(&res.density, reference),
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let by_size: Vec<&[LlnRow]> = rows.chunks(replicates).collect();
    let medians = by_size
        .iter()
        .map(|c| {
            (
                c[0].n,
                median(c.iter().map(|r| r.w2).collect()),
                median(c.iter().map(|r| r.log_gradient_gap).collect()),
            )
        })
        .collect();
    let sign_tests = by_size
        .windows(2)
        .map(|w| {
            let decreases = w[0].iter().zip(w[1]).filter(|(a, b)| b.w2 < a.w2).count();
            let p_value = sign_test_p_value(decreases, replicates);
            SignTest {
                from_n: w[0][0].n,
                to_n: w[1][0].n,
                decreases,
                trials: replicates,
                p_value,
                passed: p_value <= SIGN_TEST_LEVEL,
            }
        })
        .collect();
    Ok(LlnTable {
        rows,
        medians,
        sign_tests,
        level: SIGN_TEST_LEVEL,
    })
}

/// First `k` monomials `(x/R)^j`, centered and orthonormalized in the quadrature
/// inner product.
pub fn polynomial_basis(domain: &Domain, k: usize) -> Result<Vec<Vec<f64>>> {
    if domain.dim() != 1 {
        return Err(Error::Unsupported("polynomial basis off the line".into()));
    }
    let r = domain.upper()[0].abs().max(domain.lower()[0].abs());
    let w = domain.weights();
    let dot = |a: &[f64], b: &[f64]| -> f64 { w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum() };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 1..=k {
        let mut v: Vec<f64> = domain.xs().iter().map(|x| (x / r).powi(j as i32)).collect();
        domain.center(&mut v);
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&v, &v).sqrt();
        if !(norm > 1e-10) {
            return Err(Error::IllConditioned(format!("basis degenerates at degree {j}")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    Ok(basis)
}

#[derive(Clone, Debug, Serialize)]
pub struct Normality {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapBand {
    pub resamples: usize,
    /// 95% quantile of `‖C* - Ĉ‖_F` over resamples.
    pub radius: f64,
    /// `‖Ĉ - Σ‖_F`.
    pub distance: f64,
    pub within_band: bool,
    /// Percentile interval of `‖C* - Σ‖_F / ‖Σ‖_F`.
    pub relative_ci: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub k_basis: usize,
    /// Coefficients of `√n(ρ̄_n - ρ̄)` on the basis, one row per replicate.
    pub projections: Vec<Vec<f64>>,
    pub empirical_cov: Vec<Vec<f64>>,
    /// Projection of `G⁻¹ Var(φ) G⁻¹` with the exact finite-law variance.
    pub plugin_cov: Vec<Vec<f64>>,
    /// Same with the variance estimated from the first replicate's sampled potentials.
    pub plugin_cov_sampled: Vec<Vec<f64>>,
    pub relative_frobenius: f64,
    pub bootstrap: BootstrapBand,
    pub normality_stats: Vec<Normality>,
    pub leading_share: f64,
    pub plugin_leading_share: f64,
    pub g_condition_number: f64,
    pub non_converged: usize,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn sample_cov(data: &[Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let k = data[0].len();
    let n = idx.len() as f64;
    let mut mean = vec![0.0; k];
    for &i in idx {
        mean.iter_mut().zip(&data[i]).for_each(|(m, v)| *m += v / n);
    }
    let mut c = DMatrix::zeros(k, k);
    for &i in idx {
        for a in 0..k {
            for b in 0..k {
                c[(a, b)] += (data[i][a] - mean[a]) * (data[i][b] - mean[b]);
            }
        }
    }
    c / (n - 1.0)
}

fn leading_share(c: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(c.clone()).eigenvalues;
    let trace: f64 = eig.iter().map(|v| v.max(0.0)).sum();
    if trace > 0.0 {
        eig.max() / trace
    } else {
        0.0
    }
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn normality(data: &[Vec<f64>], a: usize) -> Normality {
    let n = data.len() as f64;
    let mean = data.iter().map(|r| r[a]).sum::<f64>() / n;
    let m = |p: i32| data.iter().map(|r| (r[a] - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    Normality {
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Monte-Carlo check of the central limit theorem against a finite law: the
/// covariance of projected `√n(ρ̄_n - ρ̄)` is compared with the projected plug-in
/// covariance `G⁻¹ Var(φ) G⁻¹`.
pub fn clt_experiment(
    sampler: &MeasureSampler,
    lambda: f64,
    domain: &Arc<Domain>,
    cfg: &SolverConfig,
    n: usize,
    replicates: usize,
    k_basis: usize,
) -> Result<CltReport> {
    if replicates < MIN_CLT_REPLICATES {
        return Err(Error::invalid(
            "replicates",
            format!("need at least {MIN_CLT_REPLICATES}, got {replicates}"),
        ));
    }
    if n == 0 || k_basis == 0 {
        return Err(Error::invalid("n", "sample size and basis size must be positive"));
    }
    let truth_pop = sampler.population(lambda, domain)?;
    let truth = solve_barycenter(&truth_pop, cfg)?;
    let rho_bar = &truth.density;
    let basis = polynomial_basis(domain, k_basis)?;

    let g = build_g(rho_bar, &truth.potentials, &truth_pop)?;
    let exact_var = mixture_covariance(&truth.potentials, &truth_pop.weights())?;
    let plugin = sigma_from(&g, &exact_var)?.project(&basis);

    let first = sampler.draw_n(n, 0)?;
    let sampled_pots = first
        .iter()
        .map(|d| Ok(ot_1d(rho_bar, &d.spec.render(domain)?)?.0))
        .collect::<Result<Vec<_>>>()?;
    let plugin_sampled = sigma_from(&g, &potential_covariance(&sampled_pots)?)?.project(&basis);

    let scale = (n as f64).sqrt();
    let w = domain.weights();
    let runs = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let res = settle(empirical_barycenter_stream(
                sampler,
                n,
                lambda,
                domain,
                cfg,
                r as u64,
                Some(rho_bar),
            ))?;
            let coeffs = basis
                .iter()
                .map(|b| {
                    scale
                        * res
                            .density
                            .values()
                            .iter()
                            .zip(rho_bar.values())
                            .zip(b)
                            .zip(w)
                            .map(|(((a, c), bb), ww)| ww * (a - c) * bb)
                            .sum::<f64>()
                })
                .collect::<Vec<f64>>();
            Ok((coeffs, res.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let non_converged = runs.iter().filter(|(_, c)| !c).count();
    let projections: Vec<Vec<f64>> = runs.into_iter().map(|(c, _)| c).collect();

    let all: Vec<usize> = (0..replicates).collect();
    let emp = sample_cov(&projections, &all);
    let plug_norm = plugin.norm();
    let distance = (&emp - &plugin).norm();

    let mut rng = sampler.rng(u64::MAX);
    let mut spread = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut rel = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let idx: Vec<usize> = (0..replicates).map(|_| rng.random_range(0..replicates)).collect();
        let c = sample_cov(&projections, &idx);
        spread.push((&c - &emp).norm());
        rel.push((&c - &plugin).norm() / plug_norm);
    }
    let radius = quantile(spread, 0.95);
    let bootstrap = BootstrapBand {
        resamples: BOOTSTRAP_RESAMPLES,
        radius,
        distance,
        within_band: distance <= radius,
        relative_ci: [quantile(rel.clone(), 0.025), quantile(rel, 0.975)],
    };

    Ok(CltReport {
        n_values: vec![n],
        replicates,
        k_basis,
        normality_stats: (0..k_basis).map(|a| normality(&projections, a)).collect(),
        projections,
        leading_share: leading_share(&emp),
        plugin_leading_share: leading_share(&plugin),
        empirical_cov: rows(&emp),
        plugin_cov: rows(&plugin),
        plugin_cov_sampled: rows(&plugin_sampled),
        relative_frobenius: distance / plug_norm,
        bootstrap,
        g_condition_number: g.condition_number(),
        non_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomSpec;
    use crate::stats::SamplerFamily;

    fn finite(atoms: Vec<AtomSpec>) -> MeasureSampler {
        MeasureSampler::new(SamplerFamily::FiniteAtoms { atoms }, 5).unwrap()
    }

    fn bump(c: f64) -> AtomSpec {
        AtomSpec::Bumps {
            centers: vec![c],
            widths: vec![0.3],
            amplitudes: vec![1.0],
            floor: 0.3,
        }
    }

    #[test]
    fn sign_test_threshold() {
        assert!(sign_test_p_value(32, 50) <= 0.05);
        assert!(sign_test_p_value(31, 50) > 0.05);
        assert_eq!(sign_test_p_value(0, 50), 1.0);
    }

    #[test]
    fn basis_is_orthonormal_and_zero_mean() {
        let d = Domain::interval(-1.0, 1.0, 201).unwrap();
        let b = polynomial_basis(&d, 5).unwrap();
        for (i, u) in b.iter().enumerate() {
            assert!(d.integrate(u).abs() < 1e-12);
            for (j, v) in b.iter().enumerate() {
                let ip: f64 = d.weights().iter().zip(u).zip(v).map(|((w, a), c)| w * a * c).sum();
                assert!((ip - f64::from(u8::from(i == j))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_sampler_is_deterministic() {
        let d = Arc::new(Domain::interval(-1.0, 1.0, 101).unwrap());
        let s = finite(vec![bump(0.2)]);
        let cfg = SolverConfig::default();
        let a = empirical_barycenter(&s, 1, 0.3, &d, &cfg).unwrap();
        let b = empirical_barycenter(&s, 7, 0.3, &d, &cfg).unwrap();
        assert_eq!(a.density.values(), b.density.values());
        let again = empirical_barycenter(&s, 7, 0.3, &d, &cfg).unwrap();
        assert_eq!(b.density.values(), again.density.values());
    }

    #[test]
    fn clt_degenerates_for_a_single_atom() {
        let d = Arc::new(Domain::interval(-1.0, 1.0, 65).unwrap());
        let s = finite(vec![bump(0.0)]);
        let cfg = SolverConfig::default();
        assert!(clt_experiment(&s, 0.3, &d, &cfg, 16, 10, 3).is_err());
        let rep = clt_experiment(&s, 0.3, &d, &cfg, 16, 50, 3).unwrap();
        assert!(rep.projections.iter().flatten().all(|v| v.abs() < 1e-6));
        assert!(rep.plugin_cov.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lln_with_constant_sampler_is_flat() {
        let d = Arc::new(Domain::interval(-1.0, 1.0, 65).unwrap());
        let s = finite(vec![bump(0.1)]);
        let cfg = SolverConfig::default();
        let reference = reference_barycenter(&s, 0.3, &d, &cfg).unwrap();
        let t = lln_experiment(&s, 0.3, &d, &cfg, &reference.density, &[1, 4], 5).unwrap();
        assert_eq!(t.rows.len(), 10);
        assert!(t.rows.iter().all(|r| r.w2 < 1e-6));
        assert!(!t.trend_holds());
    }
}
