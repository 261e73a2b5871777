//! One-dimensional linearization of the measure-to-potential map and the
//! operators behind the central limit theorem for empirical barycenters.
//!
//! Grid functions live on the nodes of a 1D domain with the quadrature inner
//! product `⟨f, g⟩ = Σ w_k f_k g_k`. Every operator acts on the quotient by
//! constants: its matrix sends constants to zero and only sees the zero-mean part
//! of its argument.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DensityGrid, Domain, DomainSpec, Population};
use crate::ot::Potential;

/// Densities below this make `u ↦ u/ρ̄` numerically meaningless.
pub const MIN_DENSITY: f64 = 1e-12;

/// Largest tolerated residual of the discrete elliptic problem.
pub const PDE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    FPrime,
    PhiPrime,
    G,
    Sigma,
}

/// Grid function with zero quadrature mean.
#[derive(Clone, Debug)]
pub struct ZeroMeanGridFunction {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl ZeroMeanGridFunction {
    /// Subtracts the quadrature mean of `values`.
    pub fn new(domain: Arc<Domain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::invalid("values", "length does not match the grid"));
        }
        domain.center(&mut values);
        Ok(ZeroMeanGridFunction { domain, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Dense operator on zero-mean grid functions.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    domain: Arc<Domain>,
    kind: OperatorKind,
    matrix: DMatrix<f64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: OperatorKind,
    grid: &'a DomainSpec,
    size: usize,
    symmetry_defect: f64,
    condition_number: Option<f64>,
    crate_version: &'static str,
    matrix_file: String,
}

impl LinearizedOperator {
    fn new(domain: Arc<Domain>, kind: OperatorKind, matrix: DMatrix<f64>) -> Self {
        LinearizedOperator { domain, kind, matrix }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(f)).as_slice().to_vec()
    }

    /// `⟨f, A g⟩` in the quadrature inner product.
    pub fn form(&self, f: &[f64], g: &[f64]) -> f64 {
        inner(&self.domain, f, &self.apply(g))
    }

    /// `W^{1/2} A W^{-1/2}`, symmetric whenever `A` is self-adjoint.
    pub fn symmetric_form(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.domain.weights().iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            s[i] * self.matrix[(i, j)] / s[j]
        })
    }

    /// Largest entry of the antisymmetric part of [`symmetric_form`](Self::symmetric_form),
    /// relative to its largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let s = self.symmetric_form();
        let scale = s.amax().max(f64::MIN_POSITIVE);
        (&s - s.transpose()).amax() / scale
    }

    /// Eigenvalues on the zero-mean subspace, ascending. The null direction of
    /// constants is dropped.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s = self.symmetric_form();
        let sym = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let ones: Vec<f64> = self.domain.weights().iter().map(|w| w.sqrt()).collect();
        let e = DVector::from_vec(ones).normalize();
        let null = (0..eig.eigenvalues.len())
            .max_by(|&a, &b| {
                let pa = eig.eigenvectors.column(a).dot(&e).abs();
                let pb = eig.eigenvectors.column(b).dot(&e).abs();
                pa.total_cmp(&pb)
            })
            .unwrap_or(0);
        let mut vals: Vec<f64> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != null)
            .map(|(_, v)| *v)
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// `max |μ| / min |μ|` over the eigenvalues on the zero-mean subspace.
    pub fn condition_number(&self) -> f64 {
        let vals = self.eigenvalues();
        let hi = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let lo = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        hi / lo
    }

    /// `[⟨b_j, A b_l⟩]` for a list of basis functions.
    pub fn project(&self, basis: &[Vec<f64>]) -> DMatrix<f64> {
        let images: Vec<Vec<f64>> = basis.iter().map(|b| self.apply(b)).collect();
        DMatrix::from_fn(basis.len(), basis.len(), |j, l| inner(&self.domain, &basis[j], &images[l]))
    }

    /// Solves `A u = f` on zero-mean functions through the bordered system.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        let rhs = DMatrix::from_column_slice(f.len(), 1, f);
        Ok(self.pseudo_inverse_apply(&rhs)?.as_slice().to_vec())
    }

    /// Matrix of the inverse on zero-mean functions.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.pseudo_inverse_apply(&DMatrix::identity(self.matrix.nrows(), self.matrix.ncols()))
    }

    fn pseudo_inverse_apply(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.domain.weights();
        let n = w.len();
        let wa = DMatrix::from_fn(n, n, |i, j| w[i] * self.matrix[(i, j)]);
        let wa = (&wa + wa.transpose()) * 0.5;
        let mut rhs = rhs.clone();
        for mut col in rhs.column_iter_mut() {
            self.domain.center(col.as_mut_slice());
            for (k, v) in col.iter_mut().enumerate() {
                *v *= w[k];
            }
        }
        bordered_solve(&wa, w, &rhs)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        for row in self.matrix.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` with the dense matrix and `<stem>.json` describing it.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 2]> {
        let dir = dir.as_ref();
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let mut w = BufWriter::new(File::create(&csv)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        let condition_number = match self.kind {
            OperatorKind::Sigma => None,
            _ => Some(self.condition_number()),
        };
        let side = Sidecar {
            kind: self.kind,
            grid: self.domain.spec(),
            size: self.matrix.nrows(),
            symmetry_defect: self.symmetry_defect(),
            condition_number,
            crate_version: env!("CARGO_PKG_VERSION"),
            matrix_file: format!("{stem}.csv"),
        };
        std::fs::write(&json, serde_json::to_string_pretty(&side)?)?;
        Ok([csv, json])
    }
}

fn inner(d: &Domain, f: &[f64], g: &[f64]) -> f64 {
    d.weights().iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
}

fn check_line(d: &Domain) -> Result<()> {
    if d.dim() != 1 {
        return Err(Error::Unsupported("linearization on a multi-dimensional grid".into()));
    }
    if d.active().iter().any(|a| !a) {
        return Err(Error::invalid("domain", "linearization needs a connected interval"));
    }
    Ok(())
}

/// `P = I - 1 wᵀ / |Ω|`, the quadrature-orthogonal projector onto zero-mean functions.
fn projector(d: &Domain) -> DMatrix<f64> {
    let w = d.weights();
    let vol = d.volume();
    DMatrix::from_fn(w.len(), w.len(), |i, j| f64::from(u8::from(i == j)) - w[j] / vol)
}

/// Solves `[[A, w], [wᵀ, 0]] [x; μ] = [b; 0]` for every column of `b`, where `A`
/// is symmetric with constants in its kernel.
fn bordered_solve(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.len();
    let mut big = DMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    for (k, wk) in w.iter().enumerate() {
        big[(k, n)] = *wk;
        big[(n, k)] = *wk;
    }
    let mut rhs = DMatrix::zeros(n + 1, b.ncols());
    rhs.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    let lu = big.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("bordered system is singular".into()))?;
    Ok(sol.rows(0, n).into_owned())
}

/// `F′(ρ̄): u ↦ λ u/ρ̄ - λ ⨍ u/ρ̄`.
pub fn f_prime(rho_bar: &DensityGrid, lambda: f64) -> Result<LinearizedOperator> {
    let d = rho_bar.domain_arc().clone();
    check_line(&d)?;
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be > 0"));
    }
    if let Some(k) = rho_bar.values().iter().position(|&r| r < MIN_DENSITY) {
        return Err(Error::IllConditioned(format!(
            "density {:.3e} at x = {} is below {MIN_DENSITY:e}",
            rho_bar.values()[k],
            d.coord(k, 0)
        )));
    }
    let p = projector(&d);
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        d.len(),
        rho_bar.values().iter().map(|r| lambda / r),
    ));
    let m = &p * diag * &p;
    Ok(LinearizedOperator::new(d, OperatorKind::FPrime, m))
}

/// Transport coefficient `a_ν = ν(φ′)` at the cell midpoints.
pub fn transport_coefficient(potential: &Potential, nu: &DensityGrid) -> Result<Vec<f64>> {
    let d = potential.domain();
    let t = potential.grad();
    let mut a = Vec::with_capacity(d.len() - 1);
    for k in 0..d.len() - 1 {
        if t[k + 1] <= t[k] {
            return Err(Error::NonConvexPotential(format!(
                "map is not strictly increasing at x = {}",
                d.coord(k, 0)
            )));
        }
        let mid = 0.5 * (t[k] + t[k + 1]);
        let v = nu.domain().interpolate(nu.values(), &[mid]);
        if v <= 0.0 {
            return Err(Error::DegenerateDensity(format!(
                "target density vanishes at T = {mid} (x = {})",
                d.coord(k, 0)
            )));
        }
        a.push(v);
    }
    Ok(a)
}

/// Derivative of `ρ ↦ φ_ρ^ν` at `ρ̄`: `f ↦ h` with `(a_ν h′)′ = f`, `h′ = 0` at both
/// ends and `∫h = 0`, in conservative flux form.
pub fn phi_prime(rho_bar: &DensityGrid, potential: &Potential, nu: &DensityGrid) -> Result<LinearizedOperator> {
    let d = rho_bar.domain_arc().clone();
    check_line(&d)?;
    if potential.domain() != &*d || nu.domain() != &*d {
        return Err(Error::invalid("potential", "grids differ"));
    }
    let a = transport_coefficient(potential, nu)?;
    let n = d.len();
    let h = d.h();
    // stiffness of -(a h′)′ integrated over node cells
    let mut k = DMatrix::zeros(n, n);
    for (c, ac) in a.iter().enumerate() {
        let s = ac / h;
        k[(c, c)] += s;
        k[(c + 1, c + 1)] += s;
        k[(c, c + 1)] -= s;
        k[(c + 1, c)] -= s;
    }
    let w = d.weights();
    let p = projector(&d);
    let wp = DMatrix::from_fn(n, n, |i, j| -w[i] * p[(i, j)]);
    let m = bordered_solve(&k, w, &wp)?;
    let resid = (&k * &m - &wp).amax();
    if !(resid <= PDE_TOL) {
        return Err(Error::IllConditioned(format!("elliptic residual {resid:.3e}")));
    }
    Ok(LinearizedOperator::new(d, OperatorKind::PhiPrime, m))
}

/// `G = F′(ρ̄) - Σ p_i (Φ^{ν_i})′(ρ̄)` for a grid population and the potentials
/// from `ρ̄` to each atom.
pub fn build_g(rho_bar: &DensityGrid, potentials: &[Potential], pop: &Population) -> Result<LinearizedOperator> {
    let atoms = pop.grid_atoms()?;
    if atoms.len() != potentials.len() {
        return Err(Error::invalid("potentials", "one potential per atom is required"));
    }
    let mut g = f_prime(rho_bar, pop.lambda())?.matrix;
    for ((w, nu), pot) in atoms.iter().zip(potentials) {
        g -= phi_prime(rho_bar, pot, nu)?.matrix * *w;
    }
    Ok(LinearizedOperator::new(rho_bar.domain_arc().clone(), OperatorKind::G, g))
}

/// Coefficient covariance `(1/n) Σ (φ_s - φ̄)(φ_s - φ̄)ᵀ` of potential samples.
pub fn potential_covariance(samples: &[Potential]) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("potential_samples", "at least 2 samples are required"));
    }
    let weights = vec![1.0 / samples.len() as f64; samples.len()];
    weighted_covariance(samples, &weights)
}

/// Exact covariance `Σ p_i (φ_i - φ̄)(φ_i - φ̄)ᵀ` of a finite population.
pub fn mixture_covariance(potentials: &[Potential], weights: &[f64]) -> Result<DMatrix<f64>> {
    if potentials.len() != weights.len() || potentials.is_empty() {
        return Err(Error::invalid("potentials", "one potential per weight is required"));
    }
    weighted_covariance(potentials, weights)
}

fn weighted_covariance(samples: &[Potential], weights: &[f64]) -> Result<DMatrix<f64>> {
    let n = samples[0].phi().len();
    if samples.iter().any(|s| s.phi().len() != n) {
        return Err(Error::invalid("potentials", "grids differ"));
    }
    let mut mean = DVector::zeros(n);
    for (s, w) in samples.iter().zip(weights) {
        mean += DVector::from_column_slice(s.phi()) * *w;
    }
    let mut c = DMatrix::zeros(n, n);
    for (s, w) in samples.iter().zip(weights) {
        let dev = DVector::from_column_slice(s.phi()) - &mean;
        c.ger(*w, &dev, &dev, 1.0);
    }
    Ok(c)
}

/// `Σ = G⁻¹ C G⁻ᵀ` as the covariance operator `u ↦ Σ W u`.
pub fn sigma_from(g: &LinearizedOperator, cov: &DMatrix<f64>) -> Result<LinearizedOperator> {
    let gi = g.inverse()?;
    let s = &gi * cov * gi.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let w = g.domain.weights();
    let m = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * w[j]);
    Ok(LinearizedOperator::new(g.domain.clone(), OperatorKind::Sigma, m))
}

/// CLT covariance from sampled potentials of i.i.d. draws against the fixed `ρ̄`.
pub fn clt_covariance(
    rho_bar: &DensityGrid,
    pop: &Population,
    potentials: &[Potential],
    potential_samples: &[Potential],
) -> Result<LinearizedOperator> {
    let g = build_g(rho_bar, potentials, pop)?;
    sigma_from(&g, &potential_covariance(potential_samples)?)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::ot::ot_1d;

    fn line(r: f64, n: usize) -> Arc<Domain> {
        Arc::new(Domain::interval(-r, r, n).unwrap())
    }

    fn bump(d: &Arc<Domain>, c: f64) -> DensityGrid {
        DensityGrid::from_fn(d.clone(), |x| 1.0 + 0.5 * (PI * (x[0] - c)).cos()).unwrap()
    }

    fn zero_mean(d: &Arc<Domain>, f: impl Fn(f64) -> f64) -> Vec<f64> {
        ZeroMeanGridFunction::new(d.clone(), d.xs().iter().map(|&x| f(x)).collect())
            .unwrap()
            .into_values()
    }

    #[test]
    fn f_prime_on_uniform_density() {
        let d = line(1.0, 41);
        let rho = DensityGrid::uniform(d.clone());
        let op = f_prime(&rho, 0.7).unwrap();
        let f = zero_mean(&d, |x| x * x + x);
        let out = op.apply(&f);
        for (o, v) in out.iter().zip(&f) {
            assert!((o - 1.4 * v).abs() < 1e-12);
        }
        let evs = op.eigenvalues();
        assert!(evs.iter().all(|e| (e - 1.4).abs() < 1e-9));
    }

    #[test]
    fn f_prime_spectrum_and_symmetry() {
        let d = line(1.0, 61);
        let rho = bump(&d, 0.0);
        let op = f_prime(&rho, 0.5).unwrap();
        assert!(op.symmetry_defect() < 1e-12);
        assert!(op.eigenvalues()[0] >= 0.5 / rho.max_value() - 1e-8);
        let even = zero_mean(&d, |x| x * x);
        let out = op.apply(&even);
        let n = out.len();
        for k in 0..n {
            assert!((out[k] - out[n - 1 - k]).abs() < 1e-12);
        }
        let low = DensityGrid::from_fn(d.clone(), |x| if x[0] > 0.9 { 1e-14 } else { 1.0 }).unwrap();
        assert!(matches!(f_prime(&low, 0.5), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn phi_prime_of_zero_is_zero() {
        let d = line(1.0, 41);
        let rho = bump(&d, 0.0);
        let nu = bump(&d, 0.2);
        let (pot, _) = ot_1d(&rho, &nu).unwrap();
        let op = phi_prime(&rho, &pot, &nu).unwrap();
        assert!(op.apply(&vec![0.0; 41]).iter().all(|v| *v == 0.0));
        assert!(op.apply(&vec![1.0; 41]).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn phi_prime_with_unit_coefficient_integrates_twice() {
        let r = 1.0;
        let d = line(r, 801);
        let rho = DensityGrid::uniform(d.clone());
        let pot = Potential::identity(d.clone());
        let op = phi_prime(&rho, &pot, &rho).unwrap();
        // ν ≡ 1/2 on [-1, 1], so (h′/2)′ = f
        let f = zero_mean(&d, |x| (PI * x / r).cos());
        let h = op.apply(&f);
        let exact = zero_mean(&d, |x| -2.0 * (r / PI).powi(2) * (PI * x / r).cos());
        let err = h.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn phi_prime_is_self_adjoint_and_elliptic() {
        let d = line(1.0, 101);
        let rho = bump(&d, -0.1);
        let nu = bump(&d, 0.3);
        let (pot, _) = ot_1d(&rho, &nu).unwrap();
        let op = phi_prime(&rho, &pot, &nu).unwrap();
        let f = zero_mean(&d, |x| (3.0 * x).sin() + x * x);
        let g = zero_mean(&d, |x| (2.0 * x).exp());
        assert!((op.form(&f, &g) - op.form(&g, &f)).abs() < 1e-9);
        // ⟨h, f⟩ = -Σ a (Δh)²/h
        let h = op.apply(&f);
        let a = transport_coefficient(&pot, &nu).unwrap();
        let dirichlet: f64 = a
            .iter()
            .zip(h.windows(2))
            .map(|(ak, w)| ak * (w[1] - w[0]).powi(2) / d.h())
            .sum();
        assert!((inner(&d, &h, &f) + dirichlet).abs() < 1e-9);
        assert!(op.eigenvalues().iter().all(|e| *e < 0.0));
    }

    #[test]
    fn rejects_non_convex_potential() {
        let d = line(1.0, 21);
        let rho = DensityGrid::uniform(d.clone());
        let flat = Potential::new(d.clone(), vec![0.0; 21], vec![0.0; 21]).unwrap();
        assert!(matches!(
            phi_prime(&rho, &flat, &rho),
            Err(Error::NonConvexPotential(_))
        ));
    }

    #[test]
    fn g_dominates_f_prime_and_inverts() {
        let d = line(1.0, 81);
        let atoms = [bump(&d, -0.3), bump(&d, 0.4)];
        let rho = bump(&d, 0.05);
        let pots: Vec<Potential> = atoms.iter().map(|nu| ot_1d(&rho, nu).unwrap().0).collect();
        let pop = Population::uniform(0.4, d.clone(), atoms.iter().cloned().map(Into::into).collect()).unwrap();
        let g = build_g(&rho, &pots, &pop).unwrap();
        let fp = f_prime(&rho, 0.4).unwrap();
        assert!(g.symmetry_defect() < 1e-9);
        assert!(g.matrix().row_iter().all(|r| (r * DVector::from_element(81, 1.0))[0].abs() < 1e-9));
        for (k, f) in [
            zero_mean(&d, |x| x),
            zero_mean(&d, |x| x * x * x - 0.2),
            zero_mean(&d, |x| (4.0 * x).cos()),
        ]
        .iter()
        .enumerate()
        {
            assert!(g.form(f, f) >= fp.form(f, f), "probe {k}");
            let u = g.solve(f).unwrap();
            let back = g.apply(&u);
            let err: f64 = back.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * norm);
        }
        assert!(g.condition_number().is_finite());
    }

    #[test]
    fn two_point_covariance() {
        let d = line(1.0, 41);
        let rho = bump(&d, 0.0);
        let atoms = [bump(&d, -0.2), bump(&d, 0.2)];
        let pots: Vec<Potential> = atoms.iter().map(|nu| ot_1d(&rho, nu).unwrap().0).collect();
        let c = potential_covariance(&pots).unwrap();
        let diff = DVector::from_column_slice(pots[0].phi()) - DVector::from_column_slice(pots[1].phi());
        let expect = &diff * diff.transpose() * 0.25;
        assert!((&c - &expect).amax() < 1e-14);
        let exact = mixture_covariance(&pots, &[0.5, 0.5]).unwrap();
        assert!((&c - exact).amax() < 1e-14);
        assert!(potential_covariance(&pots[..1]).is_err());

        let pop = Population::uniform(0.5, d.clone(), atoms.iter().cloned().map(Into::into).collect()).unwrap();
        let sigma = clt_covariance(&rho, &pop, &pots, &pots).unwrap();
        let evs = sigma.eigenvalues();
        let top = evs.last().unwrap().abs();
        assert!(evs[0] >= -1e-10 * top);
        // rank one
        assert!(evs[evs.len() - 2] <= 1e-8 * top);

        let same = vec![pots[0].clone(), pots[0].clone()];
        let zero = clt_covariance(&rho, &pop, &pots, &same).unwrap();
        assert!(zero.matrix().amax() < 1e-20);
    }

    #[test]
    fn sidecar_round_trip() {
        let d = line(1.0, 11);
        let op = f_prime(&DensityGrid::uniform(d), 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let [csv, json] = op.save(dir.path(), "f_prime").unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().count(), 11);
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(meta["kind"], "f-prime");
        assert_eq!(meta["size"], 11);
    }
}
