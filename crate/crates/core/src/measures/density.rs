use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::Domain;

/// Floor applied before taking logarithms of densities.
pub const LOG_FLOOR: f64 = 1e-300;

/// A probability density sampled at the nodes of a [`Domain`].
///
/// Values are nonnegative, zero on inactive nodes, and integrate to one under
/// the domain's trapezoidal weights.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl PartialEq for DensityGrid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.values == other.values
    }
}

impl DensityGrid {
    /// Validates and normalizes raw nodal values.
    pub fn new(domain: Arc<Domain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::invalid(
                "density",
                format!("expected {} values, got {}", domain.len(), values.len()),
            ));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid("density", format!("non-finite value at node {i}")));
            }
            if *v < 0.0 {
                return Err(Error::invalid("density", format!("negative value {v} at node {i}")));
            }
            if !domain.is_active(i) {
                *v = 0.0;
            }
        }
        let mass = domain.integrate(&values);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("density", "total mass is zero"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(DensityGrid { domain, values })
    }

    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..domain.len()).map(|i| f(&domain.node(i))).collect();
        Self::new(domain, values)
    }

    /// Uniform density on the active region.
    pub fn uniform(domain: Arc<Domain>) -> Self {
        let values = domain.active().iter().map(|&a| f64::from(u8::from(a))).collect();
        Self::new(domain, values).expect("active region has positive volume")
    }

    /// Builds a density from log-values, normalizing with a log-sum-exp shift.
    /// Active values that underflow are floored at [`LOG_FLOOR`].
    pub fn from_log(domain: Arc<Domain>, log_values: &[f64]) -> Result<Self> {
        let max = log_values
            .iter()
            .zip(domain.active())
            .filter(|(_, &a)| a)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateDensity("log-density has no finite maximum".into()));
        }
        let values = log_values.iter().map(|v| (v - max).exp().max(LOG_FLOOR)).collect();
        Self::new(domain, values)
    }

    /// Convex combination `Σ w_k ρ_k` of densities on the same grid.
    pub fn mixture(parts: &[(f64, &DensityGrid)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("mixture", "no components"))?;
        let domain = first.1.domain.clone();
        let mut values = vec![0.0; domain.len()];
        for (w, d) in parts {
            if *d.domain != *domain {
                return Err(Error::invalid("mixture", "components live on different grids"));
            }
            for (acc, v) in values.iter_mut().zip(&d.values) {
                *acc += w * v;
            }
        }
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn mass(&self) -> f64 {
        self.domain.integrate(&self.values)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Quadrature of `f(x) ρ(x)`.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let d = &self.domain;
        let mut x = vec![0.0; d.dim()];
        let mut acc = 0.0;
        for (i, (&w, &v)) in d.weights().iter().zip(&self.values).enumerate() {
            if w == 0.0 || v == 0.0 {
                continue;
            }
            d.node_into(i, &mut x);
            acc += w * v * f(&x);
        }
        acc
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.expect(|x| x[a])).collect()
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|x| x.iter().map(|v| v * v).sum())
    }

    pub fn p_moment(&self, p: f64) -> Result<f64> {
        check_order(p)?;
        Ok(self.expect(|x| x.iter().map(|v| v * v).sum::<f64>().powf(p / 2.0)))
    }

    /// `∫ ρ log ρ` with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.domain
            .weights()
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v > 0.0)
            .map(|(w, &v)| w * v * v.max(LOG_FLOOR).ln())
            .sum()
    }

    /// Nodal log-density, floored at [`LOG_FLOOR`].
    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(LOG_FLOOR).ln()).collect()
    }

    /// `∫ |ρ - σ|` over the shared grid.
    pub fn l1_distance(&self, other: &DensityGrid) -> f64 {
        self.domain
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum()
    }

    pub fn sup_distance(&self, other: &DensityGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Pushforward by `x ↦ x + s`, resampled on the same grid by linear interpolation.
    ///
    /// Fails with [`Error::SupportOverflow`] when more than `1e-10` of the mass would
    /// land outside the active region.
    pub fn shift(&self, s: &[f64]) -> Result<Self> {
        let d = &self.domain;
        if s.len() != d.dim() {
            return Err(Error::invalid("shift", "dimension mismatch"));
        }
        if s.iter().all(|&v| v == 0.0) {
            return Ok(self.clone());
        }
        let mut x = vec![0.0; d.dim()];
        let mut leaked = 0.0;
        for i in 0..d.len() {
            if d.weights()[i] == 0.0 || self.values[i] == 0.0 {
                continue;
            }
            d.node_into(i, &mut x);
            x.iter_mut().zip(s).for_each(|(a, b)| *a += b);
            if !d.contains(&x) {
                leaked += d.weights()[i] * self.values[i];
            }
        }
        if leaked > 1e-10 {
            return Err(Error::SupportOverflow { leaked });
        }
        let mut values = vec![0.0; d.len()];
        for (i, out) in values.iter_mut().enumerate() {
            if !d.is_active(i) {
                continue;
            }
            d.node_into(i, &mut x);
            x.iter_mut().zip(s).for_each(|(a, b)| *a -= b);
            *out = d.interpolate(&self.values, &x).max(0.0);
        }
        Self::new(self.domain.clone(), values)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_grid_csv(&self.domain, "value", &self.values, w)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a density CSV whose node coordinates must match `domain`.
    pub fn read_csv(domain: Arc<Domain>, r: impl BufRead) -> Result<Self> {
        let values = read_grid_csv(&domain, "value", r)?;
        Self::new(domain, values)
    }

    pub fn load_csv(domain: Arc<Domain>, path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(domain, std::io::BufReader::new(f))
    }
}

pub(crate) fn check_order(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("moment order must be >= 1, got {p}")));
    }
    Ok(())
}

/// Writes nodal values as `x1,..,xd,<column>` rows in grid order.
pub fn write_grid_csv(domain: &Domain, column: &str, values: &[f64], mut w: impl Write) -> Result<()> {
    let dim = domain.dim();
    let header: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},{}", header.join(","), column)?;
    for (i, v) in values.iter().enumerate() {
        for a in 0..dim {
            write!(w, "{:.16e},", domain.coord(i, a))?;
        }
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(domain: &Domain, column: &str, r: impl BufRead) -> Result<Vec<f64>> {
    let dim = domain.dim();
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty grid file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols.len() != dim + 1 || cols[dim] != column {
        return Err(Error::Parse(format!(
            "expected header x1..x{dim},{column}, got `{}`",
            header.trim()
        )));
    }
    let tol: f64 = 1e-9 * domain.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut values = Vec::with_capacity(domain.len());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", row + 2)))
            })
            .collect::<Result<_>>()?;
        if fields.len() != dim + 1 {
            return Err(Error::Parse(format!("row {}: expected {} fields", row + 2, dim + 1)));
        }
        let i = values.len();
        if i >= domain.len() {
            return Err(Error::Parse("more rows than grid nodes".into()));
        }
        for a in 0..dim {
            if (fields[a] - domain.coord(i, a)).abs() > tol {
                return Err(Error::Parse(format!(
                    "row {}: coordinate {} does not match grid node {}",
                    row + 2,
                    fields[a],
                    domain.coord(i, a)
                )));
            }
        }
        values.push(fields[dim]);
    }
    if values.len() != domain.len() {
        return Err(Error::Parse(format!(
            "expected {} rows, got {}",
            domain.len(),
            values.len()
        )));
    }
    Ok(values)
}
