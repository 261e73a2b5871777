use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Box,
    Ball,
    /// A box standing in for the whole space; atoms must leave negligible mass outside it.
    FullSpaceTruncation,
    /// A disconnected 1D domain: a union of closed sub-intervals of the bounding grid.
    Intervals,
}

/// Serializable description of a grid domain. [`Domain`] is built from this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<[f64; 2]>,
}

/// A regular tensor grid over a box together with an active mask and trapezoidal
/// quadrature weights restricted to the active region.
#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    active: Vec<bool>,
    weights: Vec<f64>,
    volume: f64,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Domain {
    pub fn interval(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::from_spec(DomainSpec {
            kind: DomainKind::Interval,
            lower: vec![lower],
            upper: vec![upper],
            points: vec![points],
            radius: None,
            pieces: Vec::new(),
        })
    }

    pub fn full_space(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        Self::from_spec(DomainSpec {
            kind: DomainKind::FullSpaceTruncation,
            lower,
            upper,
            points,
            radius: None,
            pieces: Vec::new(),
        })
    }

    /// Symmetric 1D truncation `[-half_width, half_width]`.
    pub fn full_space_1d(half_width: f64, points: usize) -> Result<Self> {
        Self::full_space(vec![-half_width], vec![half_width], vec![points])
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        Self::from_spec(DomainSpec {
            kind: DomainKind::Box,
            lower,
            upper,
            points,
            radius: None,
            pieces: Vec::new(),
        })
    }

    /// Closed ball of the given radius centred at the origin, gridded on its bounding box.
    pub fn ball(dim: usize, radius: f64, points: usize) -> Result<Self> {
        Self::from_spec(DomainSpec {
            kind: DomainKind::Ball,
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
            points: vec![points; dim],
            radius: Some(radius),
            pieces: Vec::new(),
        })
    }

    /// Union of closed sub-intervals of `[lower, upper]`.
    pub fn intervals(lower: f64, upper: f64, points: usize, pieces: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_spec(DomainSpec {
            kind: DomainKind::Intervals,
            lower: vec![lower],
            upper: vec![upper],
            points: vec![points],
            radius: None,
            pieces,
        })
    }

    pub fn from_spec(spec: DomainSpec) -> Result<Self> {
        let dim = spec.lower.len();
        if dim == 0 {
            return Err(Error::invalid("domain", "dimension must be at least 1"));
        }
        if spec.upper.len() != dim || spec.points.len() != dim {
            return Err(Error::invalid(
                "domain",
                "lower, upper and points must have the same length",
            ));
        }
        for axis in 0..dim {
            let (lo, hi) = (spec.lower[axis], spec.upper[axis]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "domain",
                    format!("axis {axis}: need finite lower < upper, got [{lo}, {hi}]"),
                ));
            }
            if spec.points[axis] < 2 {
                return Err(Error::invalid(
                    "domain.points",
                    format!("axis {axis}: need at least 2 grid points"),
                ));
            }
        }
        match spec.kind {
            DomainKind::Interval | DomainKind::Intervals if dim != 1 => {
                return Err(Error::invalid("domain.kind", "interval domains are 1D"));
            }
            DomainKind::Ball => match spec.radius {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return Err(Error::invalid("domain.radius", "ball radius must be > 0")),
            },
            DomainKind::Intervals => {
                if spec.pieces.is_empty() {
                    return Err(Error::invalid("domain.pieces", "need at least one piece"));
                }
                for p in &spec.pieces {
                    if !(p[0] < p[1]) || p[0] < spec.lower[0] || p[1] > spec.upper[0] {
                        return Err(Error::invalid(
                            "domain.pieces",
                            format!("piece [{}, {}] is empty or outside the grid", p[0], p[1]),
                        ));
                    }
                }
            }
            _ => {}
        }

        let spacing: Vec<f64> = (0..dim)
            .map(|a| (spec.upper[a] - spec.lower[a]) / (spec.points[a] - 1) as f64)
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * spec.points[a + 1];
        }
        let len: usize = spec.points.iter().product();

        let mut domain = Domain {
            spec,
            spacing,
            strides,
            active: vec![true; len],
            weights: vec![0.0; len],
            volume: 0.0,
        };
        domain.build_mask_and_weights();
        if domain.volume <= 0.0 {
            return Err(Error::invalid("domain", "active region has zero volume"));
        }
        Ok(domain)
    }

    fn build_mask_and_weights(&mut self) {
        let len = self.len();
        let dim = self.dim();
        let mut coords = vec![0.0; dim];
        for i in 0..len {
            self.node_into(i, &mut coords);
            self.active[i] = self.contains(&coords);
        }

        if dim == 1 {
            // cell-based trapezoid: a cell counts only when both ends are active
            let h = self.spacing[0];
            for k in 0..len - 1 {
                if self.active[k] && self.active[k + 1] {
                    self.weights[k] += 0.5 * h;
                    self.weights[k + 1] += 0.5 * h;
                }
            }
        } else {
            for i in 0..len {
                if !self.active[i] {
                    continue;
                }
                let mut w = 1.0;
                for axis in 0..dim {
                    let j = (i / self.strides[axis]) % self.spec.points[axis];
                    let edge = j == 0 || j + 1 == self.spec.points[axis];
                    w *= if edge { 0.5 } else { 1.0 } * self.spacing[axis];
                }
                self.weights[i] = w;
            }
        }
        self.volume = self.weights.iter().sum();
    }

    /// Whether a point lies in the closed active region.
    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-9 * self.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
        let in_box = x
            .iter()
            .enumerate()
            .all(|(a, &v)| v >= self.spec.lower[a] - tol && v <= self.spec.upper[a] + tol);
        if !in_box {
            return false;
        }
        match self.spec.kind {
            DomainKind::Ball => {
                let r = self.spec.radius.unwrap_or(0.0);
                x.iter().map(|v| v * v).sum::<f64>().sqrt() <= r + tol
            }
            DomainKind::Intervals => self
                .spec
                .pieces
                .iter()
                .any(|p| x[0] >= p[0] - tol && x[0] <= p[1] + tol),
            _ => true,
        }
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn kind(&self) -> DomainKind {
        self.spec.kind
    }

    pub fn dim(&self) -> usize {
        self.spec.lower.len()
    }

    pub fn len(&self) -> usize {
        self.spec.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> &[usize] {
        &self.spec.points
    }

    pub fn lower(&self) -> &[f64] {
        &self.spec.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.spec.upper
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Grid spacing of a 1D domain.
    pub fn h(&self) -> f64 {
        self.spacing[0]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    /// Trapezoidal weights, zero on inactive nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lebesgue measure of the active region under the quadrature rule.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Whether the domain is convex (needed by the maximum principle and moment bounds).
    pub fn is_convex(&self) -> bool {
        !matches!(self.spec.kind, DomainKind::Intervals)
    }

    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        let j = (i / self.strides[axis]) % self.spec.points[axis];
        self.spec.lower[axis] + j as f64 * self.spacing[axis]
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(i, a)).collect()
    }

    pub fn node_into(&self, i: usize, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.coord(i, a);
        }
    }

    /// Node coordinates of a 1D grid.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coord(i, 0)).collect()
    }

    /// Squared Euclidean norm of every node.
    pub fn norms_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (0..self.dim()).map(|a| self.coord(i, a).powi(2)).sum())
            .collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Average over the active region.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.volume
    }

    /// Subtract the domain average so that the quadrature of the result is zero.
    pub fn center(&self, values: &mut [f64]) {
        let m = self.mean_of(values);
        values.iter_mut().for_each(|v| *v -= m);
    }

    /// Flat index of the node with the given per-axis indices.
    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(j, s)| j * s).sum()
    }

    /// Per-axis index of flat node `i` along `axis`.
    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.strides[axis]) % self.spec.points[axis]
    }

    /// Linear (multilinear in d > 1) interpolation of nodal values at an arbitrary point.
    /// Points outside the grid box evaluate to 0.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let dim = self.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for a in 0..dim {
            let t = (x[a] - self.spec.lower[a]) / self.spacing[a];
            let n = self.spec.points[a];
            if t < -1e-9 || t > (n - 1) as f64 + 1e-9 {
                return 0.0;
            }
            let t = t.clamp(0.0, (n - 1) as f64);
            let j = (t.floor() as usize).min(n - 2);
            base[a] = j;
            frac[a] = t - j as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..dim {
                let up = (corner >> a) & 1 == 1;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + usize::from(up)) * self.strides[a];
            }
            if w != 0.0 {
                acc += w * values[idx];
            }
        }
        acc
    }
}
