use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, AtomSpec, Domain, Population};

/// Families of random measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerFamily {
    /// `N(m, v)` on a line with `m` and `v` uniform on the given ranges.
    RandomGaussian { mean: [f64; 2], variance: [f64; 2] },
    /// A fixed template translated by a uniform shift.
    RandomTranslatedTemplate { template: AtomSpec, shift: [f64; 2] },
    /// `floor + Σ a_k exp(-(x - c_k)²/2w_k²)` with uniform centers, widths and amplitudes.
    RandomBumpMixture {
        bumps: usize,
        center: [f64; 2],
        width: [f64; 2],
        amplitude: [f64; 2],
        floor: f64,
    },
    /// Uniform draws from a fixed list; the law `P` is then known exactly.
    FiniteAtoms { atoms: Vec<AtomSpec> },
}

/// A seeded source of random measures. Each stream id gives an independent,
/// reproducible sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSampler {
    #[serde(flatten)]
    pub family: SamplerFamily,
    pub seed: u64,
}

/// One sampled measure. `key` identifies the atom for finite families, so that
/// repeated draws can be merged.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub key: Option<usize>,
    pub spec: AtomSpec,
}

fn range(name: &str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::invalid(name, "needs a finite range with lower ≤ upper"));
    }
    if positive && !(r[0] > 0.0) {
        return Err(Error::invalid(name, "must be > 0"));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

impl MeasureSampler {
    pub fn new(family: SamplerFamily, seed: u64) -> Result<Self> {
        let s = MeasureSampler { family, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            SamplerFamily::RandomGaussian { mean, variance } => {
                range("sampler.mean", *mean, false)?;
                range("sampler.variance", *variance, true)
            }
            SamplerFamily::RandomTranslatedTemplate { template, shift } => {
                range("sampler.shift", *shift, false)?;
                template.validate()?;
                template.shifted(&[0.0]).map(|_| ())
            }
            SamplerFamily::RandomBumpMixture {
                bumps,
                center,
                width,
                amplitude,
                floor,
            } => {
                if *bumps == 0 {
                    return Err(Error::invalid("sampler.bumps", "must be at least 1"));
                }
                range("sampler.center", *center, false)?;
                range("sampler.width", *width, true)?;
                range("sampler.amplitude", *amplitude, false)?;
                if !(amplitude[0] >= 0.0) {
                    return Err(Error::invalid("sampler.amplitude", "must be ≥ 0"));
                }
                if !(*floor > 0.0 && floor.is_finite()) {
                    return Err(Error::invalid("sampler.floor", "must be > 0"));
                }
                Ok(())
            }
            SamplerFamily::FiniteAtoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("sampler.atoms", "list is empty"));
                }
                atoms.iter().try_for_each(AtomSpec::validate)
            }
        }
    }

    /// Generator for stream `stream`, independent of how streams are scheduled.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Draw> {
        let spec = match &self.family {
            SamplerFamily::RandomGaussian { mean, variance } => {
                let m = uniform(rng, *mean);
                AtomSpec::gaussian_1d(m, uniform(rng, *variance))
            }
            SamplerFamily::RandomTranslatedTemplate { template, shift } => {
                template.shifted(&[uniform(rng, *shift)])?
            }
            SamplerFamily::RandomBumpMixture {
                bumps,
                center,
                width,
                amplitude,
                floor,
            } => {
                let mut centers = Vec::with_capacity(*bumps);
                let mut widths = Vec::with_capacity(*bumps);
                let mut amplitudes = Vec::with_capacity(*bumps);
                for _ in 0..*bumps {
                    centers.push(uniform(rng, *center));
                    widths.push(uniform(rng, *width));
                    amplitudes.push(uniform(rng, *amplitude));
                }
                AtomSpec::Bumps {
                    centers,
                    widths,
                    amplitudes,
                    floor: *floor,
                }
            }
            SamplerFamily::FiniteAtoms { atoms } => {
                let k = rng.random_range(0..atoms.len());
                return Ok(Draw {
                    key: Some(k),
                    spec: atoms[k].clone(),
                });
            }
        };
        Ok(Draw { key: None, spec })
    }

    pub fn draw_n(&self, n: usize, stream: u64) -> Result<Vec<Draw>> {
        let mut rng = self.rng(stream);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    /// `m` draws frozen into a finite law.
    pub fn freeze(&self, m: usize, stream: u64) -> Result<MeasureSampler> {
        if m == 0 {
            return Err(Error::invalid("atoms", "need at least one atom"));
        }
        let atoms = self.draw_n(m, stream)?.into_iter().map(|d| d.spec).collect();
        MeasureSampler::new(SamplerFamily::FiniteAtoms { atoms }, self.seed)
    }

    /// Log-concavity constant shared by every possible draw, if known.
    pub fn log_concavity(&self) -> Option<f64> {
        match &self.family {
            SamplerFamily::RandomGaussian { variance, .. } => Some(1.0 / variance[1]),
            SamplerFamily::RandomTranslatedTemplate { template, .. } => template.log_concavity(),
            SamplerFamily::RandomBumpMixture { .. } => None,
            SamplerFamily::FiniteAtoms { atoms } => atoms
                .iter()
                .map(AtomSpec::log_concavity)
                .try_fold(f64::INFINITY, |acc, a| a.map(|a| acc.min(a))),
        }
    }

    /// Bounds `(lower, upper)` that every bump-mixture draw satisfies on `domain`.
    pub fn density_bounds(&self, domain: &Domain) -> Option<(f64, f64)> {
        match &self.family {
            SamplerFamily::RandomBumpMixture {
                bumps,
                amplitude,
                floor,
                ..
            } => {
                let top = floor + *bumps as f64 * amplitude[1];
                let vol = domain.volume();
                Some((floor / (top * vol), top / (floor * vol)))
            }
            _ => None,
        }
    }

    /// The law itself as a population with uniform weights, for finite families.
    pub fn population(&self, lambda: f64, domain: &Arc<Domain>) -> Result<Population> {
        match &self.family {
            SamplerFamily::FiniteAtoms { atoms } => {
                let grids = atoms
                    .iter()
                    .map(|a| Ok(Atom::Grid(a.render(domain)?)))
                    .collect::<Result<Vec<_>>>()?;
                Population::uniform(lambda, domain.clone(), grids)
            }
            _ => Err(Error::invalid("sampler", "only a finite law has an exact population")),
        }
    }
}

/// The empirical law `P_n = (1/n) Σ δ_{ν_i}` with repeated finite atoms merged.
pub fn empirical_population(draws: &[Draw], lambda: f64, domain: &Arc<Domain>) -> Result<Population> {
    if draws.is_empty() {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let n = draws.len() as f64;
    let mut keyed: BTreeMap<usize, (usize, &AtomSpec)> = BTreeMap::new();
    let mut atoms = Vec::new();
    for d in draws {
        match d.key {
            Some(k) => keyed.entry(k).or_insert((0, &d.spec)).0 += 1,
            None => atoms.push((1.0 / n, Atom::Grid(d.spec.render(domain)?))),
        }
    }
    for (count, spec) in keyed.into_values() {
        atoms.push((count as f64 / n, Atom::Grid(spec.render(domain)?)));
    }
    Population::new(lambda, domain.clone(), atoms)
}
