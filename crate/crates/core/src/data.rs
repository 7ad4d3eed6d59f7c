//! Input domains, uniform samplers and noisy regression datasets.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::TargetFunction;
use crate::rng;

/// Uniform probability measure on one of the supported domains. All of them
/// sit inside the unit ℓ∞ ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSpec {
    /// `[-1, 1]^d`
    CubePm1(usize),
    /// `[0, 1]^d`
    UnitCube(usize),
    /// `{x ∈ R² : ‖x‖₂ ≤ 1}`
    UnitDisk,
}

impl DomainSpec {
    /// Parses `cube_pm1:d`, `unit_cube:d` or `unit_disk`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown domain spec `{spec}`"));
        match spec.trim().split_once(':') {
            None if spec.trim() == "unit_disk" => Ok(Self::UnitDisk),
            Some((kind, d)) => {
                let d: usize = d.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                match kind.trim() {
                    "cube_pm1" => Ok(Self::CubePm1(d)),
                    "unit_cube" => Ok(Self::UnitCube(d)),
                    _ => Err(bad()),
                }
            }
            None => Err(bad()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::CubePm1(d) | Self::UnitCube(d) => d,
            Self::UnitDisk => 2,
        }
    }

    /// One uniform draw.
    pub fn draw<R: Rng>(&self, r: &mut R) -> Vec<f64> {
        match *self {
            Self::CubePm1(d) => (0..d).map(|_| r.random_range(-1.0..=1.0)).collect(),
            Self::UnitCube(d) => (0..d).map(|_| r.random_range(0.0..=1.0)).collect(),
            Self::UnitDisk => loop {
                let x: f64 = r.random_range(-1.0..=1.0);
                let y: f64 = r.random_range(-1.0..=1.0);
                if x * x + y * y <= 1.0 {
                    break vec![x, y];
                }
            },
        }
    }

    /// `n` i.i.d. uniform points. Draws are sequential, so the first `n`
    /// points of a larger sample with the same seed coincide with this one.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| self.draw(&mut r)).collect()
    }

    /// Deterministic boundary probes: the `2^d` corners of a cube, or
    /// `resolution` equally spaced points on the unit circle.
    pub fn boundary_probes(&self, resolution: usize) -> Vec<Vec<f64>> {
        match *self {
            Self::CubePm1(d) | Self::UnitCube(d) => {
                let (lo, hi) = if matches!(self, Self::CubePm1(_)) { (-1.0, 1.0) } else { (0.0, 1.0) };
                (0..1usize << d)
                    .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { hi } else { lo }).collect())
                    .collect()
            }
            Self::UnitDisk => (0..resolution.max(1))
                .map(|k| {
                    let t = 2.0 * PI * (k as f64 / resolution.max(1) as f64);
                    vec![t.cos(), t.sin()]
                })
                .collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Self::CubePm1(d) => x.len() == d && x.iter().all(|v| (-1.0..=1.0).contains(v)),
            Self::UnitCube(d) => x.len() == d && x.iter().all(|v| (0.0..=1.0).contains(v)),
            Self::UnitDisk => x.len() == 2 && x[0] * x[0] + x[1] * x[1] <= 1.0,
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CubePm1(d) => write!(f, "cube_pm1:{d}"),
            Self::UnitCube(d) => write!(f, "unit_cube:{d}"),
            Self::UnitDisk => write!(f, "unit_disk"),
        }
    }
}

pub fn sample_domain(spec: DomainSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    Ok(spec.sample(n, seed))
}

/// Observation noise: bounded, zero-mean, independent of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    /// `ε ~ U(-τ, τ)`
    Uniform { tau: f64 },
}

impl NoiseSpec {
    pub fn tau(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Uniform { tau } => tau,
        }
    }

    /// `τ₀ = E[ε²]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Uniform { tau } => tau * tau / 3.0,
        }
    }
}

/// Samples `(x_i, y_i)` with `y = f_*(x) + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub noise: NoiseSpec,
    pub tau0: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: Self = serde_json::from_str(s)?;
        if ds.xs.len() != ds.m || ds.ys.len() != ds.m || ds.xs.iter().any(|x| x.len() != ds.d) {
            return Err(Error::Config("dataset fields inconsistent with d / M".into()));
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn make_dataset(
    target: &TargetFunction,
    domain: DomainSpec,
    m: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("dataset size M must be >= 1".into()));
    }
    if domain.dim() != target.dim() {
        return Err(Error::Shape { expected: target.dim(), got: domain.dim() });
    }
    let xs = domain.sample(m, rng::derive_seed(seed, &[0]));
    let mut nr = rng::derived(seed, &[1]);
    let ys = xs
        .iter()
        .map(|x| {
            let eps = match noise {
                NoiseSpec::None => 0.0,
                NoiseSpec::Uniform { tau } => nr.random_range(-tau..tau),
            };
            target.eval_unchecked(x) + eps
        })
        .collect();
    Ok(Dataset { d: domain.dim(), m, xs, ys, noise, tau0: noise.second_moment() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::measure::DiscreteMeasure;

    fn target() -> TargetFunction {
        let rho = DiscreteMeasure::uniform(2, vec![(1.0, vec![1.0, 1.0], -0.5), (-0.5, vec![0.3, -1.0], 0.2)])
            .unwrap();
        TargetFunction::new(rho, Activation::relu())
    }

    #[test]
    fn cube_sample_mean_near_zero() {
        let xs = sample_domain(DomainSpec::CubePm1(2), 10_000, 1).unwrap();
        for k in 0..2 {
            let m: f64 = xs.iter().map(|x| x[k]).sum::<f64>() / 1e4;
            assert!(m.abs() < 0.03);
        }
        assert!(xs.iter().all(|x| x.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn disk_samples_inside_and_deterministic() {
        let xs = sample_domain(DomainSpec::UnitDisk, 5000, 2).unwrap();
        assert!(xs.iter().all(|x| x[0].hypot(x[1]) <= 1.0));
        assert_eq!(xs, sample_domain(DomainSpec::UnitDisk, 5000, 2).unwrap());
        let longer = sample_domain(DomainSpec::UnitDisk, 6000, 2).unwrap();
        assert_eq!(&longer[..5000], &xs[..]);
    }

    #[test]
    fn boundary_probes() {
        let c = DomainSpec::UnitCube(3).boundary_probes(0);
        assert_eq!(c.len(), 8);
        assert!(c.contains(&vec![1.0, 0.0, 1.0]));
        let d = DomainSpec::UnitDisk.boundary_probes(100);
        assert_eq!(d.len(), 100);
        assert!(d.iter().all(|x| (x[0].hypot(x[1]) - 1.0).abs() < 1e-15));
    }

    #[test]
    fn parse_domain() {
        assert_eq!(DomainSpec::parse("cube_pm1:2").unwrap(), DomainSpec::CubePm1(2));
        assert_eq!(DomainSpec::parse("unit_cube:3").unwrap(), DomainSpec::UnitCube(3));
        assert_eq!(DomainSpec::parse("unit_disk").unwrap(), DomainSpec::UnitDisk);
        assert!(DomainSpec::parse("ball:2").is_err());
        assert!(DomainSpec::parse("cube_pm1:0").is_err());
    }

    #[test]
    fn noiseless_dataset_matches_target() {
        let t = target();
        let ds = make_dataset(&t, DomainSpec::CubePm1(2), 200, NoiseSpec::None, 3).unwrap();
        for (x, y) in ds.xs.iter().zip(&ds.ys) {
            assert_eq!(*y, t.eval(x).unwrap());
        }
        assert_eq!(ds.tau0, 0.0);
    }

    #[test]
    fn uniform_noise_is_bounded_centered_and_independent() {
        let t = target();
        let noise = NoiseSpec::Uniform { tau: 1.0 };
        assert!((noise.second_moment() - 1.0 / 3.0).abs() < 1e-15);
        let ds = make_dataset(&t, DomainSpec::CubePm1(2), 100_000, noise, 4).unwrap();
        assert_eq!(ds.tau0, 1.0 / 3.0);
        let eps: Vec<f64> = ds.xs.iter().zip(&ds.ys).map(|(x, y)| y - t.eval(x).unwrap()).collect();
        assert!(eps.iter().all(|e| e.abs() <= 1.0));
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");

        let r: Vec<f64> = ds.xs.iter().map(|x| x[0].hypot(x[1])).collect();
        let n = r.len() as f64;
        let (mr, me) = (r.iter().sum::<f64>() / n, mean);
        let cov: f64 = r.iter().zip(&eps).map(|(a, b)| (a - mr) * (b - me)).sum::<f64>() / n;
        let sr = (r.iter().map(|a| (a - mr).powi(2)).sum::<f64>() / n).sqrt();
        let se = (eps.iter().map(|b| (b - me).powi(2)).sum::<f64>() / n).sqrt();
        assert!((cov / (sr * se)).abs() < 0.01);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let ds = make_dataset(&target(), DomainSpec::CubePm1(2), 50, NoiseSpec::Uniform { tau: 1.0 }, 5).unwrap();
        let js = ds.to_json().unwrap();
        assert!(js.contains(r#""noise":{"kind":"uniform","tau":1.0}"#));
        assert!(js.contains(r#""M":50"#));
        let back = Dataset::from_json(&js).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.ys.iter().zip(&ds.ys) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
