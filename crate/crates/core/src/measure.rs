//! Finitely supported parameter measures `ρ` over neurons `(a, w, b)`, the
//! functions `f_ρ(x) = E_ρ[a σ(w·x + b)]` they represent, orbit
//! symmetrization, and i.i.d. atom sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::net::NetParams;
use crate::rng;

/// Total-mass tolerance.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub p: f64,
    pub a: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

impl Atom {
    /// `|a| (‖w‖₁ + |b| + 1)`.
    pub fn path_weight(&self) -> f64 {
        self.a.abs() * (l1(&self.w) + self.b.abs() + 1.0)
    }

    #[inline]
    pub fn preactivation(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for at in &atoms {
            check_dim(dim, at.w.len())?;
            if !(at.p >= 0.0) || !at.a.is_finite() || !at.b.is_finite() {
                return Err(Error::InvalidMeasure(format!("bad atom {at:?}")));
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.p).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {mass} != 1")));
        }
        Ok(Self { dim, atoms })
    }

    /// Infers the dimension from the first atom.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms.first().ok_or(Error::EmptyMeasure)?.w.len();
        Self::new(dim, atoms)
    }

    /// Equal-weight measure over the given `(a, w, b)` triples.
    pub fn uniform(dim: usize, neurons: Vec<(f64, Vec<f64>, f64)>) -> Result<Self> {
        let p = 1.0 / neurons.len().max(1) as f64;
        Self::new(dim, neurons.into_iter().map(|(a, w, b)| Atom { p, a, w, b }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `sqrt(Σ p_j |a_j|² (‖w_j‖₁ + |b_j| + 1)²)`: the Barron norm of this
    /// particular representation, an upper bound on the infimum norm.
    pub fn barron_norm_bound(&self) -> f64 {
        self.atoms.iter().map(|a| a.p * a.path_weight().powi(2)).sum::<f64>().sqrt()
    }

    /// `f_ρ(x) = Σ_j p_j a_j σ(w_j·x + b_j)`.
    pub fn eval(&self, act: &Activation, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(act, x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, act: &Activation, x: &[f64]) -> f64 {
        self.atoms.iter().map(|at| at.p * at.a * act.value(at.preactivation(x))).sum()
    }

    /// Replaces each atom by its `|G|` images `(p/|G|, a, g^T w, b)`.
    pub fn symmetrize(&self, group: &GroupAction) -> Result<Self> {
        check_dim(self.dim, group.dim())?;
        let k = group.order() as f64;
        let mut atoms = Vec::with_capacity(self.atoms.len() * group.order());
        for at in &self.atoms {
            for s in 0..group.order() {
                atoms.push(Atom {
                    p: at.p / k,
                    a: at.a,
                    w: group.apply_transpose(s, &at.w)?,
                    b: at.b,
                });
            }
        }
        Ok(Self { dim: self.dim, atoms })
    }

    /// `m` i.i.d. draws from the categorical distribution over atoms.
    pub fn sample_atoms(&self, m: usize, seed: u64) -> Result<NetParams> {
        if m == 0 {
            return Err(Error::InvalidArgument("sample size m must be >= 1".into()));
        }
        let dist = WeightedIndex::new(self.atoms.iter().map(|a| a.p))
            .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        let mut r = rng::seeded(seed);
        let mut a = Vec::with_capacity(m);
        let mut w = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for _ in 0..m {
            let at = &self.atoms[dist.sample(&mut r)];
            a.push(at.a);
            w.push(at.w.clone());
            b.push(at.b);
        }
        NetParams::new(a, w, b)
    }
}

/// A target `f_* = f_ρ` with its activation and representation norm.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    pub measure: DiscreteMeasure,
    pub activation: Activation,
    pub barron_bound: f64,
    /// Name of the group the target was symmetrized under, if any.
    pub invariant_under: Option<String>,
}

impl TargetFunction {
    pub fn new(measure: DiscreteMeasure, activation: Activation) -> Self {
        let barron_bound = measure.barron_norm_bound();
        Self { measure, activation, barron_bound, invariant_under: None }
    }

    /// The target built from `symmetrize(ρ, G)`.
    pub fn symmetrized(measure: &DiscreteMeasure, activation: Activation, group: &GroupAction) -> Result<Self> {
        let sym = measure.symmetrize(group)?;
        let mut t = Self::new(sym, activation);
        t.invariant_under = Some(group.name().to_string());
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.measure.eval(&self.activation, x)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.measure.eval_unchecked(&self.activation, x)
    }

    /// Largest `|f(gx) - f(x)|` over the given probes and all `g`.
    pub fn invariance_defect(&self, group: &GroupAction, probes: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in probes {
            let fx = self.eval(x)?;
            for gx in group.orbit(x)? {
                worst = worst.max((self.eval_unchecked(&gx) - fx).abs());
            }
        }
        Ok(worst)
    }
}
