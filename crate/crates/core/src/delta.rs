//! The symmetry factor `δ = min{1, δ*}` where `δ*` is the sup over measures
//! and inputs of `E_ρ[(a·𝒢σ(w·x+b))²] / E_ρ[(a·σ(w·x+b))²]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::activation::Activation;
use crate::data::DomainSpec;
use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::measure::{dot, DiscreteMeasure};

/// Second moments below this are treated as zero.
pub const NULL_MOMENT: f64 = 1e-14;

pub const MIN_PROBES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    /// Plain moment vanishes while the averaged one does not.
    Unbounded,
    /// Both moments vanish.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub delta_star: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_measure: usize,
    pub n_probes: usize,
    pub skipped_probes: usize,
    pub unbounded_probes: usize,
}

fn moments(rho: &DiscreteMeasure, act: &Activation, orbit: &[Vec<f64>]) -> (f64, f64) {
    let inv = 1.0 / orbit.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for atom in rho.atoms() {
        let plain = atom.a * act.value(dot(&atom.w, &orbit[0]) + atom.b);
        let avg = atom.a * orbit.iter().map(|gx| act.value(dot(&atom.w, gx) + atom.b)).sum::<f64>() * inv;
        num += atom.p * avg * avg;
        den += atom.p * plain * plain;
    }
    (num, den)
}

fn classify(num: f64, den: f64) -> Ratio {
    if den >= NULL_MOMENT {
        Ratio::Finite(num / den)
    } else if num >= NULL_MOMENT {
        Ratio::Unbounded
    } else {
        Ratio::Undefined
    }
}

pub fn ratio_at(rho: &DiscreteMeasure, act: &Activation, group: &GroupAction, x: &[f64]) -> Result<Ratio> {
    check_dim(rho.dim(), x.len())?;
    check_dim(rho.dim(), group.dim())?;
    let orbit = group.orbit_unchecked(x);
    let (num, den) = moments(rho, act, &orbit);
    Ok(classify(num, den))
}

/// Probe set: `n_probes` i.i.d. domain samples followed by the deterministic
/// boundary probes. Probe sets for `n` are contained in those for `2n`.
pub fn probe_set(domain: DomainSpec, n_probes: usize, seed: u64) -> Vec<Vec<f64>> {
    let res = ((n_probes as f64).powf(1.0 / domain.dim() as f64).ceil() as usize).next_power_of_two();
    let mut probes = domain.sample(n_probes, seed);
    probes.extend(domain.boundary_probes(res));
    probes
}

pub fn estimate_delta(
    gamma: &[DiscreteMeasure],
    act: &Activation,
    group: &GroupAction,
    domain: DomainSpec,
    n_probes: usize,
    seed: u64,
) -> Result<DeltaEstimate> {
    if gamma.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if n_probes < MIN_PROBES {
        return Err(Error::InvalidArgument(format!("n_probes must be >= {MIN_PROBES}, got {n_probes}")));
    }
    for rho in gamma {
        check_dim(domain.dim(), rho.dim())?;
    }
    check_dim(domain.dim(), group.dim())?;
    let probes = probe_set(domain, n_probes, seed);
    let ratios: Vec<Vec<Ratio>> = probes
        .par_iter()
        .map(|x| {
            let orbit = group.orbit_unchecked(x);
            gamma
                .iter()
                .map(|rho| {
                    let (num, den) = moments(rho, act, &orbit);
                    classify(num, den)
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, usize, usize)> = None;
    let (mut skipped, mut unbounded) = (0, 0);
    for (k, row) in ratios.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            let v = match *r {
                Ratio::Finite(v) => v,
                Ratio::Unbounded => {
                    unbounded += 1;
                    f64::INFINITY
                }
                Ratio::Undefined => {
                    skipped += 1;
                    continue;
                }
            };
            if best.is_none_or(|(b, _, _)| v > b) {
                best = Some((v, k, j));
            }
        }
    }
    let (delta_star, k, j) = best.ok_or_else(|| {
        Error::Degenerate(format!("all {} probes have vanishing second moments", probes.len()))
    })?;
    Ok(DeltaEstimate {
        delta: delta_star.min(1.0),
        delta_star,
        argmax_x: probes[k].clone(),
        argmax_measure: j,
        n_probes: probes.len(),
        skipped_probes: skipped,
        unbounded_probes: unbounded,
    })
}

/// `-b/‖w‖₂ ≥ cos(π/n)`: the `n` rotated copies of `{w·x + b > 0}` are
/// pairwise disjoint on the unit disk.
pub fn apothem_criterion(w: &[f64], b: f64, n: usize) -> bool {
    let norm = dot(w, w).sqrt();
    -b / norm >= (std::f64::consts::PI / n as f64).cos()
}

/// Number of distinct coordinate permutations of `k`, i.e. `d!/∏_v mult_v!`.
pub fn subcube_orbit_count(k: &[i64]) -> u64 {
    let mut sorted = k.to_vec();
    sorted.sort_unstable();
    // multinomial built incrementally: C(n, r) products stay exact in u128
    let mut count: u128 = 1;
    let mut placed: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        for r in 1..=(j - i) as u128 {
            placed += 1;
            count = count * placed / r;
        }
        i = j;
    }
    count as u64
}
