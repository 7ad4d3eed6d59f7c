//! Empirical Rademacher complexity estimators for the ℓ₁-ball linear class and
//! the group-averaged single ReLU neuron, with the matching closed-form bounds.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::measure::dot;
use crate::rng;
use crate::stats::MeanEstimate;

/// Largest `M` (or `M·|G|`) for which sign patterns are enumerated.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignSampling {
    /// All `2^M` sign patterns, each with weight `2^-M`.
    Exhaustive,
    Random(usize),
}

fn sign_patterns(m: usize, sampling: SignSampling, seed: u64) -> Result<Vec<Vec<f64>>> {
    match sampling {
        SignSampling::Exhaustive => {
            if m > MAX_ENUMERATION {
                return Err(Error::InvalidArgument(format!(
                    "exhaustive enumeration needs M <= {MAX_ENUMERATION}, got {m}"
                )));
            }
            Ok((0..1u64 << m)
                .map(|mask| (0..m).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect())
                .collect())
        }
        SignSampling::Random(n) => {
            if n == 0 {
                return Err(Error::InvalidArgument("n_sign_draws must be >= 1".into()));
            }
            Ok((0..n as u64)
                .map(|k| {
                    let mut r = rng::derived(seed, &[k]);
                    (0..m).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
                })
                .collect())
        }
    }
}

fn check_sample(s: &[Vec<f64>]) -> Result<usize> {
    let d = s.first().ok_or(Error::EmptyBatch)?.len();
    for x in s {
        check_dim(d, x.len())?;
    }
    Ok(d)
}

/// `(1/M) E_ξ ‖Σ ξ_i x_i‖∞`, the empirical complexity of `{x ↦ u·x : ‖u‖₁ ≤ 1}`.
pub fn rademacher_linear(s: &[Vec<f64>], sampling: SignSampling, seed: u64) -> Result<MeanEstimate> {
    let d = check_sample(s)?;
    let m = s.len() as f64;
    let values: Vec<f64> = sign_patterns(s.len(), sampling, seed)?
        .iter()
        .map(|xi| {
            (0..d)
                .map(|k| s.iter().zip(xi).map(|(x, e)| e * x[k]).sum::<f64>().abs())
                .fold(0.0, f64::max)
                / m
        })
        .collect();
    Ok(MeanEstimate::from_samples(&values))
}

/// `max ‖x_i‖∞ · √(2 log(2d) / M)`.
pub fn massart_bound(s: &[Vec<f64>]) -> Result<f64> {
    let d = check_sample(s)?;
    let r = s.iter().flat_map(|x| x.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(r * (2.0 * (2.0 * d as f64).ln() / s.len() as f64).sqrt())
}

/// `4 γ Q √(log(2d+2) / M)`.
pub fn rademacher_bound(q: f64, d: usize, m: usize, gamma: f64) -> f64 {
    4.0 * gamma * q * ((2.0 * d as f64 + 2.0).ln() / m as f64).sqrt()
}

/// Euclidean projection onto `{u : ‖u‖₁ ≤ r}` via sorting-based simplex projection.
pub fn project_l1_ball(v: &[f64], r: f64) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &mu) in mags.iter().enumerate() {
        cum += mu;
        let t = (cum - r) / (j + 1) as f64;
        if mu - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct AscentConfig {
    pub restarts: usize,
    pub steps: usize,
    /// Initial step; step `t` uses `step0/√t`.
    pub step0: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self { restarts: 16, steps: 200, step0: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RademacherResult {
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub n_sign_draws: usize,
    pub ascent_restarts: usize,
}

/// Orbits of the bias-padded sample: row `(i, g)` holds `(g x_i, 1)`.
#[derive(Debug, Clone)]
pub struct NeuronProblem {
    dim: usize,
    order: usize,
    m: usize,
    z: Vec<f64>,
}

impl NeuronProblem {
    pub fn new(s: &[Vec<f64>], group: &GroupAction) -> Result<Self> {
        let d = check_sample(s)?;
        check_dim(d, group.dim())?;
        let (order, dim) = (group.order(), d + 1);
        let mut z = Vec::with_capacity(s.len() * order * dim);
        for x in s {
            for gx in group.orbit_unchecked(x) {
                z.extend_from_slice(&gx);
                z.push(1.0);
            }
        }
        Ok(Self { dim, order, m: s.len(), z })
    }

    /// Dimension of `u` (input dimension plus the bias coordinate).
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn rows(&self, i: usize) -> impl Iterator<Item = &[f64]> {
        let n = self.order * self.dim;
        self.z[i * n..(i + 1) * n].chunks_exact(self.dim)
    }

    /// `Σ_i ξ_i (1/|G|) Σ_g ReLU(u·(g x_i, 1))`.
    pub fn value(&self, xi: &[f64], u: &[f64]) -> f64 {
        let inv = 1.0 / self.order as f64;
        (0..self.m).map(|i| xi[i] * inv * self.rows(i).map(|z| dot(u, z).max(0.0)).sum::<f64>()).sum()
    }

    /// Value at `u`, with a subgradient written to `out`.
    fn value_and_subgradient(&self, xi: &[f64], u: &[f64], out: &mut [f64]) -> f64 {
        out.fill(0.0);
        let inv = 1.0 / self.order as f64;
        let mut total = 0.0;
        for i in 0..self.m {
            let c = xi[i] * inv;
            for z in self.rows(i) {
                let t = dot(u, z);
                if t > 0.0 {
                    total += c * t;
                    for (o, zk) in out.iter_mut().zip(z) {
                        *o += c * zk;
                    }
                }
            }
        }
        total
    }

    fn vertex(&self, k: usize) -> Vec<f64> {
        let mut u = vec![0.0; self.dim];
        u[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
        u
    }

    /// Approximate `sup_{‖u‖₁ ≤ 1} value(ξ, u)` by restarted projected
    /// subgradient ascent followed by a step-halving refinement of the best point.
    pub fn maximize(&self, xi: &[f64], cfg: &AscentConfig, seed: u64) -> (f64, Vec<f64>) {
        let n_vertices = 2 * self.dim;
        let mut r = rng::seeded(seed);
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts);
        let vertex_starts = cfg.restarts / 2;
        if n_vertices <= vertex_starts {
            starts.extend((0..n_vertices).map(|k| self.vertex(k)));
        } else {
            starts.extend(index::sample(&mut r, n_vertices, vertex_starts).iter().map(|k| self.vertex(k)));
        }
        while starts.len() < cfg.restarts.max(1) {
            let v: Vec<f64> = (0..self.dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let radius: f64 = r.random();
            let l1: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            starts.push(v.iter().map(|x| x * radius / l1).collect());
        }

        let mut best_u = vec![0.0; self.dim];
        let mut best = 0.0;
        for k in 0..n_vertices {
            let v = self.vertex(k);
            let f = self.value(xi, &v);
            if f > best {
                best = f;
                best_u = v;
            }
        }
        let mut g = vec![0.0; self.dim];
        for start in starts {
            let mut u = start;
            for t in 1..=cfg.steps {
                let f = self.value_and_subgradient(xi, &u, &mut g);
                if f > best {
                    best = f;
                    best_u.clone_from(&u);
                }
                let eta = cfg.step0 / (t as f64).sqrt();
                let next: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
                u = project_l1_ball(&next, 1.0);
            }
            let f = self.value(xi, &u);
            if f > best {
                best = f;
                best_u = u;
            }
        }

        let mut eta = cfg.step0;
        let mut budget = 4 * cfg.steps;
        while eta > 1e-13 && budget > 0 {
            budget -= 1;
            self.value_and_subgradient(xi, &best_u, &mut g);
            let next: Vec<f64> = best_u.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
            let cand = project_l1_ball(&next, 1.0);
            let f = self.value(xi, &cand);
            if f > best {
                best = f;
                best_u = cand;
            } else {
                eta *= 0.5;
            }
        }
        (best, best_u)
    }
}

fn neuron_draws(
    s: &[Vec<f64>],
    group: &GroupAction,
    q: f64,
    n_sign_draws: usize,
    ascent: &AscentConfig,
    seed: u64,
) -> Result<(usize, Vec<f64>)> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("Q must be positive, got {q}")));
    }
    let problem = NeuronProblem::new(s, group)?;
    let m = s.len();
    let signs = sign_patterns(m, SignSampling::Random(n_sign_draws), seed)?;
    let values = signs
        .par_iter()
        .enumerate()
        .map(|(k, xi)| {
            let (v, _) = problem.maximize(xi, ascent, rng::derive_seed(seed, &[k as u64, 1]));
            2.0 * q * v / m as f64
        })
        .collect();
    Ok((problem.dim - 1, values))
}

fn summarize(d: usize, m: usize, q: f64, gamma: f64, values: &[f64], ascent: &AscentConfig) -> RademacherResult {
    let est = MeanEstimate::from_samples(values);
    RademacherResult {
        estimate: est.mean,
        stderr: est.stderr,
        bound: rademacher_bound(q, d, m, gamma),
        n_sign_draws: values.len(),
        ascent_restarts: ascent.restarts,
    }
}

/// `(2Q/M) E_ξ sup_{‖u‖₁ ≤ 1} Σ_i ξ_i 𝒢ReLU(u·(x_i, 1))` with the bound
/// `4γQ√(log(2d+2)/M)` for `γ = gamma`.
pub fn rademacher_invariant_neuron(
    s: &[Vec<f64>],
    group: &GroupAction,
    q: f64,
    gamma: f64,
    n_sign_draws: usize,
    ascent: &AscentConfig,
    seed: u64,
) -> Result<RademacherResult> {
    let (d, values) = neuron_draws(s, group, q, n_sign_draws, ascent, seed)?;
    Ok(summarize(d, s.len(), q, gamma, &values, ascent))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedRademacher {
    pub invariant: RademacherResult,
    pub plain: RademacherResult,
    /// Per-draw `invariant − plain` on shared signs.
    pub difference: MeanEstimate,
}

/// The averaged and the trivial-group estimate on the same sample and the
/// same sign draws.
pub fn rademacher_paired(
    s: &[Vec<f64>],
    group: &GroupAction,
    q: f64,
    gamma: f64,
    n_sign_draws: usize,
    ascent: &AscentConfig,
    seed: u64,
) -> Result<PairedRademacher> {
    let (d, inv) = neuron_draws(s, group, q, n_sign_draws, ascent, seed)?;
    let (_, plain) = neuron_draws(s, &GroupAction::trivial(group.dim()), q, n_sign_draws, ascent, seed)?;
    let diff: Vec<f64> = inv.iter().zip(&plain).map(|(a, b)| a - b).collect();
    Ok(PairedRademacher {
        invariant: summarize(d, s.len(), q, gamma, &inv, ascent),
        plain: summarize(d, s.len(), q, gamma, &plain, ascent),
        difference: MeanEstimate::from_samples(&diff),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `√2/√|G|`, the Lipschitz factor of the orbit-averaged ReLU in ℓ₂.
    pub factor: f64,
    pub holds: bool,
}

/// Exhaustive check of the vector-contraction inequality for
/// `h(v) = (1/|G|) Σ_g ReLU(v_g)` over the ℓ₁-ball vertices `u = ±e_k`:
/// `E_ξ max_u Σ_i ξ_i h((u·(g x_i, 1))_g) ≤ √2/√|G| · E_ξ' max_u Σ_{i,g} ξ'_{ig} u·(g x_i, 1)`.
pub fn vector_contraction_check(s: &[Vec<f64>], group: &GroupAction) -> Result<ContractionReport> {
    let problem = NeuronProblem::new(s, group)?;
    let (m, order) = (s.len(), group.order());
    if m * order > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!(
            "exhaustive check needs M·|G| <= {MAX_ENUMERATION}, got {}",
            m * order
        )));
    }
    let family: Vec<Vec<f64>> = (0..2 * problem.dim).map(|k| problem.vertex(k)).collect();
    let lhs = sign_patterns(m, SignSampling::Exhaustive, 0)?
        .iter()
        .map(|xi| family.iter().map(|u| problem.value(xi, u)).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / (1u64 << m) as f64;
    // per vertex u = ±e_k the linear part reduces to ±Σ ξ'_{ig} z_{ig,k}
    let rhs = sign_patterns(m * order, SignSampling::Exhaustive, 0)?
        .iter()
        .map(|xi| {
            (0..problem.dim)
                .map(|k| {
                    let row: f64 = problem.z.chunks_exact(problem.dim).zip(xi).map(|(z, e)| e * z[k]).sum();
                    row.abs()
                })
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / (1u64 << (m * order)) as f64;
    let factor = 2f64.sqrt() / (order as f64).sqrt();
    Ok(ContractionReport { lhs, rhs, factor, holds: lhs <= factor * rhs + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DomainSpec;
    use proptest::{collection, prop_assert, proptest};

    #[test]
    fn linear_examples() {
        let est = rademacher_linear(&[vec![1.0, 0.0]], SignSampling::Random(17), 3).unwrap();
        assert_eq!(est.mean, 1.0);
        let two = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(rademacher_linear(&two, SignSampling::Exhaustive, 0).unwrap().mean, 0.5);
        let mc = rademacher_linear(&two, SignSampling::Random(20_000), 1).unwrap();
        assert!((mc.mean - 0.5).abs() < 4.0 * mc.stderr);
        assert!(matches!(rademacher_linear(&[], SignSampling::Exhaustive, 0), Err(Error::EmptyBatch)));
    }

    #[test]
    fn linear_exhaustive_matches_brute_force() {
        for m in 1..=12usize {
            let s = DomainSpec::CubePm1(3).sample(m, m as u64);
            let got = rademacher_linear(&s, SignSampling::Exhaustive, 0).unwrap().mean;
            let mut total = 0.0;
            for mask in 0..1u32 << m {
                let mut v = [0.0f64; 3];
                for (i, x) in s.iter().enumerate() {
                    let e = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
                    for k in 0..3 {
                        v[k] += e * x[k];
                    }
                }
                total += v.iter().fold(0.0f64, |a, b| a.max(b.abs())) / m as f64;
            }
            let want = total / (1u64 << m) as f64;
            assert!((got - want).abs() <= 1e-15 * want.max(1.0), "M={m}: {got} vs {want}");
        }
    }

    #[test]
    fn massart_bound_dominates_linear() {
        for seed in 0..20 {
            for &(d, m) in &[(1, 8), (2, 32), (5, 100)] {
                let s = DomainSpec::CubePm1(d).sample(m, seed);
                let est = rademacher_linear(&s, SignSampling::Random(256), seed).unwrap();
                assert!(est.mean <= massart_bound(&s).unwrap() + 3.0 * est.stderr);
            }
        }
    }

    #[test]
    fn bound_examples() {
        assert!((rademacher_bound(1.0, 1, 100, 1.0) - 0.47096).abs() < 1e-5);
        assert_eq!(rademacher_bound(2.0, 3, 50, 1.5), 2.0 * rademacher_bound(1.0, 3, 50, 1.5));
        assert!((rademacher_bound(1.0, 3, 200, 1.0) - 2.0 * rademacher_bound(1.0, 3, 800, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn projection_properties() {
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0), vec![0.2, -0.3]);
        assert_eq!(project_l1_ball(&[3.0, 0.0], 1.0), vec![1.0, 0.0]);
        let p = project_l1_ball(&[1.0, -1.0, 0.1], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] + 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    proptest! {
        #[test]
        fn projection_is_nearest_point(v in collection::vec(-3.0f64..3.0, 1..6), seed in 0u64..1000) {
            let p = project_l1_ball(&v, 1.0);
            prop_assert!(p.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 + 1e-12);
            let dist = |u: &[f64]| u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let mut r = rng::seeded(seed);
            for _ in 0..50 {
                let c: Vec<f64> = (0..v.len()).map(|_| r.random_range(-1.0..1.0)).collect();
                let c = project_l1_ball(&c, 1.0);
                prop_assert!(dist(&p) <= dist(&c) + 1e-12);
            }
        }
    }

    /// Exact maximum for `u ∈ R²`: by positive homogeneity the maximum is 0 or
    /// attained on the ℓ₁ sphere, where the objective is linear between the
    /// vertices and the crossings of the lines `u·z = 0`.
    fn oracle_2d(p: &NeuronProblem, xi: &[f64]) -> f64 {
        let mut cands: Vec<Vec<f64>> = (0..4).map(|k| p.vertex(k)).collect();
        for z in p.z.chunks_exact(2) {
            let dir = [-z[1], z[0]];
            let l1 = dir[0].abs() + dir[1].abs();
            if l1 > 0.0 {
                cands.push(vec![dir[0] / l1, dir[1] / l1]);
                cands.push(vec![-dir[0] / l1, -dir[1] / l1]);
            }
        }
        let n = 4000;
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * (k as f64 / n as f64);
            let (c, s) = (t.cos(), t.sin());
            let l1 = c.abs() + s.abs();
            cands.push(vec![c / l1, s / l1]);
        }
        cands.iter().map(|u| p.value(xi, u)).fold(0.0, f64::max)
    }

    #[test]
    fn ascent_matches_enumeration_on_small_instances() {
        let t = GroupAction::trivial(1);
        let r = GroupAction::reflection(1).unwrap();
        for seed in 0..40 {
            let s = DomainSpec::CubePm1(1).sample(3, seed);
            for g in [&t, &r] {
                let p = NeuronProblem::new(&s, g).unwrap();
                for xi in sign_patterns(3, SignSampling::Exhaustive, 0).unwrap() {
                    let (got, u) = p.maximize(&xi, &AscentConfig::default(), seed);
                    let want = oracle_2d(&p, &xi);
                    assert!(u.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 + 1e-12);
                    assert!((got - want).abs() < 1e-6, "seed {seed}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn invariant_neuron_below_bound() {
        let groups = [GroupAction::reflection(2).unwrap(), GroupAction::cyclic_2d(4).unwrap()];
        let mut n = 0;
        for (gi, g) in groups.iter().enumerate() {
            for &m in &[32usize, 128] {
                for &q in &[1.0, 4.0] {
                    let seed = 100 * gi as u64 + m as u64 + q as u64;
                    let s = DomainSpec::CubePm1(2).sample(m, seed);
                    let res = rademacher_invariant_neuron(&s, g, q, 1.0, 32, &AscentConfig::default(), seed).unwrap();
                    assert!(res.estimate >= 0.0);
                    assert!(res.estimate <= res.bound + 3.0 * res.stderr, "{res:?}");
                    n += 1;
                }
            }
        }
        assert_eq!(n, 8);
    }

    #[test]
    fn contraction_examples() {
        let s2 = DomainSpec::CubePm1(1).sample(2, 1);
        let rep = vector_contraction_check(&s2, &GroupAction::reflection(1).unwrap()).unwrap();
        assert!(rep.holds, "{rep:?}");
        let rep = vector_contraction_check(&s2, &GroupAction::trivial(1)).unwrap();
        assert!(rep.holds && (rep.factor - 2f64.sqrt()).abs() < 1e-15);
        let s4 = DomainSpec::CubePm1(2).sample(4, 2);
        let rep = vector_contraction_check(&s4, &GroupAction::cyclic_2d(4).unwrap()).unwrap();
        assert!(rep.holds, "{rep:?}");
        let s8 = DomainSpec::CubePm1(2).sample(8, 2);
        assert!(vector_contraction_check(&s8, &GroupAction::cyclic_2d(4).unwrap()).is_err());
    }
}
