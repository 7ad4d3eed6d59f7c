//! Monte-Carlo network construction: sample `m` atoms from a parameter
//! measure, evaluate the network with and without group averaging, and track
//! how the squared `L²(μ)` error scales with `m`.

use rayon::prelude::*;
use serde::Serialize;

use crate::activation::Activation;
use crate::data::DomainSpec;
use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::measure::{DiscreteMeasure, TargetFunction};
use crate::net::NetParams;
use crate::rng;
use crate::stats::{log_log_slope, MeanEstimate};

pub const MIN_MC: usize = 1000;
pub const MIN_GRID: usize = 4;
/// Tolerance for the target's invariance check on boundary and random probes.
pub const INVARIANCE_TOL: f64 = 1e-9;

/// `m` i.i.d. atoms of `ρ`; evaluate with `forward_invariant` for the averaged network.
pub fn construct(rho: &DiscreteMeasure, m: usize, seed: u64) -> Result<NetParams> {
    rho.sample_atoms(m, seed)
}

/// Monte-Carlo estimate of `∫ (f_* − net)² dμ` from `n_mc` i.i.d. points.
pub fn l2_error_sq<F>(target: &TargetFunction, net_eval: F, domain: DomainSpec, n_mc: usize, seed: u64) -> Result<MeanEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    if n_mc < MIN_MC {
        return Err(Error::InvalidArgument(format!("n_mc must be >= {MIN_MC}, got {n_mc}")));
    }
    check_dim(target.dim(), domain.dim())?;
    let mut r = rng::seeded(seed);
    let sq: Vec<f64> = (0..n_mc)
        .map(|_| {
            let x = domain.draw(&mut r);
            (target.eval_unchecked(&x) - net_eval(&x)).powi(2)
        })
        .collect();
    Ok(MeanEstimate::from_samples(&sq))
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub m: usize,
    pub trial: usize,
    pub err_invariant: f64,
    pub err_plain: f64,
    pub path_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub m: usize,
    pub mean_err_invariant: f64,
    pub stderr_invariant: f64,
    pub mean_err_plain: f64,
    pub stderr_plain: f64,
    /// Standard error of the per-trial difference `err_invariant − err_plain`.
    pub stderr_paired_diff: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub summaries: Vec<ScalingSummary>,
    /// Least-squares slope of `log mean err_invariant` against `log m`.
    pub slope_invariant: f64,
    pub slope_plain: f64,
}

/// Per `(m, trial)`: one `Θ` sampled from `ρ`, evaluated on the same μ-sample
/// with and without group averaging.
pub fn scaling_experiment(
    rho: &DiscreteMeasure,
    act: &Activation,
    group: &GroupAction,
    domain: DomainSpec,
    cfg: &ScalingConfig,
) -> Result<ScalingReport> {
    if cfg.m_grid.len() < MIN_GRID {
        return Err(Error::Config(format!("m_grid needs at least {MIN_GRID} points, got {}", cfg.m_grid.len())));
    }
    if cfg.m_grid.contains(&0) || cfg.trials == 0 {
        return Err(Error::Config("m_grid entries and trials must be >= 1".into()));
    }
    check_dim(rho.dim(), group.dim())?;
    let target = TargetFunction::new(rho.clone(), act.clone());
    let mut probes = domain.sample(256, cfg.seed);
    probes.extend(domain.boundary_probes(64));
    let defect = target.invariance_defect(group, &probes)?;
    if defect > INVARIANCE_TOL {
        return Err(Error::NotApplicable(format!(
            "target is not {}-invariant (defect {defect:.3e}); symmetrize the measure first",
            group.name()
        )));
    }

    let jobs: Vec<(usize, usize)> =
        cfg.m_grid.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, trial)| {
            let keys = [m as u64, trial as u64];
            let net = construct(rho, m, rng::derive_seed(cfg.seed, &keys))?;
            let mc_seed = rng::derive_seed(cfg.seed, &[m as u64, trial as u64, 1]);
            let inv = l2_error_sq(&target, |x| net.forward_orbit_of(act, group, x), domain, cfg.n_mc, mc_seed)?;
            let plain = l2_error_sq(&target, |x| net.forward_unchecked(act, x), domain, cfg.n_mc, mc_seed)?;
            Ok(ScalingRow {
                m,
                trial,
                err_invariant: inv.mean,
                err_plain: plain.mean,
                path_norm_sq: net.path_norm_sq(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries: Vec<ScalingSummary> = cfg
        .m_grid
        .iter()
        .map(|&m| {
            let cell: Vec<&ScalingRow> = rows.iter().filter(|r| r.m == m).collect();
            let inv = MeanEstimate::from_samples(&cell.iter().map(|r| r.err_invariant).collect::<Vec<_>>());
            let plain = MeanEstimate::from_samples(&cell.iter().map(|r| r.err_plain).collect::<Vec<_>>());
            let diff =
                MeanEstimate::from_samples(&cell.iter().map(|r| r.err_invariant - r.err_plain).collect::<Vec<_>>());
            ScalingSummary {
                m,
                mean_err_invariant: inv.mean,
                stderr_invariant: inv.stderr,
                mean_err_plain: plain.mean,
                stderr_plain: plain.stderr,
                stderr_paired_diff: diff.stderr,
                ratio: inv.mean / plain.mean,
            }
        })
        .collect();
    let ms: Vec<f64> = cfg.m_grid.iter().map(|&m| m as f64).collect();
    let slope_invariant = log_log_slope(&ms, &summaries.iter().map(|s| s.mean_err_invariant).collect::<Vec<_>>());
    let slope_plain = log_log_slope(&ms, &summaries.iter().map(|s| s.mean_err_plain).collect::<Vec<_>>());
    Ok(ScalingReport { rows, summaries, slope_invariant, slope_plain })
}

/// `3 (L_σ + |σ(0)|)² δ B² / m`, the approximation bound at width `m`.
pub fn approximation_bound(scale: f64, delta: f64, barron_bound: f64, m: usize) -> f64 {
    3.0 * scale * scale * delta * barron_bound * barron_bound / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;

    fn pair() -> DiscreteMeasure {
        DiscreteMeasure::uniform(1, vec![(1.0, vec![1.0], -0.5), (1.0, vec![-1.0], -0.5)]).unwrap()
    }

    fn mixture() -> DiscreteMeasure {
        let mut atoms = Vec::new();
        for (a, c, b) in [(1.0, 1.0, 0.0), (-1.0, 1.0, -0.5), (1.0, 0.5, -0.1)] {
            atoms.push((a, vec![c], b));
            atoms.push((a, vec![-c], b));
        }
        DiscreteMeasure::uniform(1, atoms).unwrap()
    }

    #[test]
    fn construct_examples() {
        let one = DiscreteMeasure::uniform(2, vec![(0.5, vec![1.0, -2.0], 0.25)]).unwrap();
        let net = construct(&one, 1, 7).unwrap();
        assert_eq!((net.a(), net.w(), net.b()), (&[0.5][..], &[vec![1.0, -2.0]][..], &[0.25][..]));
        assert_eq!(construct(&mixture(), 50, 3).unwrap(), construct(&mixture(), 50, 3).unwrap());
    }

    #[test]
    fn path_norm_event_is_frequent() {
        let rho = mixture();
        let b2 = rho.barron_norm_bound().powi(2);
        let hits = (0..100).filter(|&s| construct(&rho, 64, s).unwrap().path_norm_sq() <= 2.0 * b2).count();
        assert!(hits >= 40, "{hits}");
    }

    #[test]
    fn l2_error_examples() {
        let relu = Activation::relu();
        let rho = pair();
        let target = TargetFunction::new(rho.clone(), relu.clone());
        let exact = NetParams::new(vec![1.0, 1.0], vec![vec![1.0], vec![-1.0]], vec![-0.5, -0.5]).unwrap();
        let e = l2_error_sq(&target, |x| exact.forward_unchecked(&relu, x), DomainSpec::CubePm1(1), 5000, 1).unwrap();
        assert_eq!(e.mean, 0.0);

        // ∫ f² dμ for f = ReLU(|x| − 1/2)/2 on uniform[−1, 1], by midpoint quadrature
        let n = 1_000_000;
        let quad = (0..n)
            .map(|k| {
                let x = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
                target.eval(&[x]).unwrap().powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((quad - 1.0 / 96.0).abs() < 1e-6);
        let e = l2_error_sq(&target, |_| 0.0, DomainSpec::CubePm1(1), 200_000, 2).unwrap();
        assert!((e.mean - quad).abs() < 3.0 * e.stderr, "{} vs {quad}", e.mean);
        assert!(matches!(l2_error_sq(&target, |_| 0.0, DomainSpec::CubePm1(1), 999, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn error_decreases_with_width() {
        let relu = Activation::relu();
        let rho = mixture();
        let target = TargetFunction::new(rho.clone(), relu.clone());
        let mean_err = |m: usize| {
            (0..30)
                .map(|t| {
                    let net = construct(&rho, m, 1000 * m as u64 + t).unwrap();
                    l2_error_sq(&target, |x| net.forward_unchecked(&relu, x), DomainSpec::CubePm1(1), 2000, t).unwrap().mean
                })
                .sum::<f64>()
                / 30.0
        };
        assert!(mean_err(16) >= mean_err(256));
    }

    #[test]
    fn trivial_group_ratio_is_one() {
        let act = Activation::new(ActivationKind::Tanh).unwrap();
        let rho = DiscreteMeasure::uniform(2, vec![(1.0, vec![0.5, -1.0], 0.2), (-0.7, vec![1.0, 1.0], 0.0)]).unwrap();
        let cfg = ScalingConfig { m_grid: vec![4, 8, 16, 32], trials: 3, n_mc: 1000, seed: 5 };
        let rep = scaling_experiment(&rho, &act, &GroupAction::trivial(2), DomainSpec::CubePm1(2), &cfg).unwrap();
        for s in &rep.summaries {
            assert_eq!(s.ratio, 1.0);
        }
    }

    #[test]
    fn scaling_guards() {
        let relu = Activation::relu();
        let r = GroupAction::reflection(1).unwrap();
        let cfg = ScalingConfig { m_grid: vec![4, 8, 16], trials: 2, n_mc: 1000, seed: 1 };
        assert!(matches!(scaling_experiment(&pair(), &relu, &r, DomainSpec::CubePm1(1), &cfg), Err(Error::Config(_))));
        let cfg = ScalingConfig { m_grid: vec![4, 8, 16, 32], ..cfg };
        let one = DiscreteMeasure::uniform(1, vec![(1.0, vec![1.0], -0.5)]).unwrap();
        assert!(matches!(scaling_experiment(&one, &relu, &r, DomainSpec::CubePm1(1), &cfg), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn paired_rows_reproduce_from_seed() {
        let relu = Activation::relu();
        let r = GroupAction::reflection(1).unwrap();
        let cfg = ScalingConfig { m_grid: vec![4, 8, 16, 32], trials: 2, n_mc: 1000, seed: 11 };
        let rep = scaling_experiment(&mixture(), &relu, &r, DomainSpec::CubePm1(1), &cfg).unwrap();
        let target = TargetFunction::new(mixture(), relu.clone());
        for row in &rep.rows {
            let net = construct(&mixture(), row.m, rng::derive_seed(11, &[row.m as u64, row.trial as u64])).unwrap();
            let mc = rng::derive_seed(11, &[row.m as u64, row.trial as u64, 1]);
            let plain = l2_error_sq(&target, |x| net.forward(&relu, x).unwrap(), DomainSpec::CubePm1(1), 1000, mc).unwrap();
            let inv = l2_error_sq(&target, |x| net.forward_invariant(&relu, &r, x).unwrap(), DomainSpec::CubePm1(1), 1000, mc)
                .unwrap();
            assert_eq!(plain.mean, row.err_plain);
            assert_eq!(inv.mean, row.err_invariant);
            assert_eq!(net.path_norm_sq(), row.path_norm_sq);
        }
    }
}
