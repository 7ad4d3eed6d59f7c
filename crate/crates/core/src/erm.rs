//! Path-norm regularized ERM for invariant and plain networks, the λ rule and
//! the constant chain entering the generalization bound.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::activation::{Activation, ActivationConstants};
use crate::data::{make_dataset, Dataset, DomainSpec, NoiseSpec};
use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::measure::TargetFunction;
use crate::net::{NetParams, OrbitBatch};
use crate::rng;

pub const C_ZETA: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub lipschitz: f64,
    pub sigma0: f64,
    pub gamma: f64,
    pub barron_bound: f64,
    pub confidence: f64,
    pub c1: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_zeta: f64,
    pub lambda_f: f64,
    pub r_f: f64,
}

impl TheoryConstants {
    pub fn new(act: ActivationConstants, barron_bound: f64, confidence: f64) -> Result<Self> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1), got {confidence}")));
        }
        if !(barron_bound >= 0.0) {
            return Err(Error::InvalidArgument(format!("Barron bound must be >= 0, got {barron_bound}")));
        }
        let b = barron_bound;
        let c1 = act.scale() * (b + 1.0) + 1.0;
        let c_sigma = (8.0 * act.gamma * c1).max(3.0 * c1 * c1);
        let lambda_f =
            (2.0 * (2.0 * C_ZETA * (2f64.sqrt() * b + 1.0).powi(2) / confidence).ln()).sqrt() + 2.0;
        Ok(Self {
            lipschitz: act.lipschitz,
            sigma0: act.value_at_zero,
            gamma: act.gamma,
            barron_bound: b,
            confidence,
            c1,
            c_sigma,
            d_sigma: 4.0 * c_sigma,
            c_zeta: C_ZETA,
            lambda_f,
            r_f: 1.0 + (2.0 * b * b + 1.0) * lambda_f,
        })
    }

    /// `L_σ + |σ(0)|`.
    pub fn scale(&self) -> f64 {
        self.lipschitz + self.sigma0.abs()
    }

    /// `3 (L_σ + |σ(0)|)² δ B² / m`.
    pub fn approximation_term(&self, delta: f64, m: usize) -> f64 {
        3.0 * self.scale().powi(2) * delta * self.barron_bound.powi(2) / m as f64
    }

    /// Right-hand side of the generalization bound for sample size `n`, width
    /// `m`, symmetry factor `delta`, regularization `lambda` and noise moment `tau0`.
    pub fn generalization_bound(&self, delta: f64, m: usize, n: usize, lambda: f64, tau0: f64) -> f64 {
        let b2 = self.barron_bound.powi(2);
        let sn = (n as f64).sqrt();
        let r = self.r_f + tau0 / lambda + 1.0;
        self.approximation_term(delta, m)
            + 2.0 * lambda * (2.0 * b2 + 1.0)
            + self.d_sigma * (2.0 * b2 + 1.0) * (self.lambda_f - 2.0) / sn
            + self.d_sigma * r * (2.0 * (4.0 * self.c_zeta * r / self.confidence).ln()).sqrt() / sn
    }
}

/// `max{D_σ √(log(2d+2)/M), 3 (L_σ+|σ(0)|)² δ̂ B² / m}`.
pub fn lambda_min(consts: &TheoryConstants, d: usize, n: usize, m: usize, delta_hat: f64) -> f64 {
    let stat = consts.d_sigma * ((2.0 * d as f64 + 2.0).ln() / n as f64).sqrt();
    stat.max(consts.approximation_term(delta_hat, m))
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub m: usize,
    pub group: GroupAction,
    pub activation: Activation,
    pub lambda: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(m: usize, group: GroupAction, activation: Activation, lambda: f64, seed: u64) -> Self {
        Self { m, group, activation, lambda, step_size: 0.3, iterations: 2000, init_scale: 1.0, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("width m must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.step_size > 0.0) || !(self.init_scale >= 0.0) {
            return Err(Error::Config("step size must be positive and init scale non-negative".into()));
        }
        Ok(())
    }
}

/// `a ~ N(0, s²)`, `w, b ~ N(0, s²/d)`.
pub fn init_params(m: usize, d: usize, scale: f64, seed: u64) -> NetParams {
    let mut r = rng::seeded(seed);
    let sw = scale / (d as f64).sqrt();
    let mut n = |s: f64| s * r.sample::<f64, _>(StandardNormal);
    let mut a = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for _ in 0..m {
        a.push(n(scale));
        w.push((0..d).map(|_| n(sw)).collect());
        b.push(n(sw));
    }
    NetParams::new(a, w, b).expect("consistent shapes")
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: NetParams,
    /// `J_λ` before each update, followed by the final value.
    pub trace: Vec<f64>,
}

impl TrainOutcome {
    /// Fraction of steps with `J_{k+1} ≤ J_k`.
    pub fn monotone_fraction(&self) -> f64 {
        let steps = self.trace.len() - 1;
        if steps == 0 {
            return 1.0;
        }
        self.trace.windows(2).filter(|w| w[1] <= w[0]).count() as f64 / steps as f64
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// One step on `J_λ` with width-scaled step `η m`: explicit on the data term,
/// proximal on the penalty with the coupling factor `‖w_i‖₁ + |b_i| + 1`
/// held at its current value. With `λ = 0` this is plain gradient descent.
fn step(net: &mut NetParams, grad: &NetParams, eta: f64, lambda: f64) {
    let m = net.width();
    let lr = eta * m as f64;
    let mut a = net.a().to_vec();
    let mut w = net.w().to_vec();
    let mut b = net.b().to_vec();
    for i in 0..m {
        let s = crate::measure::l1(&w[i]) + b[i].abs() + 1.0;
        let shrink = 2.0 * lr * lambda * a[i] * a[i] * s / m as f64;
        for (wk, gk) in w[i].iter_mut().zip(&grad.w()[i]) {
            *wk = soft_threshold(*wk - lr * gk, shrink);
        }
        b[i] = soft_threshold(b[i] - lr * grad.b()[i], shrink);
        a[i] = (a[i] - lr * grad.a()[i]) / (1.0 + 2.0 * lr * lambda * s * s / m as f64);
    }
    *net = NetParams::new(a, w, b).expect("shapes preserved");
}

pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_dim(data.d, cfg.group.dim())?;
    let batch = OrbitBatch::new(&cfg.group, &data.xs, &data.ys)?;
    let net = init_params(cfg.m, data.d, cfg.init_scale, cfg.seed);
    train_from(&batch, &cfg.activation, net, cfg)
}

pub(crate) fn train_from(
    batch: &OrbitBatch,
    act: &Activation,
    mut net: NetParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..cfg.iterations {
        let (loss, grad) = batch.objective_and_grad(&net, act, 0.0);
        let j = loss + cfg.lambda * (net.path_norm_sq() + 1.0);
        trace.push(j);
        if !j.is_finite() || !grad.norm().is_finite() {
            return Err(Error::Divergence { iteration: it, trace });
        }
        step(&mut net, &grad, cfg.step_size, cfg.lambda);
    }
    let j = batch.objective(&net, act, cfg.lambda);
    trace.push(j);
    if !j.is_finite() {
        return Err(Error::Divergence { iteration: cfg.iterations, trace });
    }
    Ok(TrainOutcome { net, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKind {
    Theory,
    Scaled,
}

impl LambdaKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Theory => "theory",
            Self::Scaled => "scaled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizationConfig {
    pub m: usize,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub kappa: f64,
    pub noise: NoiseSpec,
    pub n_test: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub confidence: f64,
    pub delta_hat: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizationRow {
    #[serde(rename = "M")]
    pub n: usize,
    pub seed: usize,
    pub lambda_used: f64,
    pub lambda_kind: LambdaKind,
    pub err_invariant: f64,
    pub err_plain: f64,
    pub path_norm_invariant: f64,
    pub path_norm_plain: f64,
    /// Generalization bound evaluated at `lambda_used`.
    pub bound: f64,
    pub objective_invariant: f64,
    /// `J_λ` of the sampled construction at the same width on the same data.
    pub objective_construct: f64,
    pub monotone_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralizationReport {
    pub constants: TheoryConstants,
    pub tau0: f64,
    pub rows: Vec<GeneralizationRow>,
}

/// For each `(M, seed)`: draw a dataset, train the averaged and the plain
/// network from the same initialization with the theory λ and with `λ/κ`, and
/// measure the `L²(μ)` error on a fresh test sample shared by both.
pub fn generalization_experiment(
    target: &TargetFunction,
    group: &GroupAction,
    domain: DomainSpec,
    cfg: &GeneralizationConfig,
) -> Result<GeneralizationReport> {
    if cfg.sample_sizes.is_empty() || cfg.sample_sizes.contains(&0) {
        return Err(Error::Config("M grid must be non-empty with entries >= 1".into()));
    }
    if cfg.seeds == 0 || cfg.n_test == 0 || !(cfg.kappa >= 1.0) {
        return Err(Error::Config("seeds and n_test must be >= 1 and kappa >= 1".into()));
    }
    check_dim(target.dim(), group.dim())?;
    check_dim(target.dim(), domain.dim())?;
    let mut probes = domain.sample(256, cfg.seed);
    probes.extend(domain.boundary_probes(64));
    let defect = target.invariance_defect(group, &probes)?;
    if defect > crate::construction::INVARIANCE_TOL {
        return Err(Error::NotApplicable(format!("target is not {}-invariant (defect {defect:.3e})", group.name())));
    }
    let act = target.activation;
    let consts = TheoryConstants::new(act.constants()?, target.barron_bound, cfg.confidence)?;
    let d = target.dim();
    let trivial = GroupAction::trivial(d);

    let jobs: Vec<(usize, usize)> =
        cfg.sample_sizes.iter().flat_map(|&n| (0..cfg.seeds).map(move |s| (n, s))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(n, s)| -> Result<Vec<GeneralizationRow>> {
            let key = [n as u64, s as u64];
            let data = make_dataset(target, domain, n, cfg.noise, rng::derive_seed(cfg.seed, &key))?;
            let test = domain.sample(cfg.n_test, rng::derive_seed(cfg.seed, &[n as u64, s as u64, 1]));
            let truth: Vec<f64> = test.iter().map(|x| target.eval_unchecked(x)).collect();
            let init = init_params(cfg.m, d, cfg.init_scale, rng::derive_seed(cfg.seed, &[n as u64, s as u64, 2]));
            let construct =
                crate::construction::construct(&target.measure, cfg.m, rng::derive_seed(cfg.seed, &[n as u64, s as u64, 3]))?;
            let inv_batch = OrbitBatch::new(group, &data.xs, &data.ys)?;
            let plain_batch = OrbitBatch::new(&trivial, &data.xs, &data.ys)?;
            let theory = lambda_min(&consts, d, n, cfg.m, cfg.delta_hat);
            let mut rows = Vec::with_capacity(2);
            for (kind, lambda) in [(LambdaKind::Theory, theory), (LambdaKind::Scaled, theory / cfg.kappa)] {
                let tc = TrainConfig {
                    m: cfg.m,
                    group: group.clone(),
                    activation: act,
                    lambda,
                    step_size: cfg.step_size,
                    iterations: cfg.iterations,
                    init_scale: cfg.init_scale,
                    seed: 0,
                };
                let inv = train_from(&inv_batch, &act, init.clone(), &tc)?;
                let plain = train_from(&plain_batch, &act, init.clone(), &tc)?;
                let err = |f: &dyn Fn(&[f64]) -> f64| {
                    test.iter().zip(&truth).map(|(x, y)| (f(x) - y).powi(2)).sum::<f64>() / test.len() as f64
                };
                rows.push(GeneralizationRow {
                    n,
                    seed: s,
                    lambda_used: lambda,
                    lambda_kind: kind,
                    err_invariant: err(&|x| inv.net.forward_orbit_of(&act, group, x)),
                    err_plain: err(&|x| plain.net.forward_unchecked(&act, x)),
                    path_norm_invariant: inv.net.path_norm(),
                    path_norm_plain: plain.net.path_norm(),
                    bound: consts.generalization_bound(cfg.delta_hat, cfg.m, n, lambda, data.tau0),
                    objective_invariant: *inv.trace.last().expect("non-empty trace"),
                    objective_construct: inv_batch.objective(&construct, &act, lambda),
                    monotone_fraction: inv.monotone_fraction(),
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralizationReport { constants: consts, tau0: cfg.noise.second_moment(), rows: cells.into_iter().flatten().collect() })
}
