//! Subcommand dispatch: each run builds its tables in memory, then writes
//! CSVs, optional SVGs and a manifest in one go.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::activation::{self, Activation};
use crate::complexity::{rademacher_paired, AscentConfig, PairedRademacher};
use crate::construction::{approximation_bound, scaling_experiment, ScalingConfig, ScalingReport, ScalingSummary};
use crate::delta::{estimate_delta, DeltaEstimate};
use crate::erm::{generalization_experiment, GeneralizationConfig, GeneralizationReport, LambdaKind};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, TargetFunction};
use crate::rng;
use crate::stats::MeanEstimate;

use super::config::Scenario;
use super::output::{commit, csv_bytes, csv_with_header, sha256_hex, Artifact};
use super::plot::{render_svg, Axes, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Delta,
    ApproxScaling,
    Rademacher,
    Generalize,
    Gamma0,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::ApproxScaling => "approx-scaling",
            Self::Rademacher => "rademacher",
            Self::Generalize => "generalize",
            Self::Gamma0 => "gamma0",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub svg: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Replaces the config seed and is recorded as such in the manifest.
    pub seed_override: Option<u64>,
}

fn measures(scenario: &Scenario) -> Vec<DiscreteMeasure> {
    scenario.measures.iter().map(|m| m.measure.clone()).collect()
}

// ---------------------------------------------------------------- delta

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub scenario: String,
    pub group: String,
    pub activation: String,
    pub n_probes: usize,
    pub delta_star: f64,
    pub delta: f64,
    /// Coordinates joined with `;`.
    pub argmax_x: String,
}

pub fn delta_estimate(scenario: &Scenario) -> Result<DeltaEstimate> {
    estimate_delta(
        &measures(scenario),
        &scenario.activation,
        &scenario.group,
        scenario.domain,
        scenario.delta.n_probes,
        scenario.seed,
    )
}

pub fn delta_row(scenario: &Scenario, est: &DeltaEstimate) -> DeltaRow {
    DeltaRow {
        scenario: scenario.id.clone(),
        group: scenario.group_spec.clone(),
        activation: scenario.activation_spec.clone(),
        n_probes: est.n_probes,
        delta_star: est.delta_star,
        delta: est.delta,
        argmax_x: est.argmax_x.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
    }
}

// ------------------------------------------------------- approx-scaling

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummaryRow {
    pub m: usize,
    pub mean_err_invariant: f64,
    pub stderr_invariant: f64,
    pub mean_err_plain: f64,
    pub stderr_plain: f64,
    pub stderr_paired_diff: f64,
    pub ratio: f64,
    pub delta_hat: f64,
    pub approx_bound: f64,
    pub within_bound: bool,
    /// Share of trials with `‖Θ‖_P² ≤ 2B²`.
    pub path_event_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingOutcome {
    pub report: ScalingReport,
    pub delta_hat: f64,
    pub barron_bound: f64,
    pub summary: Vec<ScalingSummaryRow>,
}

pub fn approx_scaling(scenario: &Scenario) -> Result<ScalingOutcome> {
    let delta_hat = delta_estimate(scenario)?.delta;
    let rho = scenario.target_measure();
    let act = &scenario.activation;
    let cfg = ScalingConfig {
        m_grid: scenario.approx_scaling.m_grid.clone(),
        trials: scenario.approx_scaling.trials,
        n_mc: scenario.approx_scaling.n_mc,
        seed: scenario.seed,
    };
    let report = scaling_experiment(rho, act, &scenario.group, scenario.domain, &cfg)?;
    let barron_bound = rho.barron_norm_bound();
    let scale = act.lipschitz() + act.value_at_zero().abs();
    let summary = report
        .summaries
        .iter()
        .map(|s: &ScalingSummary| {
            let cell: Vec<f64> = report.rows.iter().filter(|r| r.m == s.m).map(|r| r.path_norm_sq).collect();
            let hits = cell.iter().filter(|&&p| p <= 2.0 * barron_bound * barron_bound).count();
            let bound = approximation_bound(scale, delta_hat, barron_bound, s.m);
            ScalingSummaryRow {
                m: s.m,
                mean_err_invariant: s.mean_err_invariant,
                stderr_invariant: s.stderr_invariant,
                mean_err_plain: s.mean_err_plain,
                stderr_plain: s.stderr_plain,
                stderr_paired_diff: s.stderr_paired_diff,
                ratio: s.ratio,
                delta_hat,
                approx_bound: bound,
                within_bound: s.mean_err_invariant <= bound,
                path_event_fraction: hits as f64 / cell.len() as f64,
            }
        })
        .collect();
    Ok(ScalingOutcome { report, delta_hat, barron_bound, summary })
}

// ----------------------------------------------------------- rademacher

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherRow {
    pub group: String,
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherPairRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub diff_mean: f64,
    pub diff_stderr: f64,
    /// `invariant ≤ plain + 2·stderr` of the paired difference.
    pub invariant_not_larger: bool,
}

pub fn rademacher(scenario: &Scenario) -> Result<Vec<(usize, PairedRademacher)>> {
    let cfg = &scenario.rademacher;
    let gamma = scenario
        .activation
        .gamma()
        .ok_or_else(|| Error::MissingConstant(scenario.activation.to_string()))?;
    let ascent = AscentConfig { restarts: cfg.restarts, steps: cfg.ascent_steps, ..AscentConfig::default() };
    cfg.sample_sizes
        .iter()
        .map(|&m| {
            let s = scenario.domain.sample(m, rng::derive_seed(scenario.seed, &[m as u64]));
            let seed = rng::derive_seed(scenario.seed, &[m as u64, 1]);
            Ok((m, rademacher_paired(&s, &scenario.group, cfg.q, gamma, cfg.n_sign_draws, &ascent, seed)?))
        })
        .collect()
}

fn rademacher_tables(scenario: &Scenario, results: &[(usize, PairedRademacher)]) -> (Vec<RademacherRow>, Vec<RademacherPairRow>) {
    let d = scenario.group.dim();
    let trivial = format!("trivial:{d}");
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (m, p) in results {
        for (name, r) in [(&scenario.group_spec, &p.invariant), (&trivial, &p.plain)] {
            rows.push(RademacherRow {
                group: name.clone(),
                d,
                m: *m,
                q: scenario.rademacher.q,
                estimate: r.estimate,
                stderr: r.stderr,
                bound: r.bound,
            });
        }
        pairs.push(RademacherPairRow {
            m: *m,
            diff_mean: p.difference.mean,
            diff_stderr: p.difference.stderr,
            invariant_not_larger: p.difference.mean <= 2.0 * p.difference.stderr,
        });
    }
    (rows, pairs)
}

// ----------------------------------------------------------- generalize

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizeRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: usize,
    pub lambda_used: f64,
    pub lambda_kind: LambdaKind,
    pub err_invariant: f64,
    pub err_plain: f64,
    pub path_norm_invariant: f64,
    pub path_norm_plain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizeSummaryRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: usize,
    pub lambda_kind: LambdaKind,
    pub bound: f64,
    pub objective_invariant: f64,
    pub objective_construct: f64,
    pub monotone_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct GeneralizeOutcome {
    pub report: GeneralizationReport,
    pub delta_hat: f64,
}

pub fn generalize(scenario: &Scenario) -> Result<GeneralizeOutcome> {
    let delta_hat = delta_estimate(scenario)?.delta;
    let g = &scenario.generalize;
    let cfg = GeneralizationConfig {
        m: g.m,
        sample_sizes: g.sample_sizes.clone(),
        seeds: g.seeds,
        kappa: g.kappa,
        noise: g.noise(),
        n_test: g.n_test,
        step_size: g.step_size,
        iterations: g.iterations,
        init_scale: g.init_scale,
        confidence: g.confidence,
        delta_hat,
        seed: scenario.seed,
    };
    let target = TargetFunction::new(scenario.target_measure().clone(), scenario.activation);
    let report = generalization_experiment(&target, &scenario.group, scenario.domain, &cfg)?;
    Ok(GeneralizeOutcome { report, delta_hat })
}

/// Mean test error per `M` for one λ variant.
fn generalize_means(report: &GeneralizationReport, kind: LambdaKind) -> Vec<(usize, MeanEstimate, MeanEstimate)> {
    let mut ms: Vec<usize> = report.rows.iter().map(|r| r.n).collect();
    ms.sort_unstable();
    ms.dedup();
    ms.into_iter()
        .map(|m| {
            let cell: Vec<_> = report.rows.iter().filter(|r| r.n == m && r.lambda_kind == kind).collect();
            let inv = MeanEstimate::from_samples(&cell.iter().map(|r| r.err_invariant).collect::<Vec<_>>());
            let plain = MeanEstimate::from_samples(&cell.iter().map(|r| r.err_plain).collect::<Vec<_>>());
            (m, inv, plain)
        })
        .collect()
}

// --------------------------------------------------------------- gamma0

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gamma0Row {
    pub activation: String,
    pub method: String,
    pub gamma: f64,
    pub lipschitz: f64,
    pub value_at_zero: f64,
}

pub fn gamma0(scenario: &Scenario) -> Result<Vec<Gamma0Row>> {
    let mut acts: Vec<Activation> =
        activation::zoo().into_iter().map(Activation::new).collect::<Result<Vec<_>>>()?;
    if !acts.iter().any(|a| a.kind() == scenario.activation.kind()) {
        acts.push(Activation::new(scenario.activation.kind())?);
    }
    acts.iter()
        .map(|a| {
            let (method, gamma) = match a.gamma() {
                Some(g) => ("relu_expansion", g),
                None => ("quadrature", a.estimate_gamma0(scenario.gamma0.half_width, scenario.gamma0.n_points)?),
            };
            Ok(Gamma0Row {
                activation: a.to_string(),
                method: method.to_string(),
                gamma,
                lipschitz: a.lipschitz(),
                value_at_zero: a.value_at_zero(),
            })
        })
        .collect()
}

// ------------------------------------------------------------- dispatch

#[derive(Debug, Clone, Serialize)]
struct OutputEntry {
    name: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    subcommand: &'static str,
    scenario: String,
    config_sha256: String,
    seed: u64,
    seed_source: &'static str,
    version: &'static str,
    constants: Value,
    outputs: Vec<OutputEntry>,
    results: Value,
}

fn base_constants(scenario: &Scenario) -> Value {
    let act = &scenario.activation;
    json!({
        "group_order": scenario.group.order(),
        "dim": scenario.group.dim(),
        "lipschitz": act.lipschitz(),
        "value_at_zero": act.value_at_zero(),
        "gamma": act.gamma(),
        "barron_bound": scenario.target_measure().barron_norm_bound(),
        "gamma0_half_width": activation::GAMMA0_HALF_WIDTH,
        "gamma0_points": activation::GAMMA0_POINTS,
    })
}

fn extend(base: &mut Value, extra: Value) {
    if let (Value::Object(b), Value::Object(e)) = (base, extra) {
        b.extend(e);
    }
}

fn svg_artifact(name: &str, series: Vec<Series>, axes: Axes) -> Result<Artifact> {
    Ok(Artifact { name: name.to_string(), bytes: render_svg(&series, &axes)?.into_bytes() })
}

fn build(cmd: Command, scenario: &Scenario, svg: bool) -> Result<(Vec<Artifact>, Value, Value)> {
    let mut constants = base_constants(scenario);
    let mut artifacts = Vec::new();
    let results = match cmd {
        Command::Delta => {
            let est = delta_estimate(scenario)?;
            artifacts.push(Artifact { name: "delta.csv".into(), bytes: csv_bytes(&[delta_row(scenario, &est)])? });
            json!({
                "delta": est.delta,
                "delta_star": est.delta_star,
                "argmax_measure": scenario.measures[est.argmax_measure].id,
                "skipped_probes": est.skipped_probes,
                "unbounded_probes": est.unbounded_probes,
            })
        }
        Command::ApproxScaling => {
            let out = approx_scaling(scenario)?;
            artifacts.push(Artifact { name: "approx_scaling.csv".into(), bytes: csv_bytes(&out.report.rows)? });
            artifacts
                .push(Artifact { name: "approx_scaling_summary.csv".into(), bytes: csv_bytes(&out.summary)? });
            if svg {
                let pts = |f: fn(&ScalingSummaryRow) -> f64| out.summary.iter().map(|s| (s.m as f64, f(s))).collect();
                artifacts.push(svg_artifact(
                    "approx_scaling.svg",
                    vec![
                        Series::new("invariant", pts(|s| s.mean_err_invariant)),
                        Series::new("plain", pts(|s| s.mean_err_plain)),
                        Series::new("bound", pts(|s| s.approx_bound)),
                    ],
                    Axes { title: format!("{}: squared L2 error", scenario.id), x_label: "m".into(), y_label: "error".into() },
                )?);
            }
            json!({
                "delta_hat": out.delta_hat,
                "slope_invariant": out.report.slope_invariant,
                "slope_plain": out.report.slope_plain,
            })
        }
        Command::Rademacher => {
            let res = rademacher(scenario)?;
            let (rows, pairs) = rademacher_tables(scenario, &res);
            artifacts.push(Artifact { name: "rademacher.csv".into(), bytes: csv_bytes(&rows)? });
            artifacts.push(Artifact { name: "rademacher_paired.csv".into(), bytes: csv_bytes(&pairs)? });
            extend(
                &mut constants,
                json!({
                    "q": scenario.rademacher.q,
                    "n_sign_draws": scenario.rademacher.n_sign_draws,
                    "ascent_restarts": scenario.rademacher.restarts,
                    "ascent_steps": scenario.rademacher.ascent_steps,
                }),
            );
            json!({ "all_invariant_not_larger": pairs.iter().all(|p| p.invariant_not_larger) })
        }
        Command::Generalize => {
            let out = generalize(scenario)?;
            let rows: Vec<GeneralizeRow> = out
                .report
                .rows
                .iter()
                .map(|r| GeneralizeRow {
                    m: r.n,
                    seed: r.seed,
                    lambda_used: r.lambda_used,
                    lambda_kind: r.lambda_kind,
                    err_invariant: r.err_invariant,
                    err_plain: r.err_plain,
                    path_norm_invariant: r.path_norm_invariant,
                    path_norm_plain: r.path_norm_plain,
                })
                .collect();
            let summary: Vec<GeneralizeSummaryRow> = out
                .report
                .rows
                .iter()
                .map(|r| GeneralizeSummaryRow {
                    m: r.n,
                    seed: r.seed,
                    lambda_kind: r.lambda_kind,
                    bound: r.bound,
                    objective_invariant: r.objective_invariant,
                    objective_construct: r.objective_construct,
                    monotone_fraction: r.monotone_fraction,
                })
                .collect();
            artifacts.push(Artifact { name: "generalize.csv".into(), bytes: csv_bytes(&rows)? });
            artifacts.push(Artifact { name: "generalize_summary.csv".into(), bytes: csv_bytes(&summary)? });
            if svg {
                let means = generalize_means(&out.report, LambdaKind::Scaled);
                artifacts.push(svg_artifact(
                    "generalize.svg",
                    vec![
                        Series::new("invariant", means.iter().map(|(m, i, _)| (*m as f64, i.mean)).collect()),
                        Series::new("plain", means.iter().map(|(m, _, p)| (*m as f64, p.mean)).collect()),
                    ],
                    Axes {
                        title: format!("{}: test error, scaled lambda", scenario.id),
                        x_label: "M".into(),
                        y_label: "error".into(),
                    },
                )?);
            }
            extend(&mut constants, json!({ "theory": out.report.constants, "tau0": out.report.tau0 }));
            let scaled: Vec<_> = out.report.rows.iter().filter(|r| r.lambda_kind == LambdaKind::Scaled).collect();
            let wins = scaled.iter().filter(|r| r.err_invariant <= r.err_plain).count();
            json!({
                "delta_hat": out.delta_hat,
                "scaled_invariant_not_worse": wins,
                "scaled_cells": scaled.len(),
            })
        }
        Command::Gamma0 => {
            let rows = gamma0(scenario)?;
            artifacts.push(Artifact {
                name: "gamma0.csv".into(),
                bytes: csv_with_header(&["activation", "method", "gamma", "lipschitz", "value_at_zero"], &rows)?,
            });
            extend(
                &mut constants,
                json!({ "half_width": scenario.gamma0.half_width, "n_points": scenario.gamma0.n_points }),
            );
            Value::Null
        }
    };
    Ok((artifacts, constants, results))
}

/// Runs `cmd` and returns every artifact, `manifest.json` last, without
/// touching the file system.
pub fn execute(cmd: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>> {
    let mut scenario = scenario.clone();
    let seed_source = match opts.seed_override {
        Some(s) => {
            scenario.seed = s;
            "env"
        }
        None => "config",
    };
    let (mut artifacts, constants, results) = match opts.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| build(cmd, &scenario, opts.svg))?
        }
        None => build(cmd, &scenario, opts.svg)?,
    };
    let manifest = Manifest {
        subcommand: cmd.as_str(),
        scenario: scenario.id.clone(),
        config_sha256: sha256_hex(scenario.canonical_json().as_bytes()),
        seed: scenario.seed,
        seed_source,
        version: env!("CARGO_PKG_VERSION"),
        constants,
        outputs: artifacts.iter().map(|a| OutputEntry { name: a.name.clone(), sha256: sha256_hex(&a.bytes) }).collect(),
        results,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    artifacts.push(Artifact { name: "manifest.json".into(), bytes });
    Ok(artifacts)
}

/// [`execute`] followed by writing the artifacts into `out`.
pub fn run(cmd: Command, scenario: &Scenario, opts: &RunOptions, out: &Path) -> Result<Vec<PathBuf>> {
    let artifacts = execute(cmd, scenario, opts)?;
    commit(out, &artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str) -> Scenario {
        let mut s = Scenario::builtin(name).unwrap();
        s.delta.n_probes = 1000;
        s.approx_scaling.m_grid = vec![8, 16, 32, 64];
        s.approx_scaling.trials = 3;
        s.approx_scaling.n_mc = 1000;
        s.rademacher.sample_sizes = vec![8];
        s.rademacher.n_sign_draws = 8;
        s.rademacher.restarts = 4;
        s.rademacher.ascent_steps = 20;
        s.generalize.sample_sizes = vec![16, 32];
        s.generalize.seeds = 2;
        s.generalize.iterations = 50;
        s.generalize.n_test = 500;
        s
    }

    fn names(a: &[Artifact]) -> Vec<&str> {
        a.iter().map(|x| x.name.as_str()).collect()
    }

    #[test]
    fn delta_csv_header_and_value() {
        let a = execute(Command::Delta, &small("c4-corners"), &RunOptions::default()).unwrap();
        assert_eq!(names(&a), ["delta.csv", "manifest.json"]);
        let text = String::from_utf8(a[0].bytes.clone()).unwrap();
        assert!(text.starts_with("scenario,group,activation,n_probes,delta_star,delta,argmax_x\n"), "{text}");
        let delta: f64 = text.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
        assert!((0.24..=0.26).contains(&delta), "{delta}");
    }

    #[test]
    fn every_subcommand_produces_outputs() {
        let s = small("reflection-disjoint");
        let opts = RunOptions { svg: true, jobs: Some(1), seed_override: None };
        let a = execute(Command::ApproxScaling, &s, &opts).unwrap();
        assert_eq!(names(&a), ["approx_scaling.csv", "approx_scaling_summary.csv", "approx_scaling.svg", "manifest.json"]);
        assert!(String::from_utf8_lossy(&a[0].bytes).starts_with("m,trial,err_invariant,err_plain,path_norm_sq\n"));
        let a = execute(Command::Rademacher, &s, &opts).unwrap();
        assert!(String::from_utf8_lossy(&a[0].bytes).starts_with("group,d,M,Q,estimate,stderr,bound\n"));
        assert_eq!(String::from_utf8_lossy(&a[0].bytes).lines().count(), 3);
        let a = execute(Command::Generalize, &s, &opts).unwrap();
        assert!(String::from_utf8_lossy(&a[0].bytes).starts_with(
            "M,seed,lambda_used,lambda_kind,err_invariant,err_plain,path_norm_invariant,path_norm_plain\n"
        ));
        assert_eq!(names(&a), ["generalize.csv", "generalize_summary.csv", "generalize.svg", "manifest.json"]);
        let a = execute(Command::Gamma0, &s, &opts).unwrap();
        let text = String::from_utf8_lossy(&a[0].bytes);
        assert!(text.starts_with("activation,method,gamma,lipschitz,value_at_zero\n"));
        assert!(text.contains("sigmoid,quadrature,"));
    }

    #[test]
    fn seed_override_is_recorded() {
        let s = small("cn-disk");
        let opts = RunOptions { seed_override: Some(7), ..RunOptions::default() };
        let a = execute(Command::Delta, &s, &opts).unwrap();
        let m: Value = serde_json::from_slice(&a[1].bytes).unwrap();
        assert_eq!(m["seed"], 7);
        assert_eq!(m["seed_source"], "env");
        assert_eq!(m["outputs"][0]["sha256"], sha256_hex(&a[0].bytes));
        let b = execute(Command::Delta, &s, &RunOptions::default()).unwrap();
        let n: Value = serde_json::from_slice(&b[1].bytes).unwrap();
        assert_ne!(m["config_sha256"], n["config_sha256"]);
    }

    #[test]
    fn failures_write_nothing() {
        let mut s = small("c4-corners");
        s.approx_scaling.m_grid = vec![8, 16];
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(run(Command::ApproxScaling, &s, &RunOptions::default(), &out).is_err());
        assert!(!out.exists());
    }
}
