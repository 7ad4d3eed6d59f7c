//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use barron_sym::activation::{self, Activation};
use barron_sym::complexity::{massart_bound, rademacher_invariant_neuron, rademacher_linear, AscentConfig, SignSampling};
use barron_sym::construction::construct;
use barron_sym::data::DomainSpec;
use barron_sym::delta::apothem_criterion;
use barron_sym::erm::LambdaKind;
use barron_sym::experiments::runner::{self, Command, RunOptions};
use barron_sym::experiments::{scenarios, Scenario};
use barron_sym::group::GroupAction;
use barron_sym::net::NetParams;
use barron_sym::rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

fn delta_of(name: &str) -> (f64, Duration) {
    let s = Scenario::builtin(name).expect("builtin");
    let t = Instant::now();
    let est = runner::delta_estimate(&s).expect("delta estimate");
    (est.delta, t.elapsed())
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn c1_reflection() -> Outcome {
    let (d1, t1) = delta_of("reflection-disjoint");
    let (d2, t2) = delta_of("reflection-overlap");
    let limit = Duration::from_secs(10);
    outcome(
        in_range(d1, 0.49, 0.51) && in_range(d2, 0.95, 1.0) && t1 < limit && t2 < limit,
        format!("disjoint δ={d1:.6} ({t1:.2?}), overlap δ={d2:.6} ({t2:.2?})"),
    )
}

fn c2_cyclic() -> Outcome {
    let (d1, _) = delta_of("c4-corners");
    let (d2, _) = delta_of("cn-disk");
    let s = Scenario::builtin("cn-disk").unwrap();
    let apothem = s.measures.iter().flat_map(|m| m.measure.atoms()).all(|a| apothem_criterion(&a.w, a.b, 6));
    let sixth = 1.0 / 6.0;
    outcome(
        in_range(d1, 0.24, 0.26) && in_range(d2, 0.9 * sixth, 1.1 * sixth) && apothem,
        format!("c4-corners δ={d1:.6}, cn-disk δ={d2:.6}, apothem criterion {apothem}"),
    )
}

fn c3_bumps() -> Outcome {
    let (d1, _) = delta_of("s2-bump-offdiag");
    let (d2, _) = delta_of("s2-bump-diag");
    outcome(in_range(d1, 0.45, 0.55) && in_range(d2, 0.95, 1.0), format!("offdiag δ={d1:.6}, diag δ={d2:.6}"))
}

fn c4_scaling() -> Outcome {
    let s = Scenario::builtin("reflection-disjoint").unwrap();
    let (res, elapsed) = {
        let t = Instant::now();
        let r = runner::approx_scaling(&s).expect("scaling run");
        (r, t.elapsed())
    };
    let slope = res.report.slope_invariant;
    let d = res.delta_hat;
    let bad: Vec<String> = res
        .summary
        .iter()
        .filter(|r| r.m >= 64 && !in_range(r.ratio, d / 2.0, 2.0 * d))
        .map(|r| format!("m={} ratio={:.3}", r.m, r.ratio))
        .collect();
    let ratios: Vec<String> = res.summary.iter().filter(|r| r.m >= 64).map(|r| format!("{:.3}", r.ratio)).collect();
    outcome(
        in_range(slope, -1.3, -0.7) && bad.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "slope={slope:.3}, δ̂={d:.4}, ratios(m≥64)=[{}], out of band: {:?}, {elapsed:.1?}",
            ratios.join(", "),
            bad
        ),
    )
}

fn c5_path_event() -> Outcome {
    let s = Scenario::builtin("reflection-disjoint").unwrap();
    let rho = s.target_measure();
    let b = rho.barron_norm_bound();
    let hits = (0..100u64)
        .filter(|&k| {
            let net = construct(rho, 64, rng::derive_seed(s.seed, &[5, k])).unwrap();
            net.path_norm_sq() <= 2.0 * b * b
        })
        .count();
    outcome(hits >= 40, format!("{hits}/100 constructions with ‖Θ‖_P² ≤ 2B² (B²={:.4})", b * b))
}

fn enumerate_linear(s: &[Vec<f64>]) -> f64 {
    let m = s.len();
    let d = s[0].len();
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        let mut best: f64 = 0.0;
        for k in 0..d {
            let v: f64 = (0..m).map(|i| if mask >> i & 1 == 1 { s[i][k] } else { -s[i][k] }).sum();
            best = best.max(v.abs());
        }
        total += best;
    }
    total / (1u64 << m) as f64 / m as f64
}

fn c6_rademacher() -> Outcome {
    let mut r = rng::seeded(606);
    let groups = ["trivial:2", "reflection:2", "cyclic2d:4", "symmetric:3", "reflection:3", "cyclic2d:6"];
    let ascent = AscentConfig { restarts: 8, steps: 100, ..AscentConfig::default() };
    let mut bound_fail = 0;
    let mut worst_margin = f64::INFINITY;
    for k in 0..50u64 {
        let g = GroupAction::parse(groups[k as usize % groups.len()]).unwrap();
        let m = [8, 16, 32, 64][r.random_range(0..4)];
        let q = r.random_range(0.5..2.0);
        let s = DomainSpec::CubePm1(g.dim()).sample(m, rng::derive_seed(606, &[k]));
        let res = rademacher_invariant_neuron(&s, &g, q, 1.0, 32, &ascent, rng::derive_seed(606, &[k, 1])).unwrap();
        let margin = res.bound + 3.0 * res.stderr - res.estimate;
        worst_margin = worst_margin.min(margin / res.bound);
        if margin < 0.0 {
            bound_fail += 1;
        }
    }
    let mut enum_fail = 0;
    let mut massart_fail = 0;
    for m in 1..=12usize {
        for d in [1, 2, 3, 5] {
            let s = DomainSpec::CubePm1(d).sample(m, rng::derive_seed(607, &[m as u64, d as u64]));
            let est = rademacher_linear(&s, SignSampling::Exhaustive, 0).unwrap().mean;
            let oracle = enumerate_linear(&s);
            if (est - oracle).abs() > 1e-12 * oracle.max(1.0) {
                enum_fail += 1;
            }
            if est > massart_bound(&s).unwrap() + 1e-12 {
                massart_fail += 1;
            }
            let mc = rademacher_linear(&s, SignSampling::Random(256), 1).unwrap();
            if mc.mean > massart_bound(&s).unwrap() + 3.0 * mc.stderr + 1e-12 {
                massart_fail += 1;
            }
        }
    }
    outcome(
        bound_fail == 0 && enum_fail == 0 && massart_fail == 0,
        format!(
            "bound violations {bound_fail}/50 (min relative margin {worst_margin:.3}), enumeration mismatches {enum_fail}/48, Massart violations {massart_fail}/96"
        ),
    )
}

fn c7_invariance() -> Outcome {
    let mut failures = Vec::new();
    let mut rows = 0;
    for name in scenarios::names() {
        let s = Scenario::builtin(name).unwrap();
        for (m, p) in runner::rademacher(&s).expect("rademacher run") {
            rows += 1;
            if p.invariant.estimate > p.plain.estimate + 2.0 * p.difference.stderr {
                failures.push(format!("{name} M={m}: {:.4} vs {:.4}", p.invariant.estimate, p.plain.estimate));
            }
        }
    }
    outcome(failures.is_empty(), format!("{} of {rows} paired cells violate: {:?}", failures.len(), failures))
}

fn away_from_kinks(net: &NetParams, act: &Activation, group: &GroupAction, xs: &[Vec<f64>], margin: f64) -> bool {
    let kinks = act.kinks();
    if kinks.is_empty() {
        return true;
    }
    xs.iter().all(|x| {
        group.orbit(x).unwrap().iter().all(|gx| {
            (0..net.width()).all(|i| {
                let z: f64 = net.w()[i].iter().zip(gx).map(|(w, v)| w * v).sum::<f64>() + net.b()[i];
                kinks.iter().all(|k| (z - k).abs() > margin)
            })
        })
    })
}

fn c8_gradient() -> Outcome {
    let groups = ["trivial:2", "reflection:2", "cyclic2d:4", "symmetric:3"];
    let (m, n, lambda, h) = (4usize, 6usize, 0.01, 1e-6);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut checked = 0;
    for (gi, spec) in groups.iter().enumerate() {
        let g = GroupAction::parse(spec).unwrap();
        let d = g.dim();
        for (ai, kind) in activation::zoo().into_iter().enumerate() {
            let act = Activation::new(kind).unwrap();
            let mut r = rng::derived(808, &[gi as u64, ai as u64]);
            let mut accepted = 0;
            while accepted < 100 {
                let flat: Vec<f64> = (0..m * (d + 2)).map(|_| r.random_range(-1.5..1.5)).collect();
                let net = NetParams::from_flat(m, d, &flat).unwrap();
                let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
                let ys: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
                if !away_from_kinks(&net, &act, &g, &xs, 1e-3) || flat.iter().any(|v| v.abs() < 1e-3) {
                    continue;
                }
                accepted += 1;
                let grad = net.grad_objective(&act, &g, &xs, &ys, lambda).unwrap().to_flat();
                let mut num = vec![0.0; flat.len()];
                for j in 0..flat.len() {
                    let mut p = flat.clone();
                    p[j] += h;
                    let up = NetParams::from_flat(m, d, &p).unwrap().objective(&act, &g, &xs, &ys, lambda).unwrap();
                    p[j] -= 2.0 * h;
                    let dn = NetParams::from_flat(m, d, &p).unwrap().objective(&act, &g, &xs, &ys, lambda).unwrap();
                    num[j] = (up - dn) / (2.0 * h);
                }
                let err = grad.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = num.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                let rel = err / scale;
                worst = worst.max(rel);
                checked += 1;
                if rel > 1e-4 {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures}/{checked} points above 1e-4, worst relative error {worst:.2e}"))
}

fn c9_uniform_bound() -> Outcome {
    let groups = ["reflection:1", "reflection:3", "symmetric:2", "symmetric:3", "symmetric:4"];
    let acts: Vec<Activation> = activation::zoo().into_iter().map(|k| Activation::new(k).unwrap()).collect();
    let mut r = rng::seeded(909);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for k in 0..10_000usize {
        let g = GroupAction::parse(groups[k % groups.len()]).unwrap();
        let act = &acts[k % acts.len()];
        let d = g.dim();
        let m = r.random_range(1..=16);
        let scale = r.random_range(0.1..3.0);
        let flat: Vec<f64> = (0..m * (d + 2)).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        let net = NetParams::from_flat(m, d, &flat).unwrap();
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..=1.0)).collect();
        let f = net.forward_invariant(act, &g, &x).unwrap();
        let bound = (act.lipschitz() + act.value_at_zero().abs()) * net.path_norm();
        if f.abs() > bound * (1.0 + 1e-12) {
            violations += 1;
        }
        if bound > 0.0 {
            tightest = tightest.max(f.abs() / bound);
        }
    }
    outcome(violations == 0, format!("{violations}/10000 violations, max |f|/bound {tightest:.4}"))
}

fn c10_generalization() -> Outcome {
    let s = Scenario::builtin("reflection-disjoint").unwrap();
    let t = Instant::now();
    let out = runner::generalize(&s).expect("generalization run");
    let elapsed = t.elapsed();
    let rows = &out.report.rows;
    let scaled: Vec<_> = rows.iter().filter(|r| r.lambda_kind == LambdaKind::Scaled).collect();
    let wins = scaled.iter().filter(|r| r.err_invariant <= r.err_plain).count();
    let above = rows
        .iter()
        .filter(|r| !(r.err_invariant <= r.bound && r.err_plain <= r.bound && r.bound.is_finite()))
        .count();
    let frac = wins as f64 / scaled.len() as f64;
    let min_bound = rows.iter().map(|r| r.bound).fold(f64::INFINITY, f64::min);
    let max_err = rows.iter().map(|r| r.err_invariant.max(r.err_plain)).fold(0.0, f64::max);
    outcome(
        frac >= 0.7 && above == 0 && elapsed < Duration::from_secs(600),
        format!(
            "invariant ≤ plain in {wins}/{} scaled cells ({:.0}%), rows above bound {above}/{}, max error {max_err:.3e} vs min bound {min_bound:.1}, {elapsed:.1?}",
            scaled.len(),
            100.0 * frac,
            rows.len()
        ),
    )
}

fn c11_determinism() -> Outcome {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    let csvs = |a: Vec<barron_sym::experiments::output::Artifact>| -> Vec<_> {
        a.into_iter().filter(|x| x.name.ends_with(".csv")).collect()
    };
    for name in scenarios::names() {
        let mut s = Scenario::builtin(name).unwrap();
        s.approx_scaling.m_grid = vec![16, 32, 64, 128];
        s.approx_scaling.trials = 4;
        s.approx_scaling.n_mc = 2000;
        s.rademacher.sample_sizes = vec![16];
        s.rademacher.n_sign_draws = 16;
        for cmd in [Command::Delta, Command::ApproxScaling, Command::Rademacher] {
            let one = csvs(runner::execute(cmd, &s, &RunOptions::default()).unwrap());
            let two = csvs(runner::execute(cmd, &s, &RunOptions { jobs: Some(3), ..RunOptions::default() }).unwrap());
            compared += one.len();
            if one != two {
                mismatches.push(format!("{name}/{}", cmd.as_str()));
            }
        }
    }
    outcome(mismatches.is_empty(), format!("{compared} CSVs compared across reruns, mismatches: {mismatches:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("δ reflection: disjoint in [0.49, 0.51], overlap in [0.95, 1], each < 10 s", c1_reflection),
        ("δ cyclic: c4-corners in [0.24, 0.26], cn-disk within 10% of 1/6", c2_cyclic),
        ("δ S2 bumps: offdiag in [0.45, 0.55], diag in [0.95, 1]", c3_bumps),
        ("approximation: slope in [-1.3, -0.7], ratio in [δ̂/2, 2δ̂] for m ≥ 64, < 2 min", c4_scaling),
        ("path-norm event ≤ 2B² in ≥ 40 of 100 constructions", c5_path_event),
        ("Rademacher: bound + 3 se on 50 configs, exact enumeration M ≤ 12, Massart bound", c6_rademacher),
        ("invariant ≤ plain + 2 se on every builtin", c7_invariance),
        ("gradient matches central differences (rel 1e-4)", c8_gradient),
        ("uniform bound |f| ≤ (L + |σ(0)|) ‖Θ‖_P on 10^4 draws", c9_uniform_bound),
        ("generalization: invariant ≤ plain in ≥ 70% scaled cells, errors ≤ bound, < 10 min", c10_generalization),
        ("determinism: byte-identical CSVs on rerun", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (label, f)) in criteria.iter().enumerate() {
        let (o, t) = timed(f);
        if !o.pass {
            failed += 1;
        }
        println!("{} [{:>2}] {label}: {} ({t:.1?})", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
