//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits nonzero if any failed. Built without the libtest
//! harness so the lines are always shown.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use liso::distributions::{IsotropicGaussian, SamplingPolicy, SeededRng};
use liso::estimators::{
    bootstrap_standard_error, laplace_log_weights, normalized_weights, self_normalized_average, WeightedEnsemble,
};
use liso::harness::csv_io::write_rows;
use liso::harness::svg::render_svg;
use liso::harness::{fit_loglog, parse_csv, run_experiment, ExperimentReport, ExperimentSpec};
use liso::objectives::{ackley, quad_cubic, rastrigin, sphere, QUAD_CUBIC_DOMAIN};
use liso::optimizers::isotropic_es_recombination_weights;
use liso::oracle::{gibbs_mean_refined, laplace_gap, QuadratureSpec};
use liso::{
    alpha_schedule, run_adaptive_liso, run_adaptive_random_search, run_isotropic_es, run_liso, run_random_search,
    AdaptiveConfig, Method, Objective, RunOutcome, StaticConfig, Temperature,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn shipped(name: &str) -> ExperimentSpec {
    ExperimentSpec::from_file(&configs_dir().join(name)).expect("shipped config")
}

fn c1_benchmarks() -> Verdict {
    let mut worst = 0.0f64;
    for d in [1, 2, 4, 8, 12] {
        let origin = vec![0.0; d];
        for f in [sphere, rastrigin, ackley] {
            worst = worst.max(f(&origin).unwrap().abs());
        }
    }
    let r = rastrigin(&[1.0, 0.0]).unwrap();
    let a = ackley(&[0.5]).unwrap();
    check(
        worst <= 1e-12 && (r - 24.0).abs() <= 1e-12 && (a - 4.253662).abs() <= 1e-6,
        format!("max |f(0)| = {worst:e}, rastrigin(1,0) = {r}, ackley(0.5) = {a:.9} (expected 4.253662 +/- 1e-6)"),
    )
}

fn c2_shift_invariance() -> Verdict {
    let (n, d) = (200, 5);
    let alpha = alpha_schedule(1.0, n, d);
    let q = IsotropicGaussian::new(vec![0.0; d], 1.0);
    let mut rng = SeededRng::new(2, 0);
    let mut worst = 0.0f64;
    let mut x = vec![0.0; d];
    for _ in 0..50 {
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            q.sample_into(&mut rng, &mut x);
            points.push(x.clone());
        }
        let values: Vec<f64> = points.iter().map(|p| sphere(p).unwrap()).collect();
        let estimate = |shift: f64| {
            let mut e = WeightedEnsemble::with_capacity(d, n);
            for (p, v) in points.iter().zip(&values) {
                e.push(p, v + shift, q.log_density(p));
            }
            e.reweight(alpha, n).unwrap();
            e.weighted_mean().unwrap()
        };
        let base = estimate(0.0);
        for c in [1.0, -1.0, 1e6, -1e6] {
            let moved = estimate(c);
            let gap = base
                .iter()
                .zip(&moved)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(gap);
        }
    }
    check(
        worst < 1e-10,
        format!("max shift in estimate {worst:e} over 50 ensembles, alpha {alpha:.4}"),
    )
}

fn c3_weight_sanity() -> Verdict {
    let mut rng = SeededRng::new(3, 0);
    let (mut worst_sum, mut worst_hull, mut negative, mut non_finite) = (0.0f64, 0.0f64, 0, 0);
    let mut big = 0;
    for i in 0..1000 {
        let n = 1 + rng.index(300);
        let d = 1 + rng.index(6);
        let (alpha, scale) = if i % 4 == 0 {
            big += 1;
            (1e3, 1e4)
        } else {
            (
                10f64.powf(6.0 * rng.uniform() - 3.0),
                10f64.powf(8.0 * rng.uniform() - 4.0),
            )
        };
        let q = IsotropicGaussian::new(vec![0.0; d], 0.5 + 2.0 * rng.uniform());
        let mut x = vec![0.0; d];
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                q.sample_into(&mut rng, &mut x);
                x.clone()
            })
            .collect();
        let values: Vec<f64> = (0..n).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect();
        let logq: Vec<f64> = points.iter().map(|p| q.log_density(p)).collect();
        let lw = laplace_log_weights(alpha, &values, &logq).unwrap();
        let w = normalized_weights(&lw).unwrap();
        negative += w.iter().filter(|v| **v < 0.0).count();
        non_finite += w.iter().filter(|v| !v.is_finite()).count();
        worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
        let est = self_normalized_average(&points, &lw).unwrap();
        non_finite += est.iter().filter(|v| !v.is_finite()).count();
        for k in 0..d {
            let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            worst_hull = worst_hull.max(lo - est[k]).max(est[k] - hi);
        }
    }
    check(
        negative == 0 && non_finite == 0 && worst_sum <= 1e-12 && worst_hull <= 1e-12,
        format!(
            "1000 instances ({big} at alpha 1e3, |f| up to 1e4): max |sum - 1| {worst_sum:e}, \
             max hull excess {worst_hull:e}, negative {negative}, non-finite {non_finite}"
        ),
    )
}

fn c4_oracle_equivalence() -> Verdict {
    let alpha = 16.0;
    let spec = QuadratureSpec::interval(QUAD_CUBIC_DOMAIN.0, QUAD_CUBIC_DOMAIN.1, 1601, alpha).unwrap();
    let f = |x: &[f64]| quad_cubic(x).unwrap();
    let target = gibbs_mean_refined(&f, &spec, 1e-6).map_err(|e| e.to_string())?[0];
    let q0 = IsotropicGaussian::new(vec![0.0], 1.0);
    let policy: SamplingPolicy = q0.clone().into();
    let mut passed = 0;
    let mut zs = Vec::new();
    for seed in 0..5u64 {
        let mut config = StaticConfig::new(100_000, 1.0, q0.clone(), seed);
        config.temperature = Temperature::Fixed(alpha);
        let out = run_liso(&Objective::quad_cubic(), &config).map_err(|e| e.to_string())?;
        let samples = policy.sample(&mut SeededRng::new(seed, 0), 100_000);
        let values: Vec<f64> = samples.iter().map(|x| quad_cubic(x).unwrap()).collect();
        let logq: Vec<f64> = samples.iter().map(|x| policy.log_density(x)).collect();
        let lw = laplace_log_weights(alpha, &values, &logq).unwrap();
        let se = bootstrap_standard_error(&samples, &lw, 200, &mut SeededRng::new(seed, 1)).unwrap()[0];
        let z = (out.estimate[0] - target) / se;
        if z.abs() <= 3.0 {
            passed += 1;
        }
        zs.push(format!("{z:+.2}"));
    }
    check(
        passed >= 4,
        format!(
            "{passed}/5 seeds within 3 bootstrap SE of {target:.9}; z = [{}]",
            zs.join(", ")
        ),
    )
}

fn c5_laplace_decay() -> Verdict {
    let alphas = [4.0, 8.0, 16.0, 32.0, 64.0];
    let f = |x: &[f64]| quad_cubic(x).unwrap();
    let spec = QuadratureSpec::interval(QUAD_CUBIC_DOMAIN.0, QUAD_CUBIC_DOMAIN.1, 1601, alphas[0]).unwrap();
    let gaps = laplace_gap(&f, &[0.0], &spec, &alphas).map_err(|e| e.to_string())?;
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let pts: Vec<(f64, f64)> = alphas.iter().copied().zip(gaps.iter().copied()).collect();
    let slope = fit_loglog(&pts).map_err(|e| e.to_string())?.slope;

    let quadratic = |x: &[f64]| (x[0] - 0.3) * (x[0] - 0.3);
    let spec = QuadratureSpec::default_box(1, alphas[0]).unwrap();
    let flat = laplace_gap(&quadratic, &[0.3], &spec, &alphas).map_err(|e| e.to_string())?;
    let worst_flat = flat.iter().copied().fold(0.0, f64::max);
    check(
        decreasing && slope <= -0.8 && worst_flat < 1e-8,
        format!("cubic gaps decreasing: {decreasing}, slope {slope:.4}; quadratic max gap {worst_flat:e}"),
    )
}

fn final_mse(report: &ExperimentReport, method: &str) -> f64 {
    report.method(method).unwrap().rows.last().unwrap().mean_mse
}

fn c6_rates() -> Verdict {
    let spec = shipped("sphere_d4_static.toml");
    let report = run_experiment(&spec).map_err(|e| e.to_string())?;
    let liso = report
        .fit_loglog_slope("liso", 1000, 100_000)
        .map_err(|e| e.to_string())?
        .slope;
    let rs = report
        .fit_loglog_slope("random_search", 1000, 100_000)
        .map_err(|e| e.to_string())?
        .slope;
    let (ml, mr) = (final_mse(&report, "liso"), final_mse(&report, "random_search"));
    check(
        (-0.87..=-0.47).contains(&liso) && (-0.70..=-0.30).contains(&rs) && ml < mr,
        format!(
            "{} trials: liso slope {liso:.4} in [-0.87, -0.47], random_search slope {rs:.4} in [-0.70, -0.30], \
             final mse {ml:.3e} < {mr:.3e}",
            report.trials
        ),
    )
}

fn c6_note_rastrigin() -> Verdict {
    let report = run_experiment(&shipped("rastrigin_d4_static.toml")).map_err(|e| e.to_string())?;
    let (ml, mr) = (final_mse(&report, "liso"), final_mse(&report, "random_search"));
    check(
        ml <= mr,
        format!("rastrigin d=4 final mse liso {ml:.3e} <= random_search {mr:.3e}"),
    )
}

fn c7_adaptive_ordering() -> Verdict {
    let mut spec = shipped("sphere_d4_adaptive.toml");
    spec.trials = 20;
    spec.methods = vec![Method::AdaptiveLiso, Method::AdaptiveRandomSearch];
    let report = run_experiment(&spec).map_err(|e| e.to_string())?;
    let rows = &report.method("adaptive_liso").unwrap().rows;
    let (first, last) = (rows[0].mean_mse, rows.last().unwrap().mean_mse);
    let rs = final_mse(&report, "adaptive_random_search");
    check(
        last < rs && last < 0.01 * first,
        format!(
            "20 trials: adaptive_liso {last:.3e} < adaptive_random_search {rs:.3e}; \
             adaptive_liso final/initial {:.2e}",
            last / first
        ),
    )
}

fn c8_es_weights() -> Verdict {
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut a1_300 = 0.0;
    for b in [2usize, 4, 300] {
        let (count, w) = isotropic_es_recombination_weights(b).map_err(|e| e.to_string())?;
        ok &= count == b / 2 && w.len() == count && w.iter().all(|v| *v > 0.0);
        for (i, v) in w.iter().enumerate() {
            let direct = ((b as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln();
            worst = worst.max((v - direct).abs());
        }
        if b == 300 {
            a1_300 = w[0];
        }
    }
    check(
        ok && worst <= 1e-6,
        format!("B in {{2, 4, 300}}: counts and positivity ok: {ok}, max deviation {worst:e}, a1(300) = {a1_300:.6}"),
    )
}

fn run_method(method: Method, objective: &Objective, config: &AdaptiveConfig) -> RunOutcome {
    let s = config.as_static();
    match method {
        Method::Liso => run_liso(objective, &s),
        Method::RandomSearch => run_random_search(objective, &s),
        Method::AdaptiveLiso => run_adaptive_liso(objective, config),
        Method::AdaptiveRandomSearch => run_adaptive_random_search(objective, config),
        Method::IsotropicEs => run_isotropic_es(objective, config),
    }
    .unwrap()
}

fn c9_determinism_and_budget() -> Verdict {
    let q0 = IsotropicGaussian::new(vec![1.0; 3], 1.0 / 3.0);
    let mut config = AdaptiveConfig::new(5_000, 1.0, q0, 31);
    config.mixture_weight = 0.2;
    let mut problems = Vec::new();
    for method in Method::ALL {
        let runs: Vec<(RunOutcome, u64)> = (0..2)
            .map(|_| {
                let objective = Objective::ackley(3);
                let out = run_method(method, &objective, &config);
                (out, objective.evaluations())
            })
            .collect();
        let bits = |o: &RunOutcome| -> Vec<u64> {
            o.trace
                .estimates
                .iter()
                .flatten()
                .chain(&o.trace.squared_errors)
                .map(|v| v.to_bits())
                .collect()
        };
        if bits(&runs[0].0) != bits(&runs[1].0) || runs[0].0.trace.checkpoints != runs[1].0.trace.checkpoints {
            problems.push(format!("{method}: traces differ"));
        }
        for (_, evals) in &runs {
            if *evals != 5_000 {
                problems.push(format!("{method}: {evals} evaluations"));
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "5 drivers: bit-identical traces, 5000 evaluations each".into()
        } else {
            problems.join("; ")
        },
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c10_harness() -> Verdict {
    let run = |trials| {
        let mut spec = shipped("sphere_d2_static.toml");
        spec.trials = trials;
        run_experiment(&spec).unwrap()
    };
    let few = run(20);
    let many = run(80);

    let mut bytes = Vec::new();
    write_rows(&mut bytes, &many.rows()).unwrap();
    let parsed = parse_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
    let mut again = Vec::new();
    write_rows(&mut again, &parsed).unwrap();
    let round_trip = parsed == many.rows() && again == bytes;

    let svg_same = render_svg(&many).unwrap() == render_svg(&run(80)).unwrap();

    let hw = |r: &ExperimentReport| {
        median(
            r.methods
                .iter()
                .flat_map(|m| m.rows.iter().map(|c| c.ci_half_width))
                .collect(),
        )
    };
    let factor = hw(&few) / hw(&many);
    check(
        round_trip && svg_same && (1.6..=2.6).contains(&factor),
        format!("csv round trip {round_trip}, svg identical {svg_same}, ci shrink 20 -> 80 trials {factor:.3}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 benchmark exactness", c1_benchmarks),
        ("2 shift invariance", c2_shift_invariance),
        ("3 weight sanity", c3_weight_sanity),
        ("4 oracle equivalence", c4_oracle_equivalence),
        ("5 laplace decay", c5_laplace_decay),
        ("6 rate reproduction", c6_rates),
        ("6 note: rastrigin ordering", c6_note_rastrigin),
        ("7 adaptive ordering", c7_adaptive_ordering),
        ("8 es weights", c8_es_weights),
        ("9 determinism and budget", c9_determinism_and_budget),
        ("10 harness contracts", c10_harness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, criterion) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion line(s) failed");
        std::process::exit(1);
    }
}
