//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use pr_kaczmarz::harness::{run_experiment, trial_ensemble, ExperimentConfig, TrialRecord};
use pr_kaczmarz::par::Execution;
use pr_kaczmarz::regularity::{
    dir_deriv_f, estimate_l, fi, objective_f, phase_expectation, projection_mass_fraction, second_dir_deriv_fi,
    wedge_fraction, RegularityParams, SearchMode,
};
use pr_kaczmarz::rng::{derive_seed, stream};
use pr_kaczmarz::sensing::{measure, sample_sphere, SensingModel};
use pr_kaczmarz::solver::{project_magnitude, DEFAULT_ZERO_THRESHOLD};
use pr_kaczmarz::{inner, Complex64, ComplexVector};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// Closest point to `x` with `|a^* w| = y`. For a fixed target `c = a^* w` the nearest
/// feasible point is `x + (c − a^*x) a / ‖a‖²`, so only the phase of `c` is searched: a grid
/// scan of `|y e^{it} − a^*x|²`, then bisection on the sign of its derivative
/// `2y Im(conj(a^*x) e^{it})` inside the best cell.
fn phase_grid_oracle(x: &ComplexVector, a: &ComplexVector, y: f64) -> ComplexVector {
    let ax = inner(a, x).unwrap();
    let cost = |t: f64| (cis(t) * y - ax).norm_sqr();
    let slope = |t: f64| (ax.conj() * cis(t)).im;
    let grid = 4096;
    let h = 2.0 * PI / grid as f64;
    let best = (0..grid).map(|k| k as f64 * h).min_by(|p, q| cost(*p).total_cmp(&cost(*q))).unwrap();
    let (mut lo, mut hi) = (best - h, best + h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = cis(0.5 * (lo + hi)) * y;
    let mut w = x.clone();
    w.axpy((c - ax) / a.norm_sqr(), a).unwrap();
    w
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(1001);
    let (mut worst_point, mut worst_dist) = (0.0f64, 0.0f64);
    for k in 0..1000 {
        let n = [2, 3, 8][k % 3];
        let x = ComplexVector::random_normal(n, &mut rng);
        let a = ComplexVector::random_normal(n, &mut rng);
        let z = ComplexVector::random_normal(n, &mut rng);
        let y = inner(&a, &z).unwrap().norm();
        let got = project_magnitude(&x, &a, y, DEFAULT_ZERO_THRESHOLD).unwrap();
        let want = phase_grid_oracle(&x, &a, y);
        worst_point = worst_point.max((&got - &want).norm());
        worst_dist = worst_dist.max(((&got - &x).norm() - (&want - &x).norm()).abs());
    }
    let elapsed = start.elapsed();
    (
        worst_point <= 1e-8 && worst_dist <= 1e-8 && elapsed < Duration::from_secs(30),
        format!("max |P(x) - oracle| {worst_point:.2e}, max distance gap {worst_dist:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let e = sample_sphere(8, 64, derive_seed(2002, k)).unwrap();
        let mut rng = stream(derive_seed(2003, k));
        let z = ComplexVector::random_unit(8, &mut rng);
        let x = ComplexVector::random_normal(8, &mut rng);
        let y = measure(&e, &z).unwrap();
        let lhs = (0..e.m())
            .map(|i| {
                let p = project_magnitude(&x, &e.vector(i), y.values()[i], DEFAULT_ZERO_THRESHOLD).unwrap();
                (&p - &z).norm_sqr()
            })
            .sum::<f64>()
            / e.m() as f64;
        let v = &z - &x;
        let rhs = objective_f(&e, &y, &x).unwrap() + dir_deriv_f(&e, &y, &x, &v).unwrap() + v.norm_sqr();
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    let elapsed = start.elapsed();
    (worst <= 1e-10 && elapsed < Duration::from_secs(5), format!("max relative gap {worst:.2e}, {elapsed:.2?}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let betas = [0.5, 1.0, 2.0];
    let fr = wedge_fraction(8, &betas, 1_000_000, 3003, Execution::default()).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (&b, f) in betas.iter().zip(&fr) {
        let target = b * b / (1.0 + b * b);
        ok &= (f - target).abs() <= 0.002;
        detail.push(format!("beta {b}: {f:.4} vs {target:.4}"));
    }
    let elapsed = start.elapsed();
    (ok && elapsed < Duration::from_secs(60), format!("{}, {elapsed:.2?}", detail.join("; ")))
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, theta) in [0.0, FRAC_PI_4, FRAC_PI_2].into_iter().enumerate() {
        let est = phase_expectation(theta, 1_000_000, derive_seed(4004, k as u64), Execution::default());
        let target = 0.5 * theta.cos().powi(2) + 0.25 * theta.sin().powi(2);
        ok &= (est - target).abs() <= 0.01;
        detail.push(format!("theta {theta:.4}: {est:.4} vs {target:.4}"));
    }
    (ok, detail.join("; "))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [4, 16, 64] {
        let f = projection_mass_fraction(n, 0.8, 1_000_000, derive_seed(5005, n as u64), Execution::default()).unwrap();
        ok &= f >= 0.74;
        detail.push(format!("n={n}: {f:.4}"));
    }
    (ok, format!("{} (need >= 0.74)", detail.join("; ")))
}

fn criterion_6() -> Outcome {
    let (mut first, mut second, mut bound_ok) = (0.0f64, 0.0f64, true);
    let mut first_over = 0;
    for k in 0..200u64 {
        let e = sample_sphere(4, 20, derive_seed(6006, k)).unwrap();
        let mut rng = stream(derive_seed(6007, k));
        let z = ComplexVector::random_unit(4, &mut rng);
        let x = ComplexVector::random_unit(4, &mut rng);
        let v = ComplexVector::random_unit(4, &mut rng);
        let y = measure(&e, &z).unwrap();

        let t = 1e-6;
        let mut xt = x.clone();
        xt.axpy(Complex64::new(t, 0.0), &v).unwrap();
        let fd = (objective_f(&e, &y, &xt).unwrap() - objective_f(&e, &y, &x).unwrap()) / t;
        let exact = dir_deriv_f(&e, &y, &x, &v).unwrap();
        let rel = (fd - exact).abs() / exact.abs();
        first = first.max(rel);
        first_over += usize::from(rel >= 1e-4);

        let a = e.vector(k as usize % e.m());
        let h = 1e-4;
        let along = |s: f64| {
            let mut p = x.clone();
            p.axpy(Complex64::new(s, 0.0), &v).unwrap();
            fi(&a, &z, &p).unwrap()
        };
        let cd = (along(h) - 2.0 * along(0.0) + along(-h)) / (h * h);
        let exact2 = second_dir_deriv_fi(&a, &z, &x, &v).unwrap();
        second = second.max((cd - exact2).abs() / exact2.abs());

        for i in 0..e.m() {
            let ai = e.vector(i);
            let at_z = second_dir_deriv_fi(&ai, &z, &z, &v).unwrap();
            let cap = 2.0 * inner(&ai, &v).unwrap().norm_sqr();
            bound_ok &= (0.0..=cap).contains(&at_z) || (at_z - cap).abs() <= 1e-12 * cap || at_z.abs() <= 1e-15;
        }
    }
    (
        first < 1e-4 && second < 1e-3 && bound_ok,
        format!("f' max rel err {first:.2e} ({first_over}/200 at or above 1e-4); f'' max rel err {second:.2e}; f''(z) in [0, 2|a^*v|^2]: {bound_ok}"),
    )
}

fn convergence_summary(records: &[TrialRecord]) -> (usize, bool, String) {
    let converged: Vec<&TrialRecord> =
        records.iter().filter(|r| !r.failed && r.final_aligned_error.is_some_and(|e| e <= 1e-8)).collect();
    let rates_ok = converged.iter().all(|r| r.rate.is_some_and(|q| q < 1.0));
    let mut rates: Vec<f64> = converged.iter().filter_map(|r| r.rate).collect();
    rates.sort_by(f64::total_cmp);
    let median = rates.get(rates.len() / 2).copied().unwrap_or(f64::NAN);
    let max_iters = records.iter().map(|r| r.iterations_run).max().unwrap_or(0);
    (
        converged.len(),
        rates_ok,
        format!("{}/{} converged, median rate {median:.4}, max iterations {max_iters}", converged.len(), records.len()),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::new(SensingModel::SphereUniform, 50, 2000, 20, 7007);
    let records = run_experiment(&cfg).unwrap();
    let (count, rates_ok, detail) = convergence_summary(&records);
    let within = records.iter().all(|r| r.iterations_run <= 200 * 50);
    let elapsed = start.elapsed();
    (count >= 18 && rates_ok && within && elapsed < Duration::from_secs(120), format!("{detail}, {elapsed:.2?}"))
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig::new(SensingModel::BlockUnitary, 50, 2000, 20, 8008);
    let records = run_experiment(&cfg).unwrap();
    let (count, rates_ok, detail) = convergence_summary(&records);
    let within = records.iter().all(|r| r.iterations_run <= 200 * 50);
    let defect = records
        .iter()
        .map(|r| trial_ensemble(&cfg, r.seed).unwrap().max_block_unitarity_defect())
        .fold(0.0f64, f64::max);
    (count >= 18 && rates_ok && within && defect <= 1e-12, format!("{detail}, max block unitarity defect {defect:.2e}"))
}

fn criterion_9() -> Outcome {
    let n = 8;
    let mut ok = true;
    let mut detail = Vec::new();
    for ratio in [10, 100] {
        let m = ratio * n;
        let mut worst = 0.0f64;
        for s in 0..20u64 {
            let e = sample_sphere(n, m, derive_seed(9009, s)).unwrap();
            let z = ComplexVector::random_unit(n, &mut stream(derive_seed(9010, s)));
            let params = RegularityParams { seed: s, ..Default::default() };
            let rep = estimate_l(&e, &z, &params, Execution::default()).unwrap();
            worst = worst.max(rep.argmin_mean_sq_projection * n as f64);
        }
        ok &= worst <= 1.1;
        detail.push(format!("m={m}: max n*mean|a^*v|^2 {worst:.4}"));
    }
    (ok, format!("{} (need <= 1.1)", detail.join("; ")))
}

fn criterion_10() -> Outcome {
    let mut positive = 0;
    let mut flagged = true;
    let mut values = Vec::new();
    for s in 0..20u64 {
        let e = sample_sphere(2, 500, derive_seed(10010, s)).unwrap();
        let z = ComplexVector::random_unit(2, &mut stream(derive_seed(10011, s)));
        let params =
            RegularityParams { c0: 1.0 / 80.0, alpha: 20.0, mode: Some(SearchMode::DenseNet), seed: s, ..Default::default() };
        let rep = estimate_l(&e, &z, &params, Execution::default()).unwrap();
        flagged &= rep.upper_bound && rep.search_mode == SearchMode::DenseNet;
        if rep.l_estimate > 0.0 {
            positive += 1;
        }
        values.push(rep.l_estimate);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (positive >= 18 && flagged, format!("{positive}/20 positive, largest estimate {max:.4}, upper-bound flag {flagged}"))
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pr-kaczmarz")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "model = sphere\nn = 12\nm = 240\nnum_trials = 8\nmaster_seed = 11\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = run_cli(&["run", "--config", cfg, "--seed", "42"]);
    let b = run_cli(&["run", "--config", cfg, "--seed", "42"]);
    let serial = run_cli(&["--serial", "run", "--config", cfg, "--seed", "42"]);
    let pooled = run_cli(&["--threads", "4", "run", "--config", cfg, "--seed", "42"]);
    let other = run_cli(&["run", "--config", cfg, "--seed", "43"]);
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    let ok = a == b && a == serial && a == pooled && a != other && lines > 8;
    (ok, format!("{lines} CSV lines; repeat equal {}, serial equal {}, 4 threads equal {}", a == b, a == serial, a == pooled))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("projection matches phase-grid oracle", criterion_1),
        ("one-step expected contraction identity", criterion_2),
        ("wedge probability", criterion_3),
        ("phase expectation reference constant", criterion_4),
        ("projection mass constant", criterion_5),
        ("derivative formulas", criterion_6),
        ("linear convergence, sphere model", criterion_7),
        ("linear convergence, unitary model", criterion_8),
        ("operator norm at regularity argmin", criterion_9),
        ("regularity constant positive", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2}: {name}: {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
