//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::Command;
use std::time::Instant;

use kslice::construction::{chernoff_check, run_construction, ConstructionParams, DEFAULT_POINTS_CONSTANT};
use kslice::density::{
    bispherical_integrate, gaussian_tail_check, section_integral_mc, BisphericalOptions, GaussianMixture,
};
use kslice::geometry::{build_net, projection_metric, sample_grassmannian, sample_sphere};
use kslice::polytope::{volume_estimate, VPolytope};
use kslice::rng::stream;
use kslice::specialfn::{expectation_integral, gamma_inequality_margin, sphere_surface};
use kslice_cli::{run_sweep, PointsRule, SweepConfig, SWEEP_DELTA, SWEEP_K, SWEEP_N};
use rand::Rng;

const MASTER_SEED: u64 = 0;

/// Generator `sub` of criterion `criterion`, all under one master seed.
fn rng_for(criterion: u64, sub: u64) -> kslice::rng::SimRng {
    stream(MASTER_SEED, (criterion << 32) | sub)
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn expectation_exact() -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    for n in 2..=16usize {
        for k in 1..=6.min(n - 1) {
            let e = expectation_integral(n, k, 1.0).unwrap();
            worst = worst.max(e - (n as f64).powf(-(k as f64) / 2.0));
        }
    }
    verdict(worst <= 1e-10, format!("max E - n^(-k/2) = {worst:.3e}, tol 1e-10"))
}

fn expectation_stochastic() -> Verdict {
    let draws = 100_000;
    let mut worst = 0.0f64;
    for n in 2..=10usize {
        for k in 1..=6.min(n - 1) {
            let mut rng = rng_for(2, (n * 16 + k) as u64);
            let f = sample_grassmannian(n, k, &mut rng).unwrap();
            let nf = n as f64;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                let theta: Vec<f64> = sample_sphere(n, &mut rng).into_iter().map(|v| nf * v).collect();
                let y = (-f.distance(&theta).unwrap().powi(2)).exp();
                s += y;
                s2 += y * y;
            }
            let m = draws as f64;
            let mean = s / m;
            let se = ((s2 / m - mean * mean).max(0.0) / m).sqrt();
            let exact = expectation_integral(n, k, 1.0).unwrap();
            worst = worst.max((mean - exact).abs() / se.max(1e-300));
        }
    }
    verdict(worst <= 4.0, format!("max |MC - exact| = {worst:.2} se, tol 4 se"))
}

fn section_oracle() -> Verdict {
    let mut rng = rng_for(3, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=10usize);
        let k = rng.random_range(1..=3.min(n - 1));
        let pairs = rng.random_range(1..=16usize);
        let radius = rng.random_range(0.5..3.0);
        let pts: Vec<Vec<f64>> =
            (0..pairs).map(|_| sample_sphere(n, &mut rng).into_iter().map(|v| radius * v).collect()).collect();
        let f = GaussianMixture::symmetric(n, &pts).unwrap();
        let sub = sample_grassmannian(n, k, &mut rng).unwrap();
        let exact = f.section_integral(&sub).unwrap();
        let (mc, se) = section_integral_mc(&f, &sub, &mut rng, 1_000_000).unwrap();
        worst = worst.max((mc - exact).abs() / se.max(1e-300));
    }
    verdict(worst <= 3.0, format!("max |MC - exact| = {worst:.2} se over 20 instances, tol 3 se"))
}

fn bispherical() -> Verdict {
    let opts = BisphericalOptions::default();
    let mut worst = 0.0f64;
    for n in 3..=8usize {
        for m in 1..n {
            let v = bispherical_integrate(n, m, n - m, |_| 1.0, &opts, &mut rng_for(4, n as u64)).unwrap();
            let kappa = sphere_surface(n).unwrap();
            worst = worst.max((v - kappa).abs() / kappa);
        }
    }
    verdict(worst <= 1e-6, format!("max relative error {worst:.3e}, tol 1e-6"))
}

fn gamma() -> Verdict {
    let mut rng = rng_for(5, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        let mu = lambda * rng.random::<f64>();
        worst = worst.min(gamma_inequality_margin(lambda, mu).unwrap());
    }
    verdict(worst >= -1e-10, format!("min margin {worst:.3e}, tol -1e-10"))
}

fn chernoff() -> Verdict {
    let p = 0.05;
    let c = chernoff_check(p, 40, 100_000, &mut rng_for(6, 0), |r| if r.random::<f64>() < p { 1.0 } else { 0.0 })
        .unwrap();
    verdict(
        c.holds(),
        format!("P(avg >= 0.15) = {:.5} ± {:.5}, bound e^-2 = {:.5}", c.empirical_prob, c.std_error, c.bound),
    )
}

fn lipschitz() -> Verdict {
    let mut rng = rng_for(7, 0);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=16usize);
        let k = rng.random_range(1..n);
        let f1 = sample_grassmannian(n, k, &mut rng).unwrap();
        let f2 = sample_grassmannian(n, k, &mut rng).unwrap();
        let theta = sample_sphere(n, &mut rng);
        let diff = (f1.distance(&theta).unwrap() - f2.distance(&theta).unwrap()).abs();
        if diff > projection_metric(&f1, &f2).unwrap() + 1e-12 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations} violations in 10^4 triples"))
}

fn net_coverage() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, k, delta) in [(4, 1, 0.4), (5, 2, 0.5), (6, 1, 0.5)] {
        let net = build_net(n, k, delta, &mut rng_for(8, n as u64), 10_000, 200).unwrap();
        let mut rng = rng_for(8, 100 + n as u64);
        let worst = (0..10_000).map(|_| net.gap(&sample_grassmannian(n, k, &mut rng).unwrap())).fold(0.0, f64::max);
        ok &= net.coverage_max_gap < delta && worst < delta;
        parts.push(format!("({n},{k},{delta}): {} members, gap {worst:.3}", net.len()));
    }
    verdict(ok, parts.join("; "))
}

fn tail_and_mass() -> Verdict {
    let mut worst = 0.0f64;
    for n in 1..=12 {
        worst = worst.max(gaussian_tail_check(n, &mut rng_for(9, n as u64), 100_000).unwrap().estimate);
    }
    let params =
        ConstructionParams { n: 8, k: 1, points: 1 << 14, delta: Some(SWEEP_DELTA), ..ConstructionParams::default() };
    let r = run_construction(&params).unwrap();
    let (mass, se) = (r.mass_3k0.estimate, r.mass_3k0.std_error);
    verdict(
        worst <= 0.25 && mass >= 0.75 - 3.0 * se,
        format!("max tail {worst:.3e} <= 0.25; mass3 = {mass:.4} ± {se:.4} >= 0.75 - 3se"),
    )
}

fn polytope_volumes() -> Verdict {
    let mut worst = 0.0f64;
    for n in [3usize, 4] {
        let signs = |mask: usize| (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect::<Vec<f64>>();
        let cube = VPolytope::new(n, &(0..1 << n).map(signs).collect::<Vec<_>>(), None).unwrap();
        let cross_vs: Vec<Vec<f64>> = (0..2 * n)
            .map(|j| {
                let mut v = vec![0.0; n];
                v[j / 2] = if j % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect();
        let cross = VPolytope::new(n, &cross_vs, None).unwrap();
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        let two_n = 2f64.powi(n as i32);
        for (j, (body, exact)) in [(cube, two_n), (cross, two_n / fact)].into_iter().enumerate() {
            let v = volume_estimate(&body, &mut rng_for(10, (2 * n + j) as u64), 1_000_000).unwrap();
            worst = worst.max((v.estimate - exact).abs() / v.std_error);
        }
    }
    verdict(worst <= 3.0, format!("max deviation {worst:.2} se, tol 3 se"))
}

fn sweep_trend() -> Verdict {
    let cfg = SweepConfig {
        n: SWEEP_N.to_vec(),
        k: SWEEP_K.to_vec(),
        points: PointsRule::Scaled(DEFAULT_POINTS_CONSTANT),
        params: ConstructionParams { delta: Some(SWEEP_DELTA), ..ConstructionParams::default() },
        format: kslice_cli::config::Format::Csv,
    };
    let rows = run_sweep(&cfg, |_| {});
    if let Some(bad) = rows.iter().find(|r| r.failed) {
        return verdict(false, format!("cell n={} k={} failed: {:?}", bad.n, bad.k, bad.error));
    }
    let shapes: Vec<f64> =
        rows.iter().map(|r| kslice::construction::bound_shape(r.max_section.unwrap(), r.n, r.k)).collect();
    let (lo, hi) = shapes.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let mut inversions = Vec::new();
    for &k in &SWEEP_K {
        let certs: Vec<f64> = rows.iter().filter(|r| r.k == k).map(|r| r.certificate.unwrap()).collect();
        inversions.push(certs.windows(2).filter(|w| w[1] < w[0]).count());
    }
    verdict(
        hi / lo <= 4.0 && inversions.iter().all(|&i| i <= 1),
        format!("C_fit = {hi:.4}, shape max/min = {:.3} (tol 4), certificate inversions per k {inversions:?} (tol 1)", hi / lo),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let runs: [&[&str]; 4] = [
        &["verify-lemmas", "--n", "3,4", "--k", "1,2", "--trials", "5000", "--seed", "12"],
        &["build", "--n", "4", "--k", "1", "--points", "128", "--delta", "0.5", "--trials", "10000", "--seed", "12", "--format", "csv"],
        &["sweep", "--n", "4,5", "--k", "1", "--points", "128", "--trials", "10000", "--seed", "12"],
        &["build", "--n", "5", "--k", "2", "--points", "256", "--delta", "0.8", "--trials", "10000", "--seed", "12"],
    ];
    let mut mismatches = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let outputs: Vec<String> = (0..2)
            .map(|j| {
                let path = dir.path().join(format!("{i}-{j}"));
                let status = Command::new(env!("CARGO_BIN_EXE_kslice"))
                    .args(*args)
                    .args(["--out", path.to_str().unwrap()])
                    .status()
                    .unwrap();
                assert_eq!(status.code(), Some(0), "{args:?}");
                let text = std::fs::read_to_string(&path).unwrap();
                if text.starts_with('{') {
                    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
                    if let Some(r) = v["result"].as_object_mut() {
                        r.remove("wall_times_ms");
                    }
                    v.to_string()
                } else {
                    text
                }
            })
            .collect();
        if outputs[0] != outputs[1] {
            mismatches.push(args[0]);
        }
    }
    verdict(mismatches.is_empty(), format!("{} commands rerun, mismatches {mismatches:?}", runs.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Verdict); 12] = [
        ("expectation lemma, exact", 5, expectation_exact),
        ("expectation lemma, stochastic", 60, expectation_stochastic),
        ("section integral oracle", 300, section_oracle),
        ("bispherical identity", 60, bispherical),
        ("gamma inequality", 1, gamma),
        ("chernoff lemma", 30, chernoff),
        ("lipschitz property", 30, lipschitz),
        ("net coverage", 300, net_coverage),
        ("gaussian tail and mass bound", 600, tail_and_mass),
        ("polytope volume oracles", 120, polytope_volumes),
        ("end-to-end trend", 1800, sweep_trend),
        ("determinism", 600, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let passed = v.passed && secs < *budget as f64;
        failures += usize::from(!passed);
        println!(
            "[{}] {:>2}. {name}: {} ({secs:.1} s, budget {budget} s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
