//! The lemma suite behind `kslice verify-lemmas`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use kslice::construction::chernoff_check;
use kslice::density::{bispherical_integrate, gaussian_tail_check, BisphericalOptions, MIN_TAIL_TRIALS};
use kslice::geometry::sample_sphere;
use kslice::rng::stream;
use kslice::specialfn::{expectation_integral, gamma_inequality_margin, sphere_surface};
use kslice::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    /// Monte Carlo draws per stochastic check.
    pub trials: usize,
    pub gamma_pairs: usize,
    pub chernoff_batches: usize,
    /// Largest n in the stochastic expectation check.
    pub mc_max_n: usize,
    pub tail_max_n: usize,
    pub bispherical_n: Vec<usize>,
    pub seed: u64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            n: (2..=16).collect(),
            k: (1..=4).collect(),
            trials: 100_000,
            gamma_pairs: 10_000,
            chernoff_batches: 100_000,
            mc_max_n: 10,
            tail_max_n: 12,
            bispherical_n: (3..=8).collect(),
            seed: 0,
        }
    }
}

impl LemmaConfig {
    /// Grid cells (n, k) with 1 <= k <= n-1.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                if k >= 1 && k < n {
                    cells.push((n, k));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Smallest slack (bound - value, or allowed - observed deviation) over
    /// all cases; negative exactly when some case failed.
    pub worst_slack: f64,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn from_slacks(name: &str, cases: Vec<(String, f64)>) -> Self {
        let failures = cases.iter().filter(|(_, s)| !(*s >= 0.0)).count();
        let worst_slack = cases.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        let first_failure = cases.iter().find(|(_, s)| !(*s >= 0.0)).map(|(label, s)| format!("{label}: slack {s:.6e}"));
        Self { name: name.to_string(), passed: failures == 0 && !cases.is_empty(), cases: cases.len(), failures, worst_slack, first_failure }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Tolerances of the suite; `corrupted` makes the exact expectation check
/// demand a margin no value can meet.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub gamma: f64,
    pub expectation: f64,
    pub expectation_sigmas: f64,
    pub bispherical_rel: f64,
}

impl Tolerances {
    pub const STANDARD: Self = Self { gamma: 1e-10, expectation: 1e-10, expectation_sigmas: 4.0, bispherical_rel: 1e-6 };

    pub fn corrupted() -> Self {
        Self { expectation: -1.0, ..Self::STANDARD }
    }
}

pub fn run_suite(cfg: &LemmaConfig, tol: Tolerances) -> Result<LemmaReport> {
    let checks = vec![
        gamma_check(cfg, tol)?,
        expectation_exact_check(cfg, tol)?,
        expectation_mc_check(cfg, tol)?,
        bispherical_check(cfg, tol)?,
        chernoff_lemma_check(cfg)?,
        tail_check(cfg)?,
    ];
    Ok(LemmaReport { all_passed: checks.iter().all(|c| c.passed), checks })
}

fn gamma_check(cfg: &LemmaConfig, tol: Tolerances) -> Result<CheckResult> {
    let mut rng = stream(cfg.seed, 1);
    let mut cases = Vec::with_capacity(cfg.gamma_pairs);
    for _ in 0..cfg.gamma_pairs {
        let lambda = 100.0 * (1.0 - rng.random::<f64>());
        let mu = lambda * rng.random::<f64>();
        let margin = gamma_inequality_margin(lambda, mu)?;
        cases.push((format!("lambda={lambda}, mu={mu}"), margin + tol.gamma));
    }
    Ok(CheckResult::from_slacks("gamma_inequality", cases))
}

fn expectation_exact_check(cfg: &LemmaConfig, tol: Tolerances) -> Result<CheckResult> {
    let cases = cfg
        .cells()
        .into_iter()
        .map(|(n, k)| {
            let value = expectation_integral(n, k, 1.0)?;
            let bound = (n as f64).powf(-(k as f64) / 2.0);
            Ok((format!("n={n}, k={k}, value={value}, bound={bound}"), bound + tol.expectation - value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::from_slacks("expectation_exact", cases))
}

/// Mean of exp(-d(F, nθ)²) for F the span of the last n-k coordinates, so
/// d² = n² (θ_1² + ... + θ_k²).
fn expectation_mc_check(cfg: &LemmaConfig, tol: Tolerances) -> Result<CheckResult> {
    let cells: Vec<(usize, usize)> = cfg.cells().into_iter().filter(|&(n, _)| n <= cfg.mc_max_n).collect();
    let cases = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(n, k))| {
            let mut rng = stream(cfg.seed, 1_000 + idx as u64);
            let nsq = (n * n) as f64;
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..cfg.trials {
                let theta = sample_sphere(n, &mut rng);
                let d2 = nsq * theta[..k].iter().map(|a| a * a).sum::<f64>();
                let y = (-d2).exp();
                sum += y;
                sum_sq += y * y;
            }
            let t = cfg.trials as f64;
            let mean = sum / t;
            let se = ((sum_sq / t - mean * mean).max(0.0) / t).sqrt();
            let exact = expectation_integral(n, k, 1.0)?;
            let allowed = tol.expectation_sigmas * se;
            Ok((format!("n={n}, k={k}, mc={mean}, se={se}, exact={exact}"), allowed - (mean - exact).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::from_slacks("expectation_monte_carlo", cases))
}

fn bispherical_check(cfg: &LemmaConfig, tol: Tolerances) -> Result<CheckResult> {
    let opts = BisphericalOptions::default();
    let mut cases = Vec::new();
    for &n in &cfg.bispherical_n {
        let kappa = sphere_surface(n)?;
        for m in 1..n {
            let mut rng = stream(cfg.seed, 2_000 + (n * 100 + m) as u64);
            let value = bispherical_integrate(n, m, n - m, |_| 1.0, &opts, &mut rng)?;
            let rel = (value - kappa).abs() / kappa;
            cases.push((format!("n={n}, m={m}, value={value}, kappa={kappa}"), tol.bispherical_rel - rel));
        }
    }
    Ok(CheckResult::from_slacks("bispherical_identity", cases))
}

fn chernoff_lemma_check(cfg: &LemmaConfig) -> Result<CheckResult> {
    let p = 0.05;
    let mut rng = stream(cfg.seed, 3);
    let c = chernoff_check(p, 40, cfg.chernoff_batches, &mut rng, |r| if r.random::<f64>() < p { 1.0 } else { 0.0 })?;
    let slack = c.bound + 3.0 * c.std_error - c.empirical_prob;
    Ok(CheckResult::from_slacks(
        "chernoff",
        vec![(format!("p={p}, N=40, prob={}, bound={}", c.empirical_prob, c.bound), slack)],
    ))
}

fn tail_check(cfg: &LemmaConfig) -> Result<CheckResult> {
    let trials = cfg.trials.max(MIN_TAIL_TRIALS);
    let cases = (1..=cfg.tail_max_n)
        .map(|n| {
            let t = gaussian_tail_check(n, &mut stream(cfg.seed, 4_000 + n as u64), trials)?;
            Ok((format!("n={n}, estimate={}, se={}", t.estimate, t.std_error), t.bound - t.estimate))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::from_slacks("gaussian_tail", cases))
}
