//! The end-to-end pipeline: good point sets, the pair (K₀, f₀), the
//! normalization to (K, f) with |K| = 1 and ∫_K f = 1, the search for the
//! heaviest codimension-k section, and the resulting d_ovr certificate.
//!
//! Universal constants are never materialized. Every bound that carries one
//! is reported "modulo c" and checked only through trends across a sweep.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{try_mass_in_set, GaussianMixture, MassEstimate};
use crate::error::{domain, Error, Result};
use crate::geometry::{
    axpy, build_net, dot, perturb_subspace, sample_grassmannian, sample_sphere, GrassmannNet, NetSummary, Subspace,
};
use crate::polytope::{gluskin_ratio, volume_estimate, VPolytope, VolumeEstimate};
use crate::rng::{fork_seed, stream, SimRng};
use crate::specialfn::expectation_integral;

pub const SCHEMA_VERSION: u32 = 1;

/// Desk-scale ceilings.
pub const MAX_DIMENSION: usize = 14;
pub const MAX_POINTS: usize = 1 << 18;

/// Generator streams of the pipeline stages under the master seed.
mod stage {
    pub const NET: u64 = 1;
    pub const POINTS: u64 = 2;
    pub const VOLUME: u64 = 3;
    pub const MASS: u64 = 4;
    pub const NORMALIZE: u64 = 5;
    pub const SEARCH: u64 = 6;
    pub const PROBES: u64 = 7;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructionParams {
    pub n: usize,
    pub k: usize,
    /// Number of sphere points N; the mixture has M = 2N centers.
    pub points: usize,
    /// Net radius; `None` means n^{-k/2-1}.
    pub delta: Option<f64>,
    pub net_probes: usize,
    pub net_budget: usize,
    /// Fresh point sets tried before giving up on the net threshold.
    pub point_retries: usize,
    /// Random subspaces used to spot-check the Lipschitz extension.
    pub extension_probes: usize,
    pub mc_trials: usize,
    pub search_restarts: usize,
    pub search_steps: usize,
    pub master_seed: u64,
    /// Exponent scale of φ_β(t) = exp(-β t²) on the point-set side.
    pub beta: f64,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self {
            n: 8,
            k: 1,
            points: 1 << 12,
            delta: None,
            net_probes: 2_000,
            net_budget: 200,
            point_retries: 8,
            extension_probes: 1_000,
            mc_trials: 50_000,
            search_restarts: 6,
            search_steps: 300,
            master_seed: 0,
            beta: 1.0,
        }
    }
}

impl ConstructionParams {
    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n, self.k);
        if !(2..=MAX_DIMENSION).contains(&n) {
            return Err(domain(format!("n must lie in [2, {MAX_DIMENSION}], got {n}")));
        }
        if k == 0 || k >= n {
            return Err(domain(format!("k must lie in [1, n-1] = [1, {}], got {k}", n - 1)));
        }
        if self.points == 0 || self.points > MAX_POINTS {
            return Err(domain(format!("points must lie in [1, {MAX_POINTS}], got {}", self.points)));
        }
        let delta = self.resolved_delta();
        if !(delta > 0.0 && delta <= std::f64::consts::SQRT_2) {
            return Err(domain(format!("delta must lie in (0, √2], got {delta}")));
        }
        if self.search_restarts == 0 || self.search_steps < 2 {
            return Err(domain("search needs at least one restart and two steps"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(domain("beta must be positive"));
        }
        Ok(())
    }

    /// Net radius in effect: the override, or n^{-k/2-1}.
    pub fn resolved_delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| (self.n as f64).powf(-(self.k as f64) / 2.0 - 1.0))
    }

    /// Copy with `delta` filled in, for reports.
    pub fn resolved(&self) -> Self {
        Self { delta: Some(self.resolved_delta()), ..self.clone() }
    }

    /// 3 n^{-k/2}: the per-net-member acceptance threshold.
    pub fn net_threshold(&self) -> f64 {
        3.0 * (self.n as f64).powf(-(self.k as f64) / 2.0)
    }

    /// 4 n^{-k/2}: the all-subspace bound when delta <= n^{-k/2-1}.
    pub fn extension_target(&self) -> f64 {
        4.0 * (self.n as f64).powf(-(self.k as f64) / 2.0)
    }

    /// Point count c·n^{k/2+4} with c = 1, the scale the union bound needs.
    pub fn asymptotic_points(&self) -> f64 {
        (self.n as f64).powf(self.k as f64 / 2.0 + 4.0)
    }
}

/// Constant c in the default point count N = c·n^{k/2+4}.
pub const DEFAULT_POINTS_CONSTANT: f64 = 1.0 / 64.0;

/// round(c·n^{k/2+4}) clamped to [64, 2^18].
pub fn scaled_points(n: usize, k: usize, constant: f64) -> usize {
    let raw = constant * (n as f64).powf(k as f64 / 2.0 + 4.0);
    if raw.is_finite() {
        (raw.round() as usize).clamp(64, MAX_POINTS)
    } else {
        MAX_POINTS
    }
}

/// (1/N) Σ exp(-β d(F, s·θ_i)²).
pub fn empirical_average_phi(points: &[Vec<f64>], f: &Subspace, n_scale: f64, beta: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(domain("empirical_average_phi needs at least one point"));
    }
    let n = f.ambient_dim();
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let scale = beta * n_scale * n_scale;
    let total: f64 = points.iter().map(|p| (-scale * f.distance_sq_unchecked(p)).exp()).sum();
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodPoints {
    pub points: Vec<Vec<f64>>,
    /// max over the net of the empirical average (β = 1, scale n).
    pub sup_over_net: f64,
    pub net_threshold: f64,
    /// sup_over_net + n·δ: bound for every subspace via the 1-Lipschitz map
    /// F ↦ d(F, θ) and the n-Lipschitz average.
    pub extension_bound: f64,
    pub extension_target: f64,
    /// Whether δ <= n^{-k/2-1}, the regime where the extension bound is
    /// guaranteed to land below `extension_target`.
    pub delta_certifies_extension: bool,
    pub attempts: usize,
    /// Exact E[exp(-d(F, nθ)²)] for reference (<= n^{-k/2}).
    pub expectation: f64,
}

/// Draws N uniform sphere points until the empirical average is at most
/// 3 n^{-k/2} on every net member, and reports the Lipschitz extension.
pub fn find_good_points<R: Rng + ?Sized>(params: &ConstructionParams, net: &GrassmannNet, rng: &mut R) -> Result<GoodPoints> {
    params.validate()?;
    let (n, k) = (params.n, params.k);
    if net.ambient_dim != n || net.codim != k {
        return Err(domain("net shape does not match params"));
    }
    let nf = n as f64;
    let threshold = params.net_threshold();
    let mut best_sup = f64::INFINITY;
    for attempt in 1..=params.point_retries.max(1) {
        let points: Vec<Vec<f64>> = (0..params.points).map(|_| sample_sphere(n, rng)).collect();
        let sup = net_sup(&points, net, nf)?;
        best_sup = best_sup.min(sup);
        if sup <= threshold {
            let extension_bound = sup + nf * net.delta;
            return Ok(GoodPoints {
                points,
                sup_over_net: sup,
                net_threshold: threshold,
                extension_bound,
                extension_target: params.extension_target(),
                delta_certifies_extension: net.delta <= nf.powf(-(k as f64) / 2.0 - 1.0) * (1.0 + 1e-12),
                attempts: attempt,
                expectation: expectation_integral(n, k, 1.0)?,
            });
        }
    }
    Err(Error::Contract {
        stage: "points",
        message: format!(
            "best net supremum {best_sup:.6} exceeds 3 n^(-k/2) = {threshold:.6} after {} draws of N = {}; \
             the union bound needs N ~ c n^(k/2+4) = c * {:.0}",
            params.point_retries.max(1),
            params.points,
            params.asymptotic_points()
        ),
    })
}

fn net_sup(points: &[Vec<f64>], net: &GrassmannNet, n_scale: f64) -> Result<f64> {
    net.members
        .par_iter()
        .map(|f| empirical_average_phi(points, f, n_scale, 1.0))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffCheck {
    pub p: f64,
    pub batch: usize,
    pub trials: usize,
    pub preflight_mean: f64,
    pub empirical_prob: f64,
    pub std_error: f64,
    /// e^{-pN}
    pub bound: f64,
}

impl ChernoffCheck {
    pub fn holds(&self) -> bool {
        self.empirical_prob <= self.bound + 3.0 * self.std_error
    }
}

const CHERNOFF_PREFLIGHT: usize = 20_000;

/// Frequency of {(1/N) Σ Y_i >= 3p} over `trials` batches of N draws from
/// `sampler`, against e^{-pN}. The sampler must produce values in [0, 1]
/// with mean at most p; a pre-flight run checks the mean.
pub fn chernoff_check<R, S>(p: f64, batch: usize, trials: usize, rng: &mut R, sampler: S) -> Result<ChernoffCheck>
where
    R: Rng + ?Sized,
    S: Fn(&mut SimRng) -> f64 + Sync,
{
    if !(p > 0.0 && p <= 1.0) {
        return Err(domain(format!("p must lie in (0, 1], got {p}")));
    }
    if batch == 0 || trials == 0 {
        return Err(domain("batch size and trial count must be positive"));
    }
    let seed = fork_seed(rng);
    let mut pre = stream(seed, u64::MAX);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..CHERNOFF_PREFLIGHT {
        let y = sampler(&mut pre);
        if !(0.0..=1.0).contains(&y) {
            return Err(domain(format!("sampler produced {y} outside [0, 1]")));
        }
        sum += y;
        sum_sq += y * y;
    }
    let cnt = CHERNOFF_PREFLIGHT as f64;
    let mean = sum / cnt;
    let se = ((sum_sq / cnt - mean * mean).max(0.0) / cnt).sqrt();
    if mean > p + 3.0 * se {
        return Err(domain(format!("sampler mean {mean:.5} exceeds p = {p} by more than 3 standard errors")));
    }

    // compare sums against 3pN with a little slack so an average of exactly
    // 3p (e.g. 6/40 vs 3*0.05) is not lost to rounding
    let target = 3.0 * p * batch as f64 - 1e-9;
    let hits: u64 = crate::rng::chunk_sizes(trials, crate::rng::MC_CHUNKS)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, size)| {
            let mut r = stream(seed, chunk as u64);
            (0..size).filter(|_| (0..batch).map(|_| sampler(&mut r)).sum::<f64>() >= target).count() as u64
        })
        .sum();
    let est = MassEstimate::from_counts(hits, trials as u64);
    Ok(ChernoffCheck {
        p,
        batch,
        trials,
        preflight_mean: mean,
        empirical_prob: est.estimate,
        std_error: est.std_error,
        bound: (-p * batch as f64).exp(),
    })
}

/// The unnormalized pair (K₀, f₀).
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub k0: VPolytope,
    pub f0: GaussianMixture,
}

/// Centers {±n θ_i}; K₀ = conv(centers ∪ {±n e_j}) with circumradius n.
pub fn build_construction(n: usize, points: &[Vec<f64>]) -> Result<Construction> {
    if points.is_empty() {
        return Err(domain("need at least one point"));
    }
    let nf = n as f64;
    let scaled: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|a| a * nf).collect()).collect();
    let f0 = GaussianMixture::symmetric(n, &scaled)?;
    let mut vertices: Vec<Vec<f64>> = f0.centers().map(<[f64]>::to_vec).collect();
    for j in 0..n {
        for s in [nf, -nf] {
            let mut e = vec![0.0; n];
            e[j] = s;
            vertices.push(e);
        }
    }
    let k0 = VPolytope::new(n, &vertices, Some(nf))?;
    Ok(Construction { n, points: points.to_vec(), k0, f0 })
}

/// f(y) = |3K₀| (∫_{3K₀} f₀)^{-1} f₀(a y) with a = |3K₀|^{1/n}, carried in
/// closed form through the mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDensity {
    pub mixture: GaussianMixture,
    /// a = |3K₀|^{1/n}
    pub scale: f64,
    /// ∫_{3K₀} f₀
    pub normalizer: f64,
}

impl NormalizedDensity {
    /// Pointwise f(y) without the restriction to K.
    pub fn eval_unrestricted(&self, y: &[f64]) -> Result<f64> {
        let n = self.mixture.ambient_dim() as f64;
        let ay: Vec<f64> = y.iter().map(|v| v * self.scale).collect();
        Ok(self.scale.powf(n) / self.normalizer * self.mixture.eval(&ay)?)
    }

    /// ∫_F f = a^k (∫_{3K₀} f₀)^{-1} ∫_F f₀. Integrating the unrestricted
    /// closed form over all of F, this bounds ∫_{F∩K} f from above.
    pub fn section_value(&self, f: &Subspace) -> Result<f64> {
        let k = f.codim() as f64;
        Ok(self.scale.powf(k) / self.normalizer * self.mixture.section_integral(f)?)
    }

    /// Same transform applied to the literal φ(t) = e^{-t²} normalization
    /// (2π)^{-k/2} (1/M) Σ φ(d(F, p_i)).
    pub fn section_value_phi(&self, f: &Subspace) -> Result<f64> {
        let k = f.codim() as f64;
        Ok(self.scale.powf(k) / self.normalizer * (2.0 * PI).powf(-k / 2.0) * self.mixture.section_sum(f, 1.0)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl RatioEstimate {
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.estimate - target).abs() <= sigmas * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub k: VPolytope,
    pub density: NormalizedDensity,
    pub k0_volume: VolumeEstimate,
    pub mass_3k0: MassEstimate,
    pub checks: NormalizationChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationChecks {
    /// |K| from an independent volume run (target 1).
    pub k_volume: RatioEstimate,
    /// ∫_K f = (∫_{3K₀} f₀)^{-1} ∫_{aK} f₀ from an independent mass run (target 1).
    pub integral_of_f: RatioEstimate,
    /// max over vertices of |a·v_K - 3 v_{K₀}| / (3n).
    pub vertex_roundtrip_error: f64,
}

impl NormalizationChecks {
    pub fn hold(&self) -> bool {
        self.k_volume.within(1.0, 3.0) && self.integral_of_f.within(1.0, 3.0) && self.vertex_roundtrip_error <= 1e-12
    }
}

/// Largest admissible relative error of the volume and mass inputs.
pub const MAX_RELATIVE_ERROR: f64 = 0.05;

/// K = K₀ / |K₀|^{1/n} and f as in [`NormalizedDensity`], with the checks
/// |K| ≈ 1, ∫_K f ≈ 1 and a·K = 3K₀.
pub fn normalize<R: Rng + ?Sized>(k0: &VPolytope, f0: &GaussianMixture, rng: &mut R, mc_trials: usize) -> Result<Normalization> {
    let k0_volume = volume_estimate(k0, &mut stream(fork_seed(rng), stage::VOLUME), mc_trials)?;
    let mass = measure_3k0(k0, f0, &mut stream(fork_seed(rng), stage::MASS), mc_trials)?;
    normalize_with(k0, f0, k0_volume, mass, rng, mc_trials)
}

/// Mass of f₀ inside 3K₀.
pub fn measure_3k0<R: Rng + ?Sized>(k0: &VPolytope, f0: &GaussianMixture, rng: &mut R, trials: usize) -> Result<MassEstimate> {
    try_mass_in_set(f0, |x| k0.contains(x, 3.0), rng, trials)
}

fn normalize_with<R: Rng + ?Sized>(
    k0: &VPolytope,
    f0: &GaussianMixture,
    k0_volume: VolumeEstimate,
    mass_3k0: MassEstimate,
    rng: &mut R,
    mc_trials: usize,
) -> Result<Normalization> {
    let n = k0.ambient_dim();
    let rel_vol = k0_volume.std_error / k0_volume.estimate;
    if rel_vol > MAX_RELATIVE_ERROR {
        return Err(Error::Contract {
            stage: "volume",
            message: format!("relative error {rel_vol:.3} above {MAX_RELATIVE_ERROR}; raise the trial count"),
        });
    }
    if mass_3k0.estimate < 0.75 - 3.0 * mass_3k0.std_error {
        return Err(Error::Contract {
            stage: "measure",
            message: format!(
                "∫_(3K0) f0 = {:.4} ± {:.4} is below 3/4 - 3σ",
                mass_3k0.estimate, mass_3k0.std_error
            ),
        });
    }
    let root = k0_volume.estimate.powf(1.0 / n as f64);
    let k = k0.scaled(1.0 / root)?;
    let scale = 3.0 * root;
    let density = NormalizedDensity { mixture: f0.clone(), scale, normalizer: mass_3k0.estimate };

    let vertex_roundtrip_error = k
        .vertices()
        .zip(k0.vertices())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (scale * x - 3.0 * y).abs()))
        .fold(0.0_f64, f64::max)
        / (3.0 * k0.circumradius());

    let kv = volume_estimate(&k, &mut stream(fork_seed(rng), stage::NORMALIZE), mc_trials)?;
    let k_volume = RatioEstimate {
        estimate: kv.estimate,
        std_error: kv.estimate * ((kv.std_error / kv.estimate).powi(2) + rel_vol.powi(2)).sqrt(),
    };
    // aK coincides with 3K₀ up to rounding; membership is tested on aK itself
    let ak = k.scaled(scale)?;
    let mass_ak = try_mass_in_set(f0, |x| ak.contains(x, 1.0), &mut stream(fork_seed(rng), stage::NORMALIZE + 100), mc_trials)?;
    let ratio = mass_ak.estimate / mass_3k0.estimate;
    let rel_mass = ((mass_ak.std_error / mass_ak.estimate.max(1e-300)).powi(2)
        + (mass_3k0.std_error / mass_3k0.estimate).powi(2))
    .sqrt();
    let integral_of_f = RatioEstimate { estimate: ratio, std_error: ratio * rel_mass };

    Ok(Normalization {
        k,
        density,
        k0_volume,
        mass_3k0,
        checks: NormalizationChecks { k_volume, integral_of_f, vertex_roundtrip_error },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSearch {
    pub best: Subspace,
    pub value: f64,
    /// Objective at every accepted step of every restart, plus net members.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

const STEP_START: f64 = 0.3;
const STEP_END: f64 = 1e-3;

/// Random candidates drawn per restart that has no supplied start.
const RANDOM_STARTS: usize = 32;

/// Multi-start hill climbing of F ↦ `objective(F)` over codimension-k
/// subspaces. Every subspace in `starts` is evaluated; restart r begins at
/// the r-th best of them, or at the best of a batch of random subspaces once
/// they run out. Steps rotate the normal frame by exp(S), S skew-symmetric,
/// with ‖S‖_F annealed geometrically from 0.3 to 1e-3, and only improvements
/// are accepted. The value is exact; only the maximizer is heuristic, so the
/// result is a lower bound on the true maximum.
pub fn maximize_over_grassmannian<R, O>(
    n: usize,
    k: usize,
    objective: O,
    restarts: usize,
    steps: usize,
    rng: &mut R,
    starts: &[Subspace],
) -> Result<SectionSearch>
where
    R: Rng + ?Sized,
    O: Fn(&Subspace) -> Result<f64> + Sync,
{
    if restarts == 0 || steps < 2 {
        return Err(domain("search needs at least one restart and two steps"));
    }
    if let Some(f) = starts.iter().find(|f| f.ambient_dim() != n || f.codim() != k) {
        return Err(domain(format!(
            "start of shape ({}, {}) does not match the search shape ({n}, {k})",
            f.ambient_dim(),
            f.codim()
        )));
    }
    let seed = fork_seed(rng);
    let start_values = starts.par_iter().map(&objective).collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| start_values[b].total_cmp(&start_values[a]).then(a.cmp(&b)));
    let mut trace = start_values.clone();
    let mut evaluations = start_values.len();

    let runs = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rr = stream(seed, r as u64);
            let mut local_trace = Vec::new();
            let (mut cur, mut cur_val) = match order.get(r) {
                Some(&i) => (starts[i].clone(), start_values[i]),
                None => {
                    let mut best: Option<(Subspace, f64)> = None;
                    for _ in 0..RANDOM_STARTS {
                        let f = sample_grassmannian(n, k, &mut rr)?;
                        let v = objective(&f)?;
                        local_trace.push(v);
                        if best.as_ref().is_none_or(|(_, b)| v > *b) {
                            best = Some((f, v));
                        }
                    }
                    best.expect("nonempty batch")
                }
            };
            let ratio = STEP_END / STEP_START;
            for t in 0..steps {
                let step = STEP_START * ratio.powf(t as f64 / (steps - 1) as f64);
                let cand = perturb_subspace(&cur, step, &mut rr);
                let v = objective(&cand)?;
                if v > cur_val {
                    cur = cand;
                    cur_val = v;
                    local_trace.push(v);
                }
            }
            Ok((cur, cur_val, local_trace))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(Subspace, f64)> = order.first().map(|&i| (starts[i].clone(), start_values[i]));
    for (f, v, local) in runs {
        evaluations += steps + local.len();
        trace.extend(local);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((f, v));
        }
    }
    let (best, value) = best.expect("at least one restart");
    Ok(SectionSearch { best, value, trace, evaluations })
}

/// Codimension-k subspace containing n-k randomly chosen centers of the
/// mixture (completed at random when they are dependent).
fn subspace_through_centers<R: Rng + ?Sized>(mixture: &GaussianMixture, k: usize, rng: &mut R) -> Result<Subspace> {
    let n = mixture.ambient_dim();
    let picks = rand::seq::index::sample(rng, mixture.len(), (n - k).min(mixture.len()));
    let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(n);
    let push = |mut v: Vec<f64>, tangent: &mut Vec<Vec<f64>>| {
        for _ in 0..2 {
            for t in tangent.iter() {
                let c = dot(&v, t);
                axpy(-c, t, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 {
            v.iter_mut().for_each(|a| *a /= norm);
            tangent.push(v);
            true
        } else {
            false
        }
    };
    for i in picks.iter() {
        push(mixture.center(i).to_vec(), &mut tangent);
    }
    while tangent.len() < n - k {
        push(sample_sphere(n, rng), &mut tangent);
    }
    let mut normals = Vec::with_capacity(k);
    while normals.len() < k {
        if push(sample_sphere(n, rng), &mut tangent) {
            normals.push(tangent.last().expect("just pushed").clone());
        }
    }
    Subspace::from_normals(n, &normals)
}

/// Subspaces spanned by centers evaluated per restart.
const CENTER_STARTS_PER_RESTART: usize = 16;
/// Seed centers grown greedily into subspaces.
const GREEDY_SEEDS: usize = 256;
/// Candidates refined by gradient ascent at the end of the search.
const POLISH_CANDIDATES: usize = 64;
const POLISH_ITERS: usize = 200;

/// Codimension-k subspace spanned by `seed` and then, one at a time, the
/// center closest to the current span, until the span has dimension n-k.
fn greedy_subspace(mixture: &GaussianMixture, seed: usize, k: usize) -> Result<Subspace> {
    let n = mixture.ambient_dim();
    let m = mixture.len();
    // squared distance of every center to the current span
    let mut residual: Vec<f64> = mixture.centers().map(|p| dot(p, p)).collect();
    let norms = residual.clone();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut next = Some(seed);
    while basis.len() < n - k {
        let mut v = match next {
            Some(i) => mixture.center(i).to_vec(),
            None => break,
        };
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                axpy(-c, b, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-9 {
            break;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        for (r, p) in residual.iter_mut().zip(mixture.centers()) {
            *r -= dot(p, &v).powi(2);
        }
        basis.push(v);
        next = (0..m)
            .filter(|&i| residual[i] > 1e-6 * norms[i])
            .min_by(|&a, &b| residual[a].total_cmp(&residual[b]).then(a.cmp(&b)));
    }
    // complete the span with coordinate directions, then take the complement
    let mut normals = Vec::with_capacity(k);
    for axis in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                axpy(-c, b, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            if basis.len() >= n - k {
                normals.push(v.clone());
            }
            basis.push(v);
        }
    }
    Subspace::from_normals(n, &normals)
}

/// Riemannian gradient ascent of F ↦ (1/M) Σ exp(-d(F, p_i)²/2) from `start`
/// with a backtracking step; returns the last improving subspace.
fn polish_section(mixture: &GaussianMixture, start: &Subspace, iters: usize) -> Result<(Subspace, f64)> {
    let (n, k) = (start.ambient_dim(), start.codim());
    let mut cur = start.clone();
    let (mut val, mut grad) = mixture.section_sum_gradient(&cur, 0.5)?;
    let mut step = 0.1;
    for _ in 0..iters {
        // horizontal part G(I - UᵀU): moves the normal space, not its basis
        let frame = cur.frame();
        let mut dir = grad.clone();
        for j in 0..k {
            for l in 0..k {
                let c = dot(&grad[j * n..(j + 1) * n], &frame[l * n..(l + 1) * n]);
                axpy(-c, &frame[l * n..(l + 1) * n], &mut dir[j * n..(j + 1) * n]);
            }
        }
        let norm = dot(&dir, &dir).sqrt();
        if norm < 1e-14 {
            break;
        }
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = frame.iter().zip(&dir).map(|(u, d)| u + step * d / norm).collect();
            if let Ok(f) = Subspace::from_flat_frame(n, k, cand) {
                let (v, g) = mixture.section_sum_gradient(&f, 0.5)?;
                if v > val {
                    (cur, val, grad) = (f, v, g);
                    step *= 2.0;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((cur, val))
}

/// Heaviest section of the normalized density found by multi-start search.
///
/// Candidates are the net members (when given), subspaces through random
/// groups of centers, and subspaces grown greedily from seed centers. The
/// best of them start half of the hill-climbing restarts; the climbs' end
/// points and the best remaining candidates are then refined by gradient
/// ascent, and the best subspace seen anywhere is returned.
pub fn max_section_search<R: Rng + ?Sized>(
    density: &NormalizedDensity,
    k: usize,
    restarts: usize,
    steps: usize,
    rng: &mut R,
    net: Option<&GrassmannNet>,
) -> Result<SectionSearch> {
    let n = density.mixture.ambient_dim();
    if k == 0 || k >= n {
        return Err(domain(format!("k must lie in [1, n-1], got {k}")));
    }
    let mixture = &density.mixture;
    let mut starts: Vec<Subspace> = net.map(|g| g.members.clone()).unwrap_or_default();
    let mut seed_rng = stream(fork_seed(rng), 0);
    for _ in 0..CENTER_STARTS_PER_RESTART * restarts {
        starts.push(subspace_through_centers(mixture, k, &mut seed_rng)?);
    }
    let seeds = rand::seq::index::sample(&mut seed_rng, mixture.len(), GREEDY_SEEDS.min(mixture.len())).into_vec();
    let greedy = seeds.par_iter().map(|&i| greedy_subspace(mixture, i, k)).collect::<Result<Vec<_>>>()?;
    starts.extend(greedy);

    let guided = restarts.div_ceil(2);
    let mut values: Vec<(f64, usize)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, f)| density.section_value(f).map(|v| (v, i)))
        .collect::<Result<_>>()?;
    values.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen: Vec<Subspace> = values.iter().take(guided).map(|&(_, i)| starts[i].clone()).collect();
    let mut search = maximize_over_grassmannian(n, k, |f| density.section_value(f), restarts, steps, rng, &chosen)?;
    let skipped: Vec<f64> = values.iter().skip(guided).map(|&(v, _)| v).collect();
    search.evaluations += skipped.len();
    search.trace.extend(skipped);

    let mut candidates = vec![search.best.clone()];
    candidates.extend(values.iter().take(POLISH_CANDIDATES).map(|&(_, i)| starts[i].clone()));
    let polished = candidates
        .par_iter()
        .map(|f| {
            let (g, _) = polish_section(mixture, f, POLISH_ITERS)?;
            density.section_value(&g).map(|v| (g, v))
        })
        .collect::<Result<Vec<_>>>()?;
    search.evaluations += polished.len() * POLISH_ITERS;
    for (f, v) in polished {
        search.trace.push(v);
        if v > search.value {
            search.best = f;
            search.value = v;
        }
    }
    Ok(search)
}

/// max_section^{-1/k}: the lower bound on d_ovr(K, BP_k^n) implied by the
/// slicing inequality when |K| = 1 and ∫_K f = 1, up to the universal
/// constant c.
pub fn dovr_certificate(max_section_value: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(domain("k must be positive"));
    }
    if !(max_section_value > 0.0 && max_section_value.is_finite()) {
        return Err(domain(format!("max section value must be positive and finite, got {max_section_value}")));
    }
    Ok(max_section_value.powf(-1.0 / k as f64))
}

/// max_section^{1/k} · √(n / (k log n)); bounded above across (n, k) when
/// the construction behaves as the main theorem predicts.
pub fn bound_shape(max_section_value: f64, n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    max_section_value.powf(1.0 / kf) * (nf / (kf * nf.ln())).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsStage {
    pub sup_over_net: f64,
    pub target_threshold: f64,
    pub extension_bound: f64,
    pub extension_target: f64,
    pub delta_certifies_extension: bool,
    pub attempts: usize,
    pub expectation_exact: f64,
    /// max over fresh random subspaces of the empirical average.
    pub fresh_probe_sup: f64,
    pub fresh_probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSection {
    /// ∫_F f for the normalized pair, exponent e^{-d²/2}.
    pub value: f64,
    /// Same subspace under the literal φ(t) = e^{-t²} normalization.
    pub value_phi: f64,
    /// ∫_F f₀ at the maximizer.
    pub f0_section: f64,
    /// (2π)^{-k/2} (1/M) Σ φ(d(F, p_i)) at the maximizer.
    pub f0_section_phi: f64,
    /// 4 (2πn)^{-k/2}
    pub f0_section_phi_bound: f64,
    pub argmax: Subspace,
    pub trace_len: usize,
    pub trace_max: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSummary {
    /// a = |3K₀|^{1/n}
    pub scale_a: f64,
    /// |K₀|^{1/n}
    pub k0_volume_root: f64,
    /// ∫_{3K₀} f₀, the normalizer.
    pub normalizer: f64,
    pub checks: NormalizationChecks,
}

/// Full experimental record of one construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub schema_version: u32,
    pub params: ConstructionParams,
    pub points: Vec<Vec<f64>>,
    pub net: NetSummary,
    pub points_stage: PointsStage,
    pub volume: VolumeEstimate,
    pub gluskin_ratio: f64,
    pub mass_3k0: MassEstimate,
    pub normalization: NormalizationSummary,
    pub max_section: MaxSection,
    /// d_ovr(K, BP_k^n) >= c^{-1} · this value.
    pub dovr_lower_modulo_c: f64,
    pub bound_shape: f64,
    pub wall_times_ms: BTreeMap<String, f64>,
}

impl ConstructionReport {
    /// The normalized density reconstructed from the stored points and
    /// normalization constants.
    pub fn density(&self) -> Result<NormalizedDensity> {
        let c = build_construction(self.params.n, &self.points)?;
        Ok(NormalizedDensity {
            mixture: c.f0,
            scale: self.normalization.scale_a,
            normalizer: self.normalization.normalizer,
        })
    }
}

/// Runs every stage under `params.master_seed`. Each stage draws from its
/// own generator stream, so the report is a deterministic function of the
/// parameters (timings aside).
pub fn run_construction(params: &ConstructionParams) -> Result<ConstructionReport> {
    params.validate()?;
    let (n, k) = (params.n, params.k);
    let nf = n as f64;
    let seed = params.master_seed;
    let mut times = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, times: &mut BTreeMap<String, f64>| {
        times.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let delta = params.resolved_delta();
    let net = build_net(n, k, delta, &mut stream(seed, stage::NET), params.net_probes, params.net_budget)?;
    lap("net", &mut times);

    let good = find_good_points(params, &net, &mut stream(seed, stage::POINTS))?;
    let mut probe_rng = stream(seed, stage::PROBES);
    let mut fresh_sup = 0.0_f64;
    for _ in 0..params.extension_probes {
        let f = sample_grassmannian(n, k, &mut probe_rng)?;
        fresh_sup = fresh_sup.max(empirical_average_phi(&good.points, &f, nf, 1.0)?);
    }
    if fresh_sup > good.extension_bound {
        return Err(Error::Contract {
            stage: "points",
            message: format!(
                "fresh subspace average {fresh_sup:.6} exceeds the Lipschitz extension {:.6}",
                good.extension_bound
            ),
        });
    }
    lap("points", &mut times);

    let construction = build_construction(n, &good.points)?;
    let volume = volume_estimate(&construction.k0, &mut stream(seed, stage::VOLUME), params.mc_trials)?;
    let gluskin = gluskin_ratio(n, construction.k0.vertex_count(), volume.estimate)?;
    lap("volume", &mut times);

    let mass = measure_3k0(&construction.k0, &construction.f0, &mut stream(seed, stage::MASS), params.mc_trials)?;
    lap("measure", &mut times);

    let norm = normalize_with(
        &construction.k0,
        &construction.f0,
        volume,
        mass,
        &mut stream(seed, stage::NORMALIZE),
        params.mc_trials,
    )?;
    if !norm.checks.hold() {
        return Err(Error::Contract {
            stage: "normalize",
            message: format!("normalization checks failed: {:?}", norm.checks),
        });
    }
    lap("normalize", &mut times);

    let search = max_section_search(
        &norm.density,
        k,
        params.search_restarts,
        params.search_steps,
        &mut stream(seed, stage::SEARCH),
        Some(&net),
    )?;
    let f = &search.best;
    let kf = k as f64;
    let trace_max = search.trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_section = MaxSection {
        value: search.value,
        value_phi: norm.density.section_value_phi(f)?,
        f0_section: construction.f0.section_integral(f)?,
        f0_section_phi: (2.0 * PI).powf(-kf / 2.0) * construction.f0.section_sum(f, 1.0)?,
        f0_section_phi_bound: 4.0 * (2.0 * PI * nf).powf(-kf / 2.0),
        argmax: f.clone(),
        trace_len: search.trace.len(),
        trace_max,
        evaluations: search.evaluations,
    };
    lap("search", &mut times);

    Ok(ConstructionReport {
        schema_version: SCHEMA_VERSION,
        params: params.resolved(),
        points: good.points.clone(),
        net: net.summary(),
        points_stage: PointsStage {
            sup_over_net: good.sup_over_net,
            target_threshold: good.net_threshold,
            extension_bound: good.extension_bound,
            extension_target: good.extension_target,
            delta_certifies_extension: good.delta_certifies_extension,
            attempts: good.attempts,
            expectation_exact: good.expectation,
            fresh_probe_sup: fresh_sup,
            fresh_probes: params.extension_probes,
        },
        volume,
        gluskin_ratio: gluskin,
        mass_3k0: mass,
        normalization: NormalizationSummary {
            scale_a: norm.density.scale,
            k0_volume_root: norm.density.scale / 3.0,
            normalizer: norm.density.normalizer,
            checks: norm.checks.clone(),
        },
        dovr_lower_modulo_c: dovr_certificate(search.value, k)?,
        bound_shape: bound_shape(search.value, n, k),
        max_section,
        wall_times_ms: times,
    })
}
