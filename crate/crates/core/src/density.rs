//! The symmetric Gaussian mixture f₀(x) = (1/M) Σ γ_n(x - p_i), its exact
//! section integrals, and Monte Carlo mass estimates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};
use crate::geometry::{axpy, dot, sample_sphere, Subspace};
use crate::rng::{chunk_sizes, fork_seed, stream, MC_CHUNKS};
use crate::specialfn::{ln_sphere_surface, QuadratureRule};

const SYMMETRY_TOL: f64 = 1e-12;

/// Equal-weight mixture of standard Gaussians centred on a set closed under
/// negation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    ambient_dim: usize,
    centers: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(ambient_dim: usize, centers: &[Vec<f64>]) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(domain("ambient dimension must be positive"));
        }
        let m = centers.len();
        if m < 2 || m % 2 != 0 {
            return Err(domain(format!("mixture needs an even number M >= 2 of centers, got {m}")));
        }
        let mut flat = Vec::with_capacity(m * ambient_dim);
        for c in centers {
            check_dim(ambient_dim, c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(domain("centers must be finite"));
            }
            flat.extend_from_slice(c);
        }
        if !closed_under_negation(&flat, ambient_dim) {
            return Err(domain("center set is not closed under negation"));
        }
        Ok(Self { ambient_dim, centers: flat })
    }

    /// Mixture with centers {±p : p in `points`}.
    pub fn symmetric(ambient_dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let centers: Vec<Vec<f64>> = points
            .iter()
            .flat_map(|p| [p.clone(), p.iter().map(|v| -v).collect()])
            .collect();
        Self::new(ambient_dim, &centers)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.ambient_dim)
    }

    /// Copy with every center negated (the same mixture, reordered).
    pub fn negated(&self) -> Self {
        Self { ambient_dim: self.ambient_dim, centers: self.centers.iter().map(|v| -v).collect() }
    }

    /// Density at `x`, evaluated with log-sum-exp.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.ambient_dim, x.len())?;
        let mut exps: Vec<f64> = self.centers().map(|p| -0.5 * sq_dist(x, p)).collect();
        // summing in sorted order makes f(x) == f(-x) bit-for-bit
        exps.sort_by(f64::total_cmp);
        let top = exps.last().copied().unwrap_or(f64::NEG_INFINITY);
        let sum: f64 = exps.iter().map(|e| (e - top).exp()).sum();
        let ln_norm = -(self.ambient_dim as f64) / 2.0 * (2.0 * PI).ln() - (self.len() as f64).ln();
        Ok((top + sum.ln() + ln_norm).exp())
    }

    /// (1/M) Σ exp(-β d(F, p_i)²).
    pub fn section_sum(&self, f: &Subspace, beta: f64) -> Result<f64> {
        check_dim(self.ambient_dim, f.ambient_dim())?;
        let total: f64 = self.centers().map(|p| (-beta * f.distance_sq_unchecked(p)).exp()).sum();
        Ok(total / self.len() as f64)
    }

    /// [`section_sum`](Self::section_sum) and its gradient with respect to
    /// the row-major normal frame of F (k×n entries).
    pub fn section_sum_gradient(&self, f: &Subspace, beta: f64) -> Result<(f64, Vec<f64>)> {
        check_dim(self.ambient_dim, f.ambient_dim())?;
        let (n, k) = (self.ambient_dim, f.codim());
        let frame = f.frame();
        let mut grad = vec![0.0; k * n];
        let mut proj = vec![0.0; k];
        let mut total = 0.0;
        for p in self.centers() {
            let mut d2 = 0.0;
            for (j, c) in proj.iter_mut().enumerate() {
                *c = dot(&frame[j * n..(j + 1) * n], p);
                d2 += *c * *c;
            }
            let w = (-beta * d2).exp();
            total += w;
            for (j, c) in proj.iter().enumerate() {
                axpy(-2.0 * beta * w * c, p, &mut grad[j * n..(j + 1) * n]);
            }
        }
        let m = self.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        Ok((total / m, grad))
    }

    /// Exact integral of the mixture over F with respect to (n-k)-dimensional
    /// Lebesgue measure: (2π)^{-k/2} (1/M) Σ exp(-d(F, p_i)²/2).
    pub fn section_integral(&self, f: &Subspace) -> Result<f64> {
        let k = f.codim() as f64;
        Ok((2.0 * PI).powf(-k / 2.0) * self.section_sum(f, 0.5)?)
    }

    pub fn to_record(&self) -> MixtureRecord {
        MixtureRecord { ambient_dim: self.ambient_dim, centers: self.centers().map(<[f64]>::to_vec).collect() }
    }
}

/// Free-function form of [`GaussianMixture::eval`].
pub fn density_eval(f: &GaussianMixture, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

/// Free-function form of [`GaussianMixture::section_integral`].
pub fn section_integral(f: &GaussianMixture, subspace: &Subspace) -> Result<f64> {
    f.section_integral(subspace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub ambient_dim: usize,
    pub centers: Vec<Vec<f64>>,
}

impl Serialize for GaussianMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MixtureRecord::deserialize(d)?;
        GaussianMixture::new(r.ambient_dim, &r.centers).map_err(serde::de::Error::custom)
    }
}

/// Checks that a row-major point set equals its own negation as a multiset,
/// up to SYMMETRY_TOL.
pub(crate) fn closed_under_negation(flat: &[f64], n: usize) -> bool {
    let rows: Vec<&[f64]> = flat.chunks_exact(n).collect();
    let neg: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let mut a: Vec<&[f64]> = rows.clone();
    let mut b: Vec<&[f64]> = neg.iter().map(Vec::as_slice).collect();
    let lex = |x: &&[f64], y: &&[f64]| {
        x.iter().zip(y.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    a.sort_by(lex);
    b.sort_by(lex);
    a.iter().zip(&b).all(|(x, y)| {
        x.iter().zip(y.iter()).all(|(p, q)| (p - q).abs() <= SYMMETRY_TOL * (1.0 + p.abs()))
    })
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hit-frequency estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub trials: u64,
}

impl MassEstimate {
    pub(crate) fn from_counts(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self { estimate: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), hits, trials }
    }
}

pub const MIN_MASS_TRIALS: usize = 1_000;

/// Mass of the mixture inside the set described by `member`, by sampling the
/// mixture itself: pick a center uniformly, add a standard Gaussian.
pub fn mass_in_set<R, F>(f: &GaussianMixture, member: F, rng: &mut R, trials: usize) -> Result<MassEstimate>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> bool + Sync,
{
    try_mass_in_set(f, |x| Ok(member(x)), rng, trials)
}

/// [`mass_in_set`] for membership oracles that can fail (LP-backed sets).
pub fn try_mass_in_set<R, F>(f: &GaussianMixture, member: F, rng: &mut R, trials: usize) -> Result<MassEstimate>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Result<bool> + Sync,
{
    if trials < MIN_MASS_TRIALS {
        return Err(domain(format!("mass_in_set needs at least {MIN_MASS_TRIALS} trials, got {trials}")));
    }
    let seed = fork_seed(rng);
    let n = f.ambient_dim;
    let m = f.len();
    let counts = chunk_sizes(trials, MC_CHUNKS)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, size)| {
            let mut r = stream(seed, chunk as u64);
            let mut x = vec![0.0; n];
            let mut hits = 0u64;
            for _ in 0..size {
                let i = r.random_range(0..m);
                for (xj, pj) in x.iter_mut().zip(f.center(i)) {
                    *xj = pj + r.sample::<f64, _>(StandardNormal);
                }
                if member(&x)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(MassEstimate::from_counts(counts.iter().sum(), trials as u64))
}

/// Monte Carlo tail P(|g|² >= 4n) for a standard Gaussian g in R^n, against
/// the Chebyshev bound 1/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub trials: u64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.estimate <= self.bound + 3.0 * self.std_error
    }
}

pub const MIN_TAIL_TRIALS: usize = 10_000;

pub fn gaussian_tail_check<R: Rng + ?Sized>(n: usize, rng: &mut R, trials: usize) -> Result<TailCheck> {
    if n == 0 {
        return Err(domain("gaussian_tail_check requires n >= 1"));
    }
    if trials < MIN_TAIL_TRIALS {
        return Err(domain(format!("gaussian_tail_check needs at least {MIN_TAIL_TRIALS} trials")));
    }
    let seed = fork_seed(rng);
    let threshold = 4.0 * n as f64;
    let hits: u64 = chunk_sizes(trials, MC_CHUNKS)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, size)| {
            let mut r = stream(seed, chunk as u64);
            (0..size)
                .filter(|_| (0..n).map(|_| r.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>() >= threshold)
                .count() as u64
        })
        .sum();
    let est = MassEstimate::from_counts(hits, trials as u64);
    Ok(TailCheck { n, estimate: est.estimate, std_error: est.std_error, bound: 0.25, trials: trials as u64 })
}

/// Resolution knobs for [`bispherical_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisphericalOptions {
    /// Gauss-Legendre order of the adaptive α rule.
    pub alpha_order: usize,
    /// Absolute tolerance of the adaptive α rule.
    pub alpha_tol: f64,
    /// Product-quadrature resolution on S^0, S^1, S^2.
    pub sphere_order: usize,
    /// Antithetic Monte Carlo pairs on higher spheres.
    pub mc_pairs: usize,
}

impl Default for BisphericalOptions {
    fn default() -> Self {
        Self { alpha_order: 20, alpha_tol: 1e-12, sphere_order: 8, mc_pairs: 128 }
    }
}

/// ∫_{S^{n-1}} g via the bispherical parametrization
/// v = (cos α · x, sin α · y), x ∈ S^{m-1}, y ∈ S^{k-1}, α ∈ [0, π/2], with
/// Jacobian cos^{m-1}α sin^{k-1}α.
///
/// The α integral is adaptive Gauss-Legendre. Spheres of dimension at most 2
/// (m or k at most 3) use product quadrature; larger ones use antithetic
/// Monte Carlo point sets weighted to their exact surface measure.
pub fn bispherical_integrate<R, G>(
    n: usize,
    m: usize,
    k: usize,
    g: G,
    opts: &BisphericalOptions,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    if m == 0 || k == 0 {
        return Err(domain("bispherical_integrate requires m, k >= 1"));
    }
    if m + k != n {
        return Err(Error::DimensionMismatch { expected: n, got: m + k });
    }
    let rule = QuadratureRule::gauss_legendre(opts.alpha_order)?;
    let xs = sphere_points(m, opts, rng)?;
    let ys = sphere_points(k, opts, rng)?;
    let (pm, pk) = ((m - 1) as i32, (k - 1) as i32);
    let mut v = vec![0.0; n];
    let mut total = 0.0;
    for (x, wx) in &xs {
        for (y, wy) in &ys {
            let inner = rule.integrate_adaptive(0.0, 0.5 * PI, opts.alpha_tol, |alpha| {
                let (s, c) = alpha.sin_cos();
                for (vi, xi) in v[..m].iter_mut().zip(x) {
                    *vi = c * xi;
                }
                for (vi, yi) in v[m..].iter_mut().zip(y) {
                    *vi = s * yi;
                }
                g(&v) * c.powi(pm) * s.powi(pk)
            });
            total += wx * wy * inner;
        }
    }
    Ok(total)
}

/// Weighted point set on S^{d-1} whose weights sum to κ_d.
fn sphere_points<R: Rng + ?Sized>(d: usize, opts: &BisphericalOptions, rng: &mut R) -> Result<Vec<(Vec<f64>, f64)>> {
    let order = opts.sphere_order.max(1);
    Ok(match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let count = 2 * order;
            let w = 2.0 * PI / count as f64;
            (0..count)
                .map(|j| {
                    let phi = 2.0 * PI * j as f64 / count as f64;
                    (vec![phi.cos(), phi.sin()], w)
                })
                .collect()
        }
        3 => {
            // dA = dz dφ on the unit sphere
            let rule = QuadratureRule::gauss_legendre(order)?;
            let count = 2 * order;
            let wphi = 2.0 * PI / count as f64;
            let mut pts = Vec::with_capacity(order * count);
            for (t, wt) in rule.nodes().iter().zip(rule.weights()) {
                let z = 2.0 * t - 1.0;
                let r = (1.0 - z * z).max(0.0).sqrt();
                for j in 0..count {
                    let phi = 2.0 * PI * j as f64 / count as f64;
                    pts.push((vec![r * phi.cos(), r * phi.sin(), z], 2.0 * wt * wphi));
                }
            }
            pts
        }
        _ => {
            let pairs = opts.mc_pairs.max(1);
            let w = ln_sphere_surface(d).exp() / (2 * pairs) as f64;
            let mut pts = Vec::with_capacity(2 * pairs);
            for _ in 0..pairs {
                let p = sample_sphere(d, rng);
                let q: Vec<f64> = p.iter().map(|v| -v).collect();
                pts.push((p, w));
                pts.push((q, w));
            }
            pts
        }
    })
}

/// Importance-sampled Monte Carlo integral of the mixture over F, drawing
/// points of F from the standard Gaussian on F. Returns (estimate, std_error).
/// This route only evaluates the density pointwise.
pub fn section_integral_mc<R: Rng + ?Sized>(
    f: &GaussianMixture,
    subspace: &Subspace,
    rng: &mut R,
    draws: usize,
) -> Result<(f64, f64)> {
    check_dim(f.ambient_dim, subspace.ambient_dim())?;
    pointwise_section_mc(|x| f.eval(x), subspace, rng, draws)
}

/// Monte Carlo integral over F of an arbitrary pointwise density, with the
/// standard Gaussian on F as proposal.
pub fn pointwise_section_mc<R, D>(density: D, subspace: &Subspace, rng: &mut R, draws: usize) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    D: Fn(&[f64]) -> Result<f64> + Sync,
{
    if draws < 2 {
        return Err(domain("need at least 2 draws"));
    }
    let basis = subspace.tangent_basis();
    let n = subspace.ambient_dim();
    let dim = basis.len() as f64;
    let seed = fork_seed(rng);
    let sums = chunk_sizes(draws, MC_CHUNKS)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, size)| {
            let mut r = stream(seed, chunk as u64);
            let mut x = vec![0.0; n];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..size {
                x.iter_mut().for_each(|v| *v = 0.0);
                let mut sq = 0.0;
                for b in &basis {
                    let z: f64 = r.sample(StandardNormal);
                    sq += z * z;
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi += z * bi;
                    }
                }
                let proposal = (2.0 * PI).powf(-dim / 2.0) * (-0.5 * sq).exp();
                let w = density(&x)? / proposal;
                s1 += w;
                s2 += w * w;
            }
            Ok((s1, s2))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let t = draws as f64;
    let mean = s1 / t;
    let var = (s2 / t - mean * mean).max(0.0) * t / (t - 1.0);
    Ok((mean, (var / t).sqrt()))
}
