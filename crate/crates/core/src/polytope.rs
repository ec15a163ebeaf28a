//! Origin-symmetric polytopes in V-representation.
//!
//! Membership is decided through the gauge LP
//!
//! ```text
//! ‖x‖_P = min Σ λ_j   s.t.  Σ λ_j v_j = x,  λ ≥ 0
//! ```
//!
//! For a vertex set closed under negation, 0 ∈ conv(V), so x ∈ s·conv(V)
//! exactly when ‖x‖_P ≤ s. One LP therefore answers membership at every
//! scale, which also makes `contains` monotone in the scale by construction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{closed_under_negation, MassEstimate};
use crate::error::{check_dim, domain, Error, Result};
use crate::geometry::{dot, sample_sphere};
use crate::rng::{chunk_sizes, fork_seed, stream, MC_CHUNKS};
use crate::specialfn::ln_sphere_surface;

/// Relative tolerance on the gauge comparison; points this close to the
/// boundary count as inside.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    ambient_dim: usize,
    /// One representative of each ± pair, row-major.
    half: Vec<f64>,
    /// Full vertex list as supplied.
    vertices: Vec<f64>,
    circumradius: f64,
    /// Per-axis length r_i such that ±r_i e_i are vertices, when every axis has one.
    axis_radii: Option<Vec<f64>>,
    /// Index in `half` of the longest axis vertex per coordinate.
    axis_half: Option<Vec<usize>>,
}

impl VPolytope {
    /// Builds the polytope; `circumradius` defaults to the largest vertex norm
    /// and must not be smaller than it.
    pub fn new(ambient_dim: usize, vertices: &[Vec<f64>], circumradius: Option<f64>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(domain("ambient dimension must be positive"));
        }
        if vertices.len() < 2 * ambient_dim {
            return Err(domain(format!(
                "need at least 2n = {} vertices, got {}",
                2 * ambient_dim,
                vertices.len()
            )));
        }
        let mut flat = Vec::with_capacity(vertices.len() * ambient_dim);
        for v in vertices {
            check_dim(ambient_dim, v.len())?;
            if v.iter().any(|a| !a.is_finite()) {
                return Err(domain("vertices must be finite"));
            }
            flat.extend_from_slice(v);
        }
        if !closed_under_negation(&flat, ambient_dim) {
            return Err(domain("vertex set is not origin-symmetric"));
        }
        let max_norm = flat.chunks_exact(ambient_dim).map(|v| dot(v, v).sqrt()).fold(0.0, f64::max);
        let circumradius = match circumradius {
            Some(r) if r >= max_norm * (1.0 - 1e-12) && r.is_finite() => r.max(max_norm),
            Some(r) => return Err(domain(format!("circumradius {r} is below max vertex norm {max_norm}"))),
            None => max_norm,
        };
        if circumradius <= 0.0 {
            return Err(domain("polytope is the origin"));
        }
        let half = half_representatives(&flat, ambient_dim);
        let axis_radii = axis_radii(&flat, ambient_dim);
        let axis_half = axis_half(&half, ambient_dim);
        Ok(Self { ambient_dim, half, vertices: flat, circumradius, axis_radii, axis_half })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.ambient_dim
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.vertices.chunks_exact(self.ambient_dim)
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// All vertices (and the circumradius) multiplied by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(domain(format!("scale must be positive, got {t}")));
        }
        let vs: Vec<Vec<f64>> = self.vertices().map(|v| v.iter().map(|a| a * t).collect()).collect();
        Self::new(self.ambient_dim, &vs, Some(self.circumradius * t))
    }

    /// Gauge ‖x‖_P; `f64::INFINITY` when x is outside the linear span of the
    /// vertices.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.ambient_dim, x.len())?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        match GaugeLp::new(self, x).solve(None)? {
            LpOutcome::Optimal(v) => Ok(v),
            LpOutcome::Infeasible => Ok(f64::INFINITY),
            LpOutcome::Decided(_) => unreachable!("no threshold was given"),
        }
    }

    /// Whether x ∈ scale·P.
    pub fn contains(&self, x: &[f64], scale: f64) -> Result<bool> {
        check_dim(self.ambient_dim, x.len())?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("scale must be positive, got {scale}")));
        }
        let threshold = scale * (1.0 + MEMBERSHIP_TOL);
        let norm = dot(x, x).sqrt();
        if norm == 0.0 {
            return Ok(true);
        }
        if norm > threshold * self.circumradius {
            return Ok(false);
        }
        // the cross-polytope conv(±r_i e_i) is inside P
        if let Some(r) = &self.axis_radii {
            if x.iter().zip(r).map(|(a, ri)| a.abs() / ri).sum::<f64>() <= scale {
                return Ok(true);
            }
        }
        match GaugeLp::new(self, x).solve(Some(threshold))? {
            LpOutcome::Decided(inside) => Ok(inside),
            LpOutcome::Optimal(v) => Ok(v <= threshold),
            LpOutcome::Infeasible => Ok(false),
        }
    }

    pub fn to_record(&self) -> PolytopeRecord {
        PolytopeRecord {
            ambient_dim: self.ambient_dim,
            circumradius: self.circumradius,
            vertices: self.vertices().map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeRecord {
    pub ambient_dim: usize,
    pub circumradius: f64,
    pub vertices: Vec<Vec<f64>>,
}

impl Serialize for VPolytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for VPolytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolytopeRecord::deserialize(d)?;
        VPolytope::new(r.ambient_dim, &r.vertices, Some(r.circumradius)).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`VPolytope::contains`].
pub fn contains(p: &VPolytope, x: &[f64], scale: f64) -> Result<bool> {
    p.contains(x, scale)
}

fn half_representatives(flat: &[f64], n: usize) -> Vec<f64> {
    // keep v when its first nonzero coordinate is positive; exact duplicates
    // of a kept vertex are harmless for the LP
    let mut half = Vec::with_capacity(flat.len() / 2);
    for v in flat.chunks_exact(n) {
        if let Some(&lead) = v.iter().find(|a| **a != 0.0) {
            if lead > 0.0 {
                half.extend_from_slice(v);
            }
        }
    }
    half
}

fn axis_radii(flat: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut radii = vec![0.0_f64; n];
    for v in flat.chunks_exact(n) {
        let mut nz = v.iter().enumerate().filter(|(_, a)| **a != 0.0);
        if let (Some((i, a)), None) = (nz.next(), nz.next()) {
            radii[i] = radii[i].max(a.abs());
        }
    }
    radii.iter().all(|&r| r > 0.0).then_some(radii)
}

fn axis_half(half: &[f64], n: usize) -> Option<Vec<usize>> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    for (j, v) in half.chunks_exact(n).enumerate() {
        let mut nz = v.iter().enumerate().filter(|(_, a)| **a != 0.0);
        if let (Some((i, a)), None) = (nz.next(), nz.next()) {
            if best[i].is_none_or(|(_, r)| a.abs() > r) {
                best[i] = Some((j, a.abs()));
            }
        }
    }
    best.into_iter().map(|b| b.map(|(j, _)| j)).collect()
}

enum LpOutcome {
    Optimal(f64),
    Infeasible,
    /// Early exit against a threshold: true when the gauge is known to be
    /// at most the threshold.
    Decided(bool),
}

/// Column identifier in the gauge LP: a signed half-vertex or an artificial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Col {
    Plus(usize),
    Minus(usize),
    Artificial(usize),
}

const COST_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 32;
const POOL_SEED_PER_DIM: usize = 4;

/// Dense revised simplex for the gauge LP. The basis is n×n with an explicit
/// inverse updated by elementary row operations and refreshed periodically.
/// Pricing is Dantzig's rule with lowest-index tie-breaking, switching to
/// Bland's rule after a run of degenerate pivots, so the pivot sequence is a
/// deterministic function of the input.
struct GaugeLp<'a> {
    p: &'a VPolytope,
    x: Vec<f64>,
    n: usize,
    h: usize,
    basis: Vec<Col>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    art_sign: Vec<f64>,
    /// Half-vertex indices priced on ordinary iterations; every vertex is
    /// priced only to confirm optimality or to grow the pool.
    pool: Vec<usize>,
}

impl<'a> GaugeLp<'a> {
    fn new(p: &'a VPolytope, x: &[f64]) -> Self {
        let n = p.ambient_dim;
        let h = p.half.len() / n;
        let art_sign: Vec<f64> = x.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        Self { p, x: x.to_vec(), n, h, basis: Vec::new(), binv: Vec::new(), xb: Vec::new(), art_sign, pool: Vec::new() }
    }

    /// Basis columns plus the half-vertices most aligned with ±x.
    fn seed_pool(&mut self) {
        let n = self.n;
        let size = POOL_SEED_PER_DIM * n;
        if self.h <= size + n {
            self.pool = (0..self.h).collect();
            return;
        }
        let mut scored: Vec<(f64, usize)> =
            (0..self.h).map(|j| (-dot(&self.x, &self.p.half[j * n..(j + 1) * n]).abs(), j)).collect();
        scored.select_nth_unstable_by(size, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut pool: Vec<usize> = scored[..size].iter().map(|&(_, j)| j).collect();
        for c in &self.basis {
            if let Col::Plus(j) | Col::Minus(j) = *c {
                pool.push(j);
            }
        }
        pool.sort_unstable();
        pool.dedup();
        self.pool = pool;
    }

    /// Most negative reduced cost among `cols` (first one under Bland) and
    /// the largest |yᵀv| seen.
    fn price(&self, y: &[f64], struct_cost: f64, bland: bool, cols: impl Iterator<Item = usize>) -> (Option<(Col, f64)>, f64) {
        let n = self.n;
        let mut entering: Option<(Col, f64)> = None;
        let mut max_abs = 0.0_f64;
        for j in cols {
            let s = dot(y, &self.p.half[j * n..(j + 1) * n]);
            max_abs = max_abs.max(s.abs());
            for (col, rc) in [(Col::Plus(j), struct_cost - s), (Col::Minus(j), struct_cost + s)] {
                if rc < -COST_TOL && (entering.is_none() || (!bland && entering.is_some_and(|(_, b)| rc < b))) {
                    entering = Some((col, rc));
                }
            }
            if bland && entering.is_some() {
                break;
            }
        }
        (entering, max_abs)
    }

    /// Full pricing pass that also adds the best improving columns to the pool.
    fn price_all(&mut self, y: &[f64], struct_cost: f64) -> (Option<(Col, f64)>, f64) {
        let n = self.n;
        let mut max_abs = 0.0_f64;
        let mut improving: Vec<(f64, usize)> = Vec::new();
        for j in 0..self.h {
            let s = dot(y, &self.p.half[j * n..(j + 1) * n]);
            max_abs = max_abs.max(s.abs());
            let rc = struct_cost - s.abs();
            if rc < -COST_TOL {
                improving.push((rc, j));
            }
        }
        if improving.is_empty() {
            return (None, max_abs);
        }
        let grow = n.min(improving.len());
        if improving.len() > grow {
            improving.select_nth_unstable_by(grow, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        improving.truncate(grow);
        improving.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &improving {
            if let Err(at) = self.pool.binary_search(&j) {
                self.pool.insert(at, j);
            }
        }
        let (rc, j) = improving[0];
        let s = dot(y, &self.p.half[j * n..(j + 1) * n]);
        let col = if s > 0.0 { Col::Plus(j) } else { Col::Minus(j) };
        (Some((col, rc)), max_abs)
    }

    fn column(&self, c: Col) -> Vec<f64> {
        let n = self.n;
        match c {
            Col::Plus(j) => self.p.half[j * n..(j + 1) * n].to_vec(),
            Col::Minus(j) => self.p.half[j * n..(j + 1) * n].iter().map(|a| -a).collect(),
            Col::Artificial(i) => {
                let mut e = vec![0.0; n];
                e[i] = self.art_sign[i];
                e
            }
        }
    }

    fn cost(c: Col, phase_one: bool) -> f64 {
        match (c, phase_one) {
            (Col::Artificial(_), true) => 1.0,
            (Col::Artificial(_), false) => 0.0,
            (_, true) => 0.0,
            (_, false) => 1.0,
        }
    }

    /// Starting basis: the axis vertices when present (already feasible),
    /// otherwise artificials.
    fn crash(&mut self) -> bool {
        let n = self.n;
        self.basis = match &self.p.axis_half {
            Some(idx) => idx
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let v_i = self.p.half[j * n + i];
                    if (v_i > 0.0) == (self.x[i] >= 0.0) { Col::Plus(j) } else { Col::Minus(j) }
                })
                .collect(),
            None => (0..n).map(Col::Artificial).collect(),
        };
        self.p.axis_half.is_some()
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let mut b = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (col_idx, &c) in self.basis.iter().enumerate() {
            for (i, v) in self.column(c).into_iter().enumerate() {
                b[(i, col_idx)] = v;
            }
        }
        let inv = b.try_inverse().ok_or_else(|| Error::Solver("singular basis".into()))?;
        self.binv = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect();
        self.xb = (0..n).map(|i| dot(&self.binv[i * n..(i + 1) * n], &self.x)).collect();
        for v in &mut self.xb {
            if *v < 0.0 && *v > -1e-9 {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn solve(mut self, threshold: Option<f64>) -> Result<LpOutcome> {
        let feasible_start = self.crash();
        self.seed_pool();
        self.refactor()?;
        if !feasible_start {
            let infeasibility = self.run_phase(true, None)?;
            let scale = 1.0 + self.x.iter().map(|a| a.abs()).sum::<f64>();
            if let PhaseEnd::Optimal(obj) = infeasibility {
                if obj > MEMBERSHIP_TOL * scale {
                    return Ok(LpOutcome::Infeasible);
                }
            }
            self.drive_out_artificials()?;
        }
        match self.run_phase(false, threshold)? {
            PhaseEnd::Optimal(v) => Ok(LpOutcome::Optimal(v)),
            PhaseEnd::Decided(b) => Ok(LpOutcome::Decided(b)),
        }
    }

    /// Pivots zero-level artificials out of the basis where some structural
    /// column can replace them; rows with no such column are redundant.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let n = self.n;
        for r in 0..n {
            if !matches!(self.basis[r], Col::Artificial(_)) {
                continue;
            }
            let row = self.binv[r * n..(r + 1) * n].to_vec();
            let mut pick = None;
            for j in 0..self.h {
                let a = dot(&row, &self.p.half[j * n..(j + 1) * n]);
                if a.abs() > 1e-9 {
                    pick = Some(Col::Plus(j));
                    break;
                }
            }
            if let Some(c) = pick {
                let d = self.direction(c);
                self.pivot(r, c, &d);
            }
        }
        self.refactor()
    }

    fn direction(&self, c: Col) -> Vec<f64> {
        let n = self.n;
        let a = self.column(c);
        (0..n).map(|i| dot(&self.binv[i * n..(i + 1) * n], &a)).collect()
    }

    fn pivot(&mut self, r: usize, entering: Col, d: &[f64]) {
        let n = self.n;
        let dr = d[r];
        let theta = self.xb[r] / dr;
        for i in 0..n {
            if i != r {
                self.xb[i] -= theta * d[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-12 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        let pivot_row: Vec<f64> = self.binv[r * n..(r + 1) * n].iter().map(|v| v / dr).collect();
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = d[i];
            if f != 0.0 {
                for j in 0..n {
                    self.binv[i * n + j] -= f * pivot_row[j];
                }
            }
        }
        self.binv[r * n..(r + 1) * n].copy_from_slice(&pivot_row);
        self.basis[r] = entering;
    }

    fn run_phase(&mut self, phase_one: bool, threshold: Option<f64>) -> Result<PhaseEnd> {
        let n = self.n;
        let max_iter = 2_000 + 50 * n + self.h / 4;
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        for _ in 0..max_iter {
            let cb: Vec<f64> = self.basis.iter().map(|&c| Self::cost(c, phase_one)).collect();
            let objective: f64 = cb.iter().zip(&self.xb).map(|(c, v)| c * v).sum();
            if let (Some(t), false) = (threshold, phase_one) {
                if objective <= t {
                    return Ok(PhaseEnd::Decided(true));
                }
            }
            // y = c_Bᵀ B⁻¹
            let mut y = vec![0.0; n];
            for (i, &c) in cb.iter().enumerate() {
                if c != 0.0 {
                    for j in 0..n {
                        y[j] += c * self.binv[i * n + j];
                    }
                }
            }
            let bland = degenerate_run > 50;
            let struct_cost = if phase_one { 0.0 } else { 1.0 };
            let (mut entering, mut full_max) = if bland {
                // the scan stops at the first improving column, so max_abs
                // covers every vertex only when none was found
                let (e, m) = self.price(&y, struct_cost, true, 0..self.h);
                (e, e.is_none().then_some(m))
            } else {
                (self.price(&y, struct_cost, false, self.pool.iter().copied()).0, None)
            };
            if entering.is_none() && full_max.is_none() {
                let (e, m) = self.price_all(&y, struct_cost);
                entering = e;
                full_max = Some(m);
            }
            if let (Some(t), false, Some(max_abs)) = (threshold, phase_one, full_max) {
                // y / max|yᵀv| is dual feasible, so gauge >= objective / max_abs
                if max_abs > 0.0 && objective / max_abs > t {
                    return Ok(PhaseEnd::Decided(false));
                }
            }
            let Some((col, _)) = entering else {
                return Ok(PhaseEnd::Optimal(objective));
            };
            let d = self.direction(col);
            let dmax = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..n {
                let is_art = matches!(self.basis[i], Col::Artificial(_));
                let ratio = if !phase_one && is_art && d[i].abs() > PIVOT_TOL * dmax {
                    Some(0.0)
                } else if d[i] > PIVOT_TOL * dmax {
                    Some(self.xb[i].max(0.0) / d[i])
                } else {
                    None
                };
                if let Some(rt) = ratio {
                    let take = match leave {
                        None => true,
                        Some((li, best)) => {
                            rt < best - 1e-14 || (rt <= best + 1e-14 && self.basis[i] < self.basis[li])
                        }
                    };
                    if take {
                        leave = Some((i, rt));
                    }
                }
            }
            let Some((r, step)) = leave else {
                return Err(Error::Solver("gauge LP reported unbounded".into()));
            };
            degenerate_run = if step <= 1e-14 { degenerate_run + 1 } else { 0 };
            self.pivot(r, col, &d);
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
        Err(Error::Solver(format!("gauge LP hit the iteration limit {max_iter}")))
    }
}

enum PhaseEnd {
    Optimal(f64),
    Decided(bool),
}

/// One-sided check that r·B_n ⊆ P: tests r·θ for `probes` random directions
/// and stops at the first miss.
pub fn contains_ball_check<R: Rng + ?Sized>(p: &VPolytope, r: f64, probes: usize, rng: &mut R) -> Result<bool> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(domain(format!("radius must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(true);
    }
    for _ in 0..probes {
        let theta = sample_sphere(p.ambient_dim, rng);
        let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
        if !p.contains(&x, 1.0)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub trials: u64,
    pub ball_volume: f64,
}

impl VolumeEstimate {
    pub fn hit_rate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }
}

pub const MIN_VOLUME_TRIALS: usize = 10_000;
pub const HIT_RATE_FLOOR: f64 = 1e-4;
const PREFLIGHT_TRIALS: usize = 2_000;

/// Hit-or-miss volume inside the circumscribed ball of radius R:
/// |P| ≈ (κ_n/n) R^n · hits/trials.
pub fn volume_estimate<R: Rng + ?Sized>(p: &VPolytope, rng: &mut R, trials: usize) -> Result<VolumeEstimate> {
    if trials < MIN_VOLUME_TRIALS {
        return Err(domain(format!("volume_estimate needs at least {MIN_VOLUME_TRIALS} trials, got {trials}")));
    }
    let n = p.ambient_dim;
    let radius = p.circumradius;
    let ball_volume = (ln_sphere_surface(n) - (n as f64).ln() + n as f64 * radius.ln()).exp();

    let preflight = count_ball_hits(p, fork_seed(rng), PREFLIGHT_TRIALS)?;
    if preflight == 0 {
        return Err(Error::Undersampled { hit_rate: 0.0, floor: HIT_RATE_FLOOR });
    }
    let hits = count_ball_hits(p, fork_seed(rng), trials)?;
    let est = MassEstimate::from_counts(hits, trials as u64);
    if est.estimate < HIT_RATE_FLOOR {
        return Err(Error::Undersampled { hit_rate: est.estimate, floor: HIT_RATE_FLOOR });
    }
    Ok(VolumeEstimate {
        estimate: ball_volume * est.estimate,
        std_error: ball_volume * est.std_error,
        hits,
        trials: trials as u64,
        ball_volume,
    })
}

fn count_ball_hits(p: &VPolytope, seed: u64, trials: usize) -> Result<u64> {
    let n = p.ambient_dim;
    let radius = p.circumradius;
    let counts = chunk_sizes(trials, MC_CHUNKS)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, size)| {
            let mut r = stream(seed, chunk as u64);
            let mut hits = 0u64;
            let mut x = vec![0.0; n];
            for _ in 0..size {
                let mut sq = 0.0_f64;
                for v in x.iter_mut() {
                    *v = r.sample(StandardNormal);
                    sq += *v * *v;
                }
                let u: f64 = r.random();
                let rad = radius * u.powf(1.0 / n as f64) / sq.sqrt();
                x.iter_mut().for_each(|v| *v *= rad);
                if p.contains(&x, 1.0)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(counts.iter().sum())
}

/// vol^{1/n} / √(log(m/n)): bounded by a universal constant for polytopes
/// with m vertices inside the unit ball scaled by n, per Gluskin's bound.
pub fn gluskin_ratio(n: usize, m: usize, vol_estimate: f64) -> Result<f64> {
    if n < 2 || m <= n {
        return Err(domain(format!("gluskin_ratio requires m > n >= 2, got n={n}, m={m}")));
    }
    if !(vol_estimate > 0.0 && vol_estimate.is_finite()) {
        return Err(domain("volume must be positive"));
    }
    Ok(vol_estimate.powf(1.0 / n as f64) / ((m as f64) / (n as f64)).ln().sqrt())
}
