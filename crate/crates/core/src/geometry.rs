//! Codimension-k subspaces of R^n, their distances and the projection metric,
//! rotation-invariant sampling, and greedy δ-nets on the Grassmannian.
//!
//! A subspace F is stored through an orthonormal frame of F^⊥ (k rows of
//! length n, row-major). Everything downstream consumes d(F, x) = |P_{F^⊥} x|,
//! which only needs that frame.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};

const ORTHO_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    codim: usize,
    frame: Vec<f64>,
}

impl Subspace {
    /// Subspace whose orthogonal complement is spanned by `normals`
    /// (orthonormalized here; they need only be linearly independent).
    pub fn from_normals(ambient_dim: usize, normals: &[Vec<f64>]) -> Result<Self> {
        let codim = normals.len();
        if codim == 0 || codim > ambient_dim {
            return Err(domain(format!("codimension must be in [1, {ambient_dim}], got {codim}")));
        }
        let mut frame = Vec::with_capacity(codim * ambient_dim);
        for v in normals {
            check_dim(ambient_dim, v.len())?;
            frame.extend_from_slice(v);
        }
        Self::from_flat_frame(ambient_dim, codim, frame)
    }

    /// Same as [`Subspace::from_normals`] with a row-major k×n buffer.
    pub fn from_flat_frame(ambient_dim: usize, codim: usize, mut frame: Vec<f64>) -> Result<Self> {
        if ambient_dim == 0 || codim == 0 || codim > ambient_dim {
            return Err(domain(format!(
                "need 1 <= codim <= ambient_dim, got codim={codim}, ambient_dim={ambient_dim}"
            )));
        }
        check_dim(codim * ambient_dim, frame.len())?;
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(domain("frame entries must be finite"));
        }
        // already-orthonormal frames (e.g. deserialized ones) are kept bit-exact
        if gram_residual_flat(&frame, ambient_dim, codim) > ORTHO_TOL * 1e-2 {
            orthonormalize_rows(&mut frame, ambient_dim, codim)?;
        }
        Ok(Self { ambient_dim, codim, frame })
    }

    /// Subspace with normal frame {e_i : i in `axes`}.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Result<Self> {
        let normals = axes
            .iter()
            .map(|&i| {
                if i >= ambient_dim {
                    return Err(domain(format!("axis {i} out of range for R^{ambient_dim}")));
                }
                let mut e = vec![0.0; ambient_dim];
                e[i] = 1.0;
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_normals(ambient_dim, &normals)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    /// The j-th unit normal.
    pub fn normal(&self, j: usize) -> &[f64] {
        &self.frame[j * self.ambient_dim..(j + 1) * self.ambient_dim]
    }

    pub fn normals(&self) -> impl Iterator<Item = &[f64]> {
        self.frame.chunks_exact(self.ambient_dim)
    }

    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.ambient_dim, x.len())?;
        Ok(self.distance_sq_unchecked(x).sqrt())
    }

    /// Squared distance; `x` must have length `ambient_dim`.
    #[inline]
    pub fn distance_sq_unchecked(&self, x: &[f64]) -> f64 {
        self.normals().map(|u| dot(u, x).powi(2)).sum()
    }

    /// Orthonormal basis of F itself (n - k vectors), completing the frame.
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let n = self.ambient_dim;
        let mut basis: Vec<Vec<f64>> = self.normals().map(<[f64]>::to_vec).collect();
        let mut tangent = Vec::with_capacity(n - self.codim);
        for i in 0..n {
            if basis.len() == n {
                break;
            }
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &v);
                    axpy(-c, b, &mut v);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|a| *a /= norm);
                basis.push(v.clone());
                tangent.push(v);
            }
        }
        tangent
    }

    /// Image of the subspace under the orthogonal map `rotation` (n×n).
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.ambient_dim, rotation.nrows())?;
        check_dim(self.ambient_dim, rotation.ncols())?;
        let normals: Vec<Vec<f64>> = self.normals().map(|u| mat_vec(rotation, u)).collect();
        Self::from_normals(self.ambient_dim, &normals)
    }

    /// Largest deviation of the frame's Gram matrix from the identity.
    pub fn gram_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.codim {
            for j in 0..self.codim {
                let g = dot(self.normal(i), self.normal(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn to_record(&self) -> SubspaceRecord {
        SubspaceRecord {
            ambient_dim: self.ambient_dim,
            codim: self.codim,
            frame: self.normals().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_record(record: &SubspaceRecord) -> Result<Self> {
        if record.frame.len() != record.codim {
            return Err(Error::DimensionMismatch { expected: record.codim, got: record.frame.len() });
        }
        Self::from_normals(record.ambient_dim, &record.frame)
    }
}

/// Serialized form of a [`Subspace`]: the rows of its normal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRecord {
    pub ambient_dim: usize,
    pub codim: usize,
    pub frame: Vec<Vec<f64>>,
}

impl Serialize for Subspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = SubspaceRecord::deserialize(d)?;
        Subspace::from_record(&record).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`Subspace::distance`].
pub fn distance_to_subspace(f: &Subspace, x: &[f64]) -> Result<f64> {
    f.distance(x)
}

/// ‖P_1 - P_2‖_op for orthogonal projections onto F_1, F_2: the sine of the
/// largest principal angle. Computed as the top singular value of
/// (I - U_1ᵀU_1) U_2ᵀ, which stays accurate for nearly equal subspaces.
pub fn projection_metric(f1: &Subspace, f2: &Subspace) -> Result<f64> {
    check_same_shape(f1, f2)?;
    let (n, k) = (f1.ambient_dim, f1.codim);
    let mut w = DMatrix::<f64>::zeros(n, k);
    for (j, u2) in f2.normals().enumerate() {
        let mut col = u2.to_vec();
        for u1 in f1.normals() {
            let c = dot(u1, u2);
            axpy(-c, u1, &mut col);
        }
        for (i, v) in col.into_iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    let top = w.singular_values().max();
    Ok(top.clamp(0.0, 1.0))
}

/// sin² of the largest principal angle from the k×k overlap matrix
/// C = U_1 U_2ᵀ: 1 - λ_min(C Cᵀ). Cheaper than [`projection_metric`] and
/// accurate to ~1e-15 in sin², which is what the net comparisons need.
pub(crate) fn projection_sin2_fast(f1: &Subspace, f2: &Subspace) -> f64 {
    let (n, k) = (f1.ambient_dim, f1.codim);
    match k {
        1 => {
            let c = dot(&f1.frame, &f2.frame);
            (1.0 - c * c).max(0.0)
        }
        2 => {
            let (a1, a2) = (&f1.frame[..n], &f1.frame[n..]);
            let (b1, b2) = (&f2.frame[..n], &f2.frame[n..]);
            let (c11, c12, c21, c22) = (dot(a1, b1), dot(a1, b2), dot(a2, b1), dot(a2, b2));
            let g11 = c11 * c11 + c12 * c12;
            let g22 = c21 * c21 + c22 * c22;
            let g12 = c11 * c21 + c12 * c22;
            let half_tr = 0.5 * (g11 + g22);
            let disc = (0.25 * (g11 - g22).powi(2) + g12 * g12).sqrt();
            (1.0 - (half_tr - disc)).clamp(0.0, 1.0)
        }
        _ => {
            let mut c = DMatrix::<f64>::zeros(k, k);
            for (i, u) in f1.normals().enumerate() {
                for (j, v) in f2.normals().enumerate() {
                    c[(i, j)] = dot(u, v);
                }
            }
            let g = &c * c.transpose();
            let lmin = g.symmetric_eigenvalues().min();
            (1.0 - lmin).clamp(0.0, 1.0)
        }
    }
}

fn check_same_shape(f1: &Subspace, f2: &Subspace) -> Result<()> {
    check_dim(f1.ambient_dim, f2.ambient_dim)?;
    check_dim(f1.codim, f2.codim)
}

/// Uniform point on S^{n-1}: a normalized standard Gaussian vector.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "sample_sphere requires n >= 1");
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-300 {
            v.iter_mut().for_each(|a| *a /= norm);
            return v;
        }
    }
}

/// Rotation-invariant random subspace of codimension `k` in R^n.
pub fn sample_grassmannian<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if n == 0 || k == 0 || k > n {
        return Err(domain(format!("sample_grassmannian requires 1 <= k <= n, got n={n}, k={k}")));
    }
    loop {
        let frame: Vec<f64> = (0..n * k).map(|_| rng.sample(StandardNormal)).collect();
        match Subspace::from_flat_frame(n, k, frame) {
            Ok(f) => return Ok(f),
            // rank-deficient Gaussian draw: probability zero, redraw
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Haar-distributed orthogonal n×n matrix (QR of a Gaussian matrix with the
/// sign fix on the diagonal of R).
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rotates the normal frame by exp(S) with S a random skew-symmetric
/// generator of Frobenius norm `step`.
pub fn perturb_subspace<R: Rng + ?Sized>(f: &Subspace, step: f64, rng: &mut R) -> Subspace {
    let n = f.ambient_dim;
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut s = &g - g.transpose();
    let norm = s.norm();
    if norm > 0.0 {
        s *= step / norm;
    }
    let rot = s.exp();
    let normals: Vec<Vec<f64>> = f.normals().map(|u| mat_vec(&rot, u)).collect();
    // exp of a skew matrix is orthogonal, so the frame stays orthonormal up to
    // rounding; from_normals re-orthonormalizes.
    Subspace::from_normals(n, &normals).unwrap_or_else(|_| f.clone())
}

/// Finite set of subspaces with an empirical covering certificate: every one
/// of `coverage_probes` random subspaces was within `coverage_max_gap < delta`
/// of some member in the projection metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannNet {
    pub ambient_dim: usize,
    pub codim: usize,
    pub delta: f64,
    pub margin: f64,
    pub members: Vec<Subspace>,
    pub coverage_probes: usize,
    pub coverage_max_gap: f64,
}

/// Summary of a net without its members, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSummary {
    pub ambient_dim: usize,
    pub codim: usize,
    pub delta: f64,
    pub margin: f64,
    pub size: usize,
    pub coverage_probes: usize,
    pub coverage_max_gap: f64,
}

impl GrassmannNet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn summary(&self) -> NetSummary {
        NetSummary {
            ambient_dim: self.ambient_dim,
            codim: self.codim,
            delta: self.delta,
            margin: self.margin,
            size: self.members.len(),
            coverage_probes: self.coverage_probes,
            coverage_max_gap: self.coverage_max_gap,
        }
    }

    /// Distance from `f` to the nearest member.
    pub fn gap(&self, f: &Subspace) -> f64 {
        self.members
            .iter()
            .map(|m| projection_sin2_fast(m, f))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Packing margin: a candidate joins the net when it is farther than
/// `delta * (1 - NET_MARGIN)` from every member.
pub const NET_MARGIN: f64 = 0.25;
/// Upper limit on net size.
pub const MAX_NET_SIZE: usize = 1 << 16;

/// Greedy randomized packing followed by probe certification.
///
/// Candidates are drawn until `candidate_budget` consecutive ones land within
/// `delta * (1 - margin)` of an existing member; then `probe_count` fresh
/// subspaces are drawn and the worst nearest-member distance is recorded.
/// Fails rather than returning a net whose probes do not certify `delta`.
pub fn build_net<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    delta: f64,
    rng: &mut R,
    probe_count: usize,
    candidate_budget: usize,
) -> Result<GrassmannNet> {
    if !(delta > 0.0 && delta <= std::f64::consts::SQRT_2) {
        return Err(domain(format!("delta must lie in (0, √2], got {delta}")));
    }
    if k == 0 || k > n {
        return Err(domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    if candidate_budget == 0 {
        return Err(domain("candidate_budget must be positive"));
    }
    // any δ-net of G_{n,n-k} has at least about (1/(2δ))^{k(n-k)} members
    let dim = (k * (n - k)) as f64;
    let ln_floor = dim * (0.5 / delta).ln();
    if ln_floor > (MAX_NET_SIZE as f64).ln() {
        return Err(Error::NetConstruction(format!(
            "a delta={delta} net of the {}-dimensional Grassmannian needs more than (1/(2 delta))^{} = e^{ln_floor:.1} \
             members, above the ceiling {MAX_NET_SIZE}; raise delta",
            k * (n - k),
            k * (n - k)
        )));
    }
    let pack = delta * (1.0 - NET_MARGIN);
    let pack_sq = pack * pack;
    let mut members = vec![sample_grassmannian(n, k, rng)?];
    let mut rejections = 0usize;
    while rejections < candidate_budget {
        let cand = sample_grassmannian(n, k, rng)?;
        let covered = members.iter().any(|m| projection_sin2_fast(m, &cand) <= pack_sq);
        if covered {
            rejections += 1;
        } else {
            members.push(cand);
            rejections = 0;
            if members.len() > MAX_NET_SIZE {
                return Err(Error::NetConstruction(format!(
                    "net exceeded {MAX_NET_SIZE} members at n={n}, k={k}, delta={delta}; raise delta"
                )));
            }
        }
    }

    let mut worst_sq = 0.0_f64;
    for _ in 0..probe_count {
        let probe = sample_grassmannian(n, k, rng)?;
        let mut best = f64::INFINITY;
        for m in &members {
            let d = projection_sin2_fast(m, &probe);
            if d < best {
                best = d;
                // cannot raise the running maximum any more
                if best <= worst_sq {
                    break;
                }
            }
        }
        worst_sq = worst_sq.max(best);
    }
    let coverage_max_gap = worst_sq.sqrt();
    if coverage_max_gap >= delta {
        return Err(Error::NetConstruction(format!(
            "probe gap {coverage_max_gap:.4} >= delta {delta} with {} members; raise candidate_budget",
            members.len()
        )));
    }
    Ok(GrassmannNet {
        ambient_dim: n,
        codim: k,
        delta,
        margin: NET_MARGIN,
        members,
        coverage_probes: probe_count,
        coverage_max_gap,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Modified Gram-Schmidt, repeated once more whenever the Gram residual
/// exceeds ORTHO_TOL.
fn orthonormalize_rows(frame: &mut [f64], n: usize, k: usize) -> Result<()> {
    for _pass in 0..3 {
        for i in 0..k {
            let (done, rest) = frame.split_at_mut(i * n);
            let row = &mut rest[..n];
            let before = dot(row, row).sqrt();
            for prev in done.chunks_exact(n) {
                let c = dot(prev, row);
                axpy(-c, prev, row);
            }
            let norm = dot(row, row).sqrt();
            if norm <= RANK_TOL * before.max(1.0) || norm == 0.0 {
                return Err(domain("normal vectors are linearly dependent"));
            }
            row.iter_mut().for_each(|a| *a /= norm);
        }
        let residual = gram_residual_flat(frame, n, k);
        if residual <= ORTHO_TOL * 1e-2 {
            return Ok(());
        }
    }
    if gram_residual_flat(frame, n, k) <= ORTHO_TOL {
        Ok(())
    } else {
        Err(domain("orthonormalization did not converge"))
    }
}

fn gram_residual_flat(frame: &[f64], n: usize, k: usize) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..=i {
            let g = dot(&frame[i * n..(i + 1) * n], &frame[j * n..(j + 1) * n]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
