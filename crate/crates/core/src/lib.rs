//! Construction and numerical verification of an origin-symmetric convex body
//! K and an even probability density f on it whose codimension-k sections all
//! carry little mass, together with the d_ovr lower-bound certificate that
//! such a pair implies.
//!
//! Modules, bottom-up:
//!
//! - [`specialfn`]: log-gamma, sphere areas, Gauss-Legendre quadrature and the
//!   exact expectation integral over the sphere.
//! - [`geometry`]: subspaces, the projection metric, uniform sampling and
//!   greedy δ-nets on the Grassmannian.
//! - [`density`]: the symmetric Gaussian mixture, closed-form section
//!   integrals, Monte Carlo mass estimates, bispherical integration.
//! - [`polytope`]: V-polytopes with LP membership and hit-or-miss volume.
//! - [`construction`]: the end-to-end pipeline and its report.

pub mod construction;
pub mod density;
pub mod error;
pub mod geometry;
pub mod polytope;
pub mod rng;
pub mod specialfn;

pub use error::{Error, Result};
