//! Independent diffusions absorbed at the boundary of a bounded planar domain.
//!
//! The crate computes both sides of the rarefaction limit: the spectral series
//! for the survival probability `u(t, x)` on a disk or a rectangle, and Monte
//! Carlo simulation of the particles themselves. When the initial particle
//! count grows like `exp(t * lambda_1 / 2)`, the number of survivors at time
//! `t` is asymptotically Poisson with parameter `a = integral of F d(nu)`,
//! where `F` is the principal-mode projection of the unit initial condition.
//!
//! Everything here is `no_std` + `alloc`. File formats, configuration and
//! thread pools live in the `rarefy` companion crate; parallel fan-out is
//! injected through the [`exec::Executor`] trait.
//!
//! # Conventions
//!
//! Eigenvalues are those of the generator `A = sigma_x^2 d_xx + sigma_y^2 d_yy`
//! with Dirichlet conditions, and every decay factor is `exp(-t * lambda / 2)`.
//! A path therefore moves with Gaussian increments of variance `sigma^2 dt`
//! per axis. A non-diagonal constant diffusion matrix reduces to this case by
//! a linear change of coordinates, which also maps the domain; only the two
//! canonical domains are provided.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod domain;
pub mod error;
pub mod exec;
pub mod measure;
pub mod quadrature;
pub mod rarefaction;
pub mod rng;
pub mod sde;
pub mod special;
pub mod spectral;
pub mod stats;

pub use domain::{Disk, Domain, Point, Rectangle, RingPartition};
pub use error::{Error, Result};

#[inline]
pub(crate) fn sq(x: f64) -> f64 {
    x * x
}
