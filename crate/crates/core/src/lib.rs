//! Analytic Albanese varieties of singular curves.
//!
//! A singular curve is built from a compact Riemann surface X by gluing a
//! finite point set S along a partition and prescribing multiplicities
//! (a modulus). This crate computes the numerical invariants of the
//! resulting curve, assembles the period matrix of its analytic Albanese
//! variety both in closed form and by direct contour integration (genus-1
//! base), classifies the quotient group into ℂ^p × (ℂ*)^q × (toroidal),
//! decides GL(ℤ)-equivalence of nodal period matrices, decides
//! biholomorphism of nodal genus-2 curves, and verifies the generalized
//! Abel theorem forward on concrete meromorphic functions.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod lattice;
mod linalg;

pub mod abel;
pub mod albanese;
pub mod curve;
pub mod divisor;
pub mod elliptic;
pub mod equivalence;

pub use error::{Error, Result};
