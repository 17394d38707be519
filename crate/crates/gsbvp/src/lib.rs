//! Numerical analysis of oblique boundary-value problems
//! for Laplace-type operators: strong-ellipticity classification of the
//! boundary symbol, the half-order boundary heat-kernel coefficient by four
//! independent methods, the leading-order parametrix diagonal and its
//! borderline singularity, an independent finite-difference PDE oracle, and
//! induced boundary problems of linearized gauge theories.
//!
//! All fibre data lives in an orthonormal frame, so "Hermitian" and
//! "anti-Hermitian" mean plain conjugate-transpose (anti)symmetry throughout.

pub mod bhalf;
pub mod boundary;
pub mod ellipticity;
mod error;
pub mod gauge;
pub mod oracle;
pub mod profile;
pub mod quad;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
