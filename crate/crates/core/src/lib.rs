//! Numerical laboratory for affine coherent states whose fiducial vector may
//! be inadmissible (`0 < β ≤ 1/2`), so that no resolution of unity exists.
//!
//! The crate computes the reproducing kernel `⟨p,q|r,s⟩` several independent
//! ways: closed form, direct quadrature, as the `ν → ∞` limit of the
//! semigroup `e^{-νTA}` on a phase-space grid, and as a self-normalized Monte
//! Carlo average over pinned Brownian bridges carrying the phase
//! `e^{-i∫q dp}`. Closed-form affine dynamics for `𝓗 = RQ + SD` provide
//! oracles for the path integral with a Hamiltonian symbol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod dynamics;
pub mod error;
pub mod fiducial;
pub mod kernel;
pub mod pathmc;
pub mod quad;
pub mod rkhs;
pub mod semigroup;
pub mod stats;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use fiducial::FiducialSpec;
pub use kernel::{KernelValue, PhasePoint};
pub use num_complex::Complex64;
