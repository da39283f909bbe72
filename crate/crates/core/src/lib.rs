//! Numerical kernels for the focusing energy-critical Schrödinger flow
//! `i u_t + Δu = -|u|²u` on ℝ⁴.
//!
//! The crate provides, bottom-up:
//!
//! - [`geometry`]/[`field`]: radial and 4d-box discretizations, quadrature,
//!   complex fields, snapshot serialization;
//! - [`operators`]: finite-difference Laplacians and gradients (7-point
//!   6th-order node stencils, staggered 6th-order first derivatives), banded
//!   LU solvers;
//! - [`functionals`]: norms, inner products, energy, and the tail-corrected
//!   integrals that make the slowly decaying static bubble representable on a
//!   truncated grid;
//! - [`ground_state`]: the static bubble `W`, its symmetry modes, sharp
//!   Sobolev/energy audits, and the energy-trapping test;
//! - [`symmetry`]: the phase/scaling/translation group action on fields;
//! - [`linearized`]: the linearization `L` around `W`, its unstable eigenpair
//!   `(λ₁, e₊)`, the energy quadratic form `F`, coercivity constants on the
//!   two constrained subspaces, and spectral coordinates;
//! - [`orbit`]: the recursive construction of the heteroclinic approximants
//!   `W_k^a(t) = W + Σ aʲ e^{-jλ₁t} Φ_j` and their PDE residual;
//! - [`evolve`]: split-step time integration (Strang and a 4th-order
//!   composition), near-soliton and free modes, trajectory records, regime
//!   classification;
//! - [`modulation`]: best-fit group parameters along a trajectory and decay-
//!   rate extraction;
//! - [`virial`]: localized virial/Morawetz weights, the monotonicity
//!   functional `M_R`, and the rate decomposition `dM_R/dt = 8δ + F_R`;
//! - [`experiments`]: the scripted experiment drivers behind the CLI.

pub mod error;
pub mod evolve;
pub mod experiments;
pub mod field;
pub mod functionals;
pub mod geometry;
pub mod ground_state;
pub mod io;
pub mod linearized;
pub mod modulation;
pub mod operators;
pub mod orbit;
pub mod symmetry;
pub mod virial;

pub use error::{Error, Result};
pub use field::Field;
pub use geometry::Geometry;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
