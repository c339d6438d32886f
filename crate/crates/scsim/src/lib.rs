//! Engineering of sphere-coherent motional states in a truncated Fock space.
//!
//! A sphere-coherent state (SCS) is a finite superposition of the lowest
//! `N + 1` Fock levels whose amplitudes follow a deformed binomial law. This
//! crate covers the full workflow around such states:
//!
//! * [`specfun`]: associated Laguerre polynomials, their roots, and the
//!   sphere deformation factor that defines the state family.
//! * [`fockspace`]: truncated mode operators, displacement operators, the
//!   nonlinearity diagonals `f_q`, and the coupled atom-cavity-mirror
//!   Hamiltonians in lab, transformed, and sideband form.
//! * [`scs`]: the states themselves, deformed ladder operators, and the
//!   ladder recurrence that rebuilds a state from coupling data.
//! * [`design`]: the inverse problem, solving for driving-field ratios that
//!   make a chosen SCS the exact kernel of the engineered jump operator.
//! * [`nonclassicality`]: Wigner functions on phase-space grids, negativity
//!   volume, quadrature squeezing, and extrema counting.
//! * [`dynamics`]: damped-oscillator Lindblad evolution, the equivalent
//!   Fokker-Planck propagator, and dissipative relaxation into the
//!   dark state.
//!
//! Conventions used throughout: `hbar = 1`, phase-space point `alpha = x + i p`,
//! vacuum quadrature variance `1/4`, Wigner functions normalized so that
//! `integral W dx dp = 1` (vacuum peak `2/pi`).

// Validation guards are written in the `!(x >= 0.0)` form on purpose:
// unlike `x < 0.0`, the negated comparison also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod dynamics;
pub mod fockspace;
pub mod linalg;
pub mod nonclassicality;
pub mod scs;
pub mod specfun;

mod error;

pub use error::{Error, Result};

/// Real scalar used by the concrete operator and simulation layers.
pub type Real = f64;

/// Complex amplitude type used by the matrix layer.
pub type C64 = num_complex::Complex64;
