//! Numerics for Weisskopf-Wigner decay driven by the energy-localizing
//! stochastic Schrödinger equation.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and an explicit [`RngPolicy`]; file formats,
//! thread pools and the command line live in the `sse-lab` companion crate.
//!
//! Units: ħ = 1, energies in arbitrary user units, time in inverse energy.
//!
//! Module map:
//!
//! * [`brownian`], [`rng`], [`quadrature`] - Wiener paths, seeded streams,
//!   Gauss-Hermite expectations and adaptive Gauss-Kronrod.
//! * [`system`] - decay problem definition and the mass/width matrices.
//! * [`trajectory`] - single-trajectory integrators and pathwise solutions.
//! * [`expectation`] - Lindblad and expectation-value ODEs.
//! * [`ww`] - closed-form line shapes, survival and golden-rule analysis.
//! * [`recipe`] - the `t -> t - σW_t/2` substitution rule.
//! * [`zeno_rabi`] - small-time analysis, Rabi damping, parameter bounds.
//! * [`ensemble`] - trajectory ensembles, tree reduction, oracle comparison.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod brownian;
pub mod ensemble;
mod error;
pub mod expectation;
pub mod fit;
pub mod linalg;
pub mod quadrature;
pub mod recipe;
pub mod rng;
pub mod stats;
pub mod system;
pub mod trajectory;
pub mod ww;
pub mod zeno_rabi;

pub use brownian::{sample_path, BrownianPath};
pub use error::{Error, Flagged, Result, Warning};
pub use rng::RngPolicy;
pub use stats::{Accumulator, EnsembleEstimate};
pub use system::{NoiseParams, SystemSpec, WWParams};

pub use num_complex::Complex64;
