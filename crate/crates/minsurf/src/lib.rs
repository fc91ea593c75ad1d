//! Coupled Brownian motion on minimal surfaces given by Weierstrass data.
//!
//! The crate is organized bottom-up:
//! - [`surface`]: Weierstrass pairs, immersion frames, normal, curvature.
//! - [`configuration`]: the adapted frame and canonical angles (θ, φ, ψ)
//!   for a pair of points, plus region classification and shape data.
//! - [`coupling`]: the rate pair (f, g), the optimal O(2) element,
//!   the ε̂ perturbation and the dispersion matrices.
//! - [`engine`]: Euler–Maruyama integration of single and coupled motions.
//! - [`reference`]: Bessel / first-passage oracles used by the tests.

pub mod configuration;
pub mod coupling;
pub mod engine;
pub mod reference;
pub mod surface;
