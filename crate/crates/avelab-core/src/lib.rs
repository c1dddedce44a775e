//! Exact finite-state toolkit for group-averaged Markov kernels.
//!
//! Everything here is dense, double-precision linear algebra over a finite
//! state space `0..n` weighted by a strictly positive probability vector π.
//! The toolkit constructs the averaged kernels
//!
//! ```text
//! P_da(G, ν) = Σ_{(g,h)} ν(g,h) · U_g P U_h
//! ```
//!
//! for a finite permutation group `G` acting on the states (with the orbit,
//! twisted, left, right, and independent-double special cases), the
//! state-dependent projector `Q(G, π)` with its products `QP`, `PQ`, `QPQ`,
//! and the diagnostics used to compare a kernel with its averages: additive
//! and multiplicative spectral gaps, asymptotic variance, Cheeger constant,
//! π-weighted KL / Hilbert–Schmidt / Frobenius geometry, and exact worst-case
//! `L^p` mixing times.
//!
//! Intended scale: `n ≲ 4096` for spectral work and `n ≤ 20` for subset
//! enumeration. All values are immutable after construction and safe to share
//! across threads.

#![forbid(unsafe_code)]

pub mod averaging;
pub mod divergence;
pub mod dynamics;
pub mod error;
pub mod group;
pub mod index;
pub mod kernel;
pub mod models;
pub mod space;
pub mod spectral;
pub mod tol;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
