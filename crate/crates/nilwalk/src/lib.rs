//! Random walks on nilpotent groups.
//!
//! The crate has three computational pillars:
//!
//! * exact Heisenberg group arithmetic over `Z` and `R`, with the word-product
//!   functionals `H` and `H*` that control the central coordinate
//!   ([`heis`]), and exact lattice walk distributions by dense dynamic
//!   programming ([`lattice`]);
//! * the modified characteristic function `I(alpha, xi; N)` of the Gaussian
//!   walk, evaluated by three independent routes (scalar recurrences, dense
//!   linear algebra, Monte Carlo), and the limiting density by Fourier
//!   inversion ([`gauss`]);
//! * walks on the uni-upper-triangular groups `N_n(Z/pZ)`: exact convolution
//!   over the whole group, total-variation mixing of the corner coordinate,
//!   and the block-swap rearrangement identities behind the mixing bounds
//!   ([`unitri`], [`rearrange`]).
//!
//! [`spectrum`] holds the characteristic-function tooling for finitely
//! supported planar measures (large spectrum, local maxima, Taylor residuals).
//!
//! Everything is deterministic: pure functions everywhere, and all Monte
//! Carlo paths draw from per-shard seeded streams so results do not depend on
//! the number of worker threads.

pub mod gauss;
pub mod heis;
pub mod lattice;
mod phase;
pub mod rearrange;
pub mod rng;
pub mod spectrum;
pub mod unitri;
