//! Exact linear algebra over the integers and mod p, finite abelian group
//! arithmetic, sandpile groups, the limiting cokernel distributions of random
//! integral matrix models, and a Monte Carlo harness that checks the two
//! against each other.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! models  ->  exact_linalg  ->  abelian  ->  experiments  <-  theory
//!                 |                                ^
//!                 +-> sandpile                     |
//!             anticoncentration  ------------------+
//! ```
//!
//! `models` samples (or exhaustively enumerates) random symmetric,
//! skew-symmetric, i.i.d., and graph-Laplacian integer matrices;
//! `exact_linalg` computes Smith normal forms, determinants and mod-p ranks
//! exactly; `abelian` turns invariant factors into group statistics
//! (cyclicity, Sylow types, automorphism and pairing counts); `theory`
//! evaluates the limiting constants and corank laws with certified truncation
//! error; `experiments` runs seeded, reproducible trials and compares the
//! empirical answers against the theory targets; `anticoncentration` hosts
//! the concentration-discrepancy functionals and the rank-one progression
//! extraction used to test the inequality layer; `sandpile` implements
//! chip-firing semantics on graphs.

pub mod abelian;
pub mod anticoncentration;
pub mod exact_linalg;
pub mod experiments;
pub mod models;
pub mod sandpile;
pub mod theory;
