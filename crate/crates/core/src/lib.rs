//! Verification of neural control barrier functions by linear bound propagation.
//!
//! The crate computes affine enclosures of a feed-forward network's value and of its
//! input gradient over a simplex, combines them with certified first-order models of
//! control-affine dynamics into affine surrogates of the barrier invariance condition,
//! and drives an adaptive longest-edge refinement of a simplicial mesh until every
//! region is certified or a concrete counterexample has been confirmed.
//!
//! Module map:
//!
//! - [`enclosure`]: affine forms, tensor-valued affine enclosures, interval matrices.
//! - [`network`]: dense networks, exact evaluation, the JSON weight format.
//! - [`activation`]: linear relaxations of activations and their derivatives.
//! - [`lbp`]: value and Jacobian bound propagation.
//! - [`mccormick`]: bilinear relaxations shared by the Jacobian and condition bounds.
//! - [`dynamics`]: control-affine models, Taylor enclosures, builtin benchmark systems.
//! - [`condition`]: surrogates of the invariance condition and per-simplex decisions.
//! - [`mesh`] and [`safe_set`]: simplices, triangulation, bisection, safe-set classification.
//! - [`verifier`]: the refinement driver and its report.

pub mod activation;
pub mod condition;
pub mod dynamics;
pub mod enclosure;
pub mod error;
pub mod interval;
pub mod lbp;
pub mod mccormick;
pub mod mesh;
pub mod network;
pub mod safe_set;
pub mod verifier;

pub use error::{Error, Result};
