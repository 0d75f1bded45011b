//! Transition probabilities of birth-death processes by uniform sampling of
//! integer-grid bridge paths, and likelihood inference built on top of it.
//!
//! A bridge path from `i` to `j` over `[0, t]` with `B` upward jumps splits
//! into a point of the jump-time simplex and a lattice path of the embedded
//! chain. Both halves have uniform laws with closed-form densities, so the
//! transition probability is an expectation of `path likelihood / density`
//! under a parameter-free proposal.
//!
//! Modules, bottom-up:
//!
//! - [`models`]: rate laws and boundary metadata.
//! - [`counting`]: exact counts of corridor-restricted lattice bridges.
//! - [`sampler`]: uniform draws of jump times and skeletons.
//! - [`likelihood`]: complete-path likelihood and the bridge estimators.
//! - [`reference`]: closed-form and forward-simulation oracles.
//! - [`filters`]: sequential likelihood for SIR observed through `S` only,
//!   plus a bootstrap particle filter baseline.
//! - [`inference`]: grid MLE, profile intervals and `R0`.
//! - [`data`]: observation CSV ingestion and the bundled outbreak record.

pub mod counting;
pub mod data;
mod error;
pub mod filters;
pub mod inference;
pub mod likelihood;
pub mod models;
mod parallel;
pub mod reference;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use rng::{RngStream, DEFAULT_SEED};
