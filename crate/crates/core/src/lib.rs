//! Conditional subspace VAE laboratory.
//!
//! A small, CPU-only generative-modelling stack:
//!
//! - [`numerics`]: value-semantic tensors, a recorded reverse-mode graph,
//!   Adam and a milestone learning-rate schedule.
//! - [`stochastic`]: diagonal Gaussians, KL divergences, reconstruction
//!   likelihoods and categorical entropy terms.
//! - [`models`]: VAE, CondVAE, CondVAE-info and CSVAE, their losses and the
//!   alternating adversarial training loop.
//! - [`data`]: deterministic swiss-roll and glyph generators, stratified
//!   splits and the `CSVD` dataset file format.
//! - [`manipulate`]: attribute-switching functions and W-subspace search.
//! - [`eval`]: switched-output accuracy, identity-paired MSE and a mutual
//!   information probe.
//! - [`io`]: run configuration, `CSVC` checkpoints, PGM and SVG writers.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to sequential iteration
//! otherwise. Results are ordered by input index either way.

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod io;
pub mod manipulate;
pub mod models;
pub mod nn;
pub mod numerics;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
