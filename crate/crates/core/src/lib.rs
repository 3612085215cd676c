//! Context-conditioned generative models for household electricity time series.
//!
//! The crate trains a context encoder (per-variable embeddings, compression MLP,
//! auxiliary reconstruction heads) jointly with a generative model (GAN baseline,
//! ACGAN, or a diffusion model with interpretable trend/seasonality layers),
//! normalizes series per context group through a learned parametric normalizer,
//! and evaluates synthetic output with a fidelity/utility metric suite.

pub mod cli;
pub mod config;
pub mod context_encoder;
pub mod data;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod metrics;
pub mod normalizer;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
