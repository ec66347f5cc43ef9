//! Core algorithms for forecasting the long-term impact of scientific papers
//! from the geometry of a learned continuous-time latent manifold.
//!
//! Papers are embedded into a latent space together with per-topic
//! trajectories ("spines"). Training sculpts the space with three geometric
//! objectives; an unseen paper is then scored by the cosine between its
//! positional residual and its topic's instantaneous momentum.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all IO, file formats
//! and the CLI live in the companion `fame` crate.
//!
//! Module map:
//! - [`corpus`] — paper records, composite impact weights, temporal splits
//! - [`embedding`] — embedding store, cosine similarity, k-means topics
//! - [`graph`] — retrieve-and-verify inspiration graph plus ablation variants
//! - [`autodiff`] — minimal reverse-mode tape, gradient checker, Adam
//! - [`manifold`] — time encoding, mapper/spine networks, losses, training
//! - [`eval`] — scoring, rank metrics, sliding-window evaluation, ablations
//! - [`synth`] — synthetic corpora with planted drift and impact alignment

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod manifold;
pub mod rng;
pub mod synth;

mod fmath;

pub use error::{CoreError, Result};
