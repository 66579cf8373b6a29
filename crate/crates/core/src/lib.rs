//! Base-station placement on raster site maps.
//!
//! A deterministic pathloss twin ([`twin`]) turns a site map and a set of
//! transmitter cells into per-cell received power, from which [`metrics`]
//! derives coverage, capacity and total pathgain. [`env`] wraps this as a
//! sequential decision process with marginal rewards ([`reward`]), [`agent`]
//! trains a masked-categorical MLP policy on it with PPO, and [`baselines`]
//! provides uniform-random and exhaustive comparators.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "openblas")]
extern crate blas_src;

pub mod agent;
pub mod baselines;
pub mod blas;
pub mod cli;
pub mod env;
pub mod metrics;
pub mod pnm;
pub mod reward;
pub mod rng;
pub mod sitemap;
pub mod twin;

pub use env::{Episode, Observation};
pub use metrics::NetworkMetrics;
pub use reward::{Preset, RewardWeights};
pub use sitemap::{Coord, SiteMap};
pub use twin::{RadioConfig, Twin};
