//! Simulator and optimization library for pinching-antenna systems (PASS).
//!
//! A PASS feeds each of `M` dielectric waveguides from its own RF chain and
//! radiates through `N` repositionable pinching antennas per guide. This
//! crate models the waveguide signal cascade, synthesizes Rician wireless
//! channels, evaluates closed-form effective SINR / rate / energy efficiency,
//! and maximizes energy efficiency by jointly optimizing transmit precoding,
//! per-antenna radiation power, and antenna positions under four dual-scale
//! deployment protocols (coarse base movement plus fine in-base adjustment).
//!
//! Conventional MIMO and cell-free architectures are included as benchmarks,
//! along with a seeded experiment harness that emits CSV tables and JSON
//! summaries.
//!
//! All numerics are generic over the scalar type (`f32` or `f64`) through
//! [`scalar::Real`]; the aliases at the crate root fix the usual
//! double-precision instantiation.

pub mod baseline;
pub mod cascade;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod protocol;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, C};

/// Double-precision instantiations of the core types.
pub type SystemConfig64 = config::SystemConfig<f64>;
pub type UserLayout64 = config::UserLayout<f64>;
pub type PAPlacement64 = channel::PAPlacement<f64>;
pub type ChannelState64 = channel::ChannelState<f64>;
pub type PrecodingMatrix64 = metrics::PrecodingMatrix<f64>;
pub type RadiationAmplitudes64 = metrics::RadiationAmplitudes<f64>;
pub type GridConfig64 = protocol::GridConfig<f64>;
pub type GridSets64 = protocol::GridSets<f64>;
pub type OptimizerConfig64 = optim::OptimizerConfig<f64>;
pub type SolutionState64 = optim::SolutionState<f64>;
