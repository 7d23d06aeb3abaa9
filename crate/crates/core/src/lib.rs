//! Geometry-based stochastic channel simulator for dual-mobile
//! satellite-to-ground links.
//!
//! The pipeline per satellite link is:
//!
//! 1. [`geometry`]: receiver and satellite kinematics, elevation, Doppler
//!    angles and radial relative velocity at every channel snapshot.
//! 2. [`state_model`]: semi-Markov GOOD/BAD (LOS/NLOS) segments along the
//!    receiver track with lognormal durations and elevation-dependent
//!    minimum durations.
//! 3. [`lsp`]: per-segment large-scale parameters (delay spread, K-factor,
//!    shadow fading) with a spatially correlated delay-spread field.
//! 4. [`synth`]: clusters of 20 sub-paths, Doppler phase evolution and
//!    segment cross-fading into a [`synth::ChannelTensor`].
//! 5. [`analysis`]: power, amplitude statistics, multipath delay fits, RMS
//!    delay spread and Doppler spectrum.
//!
//! [`sim`] ties the stages together behind the `simulate`, `analyze` and
//! `report` commands; [`config`] and [`io`] hold the file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
pub mod geometry;
pub mod io;
pub mod lsp;
pub mod pathloss;
pub mod rng;
pub mod sim;
pub mod state_model;
pub mod synth;
mod table;

pub use analysis::{DelayStats, DopplerSpectrum, Family, HistogramFit};
pub use geometry::{EcefPosition, LinkGeometry, Trajectory};
pub use lsp::{DelaySpreadParams, LspDraw};
pub use pathloss::{LinkBudget, PathlossParams, Scenario};
pub use state_model::{DurationParams, LosProbabilityTable, StateKind, StateSequence};
pub use synth::{AntennaPattern, ChannelTensor, ClusterSet, SynthConfig};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
