//! Small-scale channel synthesis.
//!
//! Each state segment gets a [`ClusterSet`]: exponential cluster delays,
//! exponential-decay cluster powers with per-cluster shadowing, a direct
//! path in the GOOD state, and 20 sub-paths per cluster with random phases
//! and arrival azimuths. [`assemble_channel`] evolves sub-path phases with
//! the satellite and receiver Doppler at every snapshot and cross-fades
//! adjacent segments into one [`ChannelTensor`] per link.

mod antenna;
mod assemble;
mod clusters;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use antenna::{antenna_gain, AntennaKind, AntennaPattern};
pub use assemble::{assemble_channel, subpath_doppler_hz, AssembledLink, LinkSeries, LinkSetup};
pub use clusters::{
    generate_cluster_delays, generate_cluster_powers, rescale_delays_to_ds, subpath_offsets, synthesize_subpaths,
    ClusterSet,
};
pub use tensor::{merge_segments, ChannelTensor, MergeReport, TensorMeta};

use crate::state_model::StateKind;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("incompatible tensors: {0}")]
    Incompatible(String),
    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Pathloss(#[from] crate::pathloss::PathlossError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_clusters_los: usize,
    pub n_clusters_nlos: usize,
    pub subpaths_per_cluster: usize,
    pub r_tau_los: f64,
    pub r_tau_nlos: f64,
    /// Per-cluster shadowing standard deviation (dB).
    pub per_cluster_shadow_sigma_db: f64,
    /// Cluster-wise rms azimuth spread of arrival (deg).
    pub cluster_asa_deg: f64,
    /// Snapshots per wavelength of travelled distance.
    pub sample_density: f64,
    /// Fraction of the shorter neighbouring segment used to cross-fade.
    pub overlap_fraction: f64,
    /// Upper bound of the cross-fade (s).
    pub max_overlap_s: f64,
    /// Scale cluster delays so that each set hits its drawn delay spread.
    pub rescale_delays: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clusters_los: 12,
            n_clusters_nlos: 20,
            subpaths_per_cluster: 20,
            r_tau_los: 2.5,
            r_tau_nlos: 2.3,
            per_cluster_shadow_sigma_db: 3.0,
            cluster_asa_deg: 15.0,
            sample_density: 5.0,
            overlap_fraction: 0.25,
            max_overlap_s: 0.1,
            rescale_delays: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters_los == 0 || self.n_clusters_nlos == 0 || self.subpaths_per_cluster == 0 {
            return Err(SynthError::InvalidConfig(
                "cluster and sub-path counts must be at least 1".into(),
            ));
        }
        if !(self.r_tau_los > 1.0 && self.r_tau_nlos > 1.0) {
            return Err(SynthError::InvalidConfig("r_tau must exceed 1".into()));
        }
        if !(self.sample_density > 0.0) {
            return Err(SynthError::InvalidConfig("sample density must be positive".into()));
        }
        if !(self.per_cluster_shadow_sigma_db >= 0.0 && self.cluster_asa_deg >= 0.0) {
            return Err(SynthError::InvalidConfig("spreads must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) || !(self.max_overlap_s >= 0.0) {
            return Err(SynthError::InvalidConfig("invalid overlap settings".into()));
        }
        Ok(())
    }

    pub fn n_clusters(&self, state: StateKind) -> usize {
        match state {
            StateKind::Good => self.n_clusters_los,
            StateKind::Bad => self.n_clusters_nlos,
        }
    }

    pub fn r_tau(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Good => self.r_tau_los,
            StateKind::Bad => self.r_tau_nlos,
        }
    }
}

/// Minimum snapshot rate (Hz) that resolves `sample_density` snapshots per
/// wavelength for a terminal covering `path_length_m` in `duration_s`.
pub fn min_channel_update_rate(path_length_m: f64, sample_density: f64, fc_hz: f64, duration_s: f64) -> f64 {
    path_length_m / duration_s * sample_density * fc_hz / SPEED_OF_LIGHT
}

/// `10 log10(mean((target - ds)^2))`; an exact match gives `-inf`.
pub fn ds_mse(ds_values: &[f64], ds_target: f64) -> f64 {
    let targets = vec![ds_target; ds_values.len()];
    ds_mse_series(ds_values, &targets)
}

/// As [`ds_mse`] with a separate target per value.
pub fn ds_mse_series(ds_values: &[f64], targets: &[f64]) -> f64 {
    assert!(!ds_values.is_empty(), "ds_mse needs at least one value");
    assert_eq!(ds_values.len(), targets.len());
    let sum: f64 = ds_values.iter().zip(targets).map(|(d, t)| (t - d).powi(2)).sum();
    10.0 * (sum / ds_values.len() as f64).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_rate() {
        let r = min_channel_update_rate(3500.0, 5.0, 1.575_42e9, 1.0);
        assert!((r - 91_963.0).abs() < 1.0, "{r}");
        assert_eq!(min_channel_update_rate(0.0, 5.0, 1.575_42e9, 1.0), 0.0);
        let r10 = min_channel_update_rate(3500.0, 10.0, 1.575_42e9, 1.0);
        assert!((r10 - 2.0 * r).abs() < 1e-9);
    }

    #[test]
    fn mse_values() {
        assert_eq!(ds_mse(&[100e-9], 100e-9), f64::NEG_INFINITY);
        let m = ds_mse(&[90e-9, 110e-9], 100e-9);
        assert!((m + 160.0).abs() < 1e-9, "{m}");
        let m10 = ds_mse(&[0.0, 200e-9], 100e-9);
        assert!((m10 - m - 20.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = SynthConfig {
            r_tau_los: 1.0,
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
        let zero = SynthConfig {
            n_clusters_nlos: 0,
            ..SynthConfig::default()
        };
        assert!(zero.validate().is_err());
    }
}
