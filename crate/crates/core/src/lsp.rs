//! Large-scale parameters drawn once per state segment.
//!
//! The delay spread is lognormal in the log10 domain, scaled by carrier
//! frequency and elevation in LOS, and driven by a spatially correlated
//! standard normal field `X^DS` sampled at segment anchor points along the
//! receiver track. K-factor and shadow fading are normal draws in dB.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state_model::{StateKind, StateSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LspError {
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("sample distances must be non-negative and sorted")]
    UnsortedDistances,
    #[error("decorrelation distance must be positive (got {0})")]
    NonPositiveDecorrelation(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, LspError>;

/// Delay-spread distribution in the log10(seconds) domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpreadParams {
    pub mu: f64,
    pub sigma: f64,
    /// Elevation scaling per decade of elevation (rad); LOS only.
    #[serde(default)]
    pub alpha: f64,
    /// Frequency scaling per decade of carrier frequency (GHz); LOS only.
    #[serde(default)]
    pub gamma: f64,
    /// Decorrelation distance (m).
    pub d_lambda: f64,
}

impl DelaySpreadParams {
    pub const NTN_URBAN_LOS: Self = Self {
        mu: -7.8,
        sigma: 0.3,
        alpha: 0.5,
        gamma: -0.4,
        d_lambda: 50.0,
    };

    pub const NTN_URBAN_NLOS: Self = Self {
        mu: -6.85,
        sigma: 0.15,
        alpha: 0.0,
        gamma: 0.0,
        d_lambda: 40.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(LspError::InvalidParameter(format!("ds sigma {}", self.sigma)));
        }
        if !(self.d_lambda > 0.0) {
            return Err(LspError::NonPositiveDecorrelation(self.d_lambda));
        }
        Ok(())
    }
}

/// Mixed Gaussian/exponential autocorrelation of the LSP field.
pub fn spatial_correlation(d: f64, d_lambda: f64) -> f64 {
    if d < d_lambda {
        (-(d * d) / (d_lambda * d_lambda)).exp()
    } else {
        (-d / d_lambda).exp()
    }
}

/// Jointly Gaussian, unit-variance samples at `distances` with covariance
/// `spatial_correlation(|d_i - d_j|)`, via Cholesky factorisation.
pub fn correlated_normal_field<R: Rng + ?Sized>(distances: &[f64], d_lambda: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(d_lambda > 0.0) {
        return Err(LspError::NonPositiveDecorrelation(d_lambda));
    }
    if distances.iter().any(|d| !(*d >= 0.0)) || distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(LspError::UnsortedDistances);
    }
    if distances.is_empty() {
        return Ok(Vec::new());
    }
    // Coincident sites share one value exactly.
    let mut unique = distances.to_vec();
    unique.dedup();
    let n = unique.len();
    let corr = DMatrix::from_fn(n, n, |i, j| {
        spatial_correlation((unique[i] - unique[j]).abs(), d_lambda)
    });
    let chol = match corr.clone().cholesky() {
        Some(c) => c,
        None => (corr + DMatrix::identity(n, n) * 1e-10)
            .cholesky()
            .ok_or(LspError::NotPositiveDefinite)?,
    };
    let white = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let values = chol.l() * white;
    Ok(distances
        .iter()
        .map(|d| values[unique.partition_point(|u| u < d)])
        .collect())
}

/// log10 of the delay spread in seconds.
pub fn delay_spread_exponent(
    state: StateKind,
    params: &DelaySpreadParams,
    fc_ghz: f64,
    elevation_rad: f64,
    x_ds: f64,
) -> f64 {
    match state {
        StateKind::Good => {
            params.mu + params.gamma * fc_ghz.log10() + params.alpha * elevation_rad.log10() + params.sigma * x_ds
        }
        StateKind::Bad => params.mu + params.sigma * x_ds,
    }
}

/// Delay spread (s) for a given realisation of `X^DS`.
pub fn draw_delay_spread(
    state: StateKind,
    params: &DelaySpreadParams,
    fc_ghz: f64,
    elevation_rad: f64,
    x_ds: f64,
) -> f64 {
    10f64.powf(delay_spread_exponent(state, params, fc_ghz, elevation_rad, x_ds))
}

/// Delay-spread range (s) for `X^DS ∈ [-n_sigma, n_sigma]`.
pub fn delay_spread_envelope(
    state: StateKind,
    params: &DelaySpreadParams,
    fc_ghz: f64,
    elevation_rad: f64,
    n_sigma: f64,
) -> (f64, f64) {
    (
        draw_delay_spread(state, params, fc_ghz, elevation_rad, -n_sigma),
        draw_delay_spread(state, params, fc_ghz, elevation_rad, n_sigma),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDb {
    pub mu: f64,
    pub sigma: f64,
}

/// Configuration of every per-segment large-scale draw.
///
/// K-factor and shadow-fading defaults are placeholders, not normative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LargeScaleConfig {
    pub ds_los: DelaySpreadParams,
    pub ds_nlos: DelaySpreadParams,
    /// K-factor in dB (GOOD state only).
    pub k: NormalDb,
    pub sf_sigma_los: f64,
    pub sf_sigma_nlos: f64,
    /// Optional correlation between the standard normals driving
    /// (DS, K, SF). The identity (no cross-correlation) when absent.
    pub cross_correlation: Option<[[f64; 3]; 3]>,
}

impl Default for LargeScaleConfig {
    fn default() -> Self {
        Self {
            ds_los: DelaySpreadParams::NTN_URBAN_LOS,
            ds_nlos: DelaySpreadParams::NTN_URBAN_NLOS,
            k: NormalDb { mu: 9.0, sigma: 3.5 },
            sf_sigma_los: 4.0,
            sf_sigma_nlos: 6.0,
            cross_correlation: None,
        }
    }
}

impl LargeScaleConfig {
    pub fn ds(&self, state: StateKind) -> &DelaySpreadParams {
        match state {
            StateKind::Good => &self.ds_los,
            StateKind::Bad => &self.ds_nlos,
        }
    }

    pub fn sf_sigma(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Good => self.sf_sigma_los,
            StateKind::Bad => self.sf_sigma_nlos,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ds_los.validate()?;
        self.ds_nlos.validate()?;
        for (what, s) in [
            ("k sigma", self.k.sigma),
            ("sf sigma los", self.sf_sigma_los),
            ("sf sigma nlos", self.sf_sigma_nlos),
        ] {
            if !(s >= 0.0) {
                return Err(LspError::InvalidParameter(format!("{what} = {s}")));
            }
        }
        self.cross_factor().map(|_| ())
    }

    fn cross_factor(&self) -> Result<Option<Matrix3<f64>>> {
        let Some(m) = self.cross_correlation else {
            return Ok(None);
        };
        let m = Matrix3::from_fn(|i, j| m[i][j]);
        if (0..3).any(|i| (m[(i, i)] - 1.0).abs() > 1e-12) || (m - m.transpose()).norm() > 1e-12 {
            return Err(LspError::InvalidParameter(
                "cross correlation must be symmetric with unit diagonal".into(),
            ));
        }
        m.cholesky().map(|c| Some(c.l())).ok_or(LspError::NotPositiveDefinite)
    }
}

/// Draws of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspDraw {
    pub ds: f64,
    pub x_ds: f64,
    /// `None` in the BAD state.
    pub k_factor_db: Option<f64>,
    pub shadow_fading_db: f64,
}

/// Independent normal K-factor (GOOD only) and shadow-fading draws (dB).
pub fn draw_k_factor_and_sf<R: Rng + ?Sized>(
    state: StateKind,
    rng: &mut R,
    config: &LargeScaleConfig,
) -> (Option<f64>, f64) {
    let nk: f64 = rng.sample(StandardNormal);
    let nsf: f64 = rng.sample(StandardNormal);
    k_and_sf_from_normals(state, config, nk, nsf)
}

fn k_and_sf_from_normals(state: StateKind, config: &LargeScaleConfig, nk: f64, nsf: f64) -> (Option<f64>, f64) {
    let k = state.is_los().then_some(config.k.mu + config.k.sigma * nk);
    (k, config.sf_sigma(state) * nsf)
}

/// Large-scale draws for every segment of `states`.
///
/// Each scenario has its own correlated `X^DS` field sampled at the start
/// distances of that scenario's segments; `elevation_at` maps a track
/// distance (m) to the satellite elevation (rad).
pub fn draw_segment_lsps<R, F>(
    states: &StateSequence,
    elevation_at: F,
    fc_ghz: f64,
    config: &LargeScaleConfig,
    rng: &mut R,
) -> Result<Vec<LspDraw>>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    config.validate()?;
    let cross = config.cross_factor()?;
    let segments = states.segments();
    let mut x_ds = vec![0.0; segments.len()];
    for state in [StateKind::Good, StateKind::Bad] {
        let idx: Vec<usize> = (0..segments.len()).filter(|&i| segments[i].state == state).collect();
        let anchors: Vec<f64> = idx.iter().map(|&i| segments[i].start_m).collect();
        let field = correlated_normal_field(&anchors, config.ds(state).d_lambda, rng)?;
        for (i, x) in idx.into_iter().zip(field) {
            x_ds[i] = x;
        }
    }
    Ok(segments
        .iter()
        .zip(x_ds)
        .map(|(seg, x)| {
            let nk: f64 = rng.sample(StandardNormal);
            let nsf: f64 = rng.sample(StandardNormal);
            let (nk, nsf) = match &cross {
                Some(l) => {
                    let v = l * Vector3::new(x, nk, nsf);
                    // Row 0 of a unit-diagonal Cholesky factor is (1, 0, 0).
                    (v[1], v[2])
                }
                None => (nk, nsf),
            };
            let (k, sf) = k_and_sf_from_normals(seg.state, config, nk, nsf);
            LspDraw {
                ds: draw_delay_spread(seg.state, config.ds(seg.state), fc_ghz, elevation_at(seg.start_m), x),
                x_ds: x,
                k_factor_db: k,
                shadow_fading_db: sf,
            }
        })
        .collect())
}
