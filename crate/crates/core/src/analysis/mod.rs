//! Validation metrics of synthesized channels.

mod delay;
mod doppler;
mod fit;
mod optimize;
mod pdf;

use num_complex::Complex64;
use thiserror::Error;

pub use delay::{multipath_delay_stats, pooled_delays, DelayStats, DELAY_FAMILIES};
pub use doppler::{doppler_spectrum, DopplerSpectrum};
pub use fit::{fit_family, fit_histogram, Bins, Family, FitMethod, Histogram, HistogramFit, MIN_SAMPLES};
pub use optimize::{nelder_mead, Minimum};
pub use pdf::{bessel_i0e, exponential_pdf, gamma_pdf, rayleigh_pdf, rician_pdf};

use crate::synth::ChannelTensor;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{got} samples, at least {need} required")]
    InsufficientSamples { got: usize, need: usize },
    #[error("{got} snapshots, at least {need} required")]
    InsufficientSnapshots { got: usize, need: usize },
    #[error("all samples are identical")]
    Degenerate,
    #[error("total power is zero")]
    ZeroPower,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Received power `Σ|h|²` of one snapshot (linear).
pub fn received_power(column: &[Complex64]) -> f64 {
    column.iter().map(|h| h.norm_sqr()).sum()
}

/// Received amplitude `Σ|h|` of one snapshot (linear).
pub fn received_amplitude(column: &[Complex64]) -> f64 {
    column.iter().map(|h| h.norm()).sum()
}

fn column(tensor: &ChannelTensor, t: usize) -> Vec<Complex64> {
    tensor.snapshot(t).map(|(_, h)| h).collect()
}

/// [`received_power`] of every snapshot.
pub fn power_series(tensor: &ChannelTensor) -> Vec<f64> {
    (0..tensor.n_snapshots())
        .map(|t| received_power(&column(tensor, t)))
        .collect()
}

/// [`received_amplitude`] of every snapshot.
pub fn amplitude_series(tensor: &ChannelTensor) -> Vec<f64> {
    (0..tensor.n_snapshots())
        .map(|t| received_amplitude(&column(tensor, t)))
        .collect()
}

/// Power-weighted rms delay spread (s).
pub fn rms_delay_spread(powers: &[f64], delays: &[f64]) -> Result<f64> {
    if powers.len() != delays.len() {
        return Err(AnalysisError::InvalidArgument(
            "powers and delays differ in length".into(),
        ));
    }
    let total: f64 = powers.iter().sum();
    if !(total > 0.0) {
        return Err(AnalysisError::ZeroPower);
    }
    let mean = powers.iter().zip(delays).map(|(p, d)| p * d).sum::<f64>() / total;
    let var = powers
        .iter()
        .zip(delays)
        .map(|(p, d)| p * (d - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(var.max(0.0).sqrt())
}

/// Families fitted to amplitude series, in report order.
pub const AMPLITUDE_FAMILIES: [Family; 2] = [Family::Rayleigh, Family::Rician];

/// Least-squares [`AMPLITUDE_FAMILIES`] fits of an amplitude series. The fit
/// runs on amplitudes normalised to unit rms; parameters, histogram and RMSE
/// are reported in the original units.
pub fn fit_amplitudes(samples: &[f64]) -> Result<Vec<HistogramFit>> {
    if samples.len() < MIN_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            got: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    let scale = (samples.iter().map(|a| a * a).sum::<f64>() / samples.len() as f64).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(AnalysisError::ZeroPower);
    }
    let unit: Vec<f64> = samples.iter().map(|a| a / scale).collect();
    let hist = Histogram::new(&unit, Bins::FreedmanDiaconis { effective_n: None })?;
    AMPLITUDE_FAMILIES
        .iter()
        .map(|&family| {
            let mut fit = fit_family(&hist, &unit, family, FitMethod::LeastSquares)?;
            fit.bin_edges.iter_mut().for_each(|e| *e *= scale);
            fit.bin_densities.iter_mut().for_each(|d| *d /= scale);
            fit.rmse /= scale;
            fit.params[0] *= scale * scale;
            if family == Family::Rician {
                fit.params[1] *= scale;
            }
            Ok(fit)
        })
        .collect()
}

/// Doppler shift (Hz) for a radial relative velocity `dv` (m/s).
pub fn doppler_shift(fc_hz: f64, dv: f64) -> f64 {
    fc_hz / SPEED_OF_LIGHT * dv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_and_amplitude() {
        let one = [Complex64::new(1.0, 0.0)];
        assert_eq!(received_power(&one), 1.0);
        let two = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert_eq!(received_power(&two), 2.0);
        let taps = [Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        assert_eq!(received_amplitude(&taps), 7.0);
        let single = [Complex64::new(0.6, 0.8)];
        assert!((received_amplitude(&single) - received_power(&single).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn delay_spread_examples() {
        assert_eq!(rms_delay_spread(&[1.0], &[5e-9]).unwrap(), 0.0);
        assert!((rms_delay_spread(&[1.0, 1.0], &[0.0, 80e-9]).unwrap() - 40e-9).abs() < 1e-21);
        let ds = rms_delay_spread(&[0.8882, 0.1118], &[0.0, 100e-9]).unwrap();
        let oracle = (0.1118f64 * 1e-14 - (1.118e-8f64).powi(2)).sqrt();
        assert!((ds - oracle).abs() < 1e-20, "{ds}");
        assert!((ds - 31.51e-9).abs() < 0.01e-9, "{ds}");
        assert_eq!(
            rms_delay_spread(&[0.0, 0.0], &[0.0, 1.0]),
            Err(AnalysisError::ZeroPower)
        );
    }

    #[test]
    fn amplitude_fits_are_scale_equivariant() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = Normal::new(0.0, 1.0).unwrap();
        let unit: Vec<f64> = (0..5000)
            .map(|_| (2.0f64 + g.sample(&mut rng)).hypot(g.sample(&mut rng)))
            .collect();
        let tiny: Vec<f64> = unit.iter().map(|a| a * 1e-8).collect();
        let a = fit_amplitudes(&unit).unwrap();
        let b = fit_amplitudes(&tiny).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y.params[0] / x.params[0] - 1e-16).abs() < 1e-22);
            assert!((y.rmse / x.rmse - 1e8).abs() < 1e-3);
        }
        assert!((b[1].params[1] / a[1].params[1] - 1e-8).abs() < 1e-14);
        assert!(fit_amplitudes(&[1.0; 10]).is_err());
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_shift(1.575_42e9, 0.0), 0.0);
        assert!((doppler_shift(1.575_42e9, -434.5713) + 2283.7).abs() < 0.5);
        assert!((doppler_shift(1.575_42e9, 929.0) - 4881.9).abs() < 1.0);
    }
}
