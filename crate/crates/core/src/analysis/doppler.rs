//! Doppler power spectrum of a channel tensor.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};
use crate::synth::ChannelTensor;

/// Floor (dB) applied to empty spectral bins.
const PSD_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerSpectrum {
    pub doppler_bins: Vec<f64>,
    /// Power spectral density relative to its peak (dB).
    pub psd_db: Vec<f64>,
    pub window_s: f64,
    pub nfft: usize,
    pub peak_hz: f64,
    /// Absolute peak density (dB), comparable between tensors analysed
    /// with the same settings.
    pub peak_power_db: f64,
    pub n_windows: usize,
}

impl DopplerSpectrum {
    pub fn resolution_hz(&self) -> f64 {
        if self.doppler_bins.len() > 1 {
            self.doppler_bins[1] - self.doppler_bins[0]
        } else {
            f64::NAN
        }
    }
}

/// Tapered time series of every distinct delay within one window.
fn delay_groups(tensor: &ChannelTensor, start: usize, taper: &[f64]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let n_w = taper.len();
    let mut index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut delays = Vec::new();
    let mut series: Vec<Vec<Complex64>> = Vec::new();
    for l in 0..tensor.n_paths() {
        let h = &tensor.path_row(l)[start..start + n_w];
        let tau = &tensor.delay_row(l)[start..start + n_w];
        for n in 0..n_w {
            if h[n] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let g = *index.entry(tau[n].to_bits()).or_insert_with(|| {
                delays.push(tau[n]);
                series.push(vec![Complex64::new(0.0, 0.0); n_w]);
                series.len() - 1
            });
            series[g][n] += h[n] * taper[n];
        }
    }
    (delays, series)
}

/// Doppler power spectrum of `tensor`.
///
/// The transfer function is evaluated on `nfft` frequencies spanning
/// `bandwidth_hz`; each frequency bin is Hann-tapered and transformed over
/// consecutive windows of `window_s`, and the power is averaged over
/// frequency bins and windows.
pub fn doppler_spectrum(
    tensor: &ChannelTensor,
    bandwidth_hz: f64,
    nfft: usize,
    window_s: f64,
) -> Result<DopplerSpectrum> {
    if !nfft.is_power_of_two() {
        return Err(AnalysisError::InvalidArgument(format!(
            "nfft {nfft} is not a power of two"
        )));
    }
    if !(bandwidth_hz > 0.0 && window_s > 0.0) {
        return Err(AnalysisError::InvalidArgument(
            "bandwidth and window must be positive".into(),
        ));
    }
    let rate = tensor.rate_hz();
    let n_w = (window_s * rate).round() as usize;
    let total = tensor.n_snapshots();
    if n_w < 2 || n_w > total {
        return Err(AnalysisError::InsufficientSnapshots {
            got: total,
            need: n_w.max(2),
        });
    }
    let taper: Vec<f64> = (0..n_w)
        .map(|n| 0.5 - 0.5 * (TAU * n as f64 / n_w as f64).cos())
        .collect();
    let taper_energy: f64 = taper.iter().map(|w| w * w).sum();
    let freqs: Vec<f64> = (0..nfft)
        .map(|k| (k as f64 - (nfft / 2) as f64) * bandwidth_hz / nfft as f64)
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n_w);
    let n_windows = total / n_w;
    let mut psd = vec![0.0; n_w];
    for j in 0..n_windows {
        let (delays, mut series) = delay_groups(tensor, j * n_w, &taper);
        for s in series.iter_mut() {
            fft.process(s);
        }
        let v = delays.len();
        if v <= nfft {
            for a in 0..v {
                for (p, g) in psd.iter_mut().zip(&series[a]) {
                    *p += g.norm_sqr();
                }
                for b in a + 1..v {
                    let d = delays[a] - delays[b];
                    let kernel: Complex64 = freqs
                        .iter()
                        .map(|f| Complex64::from_polar(1.0, -TAU * f * d))
                        .sum::<Complex64>()
                        / nfft as f64;
                    for ((p, ga), gb) in psd.iter_mut().zip(&series[a]).zip(&series[b]) {
                        *p += 2.0 * (ga * gb.conj() * kernel).re;
                    }
                }
            }
        } else {
            let mut x = vec![Complex64::new(0.0, 0.0); n_w];
            for f in &freqs {
                x.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                for (d, g) in delays.iter().zip(&series) {
                    let rot = Complex64::from_polar(1.0, -TAU * f * d);
                    for (c, gv) in x.iter_mut().zip(g) {
                        *c += gv * rot;
                    }
                }
                for (p, c) in psd.iter_mut().zip(&x) {
                    *p += c.norm_sqr() / nfft as f64;
                }
            }
        }
    }
    let norm = n_windows as f64 * taper_energy;
    let half = n_w / 2;
    let mut doppler_bins = Vec::with_capacity(n_w);
    let mut shifted = Vec::with_capacity(n_w);
    for m in 0..n_w {
        doppler_bins.push((m as f64 - half as f64) * rate / n_w as f64);
        shifted.push((psd[(m + n_w - half) % n_w] / norm).max(0.0));
    }
    let (peak_idx, &peak) = shifted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("window is non-empty");
    if !(peak > 0.0) {
        return Err(AnalysisError::ZeroPower);
    }
    Ok(DopplerSpectrum {
        psd_db: shifted
            .iter()
            .map(|p| (10.0 * (p / peak).log10()).max(PSD_FLOOR_DB))
            .collect(),
        peak_hz: doppler_bins[peak_idx],
        doppler_bins,
        window_s,
        nfft,
        peak_power_db: 10.0 * peak.log10(),
        n_windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TensorMeta;

    fn tone_tensor(freqs: &[(f64, f64, f64)], rate: f64, n: usize) -> ChannelTensor {
        let mut h = Vec::new();
        let mut tau = Vec::new();
        for &(f, d, a) in freqs {
            for i in 0..n {
                h.push(Complex64::from_polar(a, TAU * f * i as f64 / rate));
                tau.push(d);
            }
        }
        let ts = (0..n).map(|i| i as f64 / rate).collect();
        ChannelTensor::new(
            freqs.len(),
            h,
            tau,
            ts,
            TensorMeta {
                fc_hz: 1e9,
                rate_hz: rate,
            },
        )
        .unwrap()
    }

    #[test]
    fn static_path_peaks_at_zero() {
        let t = tone_tensor(&[(0.0, 0.0, 1.0)], 1000.0, 1000);
        let s = doppler_spectrum(&t, 2e6, 1024, 1.0).unwrap();
        assert_eq!(s.peak_hz, 0.0);
        assert_eq!(s.doppler_bins.len(), 1000);
        assert_eq!(s.doppler_bins[0], -500.0);
        assert!((s.resolution_hz() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tone_recovered() {
        let t = tone_tensor(&[(123.0, 0.0, 1.0)], 1000.0, 2000);
        let s = doppler_spectrum(&t, 2e6, 1024, 1.0).unwrap();
        assert_eq!(s.n_windows, 2);
        assert!((s.peak_hz - 123.0).abs() <= 1.0);
        for (f, p) in s.doppler_bins.iter().zip(&s.psd_db) {
            if (f - 123.0).abs() > 5.0 {
                assert!(*p <= -40.0, "{f}: {p}");
            }
        }
    }

    #[test]
    fn kernel_and_direct_paths_agree() {
        let paths = [(40.0, 0.0, 1.0), (-75.0, 120e-9, 0.5), (10.0, 310e-9, 0.3)];
        let t = tone_tensor(&paths, 500.0, 500);
        let a = doppler_spectrum(&t, 2e6, 4, 1.0).unwrap();
        let b = doppler_spectrum(&t, 2e6, 2, 1.0).unwrap();
        assert_eq!(a.peak_hz, 40.0);
        assert_eq!(b.peak_hz, 40.0);
        let c = doppler_spectrum(&t, 2e6, 1, 1.0).unwrap();
        assert_eq!(c.peak_hz, 40.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = tone_tensor(&[(0.0, 0.0, 1.0)], 100.0, 50);
        assert!(doppler_spectrum(&t, 2e6, 1000, 0.1).is_err());
        assert!(matches!(
            doppler_spectrum(&t, 2e6, 1024, 1.0),
            Err(AnalysisError::InsufficientSnapshots { .. })
        ));
    }
}
