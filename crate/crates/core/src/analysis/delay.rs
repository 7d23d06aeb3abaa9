//! Multipath delay statistics.

use serde::{Deserialize, Serialize};

use super::fit::{fit_family, Bins, Family, FitMethod, Histogram, HistogramFit, MIN_SAMPLES};
use super::Result;
use crate::synth::ChannelTensor;

/// Candidate delay families in report order.
pub const DELAY_FAMILIES: [Family; 3] = [Family::Exponential, Family::Gamma, Family::Rayleigh];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Mean pooled excess delay `τ_avg` (s); NaN without pooled delays.
    pub mean_excess_delay_s: f64,
    /// Median pooled excess delay `τ_med` (s); NaN without pooled delays.
    pub median_excess_delay_s: f64,
    /// Rms delay spread of every snapshot (s).
    pub rms_ds_series: Vec<f64>,
    pub elevation_deg: Option<f64>,
    pub n_pooled: usize,
    pub n_distinct: usize,
    /// Fits in [`DELAY_FAMILIES`] order; empty when too few delays pooled.
    pub fits: Vec<HistogramFit>,
    /// Families ordered best first.
    pub ranking: Vec<Family>,
    /// Set when the tensor has a single path or too few delays to fit.
    pub insufficient: bool,
}

impl DelayStats {
    pub fn fit(&self, family: Family) -> Option<&HistogramFit> {
        self.fits.iter().find(|f| f.family == family)
    }

    pub fn best(&self) -> Option<Family> {
        self.ranking.first().copied()
    }
}

/// Unweighted excess delays (s) of the non-reference paths within
/// `power_threshold_db` of the strongest path of each snapshot. Zero-delay
/// arrivals are the delay reference and are not pooled.
pub fn pooled_delays(tensor: &ChannelTensor, power_threshold_db: f64) -> Vec<f64> {
    let ratio = 10f64.powf(-power_threshold_db.abs() / 10.0);
    let mut out = Vec::new();
    for t in 0..tensor.n_snapshots() {
        let strongest = tensor.snapshot(t).map(|(_, h)| h.norm_sqr()).fold(0.0, f64::max);
        if strongest <= 0.0 {
            continue;
        }
        out.extend(
            tensor
                .snapshot(t)
                .filter(|&(d, h)| d > 0.0 && h.norm_sqr() > 0.0 && h.norm_sqr() >= strongest * ratio)
                .map(|(d, _)| d),
        );
    }
    out
}

/// Families ordered by RMSE; ties keep [`DELAY_FAMILIES`] order, so a gamma
/// fit reduced to its exponential member ranks after the exponential.
fn rank(fits: &[HistogramFit]) -> Vec<Family> {
    let mut order: Vec<&HistogramFit> = fits.iter().collect();
    order.sort_by(|a, b| a.rmse.total_cmp(&b.rmse));
    order.iter().map(|f| f.family).collect()
}

pub fn multipath_delay_stats(tensor: &ChannelTensor, power_threshold_db: f64) -> Result<DelayStats> {
    let rms_ds_series: Vec<f64> = (0..tensor.n_snapshots())
        .map(|t| tensor.snapshot_delay_spread(t))
        .collect();
    let mut stats = DelayStats {
        mean_excess_delay_s: f64::NAN,
        median_excess_delay_s: f64::NAN,
        rms_ds_series,
        elevation_deg: None,
        n_pooled: 0,
        n_distinct: 0,
        fits: Vec::new(),
        ranking: Vec::new(),
        insufficient: true,
    };
    if tensor.n_paths() < 2 {
        return Ok(stats);
    }
    let mut pooled = pooled_delays(tensor, power_threshold_db);
    stats.n_pooled = pooled.len();
    if pooled.is_empty() {
        return Ok(stats);
    }
    stats.mean_excess_delay_s = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    stats.median_excess_delay_s = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    sorted.dedup();
    stats.n_distinct = sorted.len();
    if pooled.len() < MIN_SAMPLES || stats.n_distinct < 2 {
        return Ok(stats);
    }
    let hist = Histogram::new(
        &pooled,
        Bins::FreedmanDiaconis {
            effective_n: Some(stats.n_distinct),
        },
    )?;
    // Fit in nanoseconds to keep the parameters well scaled.
    let scale = 1e9;
    pooled.iter_mut().for_each(|d| *d *= scale);
    let hist_ns = Histogram {
        edges: hist.edges.iter().map(|e| e * scale).collect(),
        densities: hist.densities.iter().map(|d| d / scale).collect(),
        n_samples: hist.n_samples,
    };
    for family in DELAY_FAMILIES {
        let mut fit = fit_family(&hist_ns, &pooled, family, FitMethod::LeastSquares)?;
        fit.bin_edges = hist.edges.clone();
        fit.bin_densities = hist.densities.clone();
        fit.rmse *= scale;
        fit.params = match family {
            Family::Exponential => vec![fit.params[0] * scale],
            Family::Gamma => vec![fit.params[0], fit.params[1] / scale],
            Family::Rayleigh => vec![fit.params[0] / (scale * scale)],
            Family::Rician => vec![fit.params[0] / (scale * scale), fit.params[1] / scale],
        };
        stats.fits.push(fit);
    }
    stats.ranking = rank(&stats.fits);
    stats.insufficient = false;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::TensorMeta;
    use num_complex::Complex64;

    fn two_path(n: usize) -> ChannelTensor {
        let h = vec![Complex64::new(1.0, 0.0); 2 * n];
        let mut tau = vec![0.0; n];
        tau.extend(vec![100e-9; n]);
        let ts = (0..n).map(|i| i as f64).collect();
        ChannelTensor::new(
            2,
            h,
            tau,
            ts,
            TensorMeta {
                fc_hz: 1e9,
                rate_hz: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn two_paths_mean_excess() {
        let s = multipath_delay_stats(&two_path(10), 40.0).unwrap();
        assert!((s.mean_excess_delay_s - 100e-9).abs() < 1e-20);
        assert!((s.median_excess_delay_s - 100e-9).abs() < 1e-20);
        assert!(s.insufficient);
        assert!(s.rms_ds_series.iter().all(|d| (d - 50e-9).abs() < 1e-18));
    }

    #[test]
    fn threshold_excludes_weak_paths() {
        let n = 4;
        let mut h = vec![Complex64::new(1.0, 0.0); n];
        h.extend(vec![Complex64::new(1e-3, 0.0); n]);
        let mut tau = vec![0.0; n];
        tau.extend(vec![50e-9; n]);
        let t = ChannelTensor::new(
            2,
            h,
            tau,
            (0..n).map(|i| i as f64).collect(),
            TensorMeta {
                fc_hz: 1e9,
                rate_hz: 1.0,
            },
        )
        .unwrap();
        assert_eq!(pooled_delays(&t, 40.0).len(), 0);
        assert_eq!(pooled_delays(&t, 70.0).len(), n);
    }

    #[test]
    fn single_path_flagged() {
        let t = ChannelTensor::new(
            1,
            vec![Complex64::new(1.0, 0.0); 3],
            vec![0.0; 3],
            vec![0.0, 1.0, 2.0],
            TensorMeta {
                fc_hz: 1e9,
                rate_hz: 1.0,
            },
        )
        .unwrap();
        let s = multipath_delay_stats(&t, 40.0).unwrap();
        assert!(s.insufficient && s.fits.is_empty());
    }

    #[test]
    fn exponential_delays_rank_exponential_first() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Exp};
        let (paths, snapshots) = (301, 2);
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let exp = Exp::new(1.0 / 50e-9).unwrap();
            let mut h = Vec::new();
            let mut tau = Vec::new();
            for l in 0..paths {
                let d = if l == 0 { 0.0 } else { exp.sample(&mut rng) };
                let a = if l == 0 { 1.0 } else { 0.1 };
                h.extend(vec![Complex64::new(a, 0.0); snapshots]);
                tau.extend(vec![d; snapshots]);
            }
            let t = ChannelTensor::new(
                paths,
                h,
                tau,
                vec![0.0, 1.0],
                TensorMeta {
                    fc_hz: 1e9,
                    rate_hz: 1.0,
                },
            )
            .unwrap();
            let s = multipath_delay_stats(&t, 40.0).unwrap();
            if s.best() == Some(Family::Exponential) {
                wins += 1;
            }
        }
        assert!(wins >= 90, "{wins}");
    }
}
