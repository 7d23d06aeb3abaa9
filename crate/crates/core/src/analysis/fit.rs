//! Density histograms and distribution fitting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::digamma;

use super::optimize::nelder_mead;
use super::pdf::{exponential_pdf, gamma_pdf, rayleigh_pdf, rician_pdf};
use super::{AnalysisError, Result};

/// Minimum sample count accepted by the fits.
pub const MIN_SAMPLES: usize = 100;

const MAX_BINS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Params: `[sigma2]`.
    Rayleigh,
    /// Params: `[sigma2, z]`.
    Rician,
    /// Params: `[lambda]`.
    Exponential,
    /// Params: `[k, theta]`.
    Gamma,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rayleigh => "rayleigh",
            Family::Rician => "rician",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Rayleigh | Family::Exponential => 1,
            Family::Rician | Family::Gamma => 2,
        }
    }

    /// One-parameter special case contained in a two-parameter family.
    pub fn nested(self) -> Option<Family> {
        match self {
            Family::Rician => Some(Family::Rayleigh),
            Family::Gamma => Some(Family::Exponential),
            _ => None,
        }
    }

    /// Parameters of this family reproducing the nested family's `params`.
    fn embed_nested(self, params: &[f64]) -> Vec<f64> {
        match self {
            Family::Rician => vec![params[0], 0.0],
            Family::Gamma => vec![1.0, 1.0 / params[0]],
            _ => params.to_vec(),
        }
    }

    pub fn pdf(self, x: f64, params: &[f64]) -> Result<f64> {
        match self {
            Family::Rayleigh => rayleigh_pdf(x, params[0]),
            Family::Rician => rician_pdf(x, params[0], params[1]),
            Family::Exponential => exponential_pdf(x, params[0]),
            Family::Gamma => gamma_pdf(x, params[0], params[1]),
        }
    }
}

/// Bin-width rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bins {
    /// `2 IQR / n^(1/3)`; `effective_n` replaces the sample count when the
    /// samples repeat a smaller set of distinct values.
    FreedmanDiaconis {
        effective_n: Option<usize>,
    },
    Count(usize),
}

impl Default for Bins {
    fn default() -> Self {
        Bins::FreedmanDiaconis { effective_n: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    #[default]
    LeastSquares,
    MaxLikelihood,
}

/// Density-normalised histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

impl Histogram {
    pub fn new(samples: &[f64], bins: Bins) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(AnalysisError::InsufficientSamples {
                got: samples.len(),
                need: MIN_SAMPLES,
            });
        }
        if !samples.iter().all(|x| x.is_finite()) {
            return Err(AnalysisError::Domain("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if !(hi > lo) {
            return Err(AnalysisError::Degenerate);
        }
        let count = match bins {
            Bins::Count(n) => n.clamp(1, MAX_BINS),
            Bins::FreedmanDiaconis { effective_n } => {
                let n = effective_n.unwrap_or(samples.len()).max(2) as f64;
                let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                let width = 2.0 * iqr / n.cbrt();
                if width > 0.0 {
                    (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
                } else {
                    n.log2().ceil() as usize + 1
                }
            }
        };
        let width = (hi - lo) / count as f64;
        let edges: Vec<f64> = (0..=count)
            .map(|i| if i == count { hi } else { lo + i as f64 * width })
            .collect();
        let mut counts = vec![0usize; count];
        for &x in samples {
            let i = (((x - lo) / width) as usize).min(count - 1);
            counts[i] += 1;
        }
        let norm = samples.len() as f64;
        let densities = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, e)| c as f64 / (norm * (e[1] - e[0])))
            .collect();
        Ok(Self {
            edges,
            densities,
            n_samples: samples.len(),
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }
}

/// Fit of one family to a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    pub family: Family,
    pub params: Vec<f64>,
    /// Root-mean-square density error over the bins.
    pub rmse: f64,
    pub bin_edges: Vec<f64>,
    pub bin_densities: Vec<f64>,
    pub method: FitMethod,
    /// False when the local refinement hit its iteration limit.
    pub converged: bool,
    /// The extra parameter over the nested family was not significant, so
    /// the nested solution is reported.
    pub reduced: bool,
}

impl HistogramFit {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Fitted density at the bin centres.
    pub fn curve(&self) -> Vec<f64> {
        self.bin_centers()
            .iter()
            .map(|&c| self.family.pdf(c, &self.params).unwrap_or(f64::NAN))
            .collect()
    }

    /// Residual sum of squares over the bins.
    pub fn rss(&self) -> f64 {
        self.rmse * self.rmse * self.bin_densities.len() as f64
    }
}

fn rss(hist: &Histogram, centers: &[f64], family: Family, params: &[f64]) -> f64 {
    centers
        .iter()
        .zip(&hist.densities)
        .map(|(&c, &d)| match family.pdf(c, params) {
            Ok(v) if v.is_finite() => (v - d).powi(2),
            _ => f64::INFINITY,
        })
        .sum()
}

struct Moments {
    m1: f64,
    m2: f64,
    var: f64,
}

fn moments(samples: &[f64]) -> Moments {
    let n = samples.len() as f64;
    let m1 = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    Moments {
        m1,
        m2,
        var: (m2 - m1 * m1).max(f64::MIN_POSITIVE),
    }
}

fn start_grid(family: Family, m: &Moments) -> Vec<Vec<f64>> {
    let scales = [0.25, 0.5, 1.0, 2.0, 4.0];
    match family {
        Family::Rayleigh => scales.iter().map(|s| vec![s * m.m2 / 2.0]).collect(),
        Family::Exponential => scales.iter().map(|s| vec![s / m.m1]).collect(),
        Family::Gamma => {
            let k0 = m.m1 * m.m1 / m.var;
            let mut out = Vec::new();
            for k in [0.5 * k0, k0, 2.0 * k0, 1.0] {
                for s in [0.7, 1.0, 1.4] {
                    out.push(vec![k, s * m.m1 / k]);
                }
            }
            out
        }
        Family::Rician => {
            let mut out = Vec::new();
            for k in [0.01, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0] {
                for s in [0.7, 1.0, 1.4] {
                    out.push(vec![s * m.m2 / (2.0 * (k + 1.0)), (k * m.m2 / (k + 1.0)).sqrt()]);
                }
            }
            out
        }
    }
}

/// Least-squares parameters of `family`; nested families seed the larger
/// ones so that a richer family never fits worse than the one it contains.
fn least_squares(hist: &Histogram, samples_moments: &Moments, family: Family) -> (Vec<f64>, bool) {
    let centers = hist.centers();
    let objective = |p: &[f64]| {
        let params: Vec<f64> = p.iter().map(|x| x.exp()).collect();
        rss(hist, &centers, family, &params)
    };
    let mut starts = start_grid(family, samples_moments);
    match family {
        Family::Gamma => {
            let (e, _) = least_squares(hist, samples_moments, Family::Exponential);
            starts.push(vec![1.0, 1.0 / e[0]]);
        }
        Family::Rician => {
            let (r, _) = least_squares(hist, samples_moments, Family::Rayleigh);
            starts.push(vec![r[0], 1e-4 * r[0].sqrt()]);
        }
        _ => {}
    }
    let mut scored: Vec<(f64, Vec<f64>)> = starts
        .into_iter()
        .map(|p| {
            let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
            (objective(&lp), lp)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (value, start) in scored.into_iter().take(3) {
        let m = nelder_mead(objective, &start, 0.3, 1e-12, 2000 * family.n_params());
        let (v, x, conv) = if m.value <= value {
            (m.value, m.x, m.converged)
        } else {
            (value, start, false)
        };
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x, conv));
        }
    }
    let (_, x, converged) = best.expect("start grid is non-empty");
    (x.iter().map(|v| v.exp()).collect(), converged)
}

fn gamma_mle(samples: &[f64]) -> Result<Vec<f64>> {
    let pos: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.len() < 2 {
        return Err(AnalysisError::Degenerate);
    }
    let n = pos.len() as f64;
    let mean = pos.iter().sum::<f64>() / n;
    let s = mean.ln() - pos.iter().map(|x| x.ln()).sum::<f64>() / n;
    if !(s > 0.0) {
        return Err(AnalysisError::Degenerate);
    }
    // ln k - digamma(k) decreases monotonically from +inf to 0.
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k = mid.exp();
        if k.ln() - digamma(k) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    Ok(vec![k, mean / k])
}

fn max_likelihood(samples: &[f64], m: &Moments, family: Family) -> Result<(Vec<f64>, bool)> {
    Ok(match family {
        Family::Rayleigh => (vec![m.m2 / 2.0], true),
        Family::Exponential => (vec![1.0 / m.m1], true),
        Family::Gamma => (gamma_mle(samples)?, true),
        Family::Rician => {
            let nll = |p: &[f64]| -> f64 {
                let (s2, z) = (p[0].exp(), p[1].exp());
                samples
                    .iter()
                    .map(|&a| match rician_pdf(a, s2, z) {
                        Ok(v) if v > 0.0 => -v.ln(),
                        _ => 1e3,
                    })
                    .sum()
            };
            let starts = start_grid(Family::Rician, m);
            let start = starts
                .iter()
                .map(|p| vec![p[0].ln(), p[1].ln()])
                .min_by(|a, b| nll(a).total_cmp(&nll(b)))
                .expect("grid is non-empty");
            let r = nelder_mead(nll, &start, 0.3, 1e-12, 4000);
            (r.x.iter().map(|v| v.exp()).collect(), r.converged)
        }
    })
}

fn log_likelihood(samples: &[f64], family: Family, params: &[f64]) -> f64 {
    samples
        .iter()
        .map(|&x| match family.pdf(x, params) {
            Ok(v) if v > 0.0 && v.is_finite() => v.ln(),
            _ => f64::NEG_INFINITY,
        })
        .sum()
}

/// Likelihood-ratio test (95 %) of `family` against its nested member on the
/// distinct values of `samples`.
pub(crate) fn extra_parameter_significant(samples: &[f64], family: Family) -> bool {
    let Some(nested) = family.nested() else {
        return false;
    };
    let mut distinct: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return false;
    }
    let m = moments(&distinct);
    let (Ok((full, _)), Ok((reduced, _))) = (
        max_likelihood(&distinct, &m, family),
        max_likelihood(&distinct, &m, nested),
    ) else {
        return false;
    };
    let statistic = 2.0 * (log_likelihood(&distinct, family, &full) - log_likelihood(&distinct, nested, &reduced));
    let critical = ChiSquared::new(1.0)
        .map(|d| d.inverse_cdf(0.95))
        .unwrap_or(f64::INFINITY);
    statistic > critical
}

/// Fit `family` to a prepared histogram of `samples`.
///
/// Least-squares fits of a two-parameter family fall back to its nested
/// one-parameter member unless the extra parameter is significant.
pub fn fit_family(hist: &Histogram, samples: &[f64], family: Family, method: FitMethod) -> Result<HistogramFit> {
    if family == Family::Rayleigh || family == Family::Rician {
        if samples.iter().any(|&x| x < 0.0) {
            return Err(AnalysisError::Domain("amplitude samples must be non-negative".into()));
        }
    } else if samples.iter().any(|&x| x < 0.0) {
        return Err(AnalysisError::Domain("samples must be non-negative".into()));
    }
    let m = moments(samples);
    let centers = hist.centers();
    let (mut params, mut converged) = match method {
        FitMethod::LeastSquares => least_squares(hist, &m, family),
        FitMethod::MaxLikelihood => max_likelihood(samples, &m, family)?,
    };
    let mut rss_value = rss(hist, &centers, family, &params);
    let mut reduced = false;
    if let (FitMethod::LeastSquares, Some(nested)) = (method, family.nested()) {
        if !extra_parameter_significant(samples, family) {
            let (np, nconv) = least_squares(hist, &m, nested);
            let rss_nested = rss(hist, &centers, nested, &np);
            params = family.embed_nested(&np);
            converged = nconv;
            rss_value = rss_nested;
            reduced = true;
        }
    }
    let rmse = (rss_value / hist.n_bins() as f64).sqrt();
    Ok(HistogramFit {
        family,
        params,
        rmse,
        bin_edges: hist.edges.clone(),
        bin_densities: hist.densities.clone(),
        method,
        converged,
        reduced,
    })
}

/// Least-squares fit of `family` to the density histogram of `samples`.
pub fn fit_histogram(samples: &[f64], family: Family, bins: Bins) -> Result<HistogramFit> {
    let hist = Histogram::new(samples, bins)?;
    fit_family(&hist, samples, family, FitMethod::LeastSquares)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Gamma, Normal};

    fn rician_samples(n: usize, sigma: f64, z: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, sigma).unwrap();
        (0..n)
            .map(|_| (z + g.sample(&mut rng)).hypot(g.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn histogram_shape() {
        let s: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let h = Histogram::new(&s, Bins::Count(10)).unwrap();
        assert_eq!(h.n_bins(), 10);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(*h.edges.last().unwrap(), 1.0);
        let area: f64 = h.densities.iter().map(|d| d * 0.1).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!(matches!(
            Histogram::new(&[1.0; 500], Bins::default()),
            Err(AnalysisError::Degenerate)
        ));
        assert!(matches!(
            Histogram::new(&[1.0; 10], Bins::default()),
            Err(AnalysisError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn recovers_rayleigh() {
        let s = rician_samples(100_000, 2.0, 0.0, 3);
        let ray = fit_histogram(&s, Family::Rayleigh, Bins::default()).unwrap();
        let sigma = ray.params[0].sqrt();
        assert!((1.9..=2.1).contains(&sigma), "{sigma}");
        let ric = fit_histogram(&s, Family::Rician, Bins::default()).unwrap();
        assert!(ric.params[1] < 0.2 * ric.params[0].sqrt(), "{:?}", ric.params);
        assert!(ric.rmse <= ray.rmse * (1.0 + 1e-9));
    }

    #[test]
    fn rician_beats_rayleigh_on_rician_data() {
        let s = rician_samples(100_000, 1.0, 5.0, 4);
        let ray = fit_histogram(&s, Family::Rayleigh, Bins::default()).unwrap();
        let ric = fit_histogram(&s, Family::Rician, Bins::default()).unwrap();
        assert!(ric.rmse < ray.rmse);
        assert!((ric.params[1] - 5.0).abs() < 0.1, "{:?}", ric.params);
    }

    #[test]
    fn exponential_and_gamma_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e: Vec<f64> = Exp::new(2.0).unwrap().sample_iter(&mut rng).take(50_000).collect();
        let fe = fit_histogram(&e, Family::Exponential, Bins::default()).unwrap();
        assert!((fe.params[0] - 2.0).abs() < 0.1, "{:?}", fe.params);
        let fg = fit_histogram(&e, Family::Gamma, Bins::default()).unwrap();
        assert!(fg.rmse <= fe.rmse * (1.0 + 1e-9));
        let g: Vec<f64> = Gamma::new(3.0, 0.5)
            .unwrap()
            .sample_iter(&mut rng)
            .take(50_000)
            .collect();
        let hist = Histogram::new(&g, Bins::default()).unwrap();
        let mle = fit_family(&hist, &g, Family::Gamma, FitMethod::MaxLikelihood).unwrap();
        assert!(
            (mle.params[0] - 3.0).abs() < 0.1 && (mle.params[1] - 0.5).abs() < 0.02,
            "{:?}",
            mle.params
        );
        let ls = fit_family(&hist, &g, Family::Gamma, FitMethod::LeastSquares).unwrap();
        assert!((ls.params[0] - 3.0).abs() < 0.3, "{:?}", ls.params);
    }

    #[test]
    fn mle_modes() {
        let s = rician_samples(20_000, 1.0, 3.0, 6);
        let hist = Histogram::new(&s, Bins::default()).unwrap();
        let r = fit_family(&hist, &s, Family::Rician, FitMethod::MaxLikelihood).unwrap();
        assert!(
            (r.params[1] - 3.0).abs() < 0.1 && (r.params[0] - 1.0).abs() < 0.1,
            "{:?}",
            r.params
        );
        let ray = fit_family(&hist, &s, Family::Rayleigh, FitMethod::MaxLikelihood).unwrap();
        assert!((ray.params[0] - 5.5).abs() < 0.2, "{:?}", ray.params);
    }
}
