use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Result, SynthConfig, SynthError};
use crate::analysis::rms_delay_spread;
use crate::lsp::LspDraw;
use crate::pathloss::db_to_linear;
use crate::state_model::StateKind;

/// Unit-rms Laplacian offsets for 20 equal-power sub-paths (multiples of
/// the cluster azimuth spread).
const LAPLACIAN_OFFSETS_20: [f64; 10] = [
    0.0447, 0.1413, 0.2492, 0.3715, 0.5129, 0.6797, 0.8844, 1.1481, 1.5195, 2.1551,
];

/// Symmetric, unit-rms, Laplacian-shaped azimuth offsets for `m` sub-paths.
pub fn subpath_offsets(m: usize) -> Vec<f64> {
    if m == 20 {
        let mut out = Vec::with_capacity(20);
        for &o in &LAPLACIAN_OFFSETS_20 {
            out.push(o);
            out.push(-o);
        }
        return out;
    }
    if m == 1 {
        return vec![0.0];
    }
    // Laplacian quantiles at the mid-points of m equal-probability cells.
    let raw: Vec<f64> = (0..m)
        .map(|k| {
            let p = (k as f64 + 0.5) / m as f64;
            if p < 0.5 {
                (2.0 * p).ln()
            } else {
                -(2.0 * (1.0 - p)).ln()
            }
        })
        .collect();
    let rms = (raw.iter().map(|x| x * x).sum::<f64>() / m as f64).sqrt();
    raw.into_iter().map(|x| x / rms).collect()
}

/// Sorted excess delays (s) of `n` clusters, the first at zero.
pub fn generate_cluster_delays<R: Rng + ?Sized>(ds: f64, r_tau: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut tau: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -r_tau * ds * (1.0 - u).ln()
        })
        .collect();
    tau.sort_by(f64::total_cmp);
    let first = tau.first().copied().unwrap_or(0.0);
    tau.iter_mut().for_each(|t| *t -= first);
    tau
}

/// Normalised cluster powers for sorted delays `tau` and per-cluster
/// shadowing `zeta_db`. With a K-factor (GOOD) the result has one more entry
/// at the front: the direct path carrying `K/(K+1)` of the power.
pub fn generate_cluster_powers(
    tau: &[f64],
    ds: f64,
    r_tau: f64,
    zeta_db: &[f64],
    k_factor_db: Option<f64>,
) -> Result<Vec<f64>> {
    if tau.len() != zeta_db.len() {
        return Err(SynthError::DimensionMismatch(format!(
            "{} delays but {} shadowing terms",
            tau.len(),
            zeta_db.len()
        )));
    }
    if tau.is_empty() {
        return Err(SynthError::InvalidConfig("no clusters".into()));
    }
    let mut p: Vec<f64> = tau
        .iter()
        .zip(zeta_db)
        .map(|(&t, &z)| {
            let decay = if ds > 0.0 {
                (-t * (r_tau - 1.0) / (r_tau * ds)).exp()
            } else {
                1.0
            };
            decay * db_to_linear(-z)
        })
        .collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    if let Some(k_db) = k_factor_db {
        let k = db_to_linear(k_db);
        p.iter_mut().for_each(|x| *x /= k + 1.0);
        p.insert(0, k / (k + 1.0));
    }
    Ok(p)
}

/// Scale `tau` in place so that the rms delay spread under `powers` equals
/// `ds`. Sets with zero spread are left unchanged.
pub fn rescale_delays_to_ds(tau: &mut [f64], powers: &[f64], ds: f64) {
    let current = rms_delay_spread(powers, tau).unwrap_or(0.0);
    if current > 0.0 && ds.is_finite() {
        let s = ds / current;
        tau.iter_mut().for_each(|t| *t *= s);
    }
}

/// Random initial phases in `[-π, π)` and arrival azimuths (rad) of the
/// sub-paths of `n_clusters` clusters. Each cluster gets a uniform mean
/// azimuth; a direct path (first cluster when `direct_azimuth` is given) has
/// a single ray.
pub fn synthesize_subpaths<R: Rng + ?Sized>(
    n_clusters: usize,
    subpaths: usize,
    cluster_asa_rad: f64,
    direct_azimuth: Option<f64>,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let offsets = subpath_offsets(subpaths);
    let mut phases = Vec::with_capacity(n_clusters);
    let mut aoa = Vec::with_capacity(n_clusters);
    for c in 0..n_clusters {
        if c == 0 {
            if let Some(az) = direct_azimuth {
                phases.push(vec![rng.random_range(-PI..PI)]);
                aoa.push(vec![az]);
                continue;
            }
        }
        let mean: f64 = rng.random_range(0.0..TAU);
        let mut order: Vec<usize> = (0..subpaths).collect();
        // Random coupling of offsets to phases.
        for i in (1..subpaths).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        aoa.push(
            order
                .iter()
                .map(|&i| (mean + cluster_asa_rad * offsets[i]).rem_euclid(TAU))
                .collect(),
        );
        phases.push((0..subpaths).map(|_| rng.random_range(-PI..PI)).collect());
    }
    (phases, aoa)
}

/// Small-scale parameters of one state segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub state: StateKind,
    /// Excess delays (s), ascending, first at zero.
    pub delays: Vec<f64>,
    /// Normalised powers summing to one.
    pub powers: Vec<f64>,
    pub subpath_phases: Vec<Vec<f64>>,
    pub subpath_aoa: Vec<Vec<f64>>,
    /// First entry is a single-ray direct path.
    pub has_direct_path: bool,
    /// Delay spread (s) the set was drawn for.
    pub target_ds: f64,
}

impl ClusterSet {
    /// Draw a set for a segment in `state` with large-scale draws `lsp`.
    /// `los_azimuth` is the satellite azimuth (rad) at the segment start.
    pub fn generate<R: Rng + ?Sized>(
        state: StateKind,
        lsp: &LspDraw,
        config: &SynthConfig,
        los_azimuth: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = config.n_clusters(state);
        let r_tau = config.r_tau(state);
        let mpc_delays = generate_cluster_delays(lsp.ds, r_tau, n, rng);
        let zeta: Vec<f64> = (0..n)
            .map(|_| config.per_cluster_shadow_sigma_db * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let k = if state.is_los() { lsp.k_factor_db } else { None };
        let powers = generate_cluster_powers(&mpc_delays, lsp.ds, r_tau, &zeta, k)?;
        let mut delays = mpc_delays;
        if k.is_some() {
            delays.insert(0, 0.0);
        }
        if config.rescale_delays {
            rescale_delays_to_ds(&mut delays, &powers, lsp.ds);
        }
        let direct = k.is_some().then_some(los_azimuth);
        let (subpath_phases, subpath_aoa) = synthesize_subpaths(
            powers.len(),
            config.subpaths_per_cluster,
            config.cluster_asa_deg.to_radians(),
            direct,
            rng,
        );
        Ok(Self {
            state,
            delays,
            powers,
            subpath_phases,
            subpath_aoa,
            has_direct_path: k.is_some(),
            target_ds: lsp.ds,
        })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn rms_delay_spread(&self) -> f64 {
        rms_delay_spread(&self.powers, &self.delays).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offsets_are_unit_rms_and_symmetric() {
        for m in [1usize, 2, 5, 20, 33] {
            let o = subpath_offsets(m);
            assert_eq!(o.len(), m);
            let sum: f64 = o.iter().sum();
            assert!(sum.abs() < 1e-9, "{m}: {sum}");
            if m > 1 {
                let rms = (o.iter().map(|x| x * x).sum::<f64>() / m as f64).sqrt();
                assert!((rms - 1.0).abs() < 2e-3, "{m}: {rms}");
            }
        }
    }

    #[test]
    fn delays_sorted_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = generate_cluster_delays(100e-9, 2.5, 20, &mut rng);
        assert_eq!(tau[0], 0.0);
        assert!(tau.windows(2).all(|w| w[0] <= w[1]));
        assert!(tau.iter().all(|t| t.is_finite() && *t >= 0.0));
    }

    #[test]
    fn powers_normalised_with_direct_path() {
        let tau = [0.0, 50e-9, 120e-9];
        let p = generate_cluster_powers(&tau, 100e-9, 2.5, &[0.0; 3], None).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        let pk = generate_cluster_powers(&tau, 100e-9, 2.5, &[0.0; 3], Some(9.0)).unwrap();
        assert_eq!(pk.len(), 4);
        assert!((pk.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let k = db_to_linear(9.0);
        assert!((pk[0] - k / (k + 1.0)).abs() < 1e-15);
        assert!(generate_cluster_powers(&tau, 100e-9, 2.5, &[0.0; 2], None).is_err());
    }

    #[test]
    fn generated_set_hits_target_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = SynthConfig::default();
        for (state, k) in [(StateKind::Good, Some(9.0)), (StateKind::Bad, None)] {
            let lsp = LspDraw {
                ds: 87e-9,
                x_ds: 0.0,
                k_factor_db: k,
                shadow_fading_db: 0.0,
            };
            let set = ClusterSet::generate(state, &lsp, &cfg, 1.0, &mut rng).unwrap();
            assert_eq!(set.len(), cfg.n_clusters(state) + usize::from(k.is_some()));
            assert!(((set.rms_delay_spread() - 87e-9) / 87e-9).abs() < 1e-12);
            assert_eq!(set.subpath_phases.len(), set.len());
            if k.is_some() {
                assert_eq!(set.subpath_aoa[0], vec![1.0]);
                assert_eq!(set.subpath_phases[1].len(), 20);
            }
        }
    }
}
