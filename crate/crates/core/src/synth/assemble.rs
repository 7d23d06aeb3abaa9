use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::antenna::{antenna_gain, AntennaPattern};
use super::clusters::ClusterSet;
use super::tensor::{merge_segments, ChannelTensor, MergeReport, TensorMeta};
use super::{Result, SynthConfig, SynthError};
use crate::geometry::{ecef_to_enu, enu_basis, link_geometry, LinkGeometry, Trajectory, Vec3};
use crate::lsp::LspDraw;
use crate::pathloss::{db_to_linear, pathloss_db, PathlossParams, Scenario};
use crate::state_model::{StateKind, StateSequence};
use crate::SPEED_OF_LIGHT;

/// Per-snapshot geometry of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSeries {
    pub timestamps: Vec<f64>,
    pub geometry: Vec<LinkGeometry>,
    /// Unit vector from satellite to receiver (ECEF).
    pub sat_to_rx: Vec<Vec3>,
    /// Unit vector from receiver to satellite in the receiver's ENU frame.
    pub los_enu: Vec<Vec3>,
    /// Receiver horizontal velocity (east, north) in m/s.
    pub rx_velocity_en: Vec<[f64; 2]>,
    /// Receiver travelled distance (m), starting at 0.
    pub rx_distance: Vec<f64>,
}

impl LinkSeries {
    /// Sample both trajectories at `timestamps`.
    pub fn from_trajectories(sat: &Trajectory, rx: &Trajectory, timestamps: &[f64]) -> Result<Self> {
        let n = timestamps.len();
        let mut out = Self {
            timestamps: timestamps.to_vec(),
            geometry: Vec::with_capacity(n),
            sat_to_rx: Vec::with_capacity(n),
            los_enu: Vec::with_capacity(n),
            rx_velocity_en: Vec::with_capacity(n),
            rx_distance: Vec::with_capacity(n),
        };
        let mut prev: Option<Vec3> = None;
        let mut travelled = 0.0;
        for &t in timestamps {
            let (sp, sv) = sat.state_at(t)?;
            let (rp, rv) = rx.state_at(t)?;
            let geom = link_geometry(&sp, &sv, &rp, &rv)?;
            let [e, nn, _] = enu_basis(&rp)?;
            let los = (sp - rp) / geom.d3d;
            if let Some(p) = prev {
                travelled += (rp - p).norm();
            }
            prev = Some(rp);
            out.geometry.push(geom);
            out.sat_to_rx.push(-los);
            out.los_enu.push(ecef_to_enu(&los, &rp)?);
            out.rx_velocity_en.push([rv.dot(&e), rv.dot(&nn)]);
            out.rx_distance.push(travelled);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn path_length(&self) -> f64 {
        self.rx_distance.last().copied().unwrap_or(0.0)
    }

    /// Snapshot index at which the receiver has travelled `distance_m`.
    pub fn index_at_distance(&self, distance_m: f64) -> usize {
        self.rx_distance
            .partition_point(|&d| d < distance_m)
            .min(self.len().saturating_sub(1))
    }

    /// Satellite elevation (rad) once the receiver has travelled `distance_m`.
    pub fn elevation_at_distance(&self, distance_m: f64) -> f64 {
        self.geometry[self.index_at_distance(distance_m)].elevation
    }
}

/// Radio parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSetup {
    pub fc_hz: f64,
    pub rate_hz: f64,
    pub tx_antenna: AntennaPattern,
    /// Receiver pattern; its pointing is expressed in the local ENU frame.
    pub rx_antenna: AntennaPattern,
    pub pathloss_los: PathlossParams,
    pub pathloss_nlos: PathlossParams,
}

impl LinkSetup {
    fn pathloss(&self, state: StateKind) -> &PathlossParams {
        match Scenario::from(state) {
            Scenario::NtnUrbanLos => &self.pathloss_los,
            Scenario::NtnUrbanNlos => &self.pathloss_nlos,
        }
    }
}

/// Output of [`assemble_channel`].
#[derive(Debug, Clone)]
pub struct AssembledLink {
    pub tensor: ChannelTensor,
    /// State of the segment owning each snapshot.
    pub snapshot_states: Vec<StateKind>,
    /// Half-open snapshot range of every state segment (empty when the
    /// segment is shorter than the snapshot spacing).
    pub segment_ranges: Vec<(usize, usize)>,
    pub merges: Vec<MergeReport>,
}

/// Instantaneous Doppler shift (Hz) of a sub-path arriving from azimuth
/// `aoa` for a satellite radial velocity `sat_radial` and receiver velocity
/// `rx_velocity_en`.
pub fn subpath_doppler_hz(fc_hz: f64, sat_radial: f64, rx_velocity_en: [f64; 2], aoa: f64) -> f64 {
    fc_hz / SPEED_OF_LIGHT * (sat_radial + rx_velocity_en[0] * aoa.sin() + rx_velocity_en[1] * aoa.cos())
}

fn trapezoid(t: &[f64], f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (f(i - 1) + f(i)) * (t[i] - t[i - 1]);
        }
        out.push(acc);
    }
    out
}

struct Evolution {
    /// Radial closing distance from the satellite motion alone (m).
    sat: Vec<f64>,
    /// Radial closing distance of the direct path (m).
    direct: Vec<f64>,
    /// Receiver horizontal displacement (m).
    east: Vec<f64>,
    north: Vec<f64>,
    /// Amplitude scale without shadow fading, GOOD and BAD.
    scale: [Vec<f64>; 2],
}

fn evolution(series: &LinkSeries, setup: &LinkSetup) -> Result<Evolution> {
    let t = &series.timestamps;
    let g = &series.geometry;
    let fc_ghz = setup.fc_hz / 1e9;
    let mut scale = [Vec::with_capacity(t.len()), Vec::with_capacity(t.len())];
    for i in 0..t.len() {
        let tx = setup.tx_antenna.steered(&series.sat_to_rx[i]);
        let gain = antenna_gain(&tx, &series.sat_to_rx[i]) * antenna_gain(&setup.rx_antenna, &series.los_enu[i]);
        for (k, state) in [StateKind::Good, StateKind::Bad].into_iter().enumerate() {
            let pl = pathloss_db(g[i].d3d, fc_ghz, g[i].elevation, setup.pathloss(state))?;
            scale[k].push((gain / db_to_linear(pl)).sqrt());
        }
    }
    Ok(Evolution {
        sat: trapezoid(t, |i| g[i].sat_radial_velocity),
        direct: trapezoid(t, |i| g[i].radial_rel_velocity),
        east: trapezoid(t, |i| series.rx_velocity_en[i][0]),
        north: trapezoid(t, |i| series.rx_velocity_en[i][1]),
        scale,
    })
}

fn segment_tensor(
    clusters: &ClusterSet,
    lsp: &LspDraw,
    evo: &Evolution,
    series: &LinkSeries,
    range: (usize, usize),
    meta: TensorMeta,
) -> Result<ChannelTensor> {
    let (a, e) = range;
    let n_t = e - a;
    let k = TAU * meta.fc_hz / SPEED_OF_LIGHT;
    let sf = db_to_linear(lsp.shadow_fading_db).sqrt();
    let scale = &evo.scale[usize::from(!clusters.state.is_los())];
    let n = clusters.len();
    let mut h = Vec::with_capacity(n * n_t);
    let mut tau = Vec::with_capacity(n * n_t);
    for c in 0..n {
        let amp = clusters.powers[c].sqrt() * sf;
        let direct = c == 0 && clusters.has_direct_path;
        let phases = &clusters.subpath_phases[c];
        let waves: Vec<(f64, f64)> = clusters.subpath_aoa[c]
            .iter()
            .map(|az| (k * az.sin(), k * az.cos()))
            .collect();
        let norm = 1.0 / (phases.len() as f64).sqrt();
        for t in a..e {
            let coeff = if direct {
                Complex64::from_polar(1.0, phases[0] + k * evo.direct[t])
            } else {
                let sum: Complex64 = phases
                    .iter()
                    .zip(&waves)
                    .map(|(p, (ke, kn))| Complex64::from_polar(1.0, p + ke * evo.east[t] + kn * evo.north[t]))
                    .sum();
                sum * norm * Complex64::from_polar(1.0, k * evo.sat[t])
            };
            h.push(coeff * amp * scale[t]);
            tau.push(clusters.delays[c]);
        }
    }
    ChannelTensor::new(n, h, tau, series.timestamps[a..e].to_vec(), meta)
}

/// Build the channel tensor of one link.
///
/// `lsps` and `clusters` hold one entry per segment of `states`. Snapshots
/// are assigned to segments by receiver travelled distance, and neighbouring
/// segments are cross-faded over a short overlap.
pub fn assemble_channel(
    series: &LinkSeries,
    states: &StateSequence,
    lsps: &[LspDraw],
    clusters: &[ClusterSet],
    setup: &LinkSetup,
    config: &SynthConfig,
) -> Result<AssembledLink> {
    let n_seg = states.len();
    if lsps.len() != n_seg || clusters.len() != n_seg {
        return Err(SynthError::DimensionMismatch(format!(
            "{n_seg} segments but {} draws and {} cluster sets",
            lsps.len(),
            clusters.len()
        )));
    }
    if series.is_empty() {
        return Err(SynthError::DimensionMismatch("no snapshots".into()));
    }
    let owner: Vec<usize> = series.rx_distance.iter().map(|&d| states.segment_index_at(d)).collect();
    let mut segment_ranges = vec![(0usize, 0usize); n_seg];
    let mut t = 0;
    for (k, range) in segment_ranges.iter_mut().enumerate() {
        let start = t;
        while t < owner.len() && owner[t] <= k {
            t += 1;
        }
        *range = (start, t);
    }
    let active: Vec<usize> = (0..n_seg)
        .filter(|&k| segment_ranges[k].1 > segment_ranges[k].0)
        .collect();

    let evo = evolution(series, setup)?;
    let meta = TensorMeta {
        fc_hz: setup.fc_hz,
        rate_hz: setup.rate_hz,
    };
    let max_overlap = ((config.max_overlap_s * setup.rate_hz).round() as usize).max(1);
    let overlap_with_next = |i: usize| -> usize {
        let Some(&next) = active.get(i + 1) else { return 0 };
        let (a, b) = segment_ranges[active[i]];
        let (c, d) = segment_ranges[next];
        let shorter = (b - a).min(d - c);
        ((config.overlap_fraction * shorter as f64).round() as usize)
            .clamp(1, max_overlap)
            .min(d - c)
    };

    let mut acc: Option<ChannelTensor> = None;
    let mut merges = Vec::new();
    let mut carried = 0;
    for (i, &k) in active.iter().enumerate() {
        let (a, b) = segment_ranges[k];
        let ov = overlap_with_next(i);
        let seg = segment_tensor(&clusters[k], &lsps[k], &evo, series, (a, b + ov), meta)?;
        acc = Some(match acc {
            None => seg,
            Some(prev) => {
                let (m, report) = merge_segments(&prev, &seg, carried)?;
                merges.push(report);
                m
            }
        });
        carried = ov;
    }
    let tensor = acc.expect("at least one segment owns a snapshot");
    Ok(AssembledLink {
        tensor,
        snapshot_states: owner.iter().map(|&k| states.segments()[k].state).collect(),
        segment_ranges,
        merges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geodetic_to_ecef, position_from_look_angle};
    use crate::state_model::Segment;

    fn setup() -> LinkSetup {
        LinkSetup {
            fc_hz: 1.575_42e9,
            rate_hz: 1000.0,
            tx_antenna: AntennaPattern::isotropic(0.0),
            rx_antenna: AntennaPattern::isotropic(0.0),
            pathloss_los: PathlossParams::NTN_URBAN_LOS,
            pathloss_nlos: PathlossParams::NTN_URBAN_NLOS,
        }
    }

    fn static_series(n: usize, rx_speed: f64) -> LinkSeries {
        let rx0 = geodetic_to_ecef(0.5, 0.2, 0.0);
        let sat = position_from_look_angle(&rx0, 1.0, 0.3, 2.0e7).unwrap();
        let [e, _, _] = enu_basis(&rx0).unwrap();
        let ts: Vec<f64> = (0..=n + 1).map(|i| i as f64 * 1e-3).collect();
        let sat_traj = Trajectory::new(ts.clone(), vec![sat; ts.len()], Some(vec![Vec3::zeros(); ts.len()])).unwrap();
        let rx_pos: Vec<Vec3> = ts.iter().map(|&t| rx0 + e * (rx_speed * t)).collect();
        let rx_traj = Trajectory::new(ts.clone(), rx_pos, Some(vec![e * rx_speed; ts.len()])).unwrap();
        LinkSeries::from_trajectories(&sat_traj, &rx_traj, &ts[..n]).unwrap()
    }

    fn single_cluster(state: StateKind, phases: Vec<f64>) -> ClusterSet {
        let m = phases.len();
        ClusterSet {
            state,
            delays: vec![0.0],
            powers: vec![1.0],
            subpath_aoa: vec![vec![0.0; m]],
            subpath_phases: vec![phases],
            has_direct_path: false,
            target_ds: 0.0,
        }
    }

    fn lsp() -> LspDraw {
        LspDraw {
            ds: 0.0,
            x_ds: 0.0,
            k_factor_db: None,
            shadow_fading_db: 0.0,
        }
    }

    #[test]
    fn opposite_phases_cancel() {
        let series = static_series(5, 0.0);
        let states = StateSequence::single(StateKind::Bad, 0.0);
        let set = single_cluster(StateKind::Bad, vec![0.0, std::f64::consts::PI]);
        let out = assemble_channel(&series, &states, &[lsp()], &[set], &setup(), &SynthConfig::default()).unwrap();
        assert!(out.tensor.h().iter().all(|h| h.norm() < 1e-20));
    }

    #[test]
    fn static_link_has_constant_power_at_pathloss() {
        let series = static_series(20, 0.0);
        let states = StateSequence::single(StateKind::Bad, 0.0);
        let set = single_cluster(StateKind::Bad, vec![0.3]);
        let out = assemble_channel(&series, &states, &[lsp()], &[set], &setup(), &SynthConfig::default()).unwrap();
        let g = series.geometry[0];
        let pl = pathloss_db(g.d3d, 1.575_42, g.elevation, &PathlossParams::NTN_URBAN_NLOS).unwrap();
        for t in 0..20 {
            let p = out.tensor.snapshot_power(t);
            assert!((10.0 * p.log10() + pl).abs() < 1e-9);
        }
    }

    #[test]
    fn moving_receiver_rotates_phase_at_doppler() {
        let v = 10.0;
        let series = static_series(50, v);
        let states = StateSequence::single(StateKind::Bad, series.path_length());
        let mut set = single_cluster(StateKind::Bad, vec![0.0]);
        set.subpath_aoa = vec![vec![std::f64::consts::FRAC_PI_2]];
        let out = assemble_channel(&series, &states, &[lsp()], &[set], &setup(), &SynthConfig::default()).unwrap();
        let row = out.tensor.path_row(0);
        let expected = subpath_doppler_hz(1.575_42e9, 0.0, [v, 0.0], std::f64::consts::FRAC_PI_2);
        let measured = (row[1] * row[0].conj()).arg() / (TAU * 1e-3);
        assert!(
            (measured - expected).abs() < 1e-6 * expected.abs(),
            "{measured} vs {expected}"
        );
    }

    #[test]
    fn segments_split_and_merge() {
        let series = static_series(200, 10.0);
        let len = series.path_length();
        let states = StateSequence::new(vec![
            Segment {
                state: StateKind::Good,
                start_m: 0.0,
                length_m: len / 2.0,
            },
            Segment {
                state: StateKind::Bad,
                start_m: len / 2.0,
                length_m: len / 2.0,
            },
        ])
        .unwrap();
        let good = ClusterSet {
            has_direct_path: true,
            ..single_cluster(StateKind::Good, vec![0.0])
        };
        let bad = single_cluster(StateKind::Bad, vec![0.1, 0.2]);
        let out = assemble_channel(
            &series,
            &states,
            &[lsp(), lsp()],
            &[good, bad],
            &setup(),
            &SynthConfig::default(),
        )
        .unwrap();
        assert_eq!(out.tensor.n_snapshots(), 200);
        assert_eq!(out.merges.len(), 1);
        assert_eq!(out.merges[0].overlap, 25);
        assert_eq!(out.segment_ranges[0].1, out.segment_ranges[1].0);
        assert_eq!(out.snapshot_states[0], StateKind::Good);
        assert_eq!(out.snapshot_states[199], StateKind::Bad);
        assert_eq!(out.tensor.timestamps(), &series.timestamps[..]);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let series = static_series(5, 0.0);
        let states = StateSequence::single(StateKind::Bad, 0.0);
        assert!(assemble_channel(&series, &states, &[], &[], &setup(), &SynthConfig::default()).is_err());
    }
}
