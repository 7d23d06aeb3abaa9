//! Scenario orchestration behind the `simulate`, `analyze` and `report`
//! commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    amplitude_series, doppler_shift, doppler_spectrum, fit_amplitudes, multipath_delay_stats, power_series,
    DopplerSpectrum, Family, HistogramFit, DELAY_FAMILIES,
};
use crate::config::{key_line, AnalysisConfig, ConfigError, SatelliteSpec, ScenarioConfig};
use crate::geometry::{
    doppler_angle_bounds, enu_basis, geodetic_to_ecef, orbit_ephemeris, position_from_look_angle, slant_range,
    straight_track, CircularOrbit, Trajectory, EARTH_RADIUS_M, EARTH_ROTATION_RAD_S,
};
use crate::io::{self, IoError};
use crate::lsp::{delay_spread_envelope, draw_segment_lsps, LspDraw};
use crate::pathloss::linear_to_db;
use crate::rng::{substream, Stage};
use crate::state_model::{build_state_sequence, initial_state, StateKind, StateSequence};
use crate::synth::{
    assemble_channel, min_channel_update_rate, AssembledLink, ChannelTensor, ClusterSet, LinkSeries, LinkSetup,
    MergeReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const BOUNDS_FILE: &str = "doppler_angle_bounds.csv";
/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SKYCHAN_THREADS";
/// Geometry samples kept per link in the sidecar metadata.
const GEOMETRY_SAMPLES: usize = 1000;
/// Floor of reported powers (dBm) for zero-power snapshots.
const POWER_FLOOR_DBM: f64 = -300.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("satellite {id}: {message}")]
    Link { id: u32, message: String },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

fn config_error(key: &str, message: String) -> SimError {
    SimError::Config(ConfigError {
        source_name: "config".into(),
        line: None,
        key: Some(key.into()),
        message,
    })
}

/// Worker threads requested through [`THREADS_ENV`].
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn run_parallel<T, F>(threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| SimError::Other(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Trajectories and sampling grid shared by every link of a scenario.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub rate_hz: f64,
    pub required_rate_hz: f64,
    pub timestamps: Vec<f64>,
    pub receiver: Trajectory,
    /// Earth-fixed satellite trajectories in configuration order.
    pub satellites: Vec<(SatelliteSpec, Trajectory)>,
}

fn ephemeris_step(duration_s: f64) -> f64 {
    (duration_s / 16.0).min(1.0)
}

fn link_error(id: u32) -> impl Fn(&dyn std::fmt::Display) -> SimError {
    move |e| SimError::Link {
        id,
        message: e.to_string(),
    }
}

fn satellite_trajectory(
    config: &ScenarioConfig,
    spec: &SatelliteSpec,
    rx0: &crate::geometry::Vec3,
) -> Result<Trajectory> {
    let err = link_error(spec.id);
    let step = ephemeris_step(config.duration_s);
    let rotate = |t: Trajectory| {
        if config.earth_rotation {
            t.to_earth_fixed(EARTH_ROTATION_RAD_S)
        } else {
            t
        }
    };
    if let Some(path) = &spec.ephemeris {
        return Ok(io::read_trajectory_csv(path)?);
    }
    let orbit = if let Some(o) = spec.orbit {
        CircularOrbit {
            altitude_m: o.altitude_m,
            inclination_rad: o.inclination_deg.to_radians(),
            raan_rad: o.raan_deg.to_radians(),
            phase_rad: o.phase_deg.to_radians(),
        }
    } else if let Some(l) = spec.look {
        let radius = EARTH_RADIUS_M + l.altitude_m;
        let el = l.elevation_deg.to_radians();
        let range = slant_range(rx0.norm(), radius, el);
        let pos = position_from_look_angle(rx0, el, l.azimuth_deg.to_radians(), range).map_err(|e| err(&e))?;
        let [e, n, _] = enu_basis(&pos).map_err(|e| err(&e))?;
        let h = l.heading_deg.to_radians();
        CircularOrbit::through(&pos, &(e * h.sin() + n * h.cos())).map_err(|e| err(&e))?
    } else {
        return Err(config_error(
            "satellites",
            format!("satellite {} has no trajectory source", spec.id),
        ));
    };
    let t = orbit_ephemeris(&orbit, 0.0, config.duration_s, step).map_err(|e| err(&e))?;
    Ok(rotate(t))
}

/// Builds trajectories and the snapshot grid, checking the channel update
/// rate against the minimum implied by the terminal paths.
pub fn prepare(config: &ScenarioConfig) -> Result<PreparedScenario> {
    let mut config = config.clone();
    config.synth.sample_density = config.sample_density;
    config.validate()?;
    let duration = config.duration_s;
    let r = &config.receiver;
    let rx0 = geodetic_to_ecef(r.latitude_deg.to_radians(), r.longitude_deg.to_radians(), r.height_m);
    let receiver = match &r.trajectory {
        Some(path) => io::read_trajectory_csv(path)?,
        None => straight_track(
            &rx0,
            r.heading_deg.to_radians(),
            config.rx_speed_mps,
            0.0,
            duration,
            ephemeris_step(duration),
        )
        .map_err(|e| SimError::Other(format!("receiver track: {e}")))?,
    };
    let rx_start = receiver
        .state_at(0.0)
        .map_err(|e| SimError::Other(format!("receiver trajectory: {e}")))?
        .0;
    let satellites = config
        .satellites
        .iter()
        .map(|s| satellite_trajectory(&config, s, &rx_start).map(|t| (s.clone(), t)))
        .collect::<Result<Vec<_>>>()?;
    let rx_path = receiver.path_length();
    let required_rate_hz = satellites
        .iter()
        .map(|(_, t)| t.path_length().max(rx_path))
        .fold(rx_path, f64::max);
    let required_rate_hz = min_channel_update_rate(required_rate_hz, config.sample_density, config.fc_hz, duration);
    let rate_hz = match config.channel_update_rate_hz {
        Some(rate) if rate < required_rate_hz => {
            return Err(config_error(
                "channel_update_rate_hz",
                format!("channel_update_rate_hz = {rate} Hz is below the required {required_rate_hz:.0} Hz"),
            ));
        }
        Some(rate) => rate,
        None => required_rate_hz.ceil().max(1.0),
    };
    let n = (duration * rate_hz).round() as usize;
    if n < 2 {
        return Err(config_error(
            "duration_s",
            format!("duration {duration} s yields {n} snapshots at {rate_hz} Hz"),
        ));
    }
    let timestamps = (0..n).map(|i| i as f64 / rate_hz).collect();
    Ok(PreparedScenario {
        config,
        rate_hz,
        required_rate_hz,
        timestamps,
        receiver,
        satellites,
    })
}

/// Every stage of one simulated link.
#[derive(Debug, Clone)]
pub struct SimulatedLink {
    pub id: u32,
    pub name: String,
    pub series: LinkSeries,
    pub states: StateSequence,
    pub lsps: Vec<LspDraw>,
    pub clusters: Vec<ClusterSet>,
    pub assembled: AssembledLink,
}

#[derive(Debug, Clone)]
pub enum LinkOutcome {
    /// The satellite dips below the elevation mask.
    Dropped {
        id: u32,
        reason: String,
    },
    Simulated(Box<SimulatedLink>),
}

/// Runs the full pipeline for satellite `index` of a prepared scenario.
pub fn synthesize_link(p: &PreparedScenario, index: usize) -> Result<LinkOutcome> {
    let (spec, sat) = &p.satellites[index];
    let cfg = &p.config;
    let id = spec.id;
    let err = link_error(id);
    let series = LinkSeries::from_trajectories(sat, &p.receiver, &p.timestamps).map_err(|e| err(&e))?;
    if let Some(i) = series
        .geometry
        .iter()
        .position(|g| g.elevation.to_degrees() < cfg.elevation_mask_deg)
    {
        return Ok(LinkOutcome::Dropped {
            id,
            reason: format!(
                "elevation {:.2} deg below the {} deg mask at t = {} s",
                series.geometry[i].elevation.to_degrees(),
                cfg.elevation_mask_deg,
                series.timestamps[i]
            ),
        });
    }
    let seed = cfg.master_seed;
    let plos = cfg.state.los_table();
    let durations = cfg.state.durations();
    let elev_deg = |d: f64| series.elevation_at_distance(d).to_degrees();
    let mut rng = substream(seed, id, Stage::States);
    let track = series.path_length();
    let states = if track > 0.0 {
        build_state_sequence(track, elev_deg, &plos, &durations, &mut rng).map_err(|e| err(&e))?
    } else {
        let u: f64 = rng.random();
        StateSequence::single(initial_state(elev_deg(0.0), &plos, u).map_err(|e| err(&e))?, 0.0)
    };
    let large_scale = cfg.lsp.large_scale();
    let mut rng = substream(seed, id, Stage::LargeScale);
    let lsps = draw_segment_lsps(
        &states,
        |d| series.elevation_at_distance(d),
        cfg.fc_hz / 1e9,
        &large_scale,
        &mut rng,
    )
    .map_err(|e| err(&e))?;
    let mut rng = substream(seed, id, Stage::Clusters);
    let clusters = states
        .segments()
        .iter()
        .zip(&lsps)
        .map(|(seg, lsp)| {
            let az = series.geometry[series.index_at_distance(seg.start_m)].azimuth;
            ClusterSet::generate(seg.state, lsp, &cfg.synth, az, &mut rng)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| err(&e))?;
    let setup = LinkSetup {
        fc_hz: cfg.fc_hz,
        rate_hz: p.rate_hz,
        tx_antenna: cfg.tx_antenna(),
        rx_antenna: cfg.rx_antenna(),
        pathloss_los: cfg.pathloss.los(),
        pathloss_nlos: cfg.pathloss.nlos(),
    };
    let assembled = assemble_channel(&series, &states, &lsps, &clusters, &setup, &cfg.synth).map_err(|e| err(&e))?;
    Ok(LinkOutcome::Simulated(Box::new(SimulatedLink {
        id,
        name: spec.label(),
        series,
        states,
        lsps,
        clusters,
        assembled,
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMeta {
    pub state: StateKind,
    pub start_m: f64,
    pub length_m: f64,
    /// Half-open range of owned snapshots.
    pub start_index: usize,
    pub end_index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub ds_s: f64,
    pub x_ds: f64,
    pub k_factor_db: Option<f64>,
    pub shadow_fading_db: f64,
    pub elevation_deg: f64,
    /// Delay-spread range at ±3σ of the spatial field.
    pub ds_envelope_s: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySample {
    pub t_s: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub d3d_m: f64,
    pub doppler_angle_sat_deg: f64,
    pub doppler_angle_rx_deg: f64,
    pub sat_speed_mps: f64,
    pub rx_speed_mps: f64,
    pub radial_rel_velocity_mps: f64,
    pub predicted_doppler_hz: f64,
    pub rx_distance_m: f64,
}

/// Sidecar written next to every channel dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMeta {
    pub id: u32,
    pub name: String,
    pub fc_hz: f64,
    pub rate_hz: f64,
    pub tx_power_dbm: f64,
    pub n_paths: usize,
    pub n_snapshots: usize,
    pub segments: Vec<SegmentMeta>,
    pub merges: Vec<MergeReport>,
    pub geometry: Vec<GeometrySample>,
}

impl LinkMeta {
    pub fn build(p: &PreparedScenario, link: &SimulatedLink) -> Result<Self> {
        let cfg = &p.config;
        let fc_ghz = cfg.fc_hz / 1e9;
        let ls = cfg.lsp.large_scale();
        let series = &link.series;
        let tensor = &link.assembled.tensor;
        let n = series.len();
        let segments = link
            .states
            .segments()
            .iter()
            .zip(&link.lsps)
            .zip(&link.assembled.segment_ranges)
            .map(|((seg, lsp), &(a, b))| {
                let elevation = series.elevation_at_distance(seg.start_m);
                let (lo, hi) = delay_spread_envelope(seg.state, ls.ds(seg.state), fc_ghz, elevation, 3.0);
                let time = |i: usize| series.timestamps[i.min(n - 1)];
                SegmentMeta {
                    state: seg.state,
                    start_m: seg.start_m,
                    length_m: seg.length_m,
                    start_index: a,
                    end_index: b,
                    start_s: time(a),
                    end_s: if b > a { time(b - 1) } else { time(a) },
                    ds_s: lsp.ds,
                    x_ds: lsp.x_ds,
                    k_factor_db: lsp.k_factor_db,
                    shadow_fading_db: lsp.shadow_fading_db,
                    elevation_deg: elevation.to_degrees(),
                    ds_envelope_s: [lo, hi],
                }
            })
            .collect();
        let sat = &p
            .satellites
            .iter()
            .find(|(s, _)| s.id == link.id)
            .expect("link belongs to scenario")
            .1;
        let stride = n.div_ceil(GEOMETRY_SAMPLES).max(1);
        let mut picks: Vec<usize> = (0..n).step_by(stride).collect();
        if picks.last() != Some(&(n - 1)) {
            picks.push(n - 1);
        }
        let geometry = picks
            .into_iter()
            .map(|i| {
                let t = series.timestamps[i];
                let g = &series.geometry[i];
                let speed = |traj: &Trajectory| traj.state_at(t).map(|(_, v)| v.norm());
                Ok(GeometrySample {
                    t_s: t,
                    elevation_deg: g.elevation.to_degrees(),
                    azimuth_deg: g.azimuth.to_degrees(),
                    d3d_m: g.d3d,
                    doppler_angle_sat_deg: g.doppler_angle_sat.to_degrees(),
                    doppler_angle_rx_deg: g.doppler_angle_rx.to_degrees(),
                    sat_speed_mps: speed(sat).map_err(|e| link_error(link.id)(&e))?,
                    rx_speed_mps: speed(&p.receiver).map_err(|e| link_error(link.id)(&e))?,
                    radial_rel_velocity_mps: g.radial_rel_velocity,
                    predicted_doppler_hz: doppler_shift(cfg.fc_hz, g.radial_rel_velocity),
                    rx_distance_m: series.rx_distance[i],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id: link.id,
            name: link.name.clone(),
            fc_hz: cfg.fc_hz,
            rate_hz: p.rate_hz,
            tx_power_dbm: cfg.link.tx_power_dbm,
            n_paths: tensor.n_paths(),
            n_snapshots: tensor.n_snapshots(),
            segments,
            merges: link.assembled.merges.clone(),
            geometry,
        })
    }

    pub fn mean_sat_speed(&self) -> f64 {
        self.geometry.iter().map(|g| g.sat_speed_mps).sum::<f64>() / self.geometry.len().max(1) as f64
    }

    pub fn mean_predicted_doppler(&self) -> f64 {
        self.geometry.iter().map(|g| g.predicted_doppler_hz).sum::<f64>() / self.geometry.len().max(1) as f64
    }

    /// Receiver distance (m) at time `t`, interpolated between samples.
    pub fn distance_at(&self, t: f64) -> f64 {
        let g = &self.geometry;
        let i = g.partition_point(|s| s.t_s <= t);
        if i == 0 {
            return g.first().map_or(0.0, |s| s.rx_distance_m);
        }
        if i == g.len() {
            return g[i - 1].rx_distance_m;
        }
        let (a, b) = (&g[i - 1], &g[i]);
        a.rx_distance_m + (b.rx_distance_m - a.rx_distance_m) * (t - a.t_s) / (b.t_s - a.t_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkOutput {
    pub id: u32,
    pub name: String,
    pub dump: String,
    pub meta: String,
    pub tensor_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLink {
    pub id: u32,
    pub reason: String,
}

/// Record of one `simulate` run; file names are relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub rate_hz: f64,
    pub required_rate_hz: f64,
    pub duration_s: f64,
    pub config: String,
    pub outputs: Vec<LinkOutput>,
    pub dropped: Vec<DroppedLink>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub rate_hz: Option<f64>,
    pub threads: Option<usize>,
}

impl SimulateOptions {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(r) = self.rate_hz {
            config.channel_update_rate_hz = Some(r);
        }
    }
}

pub fn dump_name(id: u32) -> String {
    format!("sat_{id}.skch")
}

pub fn meta_path(dump: &Path) -> PathBuf {
    dump.with_extension("meta.json")
}

/// Simulates every satellite of `config` into `out_dir`.
pub fn simulate(config: &ScenarioConfig, out_dir: &Path, options: &SimulateOptions) -> Result<RunManifest> {
    let start = Instant::now();
    let mut config = config.clone();
    options.apply(&mut config);
    let prepared = prepare(&config)?;
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let results = run_parallel(options.threads, prepared.satellites.len(), |i| {
        write_link(&prepared, i, out_dir)
    })?;
    let mut outputs = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r? {
            Ok(o) => outputs.push(o),
            Err(d) => {
                log::warn!("satellite {} dropped: {}", d.id, d.reason);
                dropped.push(d);
            }
        }
    }
    let resolved = out_dir.join(RESOLVED_CONFIG_FILE);
    std::fs::write(&resolved, prepared.config.to_toml_string())
        .map_err(|source| IoError::Io { path: resolved, source })?;
    let manifest = RunManifest {
        version: VERSION.into(),
        config_hash: prepared.config.hash(),
        seed: prepared.config.master_seed,
        rate_hz: prepared.rate_hz,
        required_rate_hz: prepared.required_rate_hz,
        duration_s: prepared.config.duration_s,
        config: RESOLVED_CONFIG_FILE.into(),
        outputs,
        dropped,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    io::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Loads `config_path`, applies `options` and simulates; configuration
/// errors are anchored to the offending line of the file.
pub fn simulate_file(config_path: &Path, out_dir: &Path, options: &SimulateOptions) -> Result<RunManifest> {
    let (config, text) = ScenarioConfig::load_with_text(config_path)?;
    simulate(&config, out_dir, options).map_err(|e| match e {
        SimError::Config(mut c) => {
            c.source_name = config_path.display().to_string();
            let from_flag = options.rate_hz.is_some() && c.key.as_deref() == Some("channel_update_rate_hz");
            if c.line.is_none() && !from_flag {
                c.line = c.key.as_deref().and_then(|k| key_line(&text, k));
            }
            SimError::Config(c)
        }
        other => other,
    })
}

fn write_link(
    p: &PreparedScenario,
    index: usize,
    out_dir: &Path,
) -> Result<std::result::Result<LinkOutput, DroppedLink>> {
    let link = match synthesize_link(p, index)? {
        LinkOutcome::Dropped { id, reason } => return Ok(Err(DroppedLink { id, reason })),
        LinkOutcome::Simulated(l) => l,
    };
    let dump = dump_name(link.id);
    let dump_path = out_dir.join(&dump);
    io::write_dump(&dump_path, &link.assembled.tensor)?;
    let meta_file = meta_path(&dump_path);
    io::write_json(&meta_file, &LinkMeta::build(p, &link)?)?;
    let tensor_csv = if p.config.output.tensor_csv {
        let name = format!("sat_{}.tensor.csv", link.id);
        io::write_tensor_csv(&out_dir.join(&name), &link.assembled.tensor)?;
        Some(name)
    } else {
        None
    };
    Ok(Ok(LinkOutput {
        id: link.id,
        name: link.name.clone(),
        dump,
        meta: meta_file.file_name().expect("file name").to_string_lossy().into_owned(),
        tensor_csv,
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalyzeOptions {
    pub bandwidth_hz: Option<f64>,
    pub nfft: Option<usize>,
    pub window_s: Option<f64>,
    pub power_threshold_db: Option<f64>,
    pub threads: Option<usize>,
}

impl AnalyzeOptions {
    pub fn settings(&self, base: AnalysisConfig) -> AnalysisConfig {
        AnalysisConfig {
            bandwidth_hz: self.bandwidth_hz.unwrap_or(base.bandwidth_hz),
            nfft: self.nfft.unwrap_or(base.nfft),
            window_s: self.window_s.unwrap_or(base.window_s),
            power_threshold_db: self.power_threshold_db.unwrap_or(base.power_threshold_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub family: String,
    pub params: Vec<f64>,
    pub rmse: f64,
    pub reduced: bool,
}

impl From<&HistogramFit> for FitSummary {
    fn from(f: &HistogramFit) -> Self {
        Self {
            family: f.family.name().into(),
            params: f.params.clone(),
            rmse: f.rmse,
            reduced: f.reduced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub mean_excess_delay_ns: Option<f64>,
    pub median_excess_delay_ns: Option<f64>,
    pub n_pooled: usize,
    pub n_distinct: usize,
    pub fits: Vec<FitSummary>,
    pub ranking: Vec<String>,
    pub insufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerSummary {
    pub window_s: f64,
    pub nfft: usize,
    pub bandwidth_hz: f64,
    pub resolution_hz: f64,
    pub n_windows: usize,
    pub peak_hz: f64,
    pub peak_power_db: f64,
    pub predicted_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleCheck {
    pub sat_speed_mps: f64,
    pub bound_min_deg: f64,
    pub bound_max_deg: f64,
    pub observed_min_deg: f64,
    pub observed_max_deg: f64,
    pub within: bool,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub dump: String,
    pub id: Option<u32>,
    pub n_paths: usize,
    pub n_snapshots: usize,
    pub fc_hz: f64,
    pub rate_hz: f64,
    pub tx_power_dbm: f64,
    pub mean_power_dbm: f64,
    pub amplitude_fits: Vec<FitSummary>,
    pub amplitude_best: Option<String>,
    pub delay: DelaySummary,
    pub ds_ns_min: f64,
    pub ds_ns_mean: f64,
    pub ds_ns_max: f64,
    pub doppler: Option<DopplerSummary>,
    pub doppler_angle: Option<AngleCheck>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOutcome {
    pub summaries: Vec<LinkSummary>,
    /// Dumps that could not be analysed, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

fn dumps_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.exists() {
        let m: RunManifest = io::read_json(&manifest)?;
        return Ok(m.outputs.iter().map(|o| dir.join(&o.dump)).collect());
    }
    let entries = std::fs::read_dir(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut dumps: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "skch"))
        .collect();
    dumps.sort();
    Ok(dumps)
}

fn to_dbm(power: f64, tx_power_dbm: f64) -> f64 {
    if power > 0.0 {
        tx_power_dbm + linear_to_db(power)
    } else {
        POWER_FLOOR_DBM
    }
}

/// Doppler spectrum over windows no longer than the tensor.
pub fn link_doppler_spectrum(
    tensor: &ChannelTensor,
    settings: &AnalysisConfig,
) -> crate::analysis::Result<DopplerSpectrum> {
    let span = tensor.n_snapshots() as f64 / tensor.rate_hz();
    doppler_spectrum(
        tensor,
        settings.bandwidth_hz,
        settings.nfft,
        settings.window_s.min(span),
    )
}

/// Writes the report set of one dump into `out_dir`.
pub fn analyze_dump(dump: &Path, settings: &AnalysisConfig, out_dir: &Path) -> Result<LinkSummary> {
    let tensor = io::read_dump(dump)?;
    let meta_file = meta_path(dump);
    let meta: Option<LinkMeta> = if meta_file.exists() {
        Some(io::read_json(&meta_file)?)
    } else {
        None
    };
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let tx = meta.as_ref().map_or(0.0, |m| m.tx_power_dbm);
    let mut notes = Vec::new();
    let ts = tensor.timestamps();

    let powers = power_series(&tensor);
    io::write_csv(
        &out_dir.join("power_series.csv"),
        &[],
        "t_s,power_dbm",
        ts.iter().zip(&powers).map(|(t, p)| vec![*t, to_dbm(*p, tx)]),
    )?;
    let mean_power = powers.iter().sum::<f64>() / powers.len() as f64;

    let amplitudes = amplitude_series(&tensor);
    let amplitude_fits = match fit_amplitudes(&amplitudes) {
        Ok(f) => f,
        Err(e) => {
            notes.push(format!("amplitude fit: {e}"));
            Vec::new()
        }
    };
    let amp_comments: Vec<String> = amplitude_fits
        .iter()
        .map(|f| format!("{} rmse={} params={:?}", f.family.name(), io::fmt_f64(f.rmse), f.params))
        .collect();
    let amp_rows: Vec<Vec<f64>> = match amplitude_fits.as_slice() {
        [ray, ric] => {
            let (c, ray_c, ric_c) = (ray.bin_centers(), ray.curve(), ric.curve());
            (0..c.len())
                .map(|i| vec![c[i], ray.bin_densities[i], ray_c[i], ric_c[i]])
                .collect()
        }
        _ => Vec::new(),
    };
    io::write_csv(
        &out_dir.join("amplitude_hist.csv"),
        &amp_comments,
        "bin_center,density,rayleigh_fit,rician_fit",
        amp_rows,
    )?;
    let amplitude_best = amplitude_fits
        .iter()
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
        .map(|f| f.family.name().to_string());

    let stats = multipath_delay_stats(&tensor, settings.power_threshold_db)
        .map_err(|e| SimError::Other(format!("{}: {e}", dump.display())))?;
    let mut delay_comments: Vec<String> = DELAY_FAMILIES
        .iter()
        .filter_map(|&fam| {
            stats
                .fit(fam)
                .map(|f| format!("rmse_{}={}", fam.name(), io::fmt_f64(f.rmse)))
        })
        .collect();
    if stats.insufficient {
        delay_comments.push("insufficient delays for fitting".into());
    }
    let delay_rows: Vec<Vec<f64>> = match (
        stats.fit(Family::Exponential),
        stats.fit(Family::Gamma),
        stats.fit(Family::Rayleigh),
    ) {
        (Some(e), Some(g), Some(r)) => {
            let (c, ec, gc, rc) = (e.bin_centers(), e.curve(), g.curve(), r.curve());
            (0..c.len())
                .map(|i| vec![c[i], e.bin_densities[i], ec[i], gc[i], rc[i]])
                .collect()
        }
        _ => Vec::new(),
    };
    io::write_csv(
        &out_dir.join("delay_hist.csv"),
        &delay_comments,
        "bin_center,density,exp_fit,gamma_fit,rayleigh_fit",
        delay_rows,
    )?;

    let ds_ns: Vec<f64> = stats.rms_ds_series.iter().map(|d| d * 1e9).collect();
    io::write_csv(
        &out_dir.join("ds_series.csv"),
        &[],
        "distance_m,ds_ns",
        ts.iter()
            .zip(&ds_ns)
            .map(|(t, d)| vec![meta.as_ref().map_or(f64::NAN, |m| m.distance_at(*t)), *d]),
    )?;

    let predicted = meta.as_ref().map(LinkMeta::mean_predicted_doppler);
    let doppler = match link_doppler_spectrum(&tensor, settings) {
        Ok(s) => {
            io::write_csv(
                &out_dir.join("doppler_psd.csv"),
                &[format!(
                    "peak_hz={} peak_power_db={}",
                    io::fmt_f64(s.peak_hz),
                    io::fmt_f64(s.peak_power_db)
                )],
                "hz,db",
                s.doppler_bins.iter().zip(&s.psd_db).map(|(f, p)| vec![*f, *p]),
            )?;
            Some(DopplerSummary {
                window_s: s.window_s,
                nfft: s.nfft,
                bandwidth_hz: settings.bandwidth_hz,
                resolution_hz: s.resolution_hz(),
                n_windows: s.n_windows,
                peak_hz: s.peak_hz,
                peak_power_db: s.peak_power_db,
                predicted_hz: predicted,
            })
        }
        Err(e) => {
            notes.push(format!("doppler spectrum: {e}"));
            io::write_csv(
                &out_dir.join("doppler_psd.csv"),
                &[format!("unavailable: {e}")],
                "hz,db",
                Vec::<Vec<f64>>::new(),
            )?;
            None
        }
    };

    let doppler_angle = meta.as_ref().and_then(angle_check);
    let finite_ds: Vec<f64> = ds_ns.iter().copied().filter(|d| d.is_finite()).collect();
    let summary = LinkSummary {
        dump: dump
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        id: meta.as_ref().map(|m| m.id),
        n_paths: tensor.n_paths(),
        n_snapshots: tensor.n_snapshots(),
        fc_hz: tensor.fc_hz(),
        rate_hz: tensor.rate_hz(),
        tx_power_dbm: tx,
        mean_power_dbm: to_dbm(mean_power, tx),
        amplitude_fits: amplitude_fits.iter().map(FitSummary::from).collect(),
        amplitude_best,
        delay: DelaySummary {
            mean_excess_delay_ns: Some(stats.mean_excess_delay_s * 1e9).filter(|v| v.is_finite()),
            median_excess_delay_ns: Some(stats.median_excess_delay_s * 1e9).filter(|v| v.is_finite()),
            n_pooled: stats.n_pooled,
            n_distinct: stats.n_distinct,
            fits: stats.fits.iter().map(FitSummary::from).collect(),
            ranking: stats.ranking.iter().map(|f| f.name().to_string()).collect(),
            insufficient: stats.insufficient,
        },
        ds_ns_min: finite_ds.iter().copied().fold(f64::INFINITY, f64::min).min(f64::MAX),
        ds_ns_mean: finite_ds.iter().sum::<f64>() / finite_ds.len().max(1) as f64,
        ds_ns_max: finite_ds.iter().copied().fold(0.0, f64::max),
        doppler,
        doppler_angle,
        notes,
    };
    io::write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn angle_check(meta: &LinkMeta) -> Option<AngleCheck> {
    let v = meta.mean_sat_speed();
    let (lo, hi) = doppler_angle_bounds(v).ok()?;
    let angles = meta.geometry.iter().map(|g| g.doppler_angle_sat_deg);
    let obs_min = angles.clone().fold(f64::INFINITY, f64::min);
    let obs_max = angles.fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (lo.to_degrees(), hi.to_degrees());
    let tol = 1e-9;
    Some(AngleCheck {
        sat_speed_mps: v,
        bound_min_deg: lo,
        bound_max_deg: hi,
        observed_min_deg: obs_min,
        observed_max_deg: obs_max,
        within: obs_min >= lo - tol && obs_max <= hi + tol,
    })
}

/// Analyses every dump in `input_dir`, writing reports to
/// `out_dir/<dump stem>/` and the combined Doppler-angle-bounds table.
pub fn analyze(input_dir: &Path, out_dir: &Path, options: &AnalyzeOptions) -> Result<AnalyzeOutcome> {
    let resolved = input_dir.join(RESOLVED_CONFIG_FILE);
    let base = if resolved.exists() {
        ScenarioConfig::load(&resolved)?.analysis
    } else {
        AnalysisConfig::default()
    };
    let settings = options.settings(base);
    if !settings.nfft.is_power_of_two() || !(settings.bandwidth_hz > 0.0) || !(settings.window_s > 0.0) {
        return Err(config_error(
            "analysis",
            "nfft must be a power of two; bandwidth and window must be positive".into(),
        ));
    }
    let dumps = dumps_in(input_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let results = run_parallel(options.threads, dumps.len(), |i| {
        let stem = dumps[i]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        analyze_dump(&dumps[i], &settings, &out_dir.join(stem))
    })?;
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in dumps.iter().zip(results) {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) => {
                log::error!("{e}");
                failures.push((path.clone(), e.to_string()));
            }
        }
    }
    let rows: Vec<Vec<f64>> = summaries
        .iter()
        .filter_map(|s| {
            let a = s.doppler_angle.as_ref()?;
            Some(vec![
                f64::from(s.id?),
                a.sat_speed_mps,
                a.bound_min_deg,
                a.bound_max_deg,
                a.observed_min_deg,
                a.observed_max_deg,
                if a.within { 1.0 } else { 0.0 },
            ])
        })
        .collect();
    io::write_csv(
        &out_dir.join(BOUNDS_FILE),
        &[],
        "sat_id,sat_speed_mps,bound_min_deg,bound_max_deg,observed_min_deg,observed_max_deg,within",
        rows,
    )?;
    Ok(AnalyzeOutcome { summaries, failures })
}

/// Human-readable summary of a `simulate` run.
pub fn report(manifest_path: &Path) -> Result<String> {
    let manifest: RunManifest = io::read_json(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let resolved = dir.join(&manifest.config);
    let settings = if resolved.exists() {
        ScenarioConfig::load(&resolved)?.analysis
    } else {
        AnalysisConfig::default()
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "run {} (skychan {}): seed {}, {} Hz, {} s, {} links, {} dropped",
        &manifest.config_hash[..12.min(manifest.config_hash.len())],
        manifest.version,
        manifest.seed,
        manifest.rate_hz,
        manifest.duration_s,
        manifest.outputs.len(),
        manifest.dropped.len()
    );
    for o in &manifest.outputs {
        let tensor = io::read_dump(&dir.join(&o.dump))?;
        let meta: LinkMeta = io::read_json(&dir.join(&o.meta))?;
        report_link(&mut out, o, &tensor, &meta, &settings);
    }
    for d in &manifest.dropped {
        let _ = writeln!(out, "satellite {} dropped: {}", d.id, d.reason);
    }
    Ok(out)
}

fn report_link(out: &mut String, o: &LinkOutput, tensor: &ChannelTensor, meta: &LinkMeta, settings: &AnalysisConfig) {
    let _ = writeln!(out, "satellite {} ({})", o.id, o.name);
    let _ = writeln!(out, "  timeline");
    let n = tensor.n_snapshots();
    let mut good = 0usize;
    for s in &meta.segments {
        let _ = writeln!(
            out,
            "    {:>10.6}-{:<10.6} s  {:<4}  {:>9.3} m  el {:>6.2} deg  ds {:>8.2} ns",
            s.start_s,
            s.end_s,
            if s.state.is_los() { "LOS" } else { "NLOS" },
            s.length_m,
            s.elevation_deg,
            s.ds_s * 1e9
        );
        if s.state.is_los() {
            good += s.end_index - s.start_index;
        }
    }
    let _ = writeln!(out, "  LOS {:.0}%", 100.0 * good as f64 / n.max(1) as f64);
    let powers = power_series(tensor);
    let mean = powers.iter().sum::<f64>() / n.max(1) as f64;
    let _ = writeln!(out, "  mean power {:.2} dBm", to_dbm(mean, meta.tx_power_dbm));

    let ds: Vec<f64> = (0..n).map(|t| tensor.snapshot_delay_spread(t)).collect();
    let mut outside = 0usize;
    let mut env_lo = f64::INFINITY;
    let mut env_hi = 0.0f64;
    for (k, s) in meta.segments.iter().enumerate() {
        let [mut lo, mut hi] = s.ds_envelope_s;
        env_lo = env_lo.min(lo);
        env_hi = env_hi.max(hi);
        let blend = if k > 0 {
            meta.merges.get(k - 1).map_or(0, |m| m.overlap)
        } else {
            0
        };
        for (j, t) in (s.start_index..s.end_index).enumerate() {
            if j < blend {
                let [plo, phi] = meta.segments[k - 1].ds_envelope_s;
                lo = lo.min(plo);
                hi = hi.max(phi);
            } else {
                [lo, hi] = s.ds_envelope_s;
            }
            let d = ds[t];
            if tensor.snapshot_power(t) > 0.0 && (d < lo * (1.0 - 1e-9) || d > hi * (1.0 + 1e-9)) {
                outside += 1;
            }
        }
    }
    let ds_min = ds.iter().copied().fold(f64::INFINITY, f64::min);
    let ds_max = ds.iter().copied().fold(0.0, f64::max);
    let flag = if outside == 0 {
        "OK".to_string()
    } else {
        format!("WARN {outside} snapshots outside")
    };
    let _ = writeln!(
        out,
        "  DS range [{:.3}, {:.3}] ns, 3-sigma envelope [{:.3}, {:.3}] ns {}",
        ds_min * 1e9,
        ds_max * 1e9,
        env_lo * 1e9,
        env_hi * 1e9,
        flag
    );
    let predicted = meta.mean_predicted_doppler();
    match link_doppler_spectrum(tensor, settings) {
        Ok(s) => {
            let _ = writeln!(
                out,
                "  Doppler peak {:.1} Hz, predicted {:.1} Hz, difference {:.1} Hz (resolution {:.2} Hz)",
                s.peak_hz,
                predicted,
                s.peak_hz - predicted,
                s.resolution_hz()
            );
        }
        Err(e) => {
            let _ = writeln!(out, "  Doppler peak unavailable ({e}), predicted {predicted:.1} Hz");
        }
    }
}
