#![allow(dead_code)]

use std::path::PathBuf;

use skychan::config::{LookSpec, SatelliteSpec, ScenarioConfig, GPS_ALTITUDE_M};
use skychan::sim::{prepare, synthesize_link, LinkOutcome, SimulatedLink};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn look(id: u32, elevation_deg: f64, azimuth_deg: f64, heading_deg: f64) -> SatelliteSpec {
    SatelliteSpec {
        id,
        name: None,
        ephemeris: None,
        orbit: None,
        look: Some(LookSpec {
            elevation_deg,
            azimuth_deg,
            heading_deg,
            altitude_m: GPS_ALTITUDE_M,
        }),
    }
}

/// 0.1 s at 100 kHz with a 50 km/h receiver.
pub fn desk_config(satellites: Vec<SatelliteSpec>, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        duration_s: 0.1,
        channel_update_rate_hz: Some(100_000.0),
        master_seed: seed,
        satellites,
        ..ScenarioConfig::default()
    }
}

/// Simulates every satellite, panicking on dropped links.
pub fn simulate_links(config: &ScenarioConfig) -> Vec<SimulatedLink> {
    let p = prepare(config).expect("scenario prepares");
    (0..p.satellites.len())
        .map(|i| match synthesize_link(&p, i).expect("link synthesizes") {
            LinkOutcome::Simulated(l) => *l,
            LinkOutcome::Dropped { id, reason } => panic!("satellite {id} dropped: {reason}"),
        })
        .collect()
}
