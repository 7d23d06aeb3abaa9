//! Fixtures shared by the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skychan::config::{LookSpec, SatelliteSpec, ScenarioConfig, GPS_ALTITUDE_M};
use skychan::sim::{prepare, synthesize_link, LinkOutcome, PreparedScenario, SimulatedLink};
use skychan::{ClusterSet, LspDraw, StateKind, SynthConfig};

/// One satellite at 50 degrees elevation, `duration_s` at 100 kHz.
pub fn scenario(duration_s: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        duration_s,
        channel_update_rate_hz: Some(100_000.0),
        master_seed: seed,
        satellites: vec![SatelliteSpec {
            id: 1,
            name: None,
            ephemeris: None,
            orbit: None,
            look: Some(LookSpec {
                elevation_deg: 50.0,
                azimuth_deg: 140.0,
                heading_deg: 90.0,
                altitude_m: GPS_ALTITUDE_M,
            }),
        }],
        ..ScenarioConfig::default()
    }
}

pub fn prepared(duration_s: f64, seed: u64) -> PreparedScenario {
    prepare(&scenario(duration_s, seed)).expect("fixture scenario prepares")
}

pub fn link(p: &PreparedScenario) -> SimulatedLink {
    match synthesize_link(p, 0).expect("fixture link synthesizes") {
        LinkOutcome::Simulated(l) => *l,
        LinkOutcome::Dropped { reason, .. } => panic!("fixture link dropped: {reason}"),
    }
}

/// Draws a GOOD-state cluster set at 30 ns delay spread.
pub fn cluster_set(seed: u64) -> ClusterSet {
    let lsp = LspDraw {
        ds: 30e-9,
        x_ds: 0.0,
        k_factor_db: Some(9.0),
        shadow_fading_db: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ClusterSet::generate(StateKind::Good, &lsp, &SynthConfig::default(), 0.0, &mut rng).expect("cluster draw")
}
