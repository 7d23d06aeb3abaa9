//! Scenario configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lsp::{DelaySpreadParams, LargeScaleConfig, NormalDb};
use crate::pathloss::PathlossParams;
use crate::state_model::{DurationParams, LosProbabilityTable, MIN_DURATION_TABLE};
use crate::synth::{AntennaKind, AntennaPattern, SynthConfig};

/// Nominal GPS orbit altitude (m).
pub const GPS_ALTITUDE_M: f64 = 20_200_000.0;

/// Configuration error, anchored to a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    /// 1-based line and column.
    pub line: Option<(usize, usize)>,
    /// Dotted key the error refers to.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some((l, c)) => write!(f, "{}:{}:{}: {}", self.source_name, l, c, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    pub mu_good: f64,
    pub sigma_good: f64,
    pub mu_bad: f64,
    pub sigma_bad: f64,
    pub min_duration_table: Vec<[f64; 3]>,
    pub redraw_limit: u32,
    /// Rows of (elevation deg, LOS probability).
    pub plos_table: Vec<[f64; 2]>,
}

impl Default for StateConfig {
    fn default() -> Self {
        let d = DurationParams::default();
        Self {
            mu_good: d.mu_good,
            sigma_good: d.sigma_good,
            mu_bad: d.mu_bad,
            sigma_bad: d.sigma_bad,
            min_duration_table: MIN_DURATION_TABLE.to_vec(),
            redraw_limit: d.redraw_limit,
            plos_table: LosProbabilityTable::default().rows,
        }
    }
}

impl StateConfig {
    pub fn durations(&self) -> DurationParams {
        DurationParams {
            mu_good: self.mu_good,
            sigma_good: self.sigma_good,
            mu_bad: self.mu_bad,
            sigma_bad: self.sigma_bad,
            min_duration_table: self.min_duration_table.clone(),
            redraw_limit: self.redraw_limit,
        }
    }

    pub fn los_table(&self) -> LosProbabilityTable {
        LosProbabilityTable {
            rows: self.plos_table.clone(),
        }
    }
}

/// Partial override of one pathloss scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pl_atm: Option<f64>,
}

impl PathlossOverride {
    pub fn apply(&self, base: PathlossParams) -> PathlossParams {
        PathlossParams {
            a: self.a.unwrap_or(base.a),
            b: self.b.unwrap_or(base.b),
            c: self.c.unwrap_or(base.c),
            d: self.d.unwrap_or(base.d),
            pl_atm: self.pl_atm.unwrap_or(base.pl_atm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub los: PathlossOverride,
    pub nlos: PathlossOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossConfig {
    pub scenario_overrides: ScenarioOverrides,
}

impl PathlossConfig {
    pub fn los(&self) -> PathlossParams {
        self.scenario_overrides.los.apply(PathlossParams::NTN_URBAN_LOS)
    }

    pub fn nlos(&self) -> PathlossParams {
        self.scenario_overrides.nlos.apply(PathlossParams::NTN_URBAN_NLOS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub tx_power_dbm: f64,
    /// Boresight gain of the satellite antenna.
    pub tx_gain_dbi: f64,
    /// Boresight gain of the receiver antenna.
    pub rx_gain_dbi: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 0.0,
            tx_gain_dbi: 40.0,
            rx_gain_dbi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsConfig {
    pub los: DelaySpreadParams,
    pub nlos: DelaySpreadParams,
}

impl Default for DsConfig {
    fn default() -> Self {
        Self {
            los: DelaySpreadParams::NTN_URBAN_LOS,
            nlos: DelaySpreadParams::NTN_URBAN_NLOS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfConfig {
    /// Sets both states when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub sigma_los: f64,
    pub sigma_nlos: f64,
}

impl Default for SfConfig {
    fn default() -> Self {
        let d = LargeScaleConfig::default();
        Self {
            sigma: None,
            sigma_los: d.sf_sigma_los,
            sigma_nlos: d.sf_sigma_nlos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LspConfig {
    pub ds: DsConfig,
    pub k: NormalDb,
    pub sf: SfConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_correlation: Option<[[f64; 3]; 3]>,
}

impl Default for LspConfig {
    fn default() -> Self {
        Self {
            ds: DsConfig::default(),
            k: LargeScaleConfig::default().k,
            sf: SfConfig::default(),
            cross_correlation: None,
        }
    }
}

impl LspConfig {
    pub fn large_scale(&self) -> LargeScaleConfig {
        LargeScaleConfig {
            ds_los: self.ds.los,
            ds_nlos: self.ds.nlos,
            k: self.k,
            sf_sigma_los: self.sf.sigma.unwrap_or(self.sf.sigma_los),
            sf_sigma_nlos: self.sf.sigma.unwrap_or(self.sf.sigma_nlos),
            cross_correlation: self.cross_correlation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    pub tx_kind: AntennaKind,
    pub tx_beamwidth_deg: f64,
    pub rx_kind: AntennaKind,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            tx_kind: AntennaKind::Dish,
            tx_beamwidth_deg: 2.2,
            rx_kind: AntennaKind::Patch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub bandwidth_hz: f64,
    pub nfft: usize,
    pub window_s: f64,
    pub power_threshold_db: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 2e6,
            nfft: 1024,
            window_s: 1.0,
            power_threshold_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub height_m: f64,
    /// Direction of travel, clockwise from North.
    pub heading_deg: f64,
    /// Trajectory CSV (ECEF) replacing the straight track.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also export every tensor as CSV, one row per (path, snapshot).
    pub tensor_csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub phase_deg: f64,
}

/// Satellite placed at a look angle from the receiver at `t = 0`, moving
/// along `heading_deg` (clockwise from North in the satellite's local
/// horizontal plane) on a circular orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookSpec {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub heading_deg: f64,
    #[serde(default = "gps_altitude")]
    pub altitude_m: f64,
}

fn gps_altitude() -> f64 {
    GPS_ALTITUDE_M
}

/// One satellite: exactly one of `ephemeris`, `orbit` or `look`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSpec {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Trajectory CSV in the Earth-fixed frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ephemeris: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look: Option<LookSpec>,
}

impl SatelliteSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("sat{:02}", self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    pub elevation_mask_deg: f64,
    pub fc_hz: f64,
    pub sample_density: f64,
    /// Computed from the terminal paths when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_update_rate_hz: Option<f64>,
    pub rx_speed_mps: f64,
    pub master_seed: u64,
    /// Generated orbits are inertial; rotate them into the Earth-fixed frame.
    pub earth_rotation: bool,
    pub receiver: ReceiverConfig,
    pub link: LinkConfig,
    pub antenna: AntennaConfig,
    pub state: StateConfig,
    pub pathloss: PathlossConfig,
    pub lsp: LspConfig,
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
    pub satellites: Vec<SatelliteSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            elevation_mask_deg: 15.0,
            fc_hz: 1.575_42e9,
            sample_density: 5.0,
            channel_update_rate_hz: None,
            rx_speed_mps: 50.0 / 3.6,
            master_seed: 0,
            earth_rotation: true,
            receiver: ReceiverConfig::default(),
            link: LinkConfig::default(),
            antenna: AntennaConfig::default(),
            state: StateConfig::default(),
            pathloss: PathlossConfig::default(),
            lsp: LspConfig::default(),
            synth: SynthConfig::default(),
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
            satellites: Vec::new(),
        }
    }
}

/// Problem found by validation: dotted key path and message.
type Issue = (String, String);

impl ScenarioConfig {
    pub fn tx_antenna(&self) -> AntennaPattern {
        pattern(
            self.antenna.tx_kind,
            self.link.tx_gain_dbi,
            self.antenna.tx_beamwidth_deg,
        )
    }

    pub fn rx_antenna(&self) -> AntennaPattern {
        pattern(
            self.antenna.rx_kind,
            self.link.rx_gain_dbi,
            self.antenna.tx_beamwidth_deg,
        )
    }

    fn issues(&self) -> Vec<Issue> {
        let mut out: Vec<Issue> = Vec::new();
        let mut check = |ok: bool, key: &str, msg: String| {
            if !ok {
                out.push((key.to_string(), msg));
            }
        };
        check(
            self.duration_s > 0.0 && self.duration_s.is_finite(),
            "duration_s",
            format!("duration_s must be positive (got {})", self.duration_s),
        );
        check(
            (0.0..90.0).contains(&self.elevation_mask_deg),
            "elevation_mask_deg",
            format!(
                "elevation_mask_deg must lie in [0, 90) (got {})",
                self.elevation_mask_deg
            ),
        );
        check(
            self.fc_hz > 0.0 && self.fc_hz.is_finite(),
            "fc_hz",
            format!("fc_hz must be positive (got {})", self.fc_hz),
        );
        check(
            self.sample_density > 0.0,
            "sample_density",
            format!("sample_density must be positive (got {})", self.sample_density),
        );
        if let Some(r) = self.channel_update_rate_hz {
            check(
                r > 0.0 && r.is_finite(),
                "channel_update_rate_hz",
                format!("channel_update_rate_hz must be positive (got {r})"),
            );
        }
        check(
            self.rx_speed_mps >= 0.0 && self.rx_speed_mps.is_finite(),
            "rx_speed_mps",
            format!("rx_speed_mps must be non-negative (got {})", self.rx_speed_mps),
        );
        check(
            self.antenna.tx_beamwidth_deg > 0.0,
            "antenna.tx_beamwidth_deg",
            "beamwidth must be positive".into(),
        );
        if let Err(e) = self.state.durations().validate() {
            check(false, "state", e.to_string());
        }
        if let Err(e) = self.state.los_table().validate() {
            check(false, "state.plos_table", e.to_string());
        }
        for (key, ds) in [("lsp.ds.los", &self.lsp.ds.los), ("lsp.ds.nlos", &self.lsp.ds.nlos)] {
            if let Err(e) = ds.validate() {
                check(false, key, e.to_string());
            }
        }
        if let Err(e) = self.lsp.large_scale().validate() {
            check(false, "lsp", e.to_string());
        }
        if let Err(e) = self.synth.validate() {
            check(false, "synth", e.to_string());
        }
        check(
            self.analysis.nfft.is_power_of_two(),
            "analysis.nfft",
            format!("nfft must be a power of two (got {})", self.analysis.nfft),
        );
        check(
            self.analysis.bandwidth_hz > 0.0,
            "analysis.bandwidth_hz",
            "bandwidth must be positive".into(),
        );
        check(
            self.analysis.window_s > 0.0,
            "analysis.window_s",
            "window must be positive".into(),
        );
        let mut ids: Vec<u32> = Vec::new();
        for (i, s) in self.satellites.iter().enumerate() {
            let key = format!("satellites.{i}");
            let sources =
                usize::from(s.ephemeris.is_some()) + usize::from(s.orbit.is_some()) + usize::from(s.look.is_some());
            check(
                sources == 1,
                &key,
                format!("satellite {} needs exactly one of ephemeris, orbit or look", s.id),
            );
            check(!ids.contains(&s.id), &key, format!("duplicate satellite id {}", s.id));
            ids.push(s.id);
            if let Some(o) = s.orbit {
                check(
                    o.altitude_m > 0.0,
                    &key,
                    format!("satellite {} altitude must be positive", s.id),
                );
            }
            if let Some(l) = s.look {
                check(
                    l.altitude_m > 0.0,
                    &key,
                    format!("satellite {} altitude must be positive", s.id),
                );
                check(
                    (0.0..=90.0).contains(&l.elevation_deg),
                    &key,
                    format!("satellite {} elevation must lie in [0, 90]", s.id),
                );
            }
        }
        out
    }

    /// Parse and validate TOML text. `source_name` labels error messages.
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError {
            source_name: source_name.to_string(),
            line: e.span().map(|s| line_col(text, s.start)),
            key: None,
            message: e.message().trim().to_string(),
        })?;
        if let Some((key, message)) = cfg.issues().into_iter().next() {
            return Err(ConfigError {
                source_name: source_name.to_string(),
                line: key_line(text, &key),
                key: Some(key),
                message,
            });
        }
        Ok(cfg)
    }

    /// Load a file; relative paths inside it are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_text(path).map(|(cfg, _)| cfg)
    }

    /// As [`ScenarioConfig::load`], also returning the source text.
    pub fn load_with_text(path: &Path) -> Result<(Self, String), ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: name.clone(),
            line: None,
            key: None,
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text, &name)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok((cfg, text))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.receiver.trajectory.as_mut() {
            fix(p);
        }
        for s in &mut self.satellites {
            if let Some(p) = s.ephemeris.as_mut() {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.issues().into_iter().next() {
            None => Ok(()),
            Some((key, message)) => Err(ConfigError {
                source_name: "config".into(),
                line: None,
                key: Some(key),
                message,
            }),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// SHA-256 of the canonical serialisation; identical for any two texts
    /// that parse to the same configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serialises to JSON");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn pattern(kind: AntennaKind, gain_dbi: f64, beamwidth_deg: f64) -> AntennaPattern {
    match kind {
        AntennaKind::Dish => AntennaPattern::dish(gain_dbi, beamwidth_deg),
        AntennaKind::Patch => AntennaPattern::patch(gain_dbi),
        AntennaKind::Isotropic => AntennaPattern::isotropic(gain_dbi),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// Line of the assignment of a dotted key such as `lsp.ds.los.sigma`, or of
/// the closest enclosing table header.
pub fn key_line(text: &str, key: &str) -> Option<(usize, usize)> {
    let mut table = String::new();
    let mut array_index: std::collections::HashMap<String, usize> = Default::default();
    let mut best: Option<(usize, usize, usize)> = None;
    let mut nested: Option<(usize, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let indent = raw.len() - raw.trim_start().len() + 1;
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            let name = h.trim().to_string();
            let idx = array_index.entry(name.clone()).and_modify(|n| *n += 1).or_insert(0);
            table = format!("{name}.{idx}");
        } else if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
        } else if let Some((k, _)) = line.split_once('=') {
            let full = if table.is_empty() {
                k.trim().to_string()
            } else {
                format!("{table}.{}", k.trim())
            };
            if full == key {
                return Some((i + 1, indent));
            }
            continue;
        } else {
            continue;
        }
        if nested.is_none() && table.starts_with(&format!("{key}.")) {
            nested = Some((i + 1, indent));
        }
        let depth = table.len();
        if (key == table || key.starts_with(&format!("{table}."))) && best.is_none_or(|b| depth > b.2) {
            best = Some((i + 1, indent, depth));
        }
    }
    best.map(|(l, c, _)| (l, c)).or(nested)
}
