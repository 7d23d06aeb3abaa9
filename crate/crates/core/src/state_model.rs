//! Semi-Markov GOOD/BAD state sequences along the receiver track.
//!
//! State durations are lengths of receiver travel (m) drawn from a lognormal
//! distribution and bounded below by an elevation-dependent minimum duration.
//! The first state comes from an elevation-dependent LOS probability.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{interp_clamped, strictly_increasing};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("lognormal density is only defined for x > 0 (got {0})")]
    NonPositiveDuration(f64),
    #[error("sigma must be positive (got {0})")]
    NonPositiveSigma(f64),
    #[error("LOS probability table is empty")]
    EmptyTable,
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("track length must be positive (got {0})")]
    NonPositiveTrack(f64),
    #[error("invalid state sequence: {0}")]
    InvalidSequence(String),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// Propagation state of a link: GOOD carries the direct path plus multipath,
/// BAD carries multipath only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StateKind {
    Good,
    Bad,
}

impl StateKind {
    pub fn other(self) -> Self {
        match self {
            StateKind::Good => StateKind::Bad,
            StateKind::Bad => StateKind::Good,
        }
    }

    pub fn is_los(self) -> bool {
        self == StateKind::Good
    }

    pub fn label(self) -> &'static str {
        match self {
            StateKind::Good => "GOOD",
            StateKind::Bad => "BAD",
        }
    }
}

/// Minimum state durations for 1.5-3 GHz: (elevation deg, GOOD m, BAD m).
pub const MIN_DURATION_TABLE: [[f64; 3]; 5] = [
    [20.0, 3.9889, 10.3114],
    [30.0, 7.3174, 5.7276],
    [45.0, 10.0, 6.0],
    [60.0, 10.0, 1.9126],
    [70.0, 118.3312, 4.8569],
];

/// Lognormal duration parameters per state plus the minimum-duration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationParams {
    /// Mean of ln(duration in m) in the GOOD state.
    pub mu_good: f64,
    pub sigma_good: f64,
    pub mu_bad: f64,
    pub sigma_bad: f64,
    /// Rows of (elevation deg, minimum GOOD duration m, minimum BAD duration m).
    pub min_duration_table: Vec<[f64; 3]>,
    /// Redraws attempted before clamping a short draw to the minimum.
    pub redraw_limit: u32,
}

impl Default for DurationParams {
    /// Placeholder lognormal parameters (median 20 m GOOD, 10 m BAD). They are
    /// not normative; supply scenario-specific values in the configuration.
    fn default() -> Self {
        Self {
            mu_good: 20f64.ln(),
            sigma_good: 0.5,
            mu_bad: 10f64.ln(),
            sigma_bad: 0.5,
            min_duration_table: MIN_DURATION_TABLE.to_vec(),
            redraw_limit: 100,
        }
    }
}

impl DurationParams {
    pub fn validate(&self) -> Result<()> {
        for s in [self.sigma_good, self.sigma_bad] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(StateError::NonPositiveSigma(s));
            }
        }
        if !self.mu_good.is_finite() || !self.mu_bad.is_finite() {
            return Err(StateError::InvalidTable("mu must be finite".into()));
        }
        if self.min_duration_table.is_empty() {
            return Err(StateError::InvalidTable("minimum duration table is empty".into()));
        }
        let elevations: Vec<f64> = self.min_duration_table.iter().map(|r| r[0]).collect();
        if !strictly_increasing(&elevations) {
            return Err(StateError::InvalidTable(
                "minimum duration elevations must be strictly increasing".into(),
            ));
        }
        if self
            .min_duration_table
            .iter()
            .any(|r| !(r[1] >= 0.0 && r[2] >= 0.0 && r[1].is_finite() && r[2].is_finite()))
        {
            return Err(StateError::InvalidTable(
                "minimum durations must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn mu(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Good => self.mu_good,
            StateKind::Bad => self.mu_bad,
        }
    }

    pub fn sigma(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Good => self.sigma_good,
            StateKind::Bad => self.sigma_bad,
        }
    }

    /// Minimum duration (m) for `state` at `elevation_deg`, linearly
    /// interpolated between table rows and clamped outside the table.
    pub fn min_duration(&self, state: StateKind, elevation_deg: f64) -> f64 {
        let xs: Vec<f64> = self.min_duration_table.iter().map(|r| r[0]).collect();
        let col = match state {
            StateKind::Good => 1,
            StateKind::Bad => 2,
        };
        let ys: Vec<f64> = self.min_duration_table.iter().map(|r| r[col]).collect();
        interp_clamped(&xs, &ys, elevation_deg)
    }
}

/// Free function form of [`DurationParams::min_duration`] on the default table.
pub fn min_duration(state: StateKind, elevation_deg: f64) -> f64 {
    DurationParams::default().min_duration(state, elevation_deg)
}

/// LOS probability as a function of elevation, rows of (elevation deg, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LosProbabilityTable {
    pub rows: Vec<[f64; 2]>,
}

impl Default for LosProbabilityTable {
    /// Placeholder table (urban NTN LOS probability). Not normative.
    fn default() -> Self {
        Self {
            rows: vec![
                [10.0, 0.246],
                [20.0, 0.386],
                [30.0, 0.493],
                [40.0, 0.613],
                [50.0, 0.726],
                [60.0, 0.805],
                [70.0, 0.919],
                [80.0, 0.968],
                [90.0, 0.992],
            ],
        }
    }
}

impl LosProbabilityTable {
    pub fn constant(p: f64) -> Self {
        Self {
            rows: vec![[0.0, p], [90.0, p]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(StateError::EmptyTable);
        }
        let xs: Vec<f64> = self.rows.iter().map(|r| r[0]).collect();
        if !strictly_increasing(&xs) {
            return Err(StateError::InvalidTable(
                "LOS probability elevations must be strictly increasing".into(),
            ));
        }
        if self.rows.iter().any(|r| !(0.0..=1.0).contains(&r[1])) {
            return Err(StateError::InvalidTable("LOS probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn p_los(&self, elevation_deg: f64) -> Result<f64> {
        if self.rows.is_empty() {
            return Err(StateError::EmptyTable);
        }
        let xs: Vec<f64> = self.rows.iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r[1]).collect();
        Ok(interp_clamped(&xs, &ys, elevation_deg))
    }
}

/// Lognormal density (1/m) of a state duration `x` (m).
pub fn lognormal_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(StateError::NonPositiveDuration(x));
    }
    if !(sigma > 0.0) {
        return Err(StateError::NonPositiveSigma(sigma));
    }
    let z = x.ln() - mu;
    Ok((-(z * z) / (2.0 * sigma * sigma)).exp() / (sigma * x * (2.0 * PI).sqrt()))
}

/// State at the first epoch: GOOD iff `u < p_los(elevation)`.
pub fn initial_state(elevation_deg: f64, plos: &LosProbabilityTable, u: f64) -> Result<StateKind> {
    let p = plos.p_los(elevation_deg)?;
    Ok(if u < p { StateKind::Good } else { StateKind::Bad })
}

/// Draw a state duration (m). Draws shorter than the minimum duration are
/// redrawn up to `redraw_limit` times and then clamped to the minimum.
pub fn sample_duration<R: Rng + ?Sized>(
    state: StateKind,
    elevation_deg: f64,
    params: &DurationParams,
    rng: &mut R,
) -> f64 {
    let min = params.min_duration(state, elevation_deg);
    let (mu, sigma) = (params.mu(state), params.sigma(state));
    for _ in 0..=params.redraw_limit {
        let n: f64 = rng.sample(StandardNormal);
        let x = (mu + sigma * n).exp();
        if x >= min {
            return x;
        }
    }
    min
}

/// One state segment along the receiver track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: StateKind,
    pub start_m: f64,
    pub length_m: f64,
}

impl Segment {
    pub fn end_m(&self) -> f64 {
        self.start_m + self.length_m
    }
}

/// Contiguous, alternating GOOD/BAD segments covering a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    segments: Vec<Segment>,
}

impl StateSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let seq = Self { segments };
        seq.validate()?;
        Ok(seq)
    }

    /// A single segment in `state` covering `[0, length_m]`.
    pub fn single(state: StateKind, length_m: f64) -> Self {
        Self {
            segments: vec![Segment {
                state,
                start_m: 0.0,
                length_m,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(StateError::InvalidSequence("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.length_m > 0.0) && self.segments.len() > 1 {
                return Err(StateError::InvalidSequence(format!(
                    "segment {i} has length {}",
                    s.length_m
                )));
            }
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            if w[0].state == w[1].state {
                return Err(StateError::InvalidSequence(format!(
                    "segments {i} and {} share a state",
                    i + 1
                )));
            }
            let gap = (w[1].start_m - w[0].end_m()).abs();
            if gap > 1e-9 * w[1].start_m.abs().max(1.0) {
                return Err(StateError::InvalidSequence(format!(
                    "segments {i} and {} are not contiguous",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length_m).sum()
    }

    /// Index of the segment containing `distance_m`; positions past the end
    /// map to the last segment.
    pub fn segment_index_at(&self, distance_m: f64) -> usize {
        self.segments
            .iter()
            .position(|s| distance_m < s.end_m())
            .unwrap_or(self.segments.len() - 1)
    }

    pub fn state_at(&self, distance_m: f64) -> StateKind {
        self.segments[self.segment_index_at(distance_m)].state
    }

    /// Fraction of the track spent in GOOD state.
    pub fn good_fraction(&self) -> f64 {
        let total = self.total_length();
        if total <= 0.0 {
            return if self.segments[0].state.is_los() { 1.0 } else { 0.0 };
        }
        self.segments
            .iter()
            .filter(|s| s.state.is_los())
            .map(|s| s.length_m)
            .sum::<f64>()
            / total
    }
}

/// Residual track length below which the last segment absorbs the remainder.
const LENGTH_EPS_M: f64 = 1e-9;

/// Semi-Markov state sequence over a track of `track_length_m` meters.
///
/// The first state is drawn from the LOS probability at the elevation at
/// distance 0; each further duration uses the elevation at the start of its
/// segment. The final segment is truncated at the track end.
pub fn build_state_sequence<R, F>(
    track_length_m: f64,
    elevation_profile: F,
    plos: &LosProbabilityTable,
    params: &DurationParams,
    rng: &mut R,
) -> Result<StateSequence>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if !(track_length_m > 0.0) || !track_length_m.is_finite() {
        return Err(StateError::NonPositiveTrack(track_length_m));
    }
    params.validate()?;
    plos.validate()?;
    let u: f64 = rng.random();
    let mut state = initial_state(elevation_profile(0.0), plos, u)?;
    let mut segments = Vec::new();
    let mut start = 0.0;
    loop {
        let duration = sample_duration(state, elevation_profile(start), params, rng);
        let remaining = track_length_m - start;
        if duration >= remaining - LENGTH_EPS_M {
            segments.push(Segment {
                state,
                start_m: start,
                length_m: remaining,
            });
            break;
        }
        segments.push(Segment {
            state,
            start_m: start,
            length_m: duration,
        });
        start += duration;
        state = state.other();
    }
    Ok(StateSequence { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn degenerate(mu: f64) -> DurationParams {
        DurationParams {
            mu_good: mu,
            sigma_good: 1e-15,
            mu_bad: mu,
            sigma_bad: 1e-15,
            ..DurationParams::default()
        }
    }

    #[test]
    fn lognormal_density_values() {
        let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
        assert!((lognormal_pdf(1.0, 0.0, 1.0).unwrap() - inv_sqrt_2pi).abs() < 1e-15);
        let x = 2f64.exp();
        let expected = 1.0 / (0.5 * x * (2.0 * PI).sqrt());
        assert!((lognormal_pdf(x, 2.0, 0.5).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.107_982).abs() < 1e-6);
        assert_eq!(lognormal_pdf(0.0, 0.0, 1.0), Err(StateError::NonPositiveDuration(0.0)));
        assert_eq!(
            lognormal_pdf(-1.0, 0.0, 1.0),
            Err(StateError::NonPositiveDuration(-1.0))
        );
    }

    #[test]
    fn min_duration_table_lookup() {
        assert_eq!(min_duration(StateKind::Good, 45.0), 10.0);
        assert_eq!(min_duration(StateKind::Bad, 60.0), 1.9126);
        assert!((min_duration(StateKind::Good, 25.0) - 5.65315).abs() < 1e-12);
        assert_eq!(min_duration(StateKind::Good, 5.0), 3.9889);
        assert_eq!(min_duration(StateKind::Bad, 85.0), 4.8569);
    }

    #[test]
    fn initial_state_from_table() {
        let always = LosProbabilityTable::constant(1.0);
        let never = LosProbabilityTable::constant(0.0);
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(initial_state(30.0, &always, u).unwrap(), StateKind::Good);
            assert_eq!(initial_state(30.0, &never, u).unwrap(), StateKind::Bad);
        }
        let table = LosProbabilityTable {
            rows: vec![[40.0, 0.5], [60.0, 0.7]],
        };
        assert_eq!(initial_state(50.0, &table, 0.59).unwrap(), StateKind::Good);
        assert_eq!(initial_state(50.0, &table, 0.61).unwrap(), StateKind::Bad);
        let empty = LosProbabilityTable { rows: vec![] };
        assert_eq!(initial_state(50.0, &empty, 0.1), Err(StateError::EmptyTable));
    }

    #[test]
    fn degenerate_durations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = degenerate(50f64.ln());
        p.min_duration_table = vec![[0.0, 10.0, 10.0]];
        assert!((sample_duration(StateKind::Good, 40.0, &p, &mut rng) - 50.0).abs() < 1e-9);
        p.mu_good = 5f64.ln();
        assert_eq!(sample_duration(StateKind::Good, 40.0, &p, &mut rng), 10.0);
    }

    #[test]
    fn truncated_mean_matches_rejection_oracle() {
        let params = DurationParams {
            mu_good: 20f64.ln(),
            sigma_good: 0.5,
            ..DurationParams::default()
        };
        let min = params.min_duration(StateKind::Good, 20.0);
        assert_eq!(min, 3.9889);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_duration(StateKind::Good, 20.0, &params, &mut rng))
            .collect();
        assert!(draws.iter().all(|&d| d >= min));

        // Oracle: plain rejection sampling on an independent stream.
        let mut orng = ChaCha8Rng::seed_from_u64(9_999);
        let mut oracle = Vec::with_capacity(n);
        while oracle.len() < n {
            let z: f64 = orng.sample(StandardNormal);
            let x = (20f64.ln() + 0.5 * z).exp();
            if x >= min {
                oracle.push(x);
            }
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let (m1, se1) = stats(&draws);
        let (m2, se2) = stats(&oracle);
        assert!((m1 - m2).abs() < 3.0 * (se1 + se2).sqrt(), "{m1} vs {m2}");
    }

    #[test]
    fn short_track_is_single_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = degenerate(50f64.ln());
        let seq = build_state_sequence(5.0, |_| 45.0, &LosProbabilityTable::default(), &p, &mut rng).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.total_length(), 5.0);
    }

    #[test]
    fn deterministic_durations_split_track_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = degenerate(7f64.ln());
        p.min_duration_table = vec![[0.0, 1.0, 1.0]];
        let seq = build_state_sequence(21.0, |_| 45.0, &LosProbabilityTable::default(), &p, &mut rng).unwrap();
        assert_eq!(seq.len(), 3);
        for s in seq.segments() {
            assert!((s.length_m - 7.0).abs() < 1e-9);
        }
        assert_ne!(seq.segments()[0].state, seq.segments()[1].state);
        assert!((seq.total_length() - 21.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = DurationParams::default();
        let t = LosProbabilityTable::default();
        assert!(build_state_sequence(0.0, |_| 45.0, &t, &p, &mut rng).is_err());
        let bad = DurationParams {
            sigma_bad: 0.0,
            ..DurationParams::default()
        };
        assert!(build_state_sequence(10.0, |_| 45.0, &t, &bad, &mut rng).is_err());
        let unsorted = DurationParams {
            min_duration_table: vec![[30.0, 1.0, 1.0], [20.0, 1.0, 1.0]],
            ..DurationParams::default()
        };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn segment_lookup() {
        let seq = StateSequence::new(vec![
            Segment {
                state: StateKind::Good,
                start_m: 0.0,
                length_m: 4.0,
            },
            Segment {
                state: StateKind::Bad,
                start_m: 4.0,
                length_m: 6.0,
            },
        ])
        .unwrap();
        assert_eq!(seq.state_at(0.0), StateKind::Good);
        assert_eq!(seq.state_at(3.99), StateKind::Good);
        assert_eq!(seq.state_at(4.0), StateKind::Bad);
        assert_eq!(seq.state_at(50.0), StateKind::Bad);
        assert!((seq.good_fraction() - 0.4).abs() < 1e-12);
        assert!(StateSequence::new(vec![
            Segment {
                state: StateKind::Good,
                start_m: 0.0,
                length_m: 4.0
            },
            Segment {
                state: StateKind::Good,
                start_m: 4.0,
                length_m: 6.0
            },
        ])
        .is_err());
    }
}
