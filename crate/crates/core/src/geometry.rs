//! Kinematics and link geometry on a spherical Earth.
//!
//! All positions are Earth-centered Cartesian coordinates in meters. The local
//! East-North-Up frame at a receiver is built from the geocentric radial
//! direction, which is exact for the spherical Earth model used throughout.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (m).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Earth gravitational parameter (m^3/s^2).
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Sidereal rotation rate of the Earth (rad/s).
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Largest radial relative velocity between a stationary ground receiver and
/// a GPS satellite (m/s).
pub const MAX_GPS_RADIAL_VELOCITY_MPS: f64 = 929.0;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("receiver position is at the Earth center")]
    DegenerateReceiver,
    #[error("transmitter and receiver coincide")]
    ZeroLineOfSight,
    #[error("timestamps must be strictly increasing (index {0})")]
    NonIncreasingTimestamps(usize),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("a trajectory needs at least two samples, got {0}")]
    TooShort(usize),
    #[error("speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Position in the Earth-centered Earth-fixed frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() && z.is_finite() {
            Ok(Self { x, y, z })
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }
}

impl From<Vec3> for EcefPosition {
    fn from(v: Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Geometry of one satellite-receiver link at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// 3D distance between transmitter and receiver (m).
    pub d3d: f64,
    /// Elevation of the satellite seen from the receiver (rad).
    pub elevation: f64,
    /// Azimuth clockwise from local North (rad, `[0, 2π)`).
    pub azimuth: f64,
    pub doppler_angle_sat: f64,
    pub doppler_angle_rx: f64,
    /// Positive while the range is shrinking (m/s).
    pub radial_rel_velocity: f64,
    /// Satellite-only part of the radial velocity, `v_sat cos θ_sat` (m/s).
    pub sat_radial_velocity: f64,
}

/// Unit vectors (east, north, up) of the local tangent frame at `rx`.
pub fn enu_basis(rx: &Vec3) -> Result<[Vec3; 3]> {
    if !(rx.x.is_finite() && rx.y.is_finite() && rx.z.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let r = rx.norm();
    if r == 0.0 {
        return Err(GeometryError::DegenerateReceiver);
    }
    let up = rx / r;
    let horiz = (rx.x * rx.x + rx.y * rx.y).sqrt();
    // At the poles east is taken along +y.
    let east = if horiz > 0.0 {
        Vec3::new(-rx.y / horiz, rx.x / horiz, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let north = up.cross(&east);
    Ok([east, north, up])
}

/// Express `v` in the ENU frame at `rx`.
pub fn ecef_to_enu(v: &Vec3, rx: &Vec3) -> Result<Vec3> {
    let [e, n, u] = enu_basis(rx)?;
    Ok(Vec3::new(v.dot(&e), v.dot(&n), v.dot(&u)))
}

/// Elevation and azimuth (rad) of `sat` seen from `rx`.
pub fn elevation_azimuth(sat: &EcefPosition, rx: &EcefPosition) -> Result<(f64, f64)> {
    let d = sat.vector() - rx.vector();
    let local = ecef_to_enu(&d, &rx.vector())?;
    if d.norm() == 0.0 {
        return Err(GeometryError::ZeroLineOfSight);
    }
    let horiz = local.x.hypot(local.y);
    let elevation = local.z.atan2(horiz);
    let mut azimuth = local.x.atan2(local.y);
    if azimuth < 0.0 {
        azimuth += TAU;
    }
    Ok((elevation, azimuth))
}

/// Doppler angles of both terminals.
///
/// A terminal with zero speed gets an angle of π/2 and its `*_stationary`
/// flag set, so that it contributes no radial velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerAngles {
    pub sat: f64,
    pub rx: f64,
    pub sat_stationary: bool,
    pub rx_stationary: bool,
}

fn angle_between(a: &Vec3, b: &Vec3) -> Option<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Angle between each terminal's velocity and the line of sight towards the
/// other terminal.
pub fn doppler_angles(sat_pos: &Vec3, sat_vel: &Vec3, rx_pos: &Vec3, rx_vel: &Vec3) -> Result<DopplerAngles> {
    let sat_to_rx = rx_pos - sat_pos;
    if sat_to_rx.norm() == 0.0 {
        return Err(GeometryError::ZeroLineOfSight);
    }
    let rx_to_sat = -sat_to_rx;
    let sat = angle_between(sat_vel, &sat_to_rx);
    let rx = angle_between(rx_vel, &rx_to_sat);
    Ok(DopplerAngles {
        sat: sat.unwrap_or(FRAC_PI_2),
        rx: rx.unwrap_or(FRAC_PI_2),
        sat_stationary: sat.is_none(),
        rx_stationary: rx.is_none(),
    })
}

/// Radial relative velocity `v_sat cos θ_sat + v_rx cos θ_rx` (m/s), positive
/// when the terminals approach each other.
pub fn radial_relative_velocity(sat_pos: &Vec3, sat_vel: &Vec3, rx_pos: &Vec3, rx_vel: &Vec3) -> Result<f64> {
    let angles = doppler_angles(sat_pos, sat_vel, rx_pos, rx_vel)?;
    Ok(sat_vel.norm() * angles.sat.cos() + rx_vel.norm() * angles.rx.cos())
}

/// Lower and upper Doppler angle (rad) reachable by a satellite moving at
/// `v_sat` without exceeding the maximum radial velocity of a GPS link.
pub fn doppler_angle_bounds(v_sat: f64) -> Result<(f64, f64)> {
    if !(v_sat > 0.0) || !v_sat.is_finite() {
        return Err(GeometryError::NonPositiveSpeed(v_sat));
    }
    if v_sat <= MAX_GPS_RADIAL_VELOCITY_MPS {
        return Ok((0.0, PI));
    }
    let lo = (MAX_GPS_RADIAL_VELOCITY_MPS / v_sat).acos();
    Ok((lo, PI - lo))
}

/// Forward-difference speeds of a movement profile given as sample times and
/// cumulative travelled distance.
pub fn speeds_from_movement_profile(times: &[f64], distances: &[f64]) -> Result<Vec<f64>> {
    if times.len() != distances.len() {
        return Err(GeometryError::LengthMismatch {
            what: "distances",
            got: distances.len(),
            expected: times.len(),
        });
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(GeometryError::NonIncreasingTimestamps(i + 1));
    }
    Ok(times
        .windows(2)
        .zip(distances.windows(2))
        .map(|(t, d)| (d[1] - d[0]) / (t[1] - t[0]))
        .collect())
}

/// Full link geometry from the states of both terminals.
pub fn link_geometry(sat_pos: &Vec3, sat_vel: &Vec3, rx_pos: &Vec3, rx_vel: &Vec3) -> Result<LinkGeometry> {
    let (elevation, azimuth) = elevation_azimuth(&EcefPosition::from(*sat_pos), &EcefPosition::from(*rx_pos))?;
    let angles = doppler_angles(sat_pos, sat_vel, rx_pos, rx_vel)?;
    let sat_radial = sat_vel.norm() * angles.sat.cos();
    Ok(LinkGeometry {
        d3d: (sat_pos - rx_pos).norm(),
        elevation,
        azimuth,
        doppler_angle_sat: angles.sat,
        doppler_angle_rx: angles.rx,
        radial_rel_velocity: sat_radial + rx_vel.norm() * angles.rx.cos(),
        sat_radial_velocity: sat_radial,
    })
}

/// Timestamped positions and velocities of one terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    positions: Vec<Vec3>,
    velocities: Vec<Vec3>,
}

impl Trajectory {
    /// Build a trajectory. Missing velocities are estimated with central
    /// differences (one-sided at the ends).
    pub fn new(timestamps: Vec<f64>, positions: Vec<Vec3>, velocities: Option<Vec<Vec3>>) -> Result<Self> {
        let n = timestamps.len();
        if n < 2 {
            return Err(GeometryError::TooShort(n));
        }
        if positions.len() != n {
            return Err(GeometryError::LengthMismatch {
                what: "positions",
                got: positions.len(),
                expected: n,
            });
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(GeometryError::NonIncreasingTimestamps(i + 1));
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !timestamps.iter().all(|t| t.is_finite()) || !positions.iter().all(finite) {
            return Err(GeometryError::NonFinite);
        }
        let velocities = match velocities {
            Some(v) => {
                if v.len() != n {
                    return Err(GeometryError::LengthMismatch {
                        what: "velocities",
                        got: v.len(),
                        expected: n,
                    });
                }
                if !v.iter().all(finite) {
                    return Err(GeometryError::NonFinite);
                }
                v
            }
            None => finite_difference_velocities(&timestamps, &positions),
        };
        Ok(Self {
            timestamps,
            positions,
            velocities,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }

    pub fn start_time(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end_time(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    /// Cumulative travelled distance at each sample (m), starting at 0.
    pub fn cumulative_distance(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        for w in self.positions.windows(2) {
            acc += (w[1] - w[0]).norm();
            out.push(acc);
        }
        out
    }

    pub fn path_length(&self) -> f64 {
        *self.cumulative_distance().last().unwrap_or(&0.0)
    }

    /// Per-interval speeds from the movement profile (time, distance).
    pub fn speeds(&self) -> Vec<f64> {
        speeds_from_movement_profile(&self.timestamps, &self.cumulative_distance())
            .expect("trajectory timestamps are validated at construction")
    }

    /// Position and velocity at time `t` by cubic Hermite interpolation.
    pub fn state_at(&self, t: f64) -> Result<(Vec3, Vec3)> {
        let (start, end) = (self.start_time(), self.end_time());
        let slack = 1e-9 * (end - start).abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(GeometryError::OutOfRange { t, start, end });
        }
        let t = t.clamp(start, end);
        let k = match self.timestamps.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok((self.positions[i], self.velocities[i])),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.timestamps[k], self.timestamps[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1) = (self.positions[k], self.positions[k + 1]);
        let (m0, m1) = (self.velocities[k] * h, self.velocities[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let pos =
            p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + m1 * (s3 - s2);
        let vel = (p0 * (6.0 * s2 - 6.0 * s)
            + m0 * (3.0 * s2 - 4.0 * s + 1.0)
            + p1 * (-6.0 * s2 + 6.0 * s)
            + m1 * (3.0 * s2 - 2.0 * s))
            / h;
        Ok((pos, vel))
    }

    /// Positions relative to `reference`; velocities are unchanged.
    pub fn to_reference_frame(&self, reference: &EcefPosition) -> Trajectory {
        let r = reference.vector();
        Trajectory {
            timestamps: self.timestamps.clone(),
            positions: self.positions.iter().map(|p| p - r).collect(),
            velocities: self.velocities.clone(),
        }
    }

    /// Inverse of [`Trajectory::to_reference_frame`].
    pub fn from_reference_frame(&self, reference: &EcefPosition) -> Trajectory {
        let r = reference.vector();
        Trajectory {
            timestamps: self.timestamps.clone(),
            positions: self.positions.iter().map(|p| p + r).collect(),
            velocities: self.velocities.clone(),
        }
    }

    /// Reinterpret an inertial trajectory in a frame rotating with the Earth.
    /// The frames coincide at `t = 0`.
    pub fn to_earth_fixed(&self, rotation_rate: f64) -> Trajectory {
        let omega = Vec3::new(0.0, 0.0, rotation_rate);
        let mut positions = Vec::with_capacity(self.len());
        let mut velocities = Vec::with_capacity(self.len());
        for ((t, p), v) in self.timestamps.iter().zip(&self.positions).zip(&self.velocities) {
            let rot = rotation_z(-rotation_rate * t);
            positions.push(rot * p);
            velocities.push(rot * (v - omega.cross(p)));
        }
        Trajectory {
            timestamps: self.timestamps.clone(),
            positions,
            velocities,
        }
    }
}

fn rotation_z(angle: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn finite_difference_velocities(t: &[f64], p: &[Vec3]) -> Vec<Vec3> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (p[b] - p[a]) / (t[b] - t[a])
        })
        .collect()
}

/// Circular Keplerian orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    pub altitude_m: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    /// Argument of latitude at `t = 0`.
    pub phase_rad: f64,
}

impl CircularOrbit {
    pub fn radius(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_m
    }

    pub fn speed(&self) -> f64 {
        (EARTH_MU / self.radius()).sqrt()
    }

    pub fn mean_motion(&self) -> f64 {
        self.speed() / self.radius()
    }

    /// Inertial position and velocity at time `t`.
    pub fn state_at(&self, t: f64) -> (Vec3, Vec3) {
        let r = self.radius();
        let v = self.speed();
        let u = self.phase_rad + self.mean_motion() * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = self.raan_rad.sin_cos();
        let (si, ci) = self.inclination_rad.sin_cos();
        let pos = Vec3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si) * r;
        let vel = Vec3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si) * v;
        (pos, vel)
    }

    /// The circular orbit passing through `position` at `t = 0` whose velocity
    /// points along the component of `direction` perpendicular to `position`.
    pub fn through(position: &Vec3, direction: &Vec3) -> Result<Self> {
        let r = position.norm();
        if r <= EARTH_RADIUS_M {
            return Err(GeometryError::NonPositiveAltitude(r - EARTH_RADIUS_M));
        }
        let r_hat = position / r;
        let along = direction - r_hat * direction.dot(&r_hat);
        if along.norm() == 0.0 {
            return Err(GeometryError::InvalidSampling(
                "orbit direction parallel to position".into(),
            ));
        }
        let normal = r_hat.cross(&(along / along.norm()));
        let inclination = normal.z.clamp(-1.0, 1.0).acos();
        let mut raan = normal.x.atan2(-normal.y);
        if normal.x.hypot(normal.y) < 1e-15 {
            raan = 0.0;
        }
        let node = Vec3::new(raan.cos(), raan.sin(), 0.0);
        let in_plane = normal.cross(&node);
        let phase = r_hat.dot(&in_plane).atan2(r_hat.dot(&node));
        Ok(Self {
            altitude_m: r - EARTH_RADIUS_M,
            inclination_rad: inclination,
            raan_rad: raan,
            phase_rad: phase,
        })
    }
}

fn sample_times(t0: f64, duration_s: f64, step_s: f64) -> Result<Vec<f64>> {
    if !(step_s > 0.0) || !(duration_s > 0.0) {
        return Err(GeometryError::InvalidSampling(format!(
            "duration {duration_s} s, step {step_s} s"
        )));
    }
    let n = (duration_s / step_s + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step_s).collect();
    if times[n] < t0 + duration_s - 1e-9 * step_s {
        times.push(t0 + duration_s);
    }
    Ok(times)
}

/// Sampled inertial ephemeris of a circular orbit.
pub fn circular_orbit_ephemeris(
    altitude_m: f64,
    inclination_rad: f64,
    raan_rad: f64,
    phase_rad: f64,
    t0: f64,
    duration_s: f64,
    step_s: f64,
) -> Result<Trajectory> {
    if !(altitude_m > 0.0) {
        return Err(GeometryError::NonPositiveAltitude(altitude_m));
    }
    let orbit = CircularOrbit {
        altitude_m,
        inclination_rad,
        raan_rad,
        phase_rad,
    };
    orbit_ephemeris(&orbit, t0, duration_s, step_s)
}

pub fn orbit_ephemeris(orbit: &CircularOrbit, t0: f64, duration_s: f64, step_s: f64) -> Result<Trajectory> {
    let times = sample_times(t0, duration_s, step_s)?;
    let (positions, velocities) = times.iter().map(|&t| orbit.state_at(t)).unzip();
    Trajectory::new(times, positions, Some(velocities))
}

/// Point on the spherical Earth at geocentric latitude/longitude (rad) and
/// height above the surface (m).
pub fn geodetic_to_ecef(lat_rad: f64, lon_rad: f64, height_m: f64) -> Vec3 {
    let r = EARTH_RADIUS_M + height_m;
    let (sl, cl) = lat_rad.sin_cos();
    let (so, co) = lon_rad.sin_cos();
    Vec3::new(r * cl * co, r * cl * so, r * sl)
}

/// Position at the given elevation, azimuth (rad) and range (m) from `rx`.
pub fn position_from_look_angle(rx: &Vec3, elevation: f64, azimuth: f64, range: f64) -> Result<Vec3> {
    let [e, n, u] = enu_basis(rx)?;
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Ok(rx + (e * (ce * sa) + n * (ce * ca) + u * se) * range)
}

/// Range from a point on the Earth to a sphere of radius `orbit_radius` along
/// the given elevation.
pub fn slant_range(rx_radius: f64, orbit_radius: f64, elevation: f64) -> f64 {
    let s = elevation.sin();
    -rx_radius * s + (rx_radius * rx_radius * s * s + orbit_radius * orbit_radius - rx_radius * rx_radius).sqrt()
}

/// Receiver moving in a straight line across the local tangent plane.
pub fn straight_track(
    start: &Vec3,
    heading_rad: f64,
    speed_mps: f64,
    t0: f64,
    duration_s: f64,
    step_s: f64,
) -> Result<Trajectory> {
    let [e, n, _] = enu_basis(start)?;
    let vel = (e * heading_rad.sin() + n * heading_rad.cos()) * speed_mps;
    let times = sample_times(t0, duration_s, step_s)?;
    let positions = times.iter().map(|t| start + vel * (t - t0)).collect();
    let velocities = vec![vel; times.len()];
    Trajectory::new(times, positions, Some(velocities))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rx() -> EcefPosition {
        EcefPosition::new(EARTH_RADIUS_M, 0.0, 0.0)
    }

    #[test]
    fn zenith_and_tangent_plane() {
        let (el, _) = elevation_azimuth(&EcefPosition::new(26_571_000.0, 0.0, 0.0), &rx()).unwrap();
        assert!((el - FRAC_PI_2).abs() < 1e-12);
        let (el, az) = elevation_azimuth(&EcefPosition::new(EARTH_RADIUS_M, 10_000.0, 0.0), &rx()).unwrap();
        assert!(el.abs() < 1e-12);
        // +y at (R,0,0) is due east.
        assert!((az - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_receiver_rejected() {
        let sat = EcefPosition::new(1.0, 2.0, 3.0);
        assert_eq!(
            elevation_azimuth(&sat, &EcefPosition::new(0.0, 0.0, 0.0)),
            Err(GeometryError::DegenerateReceiver)
        );
        assert_eq!(elevation_azimuth(&rx(), &rx()), Err(GeometryError::ZeroLineOfSight));
    }

    #[test]
    fn doppler_angle_special_cases() {
        let sat = Vec3::new(26_571_000.0, 0.0, 0.0);
        let rxp = rx().vector();
        let perp = doppler_angles(&sat, &Vec3::new(0.0, 3874.0, 0.0), &rxp, &Vec3::zeros()).unwrap();
        assert!((perp.sat - FRAC_PI_2).abs() < 1e-12);
        assert!(perp.rx_stationary);
        assert_eq!(perp.rx, FRAC_PI_2);
        let toward = doppler_angles(&sat, &Vec3::new(-10.0, 0.0, 0.0), &rxp, &Vec3::zeros()).unwrap();
        assert!(toward.sat.abs() < 1e-12);
        assert!(doppler_angles(&rxp, &Vec3::zeros(), &rxp, &Vec3::zeros()).is_err());
    }

    #[test]
    fn radial_velocity_signs() {
        let sat = Vec3::new(26_571_000.0, 0.0, 0.0);
        let rxp = rx().vector();
        let v = radial_relative_velocity(&sat, &Vec3::new(0.0, 0.0, 3874.0), &rxp, &Vec3::new(0.0, 13.9, 0.0)).unwrap();
        assert!(v.abs() < 1e-9);
        let receding = radial_relative_velocity(&sat, &Vec3::new(1000.0, 0.0, 0.0), &rxp, &Vec3::zeros()).unwrap();
        assert!((receding + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn bounds() {
        assert_eq!(doppler_angle_bounds(929.0).unwrap(), (0.0, PI));
        let (lo, hi) = doppler_angle_bounds(1858.0).unwrap();
        assert!((lo - PI / 3.0).abs() < 1e-12);
        assert!((hi - 2.0 * PI / 3.0).abs() < 1e-12);
        let (lo, _) = doppler_angle_bounds(3874.0).unwrap();
        assert!((lo - 1.328_7).abs() < 1e-4);
        assert!(doppler_angle_bounds(0.0).is_err());
        assert!(doppler_angle_bounds(-5.0).is_err());
    }

    #[test]
    fn movement_profile() {
        assert_eq!(
            speeds_from_movement_profile(&[0.0, 1.0], &[0.0, 10.0]).unwrap(),
            vec![10.0]
        );
        assert_eq!(
            speeds_from_movement_profile(&[0.0, 1.0, 3.0], &[0.0, 10.0, 10.0]).unwrap(),
            vec![10.0, 0.0]
        );
        assert_eq!(
            speeds_from_movement_profile(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]),
            Err(GeometryError::NonIncreasingTimestamps(2))
        );
    }

    #[test]
    fn movement_profile_matches_interval_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut t = vec![0.0];
        let mut d = vec![0.0];
        for _ in 0..50 {
            t.push(t.last().unwrap() + rng.random_range(0.01..2.0));
            d.push(d.last().unwrap() + rng.random_range(0.0..30.0));
        }
        let v = speeds_from_movement_profile(&t, &d).unwrap();
        assert_eq!(v.len(), 50);
        for i in 0..50 {
            let oracle = (d[i + 1] - d[i]) / (t[i + 1] - t[i]);
            assert!((v[i] - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn reference_frame_round_trip() {
        let traj = circular_orbit_ephemeris(20_200_000.0, 0.96, 0.3, 1.0, 0.0, 10.0, 1.0).unwrap();
        let reference = EcefPosition::from(traj.positions()[0]);
        let local = traj.to_reference_frame(&reference);
        assert_eq!(local.positions()[0], Vec3::zeros());
        for (a, b) in traj.positions().windows(2).zip(local.positions().windows(2)) {
            assert!(((a[1] - a[0]).norm() - (b[1] - b[0]).norm()).abs() < 1e-9);
        }
        let back = local.from_reference_frame(&reference);
        for (a, b) in traj.positions().iter().zip(back.positions()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn gps_orbit_speed_and_circularity() {
        let traj = circular_orbit_ephemeris(20_200_000.0, 0.96, 0.3, 1.0, 0.0, 600.0, 10.0).unwrap();
        let expected = (3.986_004_418e14_f64 / 2.6571e7).sqrt();
        let r0 = traj.positions()[0].norm();
        for (p, v) in traj.positions().iter().zip(traj.velocities()) {
            assert!((v.norm() - expected).abs() < 1.0);
            assert!((p.norm() - r0).abs() / r0 < 1e-6);
            assert!(p.dot(v).abs() / (p.norm() * v.norm()) < 1e-9);
        }
        assert!(circular_orbit_ephemeris(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn finite_difference_velocities_are_exact_for_linear_motion() {
        let t: Vec<f64> = (0..5).map(|k| k as f64 * 0.5).collect();
        let p: Vec<Vec3> = t.iter().map(|t| Vec3::new(1.0, 2.0, 3.0) * *t).collect();
        let traj = Trajectory::new(t, p, None).unwrap();
        for v in traj.velocities() {
            assert!((v - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn trajectory_validation() {
        assert_eq!(
            Trajectory::new(vec![0.0], vec![Vec3::zeros()], None),
            Err(GeometryError::TooShort(1))
        );
        assert_eq!(
            Trajectory::new(vec![0.0, 0.0], vec![Vec3::zeros(); 2], None),
            Err(GeometryError::NonIncreasingTimestamps(1))
        );
    }

    #[test]
    fn hermite_interpolation_tracks_orbit() {
        let orbit = CircularOrbit {
            altitude_m: 20_200_000.0,
            inclination_rad: 0.96,
            raan_rad: 1.0,
            phase_rad: 0.2,
        };
        let traj = orbit_ephemeris(&orbit, 0.0, 20.0, 1.0).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.0973;
            let (p, v) = traj.state_at(t).unwrap();
            let (pe, ve) = orbit.state_at(t);
            assert!((p - pe).norm() < 1e-3, "{}", (p - pe).norm());
            assert!((v - ve).norm() < 1e-3);
        }
        assert!(traj.state_at(25.0).is_err());
    }

    #[test]
    fn orbit_through_reproduces_position() {
        let rxp = geodetic_to_ecef(0.9, -1.99, 0.0);
        let r = EARTH_RADIUS_M + 20_200_000.0;
        let range = slant_range(EARTH_RADIUS_M, r, 0.7);
        let sat = position_from_look_angle(&rxp, 0.7, 2.0, range).unwrap();
        assert!((sat.norm() - r).abs() < 1e-3);
        let orbit = CircularOrbit::through(&sat, &Vec3::new(0.3, -0.2, 1.0)).unwrap();
        let (p, v) = orbit.state_at(0.0);
        assert!((p - sat).norm() < 1e-3);
        assert!(v.dot(&Vec3::new(0.3, -0.2, 1.0)) > 0.0);
        let (el, az) = elevation_azimuth(&p.into(), &rxp.into()).unwrap();
        assert!((el - 0.7).abs() < 1e-9 && (az - 2.0).abs() < 1e-9);
    }

    #[test]
    fn earth_fixed_frame_slows_prograde_orbit() {
        let inertial = circular_orbit_ephemeris(20_200_000.0, 55f64.to_radians(), 0.0, 0.0, 0.0, 1.0, 0.5).unwrap();
        let fixed = inertial.to_earth_fixed(EARTH_ROTATION_RAD_S);
        assert_eq!(fixed.positions()[0], inertial.positions()[0]);
        let v = fixed.velocities()[0].norm();
        assert!(v < 3300.0 && v > 3000.0, "{v}");
        for (a, b) in inertial.positions().iter().zip(fixed.positions()) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn straight_track_speed() {
        let start = geodetic_to_ecef(0.5, 0.2, 0.0);
        let traj = straight_track(&start, 0.3, 13.888_9, 0.0, 1.0, 0.25).unwrap();
        assert_eq!(traj.len(), 5);
        assert!((traj.path_length() - 13.888_9).abs() < 1e-7);
        for s in traj.speeds() {
            assert!((s - 13.888_9).abs() < 1e-7);
        }
    }
}
