use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::pathloss::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaKind {
    /// Parabolic dish with a quadratic-in-angle main lobe and a 30 dB floor.
    Dish,
    /// Upward-looking patch, `cos^2` of the off-boresight angle, zero behind.
    Patch,
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub boresight_gain_dbi: f64,
    /// Half-power beamwidth (deg); dish only.
    #[serde(default = "default_beamwidth")]
    pub beamwidth_deg: f64,
    /// Boresight unit vector. Steered per snapshot for satellite dishes;
    /// local up for receiver patches.
    #[serde(default = "default_pointing")]
    pub pointing: [f64; 3],
}

fn default_beamwidth() -> f64 {
    2.2
}

fn default_pointing() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl AntennaPattern {
    pub fn dish(boresight_gain_dbi: f64, beamwidth_deg: f64) -> Self {
        Self {
            kind: AntennaKind::Dish,
            boresight_gain_dbi,
            beamwidth_deg,
            pointing: default_pointing(),
        }
    }

    pub fn patch(boresight_gain_dbi: f64) -> Self {
        Self {
            kind: AntennaKind::Patch,
            boresight_gain_dbi,
            beamwidth_deg: default_beamwidth(),
            pointing: default_pointing(),
        }
    }

    pub fn isotropic(gain_dbi: f64) -> Self {
        Self {
            kind: AntennaKind::Isotropic,
            boresight_gain_dbi: gain_dbi,
            beamwidth_deg: default_beamwidth(),
            pointing: default_pointing(),
        }
    }

    /// Copy with the boresight along `direction` (normalised).
    pub fn steered(&self, direction: &Vec3) -> Self {
        let d = direction.normalize();
        Self {
            pointing: [d.x, d.y, d.z],
            ..*self
        }
    }

    pub fn pointing_vector(&self) -> Vec3 {
        Vec3::new(self.pointing[0], self.pointing[1], self.pointing[2]).normalize()
    }
}

/// Linear power gain of `pattern` towards the unit vector `direction`.
pub fn antenna_gain(pattern: &AntennaPattern, direction: &Vec3) -> f64 {
    let peak = db_to_linear(pattern.boresight_gain_dbi);
    match pattern.kind {
        AntennaKind::Isotropic => peak,
        AntennaKind::Dish => {
            let cos = direction.dot(&pattern.pointing_vector()).clamp(-1.0, 1.0);
            let theta = cos.acos().to_degrees();
            let loss = (12.0 * (theta / pattern.beamwidth_deg).powi(2)).min(30.0);
            db_to_linear(pattern.boresight_gain_dbi - loss)
        }
        AntennaKind::Patch => {
            let cos = direction.dot(&pattern.pointing_vector());
            if cos <= 0.0 {
                0.0
            } else {
                peak * cos * cos
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dish_gain() {
        let dish = AntennaPattern::dish(40.0, 2.2).steered(&Vec3::new(1.0, 0.0, 0.0));
        assert!((antenna_gain(&dish, &Vec3::new(1.0, 0.0, 0.0)) - 1e4).abs() < 1e-8);
        let off = 2.2f64.to_radians();
        let g = antenna_gain(&dish, &Vec3::new(off.cos(), off.sin(), 0.0));
        assert!((10.0 * g.log10() - 28.0).abs() < 1e-9);
        let far = antenna_gain(&dish, &Vec3::new(0.0, 1.0, 0.0));
        assert!((10.0 * far.log10() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn patch_gain() {
        let patch = AntennaPattern::patch(0.0);
        assert_eq!(antenna_gain(&patch, &Vec3::new(0.0, 0.0, 1.0)), 1.0);
        assert_eq!(antenna_gain(&patch, &Vec3::new(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(antenna_gain(&patch, &Vec3::new(0.0, 0.6, -0.8)), 0.0);
        let g = antenna_gain(&patch, &Vec3::new(0.6, 0.0, 0.8));
        assert!((g - 0.64).abs() < 1e-12);
        assert_eq!(
            antenna_gain(&AntennaPattern::isotropic(3.0), &Vec3::new(0.0, 1.0, 0.0)),
            db_to_linear(3.0)
        );
    }
}
