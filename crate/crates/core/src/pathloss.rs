//! NTN urban pathloss and link-budget arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state_model::StateKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathlossError {
    #[error("{what} must be positive (got {value})")]
    NonPositive { what: &'static str, value: f64 },
}

/// Propagation scenario of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    NtnUrbanLos,
    NtnUrbanNlos,
}

impl From<StateKind> for Scenario {
    fn from(s: StateKind) -> Self {
        match s {
            StateKind::Good => Scenario::NtnUrbanLos,
            StateKind::Bad => Scenario::NtnUrbanNlos,
        }
    }
}

/// `PL = A log10(d3d) + B + C log10(fc) + D log10(α) + PL_a`, with `d3d` in
/// meters, `fc` in GHz and the elevation `α` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Atmospheric absorption (dB).
    #[serde(default)]
    pub pl_atm: f64,
}

impl PathlossParams {
    pub const NTN_URBAN_LOS: Self = Self {
        a: 20.0,
        b: 32.55,
        c: 20.0,
        d: 0.0,
        pl_atm: 0.0,
    };

    pub const NTN_URBAN_NLOS: Self = Self {
        a: 20.05,
        b: 54.85,
        c: 27.9,
        d: -11.0,
        pl_atm: 0.0,
    };

    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::NtnUrbanLos => Self::NTN_URBAN_LOS,
            Scenario::NtnUrbanNlos => Self::NTN_URBAN_NLOS,
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64, PathlossError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(PathlossError::NonPositive { what, value })
    }
}

pub fn pathloss_db(d3d_m: f64, fc_ghz: f64, elevation_rad: f64, params: &PathlossParams) -> Result<f64, PathlossError> {
    let d = positive("d3d", d3d_m)?;
    let f = positive("fc", fc_ghz)?;
    let e = positive("elevation", elevation_rad)?;
    Ok(params.a * d.log10() + params.b + params.c * f.log10() + params.d * e.log10() + params.pl_atm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub pathloss_db: f64,
    pub rx_power_dbm: f64,
}

impl LinkBudget {
    pub fn new(tx_power_dbm: f64, tx_gain_dbi: f64, rx_gain_dbi: f64, pathloss_db: f64) -> Self {
        Self {
            tx_power_dbm,
            tx_gain_dbi,
            rx_gain_dbi,
            pathloss_db,
            rx_power_dbm: received_power_dbm(tx_power_dbm, tx_gain_dbi, rx_gain_dbi, pathloss_db),
        }
    }
}

pub fn received_power_dbm(tx_power_dbm: f64, tx_gain_dbi: f64, rx_gain_dbi: f64, pathloss_db: f64) -> f64 {
    tx_power_dbm + tx_gain_dbi + rx_gain_dbi - pathloss_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FC_L1_GHZ: f64 = 1.575_42;

    #[test]
    fn reference_point_is_b() {
        assert_eq!(
            pathloss_db(1.0, 1.0, 1.0, &PathlossParams::NTN_URBAN_LOS).unwrap(),
            32.55
        );
        assert_eq!(
            pathloss_db(1.0, 1.0, 1.0, &PathlossParams::NTN_URBAN_NLOS).unwrap(),
            54.85
        );
    }

    #[test]
    fn worked_examples() {
        let nlos = pathloss_db(
            21_954_828.7,
            FC_L1_GHZ,
            45.7599f64.to_radians(),
            &PathlossParams::NTN_URBAN_NLOS,
        )
        .unwrap();
        assert!((nlos - 208.63).abs() < 0.01, "{nlos}");
        let los = pathloss_db(
            20_408_478.5,
            FC_L1_GHZ,
            72.656f64.to_radians(),
            &PathlossParams::NTN_URBAN_LOS,
        )
        .unwrap();
        assert!((los - 182.69).abs() < 0.01, "{los}");
        assert!((received_power_dbm(0.0, 40.0, 0.0, 208.63) + 168.63).abs() < 1e-12);
        assert!((received_power_dbm(0.0, 40.0, 0.0, 182.69) + 142.69).abs() < 1e-12);
        assert_eq!(received_power_dbm(10.0, 0.0, 0.0, 10.0), 0.0);
    }

    #[test]
    fn log_domain_errors() {
        let p = PathlossParams::NTN_URBAN_LOS;
        assert!(pathloss_db(0.0, 1.0, 1.0, &p).is_err());
        assert!(pathloss_db(1.0, -1.0, 1.0, &p).is_err());
        assert!(pathloss_db(1.0, 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn monotonicity() {
        for scenario in [Scenario::NtnUrbanLos, Scenario::NtnUrbanNlos] {
            let p = PathlossParams::for_scenario(scenario);
            let base = pathloss_db(2.0e7, 1.5, 0.8, &p).unwrap();
            assert!(pathloss_db(2.1e7, 1.5, 0.8, &p).unwrap() > base);
            assert!(pathloss_db(2.0e7, 1.6, 0.8, &p).unwrap() > base);
        }
        let nlos = PathlossParams::NTN_URBAN_NLOS;
        assert!(pathloss_db(2.0e7, 1.5, 0.9, &nlos).unwrap() < pathloss_db(2.0e7, 1.5, 0.8, &nlos).unwrap());
        let los = PathlossParams::NTN_URBAN_LOS;
        assert_eq!(
            pathloss_db(2.0e7, 1.5, 0.9, &los).unwrap(),
            pathloss_db(2.0e7, 1.5, 0.3, &los).unwrap()
        );
    }

    #[test]
    fn budget_invariant() {
        let b = LinkBudget::new(0.0, 40.0, 3.0, 182.69);
        assert_eq!(
            b.rx_power_dbm,
            b.tx_power_dbm + b.tx_gain_dbi + b.rx_gain_dbi - b.pathloss_db
        );
    }
}
