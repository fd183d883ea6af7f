//! Non-linear RF-to-DC conversion curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Piecewise-linear efficiency table over incident power (mW).
///
/// The default table is an illustrative 2.4 GHz rectifier shape, not a measured device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarvesterCurve {
    /// Incident power (mW) below which nothing is harvested.
    pub sensitivity: f64,
    /// `[input_power_mw, efficiency]` pairs, strictly increasing in power.
    pub breakpoints: Vec<[f64; 2]>,
}

impl Default for HarvesterCurve {
    fn default() -> Self {
        HarvesterCurve {
            sensitivity: dbm_to_mw(-20.0),
            breakpoints: vec![
                [dbm_to_mw(-20.0), 0.0],
                [dbm_to_mw(-10.0), 0.35],
                [dbm_to_mw(0.0), 0.80],
                [dbm_to_mw(10.0), 0.85],
            ],
        }
    }
}

impl HarvesterCurve {
    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(Error::config("harvester.breakpoints", "must not be empty"));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity >= 0.0) {
            return Err(Error::config("harvester.sensitivity", "must be >= 0"));
        }
        for (i, [p, e]) in self.breakpoints.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::config(
                    format!("harvester.breakpoints[{i}]"),
                    "power must be finite and >= 0",
                ));
            }
            if !(0.0..=1.0).contains(e) {
                return Err(Error::config(
                    format!("harvester.breakpoints[{i}]"),
                    "efficiency must lie in [0, 1]",
                ));
            }
        }
        if self.breakpoints.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::config(
                "harvester.breakpoints",
                "powers must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// Conversion efficiency β(p) for incident power `p` (mW).
    pub fn beta(&self, p: f64) -> f64 {
        if !(p >= self.sensitivity) || p <= 0.0 {
            return 0.0;
        }
        let pts = &self.breakpoints;
        let first = pts[0];
        if p <= first[0] {
            return first[1];
        }
        for w in pts.windows(2) {
            let [p0, e0] = w[0];
            let [p1, e1] = w[1];
            if p <= p1 {
                return e0 + (e1 - e0) * (p - p0) / (p1 - p0);
            }
        }
        pts[pts.len() - 1][1]
    }

    /// Energy (mJ) delivered to the battery over one 1 s slot at incident power `p`.
    pub fn harvested(&self, p: f64) -> f64 {
        p * self.beta(p)
    }
}
