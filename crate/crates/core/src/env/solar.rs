//! Four-state Markov model of solar energy arrivals at the access point.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolarState {
    Excellent,
    Good,
    Fair,
    Poor,
}

impl SolarState {
    pub const ALL: [SolarState; 4] = [
        SolarState::Excellent,
        SolarState::Good,
        SolarState::Fair,
        SolarState::Poor,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> SolarState {
        Self::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            SolarState::Excellent => "Excellent",
            SolarState::Good => "Good",
            SolarState::Fair => "Fair",
            SolarState::Poor => "Poor",
        }
    }
}

/// Markov-modulated solar harvest. Energies are in mJ per slot, panel area in cm².
///
/// The shipped transition matrix and per-state statistics are illustrative
/// defaults; they are meant to be replaced with measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolarModel {
    /// Row-stochastic transition matrix, rows and columns ordered Excellent, Good, Fair, Poor.
    pub transition: [[f64; 4]; 4],
    /// Per-state mean of the raw arrival `x` (mJ).
    pub mean: [f64; 4],
    /// Per-state standard deviation of the raw arrival `x` (mJ).
    pub std_dev: [f64; 4],
    /// Panel area Φ in cm².
    pub panel_area: f64,
    /// Solar conversion efficiency η̄.
    pub conversion_efficiency: f64,
    pub initial_state: SolarState,
}

impl Default for SolarModel {
    fn default() -> Self {
        let off = 0.3 / 3.0;
        let row = |i: usize| {
            let mut r = [off; 4];
            r[i] = 0.7;
            r
        };
        SolarModel {
            transition: [row(0), row(1), row(2), row(3)],
            mean: [120.0, 80.0, 40.0, 12.0],
            std_dev: [20.0, 15.0, 10.0, 4.0],
            panel_area: 15.0,
            conversion_efficiency: 0.15,
            initial_state: SolarState::Good,
        }
    }
}

impl SolarModel {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::config(
                    format!("solar.transition[{i}]"),
                    "probabilities must be finite and non-negative",
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    format!("solar.transition[{i}]"),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        if self.std_dev.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::config("solar.std_dev", "must be finite and >= 0"));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::config("solar.mean", "must be finite"));
        }
        if !(self.panel_area.is_finite() && self.panel_area > 0.0) {
            return Err(Error::config("solar.panel_area", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.conversion_efficiency) {
            return Err(Error::config(
                "solar.conversion_efficiency",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Converts a raw arrival `x` (mJ) into harvested energy Ẽ = x·Φ·η̄.
    pub fn harvested(&self, raw: f64) -> f64 {
        raw * self.panel_area * self.conversion_efficiency
    }

    /// Long-run mean harvested energy per slot under the stationary distribution.
    pub fn stationary_mean_arrival(&self) -> f64 {
        let mut pi = [0.25; 4];
        for _ in 0..10_000 {
            let mut next = [0.0; 4];
            for (i, p) in pi.iter().enumerate() {
                for (j, q) in self.transition[i].iter().enumerate() {
                    next[j] += p * q;
                }
            }
            pi = next;
        }
        pi.iter()
            .zip(self.mean.iter())
            .map(|(p, m)| p * self.harvested(m.max(0.0)))
            .sum()
    }

    /// Advances the chain one step and draws the slot's harvested energy.
    ///
    /// Always consumes exactly one uniform and one standard-normal draw so that
    /// the stream stays aligned regardless of parameters.
    pub fn sample_arrival<R: Rng + ?Sized>(
        &self,
        state: SolarState,
        rng: &mut R,
    ) -> (SolarState, f64) {
        let u: f64 = rng.random();
        let row = &self.transition[state.index()];
        let mut next = SolarState::ALL[3];
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = SolarState::from_index(j);
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        let j = next.index();
        let raw = (self.mean[j] + self.std_dev[j] * z).max(0.0);
        (next, self.harvested(raw))
    }
}
