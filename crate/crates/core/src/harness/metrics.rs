use serde::{Deserialize, Serialize};

use crate::env::SlotOutcome;

/// Averages over one episode of `episode_length` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode_index: u64,
    /// Mean n_t.
    pub activated_devices: f64,
    /// Mean J_t.
    pub satisfied_fraction: f64,
    /// Mean η_t (1/W).
    pub energy_efficiency: f64,
    /// Mean I_t·J_t.
    pub reward: f64,
}

/// Metric names, in CSV column order.
pub const METRICS: [&str; 4] = ["activated_devices", "satisfied_fraction", "energy_efficiency", "reward"];

impl EpisodeMetrics {
    pub fn values(&self) -> [f64; 4] {
        [
            self.activated_devices,
            self.satisfied_fraction,
            self.energy_efficiency,
            self.reward,
        ]
    }

    /// Name of the first non-finite metric, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        METRICS
            .iter()
            .zip(self.values())
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| *n)
    }
}

/// Running sums for the episode in progress.
#[derive(Debug, Clone, Default)]
pub struct EpisodeAccumulator {
    slots: u64,
    activated: f64,
    satisfied: f64,
    efficiency: f64,
    reward: f64,
}

impl EpisodeAccumulator {
    pub fn record(&mut self, o: &SlotOutcome) {
        self.slots += 1;
        self.activated += o.activated as f64;
        self.satisfied += o.user_satisfied as u8 as f64;
        self.efficiency += o.efficiency;
        self.reward += o.satisfaction();
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    /// Closes the episode and resets the sums.
    pub fn finish(&mut self, episode_index: u64) -> EpisodeMetrics {
        let n = self.slots.max(1) as f64;
        let m = EpisodeMetrics {
            episode_index,
            activated_devices: self.activated / n,
            satisfied_fraction: self.satisfied / n,
            energy_efficiency: self.efficiency / n,
            reward: self.reward / n,
        };
        *self = EpisodeAccumulator::default();
        m
    }
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(activated: usize, j: bool, power: f64) -> SlotOutcome {
        let all = activated == 5;
        SlotOutcome {
            slot: 0,
            all_devices: all,
            user_satisfied: j,
            activated,
            efficiency: crate::env::energy_efficiency(all, j, power),
            arrival: 0.0,
            power,
            rate: 0.0,
        }
    }

    #[test]
    fn episode_averages() {
        let mut acc = EpisodeAccumulator::default();
        acc.record(&slot(5, true, 200.0));
        acc.record(&slot(5, false, 200.0));
        acc.record(&slot(2, true, 100.0));
        acc.record(&slot(5, true, 100.0));
        let m = acc.finish(7);
        assert_eq!(m.episode_index, 7);
        assert_eq!(m.activated_devices, 17.0 / 4.0);
        assert_eq!(m.satisfied_fraction, 0.75);
        assert_eq!(m.energy_efficiency, (5.0 + 10.0) / 4.0);
        assert_eq!(m.reward, 0.5);
        assert!(m.reward <= m.satisfied_fraction);
        assert_eq!(acc.slots(), 0);
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample sd = sqrt(5/3), se = sd / 2
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_se(&[3.0]), (3.0, 0.0));
        assert!(mean_and_se(&[]).0.is_nan());
    }

    #[test]
    fn detects_nan() {
        let mut m = EpisodeAccumulator::default().finish(0);
        assert_eq!(m.non_finite(), None);
        m.energy_efficiency = f64::NAN;
        assert_eq!(m.non_finite(), Some("energy_efficiency"));
    }
}
