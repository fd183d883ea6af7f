use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diminishing exploration rate
/// `ε_t = clamp(ε_T + (ε_0 - ε_T) / (1 + t/τ)^κ, ε_T, 1)`.
///
/// With the default `τ = 1`, `κ = 2` this is `ε_T + ε_inc / (t+1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonSchedule {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
    /// κ
    pub exponent: f64,
    /// τ, in slots.
    pub time_scale: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            initial: 1.0,
            final_: 0.01,
            exponent: 2.0,
            time_scale: 1.0,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self, section: &str) -> Result<()> {
        if !(0.0 <= self.final_ && self.final_ <= self.initial && self.initial <= 1.0) {
            return Err(Error::config(
                format!("{section}.epsilon"),
                "need 0 <= final <= initial <= 1",
            ));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(Error::config(format!("{section}.epsilon.exponent"), "must be > 0"));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return Err(Error::config(format!("{section}.epsilon.time_scale"), "must be > 0"));
        }
        Ok(())
    }

    pub fn increment(&self) -> f64 {
        self.initial - self.final_
    }

    pub fn value(&self, slot: u64) -> f64 {
        let decay = (1.0 + slot as f64 / self.time_scale).powf(self.exponent);
        (self.final_ + self.increment() / decay).clamp(self.final_, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_one() {
        assert_eq!(EpsilonSchedule::default().value(0), 1.0);
    }

    #[test]
    fn matches_inverse_square_decay() {
        let s = EpsilonSchedule::default();
        for t in [1u64, 2, 9, 99] {
            let expect = 0.01 + 0.99 / ((t + 1) as f64).powi(2);
            assert!((s.value(t) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn tends_to_final_rate() {
        let s = EpsilonSchedule::default();
        assert!((s.value(10_000_000) - 0.01).abs() < 1e-12);
        let mut last = 1.0;
        for t in 0..1000 {
            let e = s.value(t);
            assert!(e <= last && e >= 0.01);
            last = e;
        }
    }

    #[test]
    fn equal_rates_are_constant() {
        let s = EpsilonSchedule {
            initial: 0.2,
            final_: 0.2,
            ..EpsilonSchedule::default()
        };
        for t in [0u64, 1, 50, 1_000_000] {
            assert_eq!(s.value(t), 0.2);
        }
    }

    #[test]
    fn time_scale_slows_decay() {
        let s = EpsilonSchedule {
            time_scale: 3000.0,
            ..EpsilonSchedule::default()
        };
        assert!((s.value(3000) - (0.01 + 0.99 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_inverted_rates() {
        let s = EpsilonSchedule {
            initial: 0.1,
            final_: 0.5,
            ..EpsilonSchedule::default()
        };
        assert!(s.validate("dqn").is_err());
    }
}
