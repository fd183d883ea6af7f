//! Block-fading channel: `g = |Z|² / d²` with `Z ~ CN(μ, σ²)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex-normal fading. `mean` is the (real) mean of `Z` and `variance` is the
/// total variance `E|Z - μ|²`, split evenly between the in-phase and quadrature parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub mean: f64,
    pub variance: f64,
}

impl ChannelModel {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::config("model.fading_mean", "must be finite"));
        }
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::config("model.fading_variance", "must be >= 0"));
        }
        Ok(ChannelModel { mean, variance })
    }

    /// Closed-form second moment `E|Z|² = μ² + σ²`.
    pub fn mean_power(&self) -> f64 {
        self.mean * self.mean + self.variance
    }

    /// Draws `|Z|²`. Consumes exactly two standard-normal draws.
    pub fn sample_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = (self.variance / 2.0).sqrt();
        let re: f64 = self.mean + s * rng.sample::<f64, _>(StandardNormal);
        let im: f64 = s * rng.sample::<f64, _>(StandardNormal);
        re * re + im * im
    }

    pub fn sample_gain<R: Rng + ?Sized>(&self, distance: f64, rng: &mut R) -> Result<f64> {
        let z2 = self.sample_power(rng);
        gain_from_power(distance, z2)
    }

    /// Mean gain at `distance`, used when device CSI is replaced by its expectation.
    pub fn expected_gain(&self, distance: f64) -> f64 {
        self.mean_power() / (distance * distance)
    }
}

/// `|Z|² / d²`. Distances must be strictly positive.
pub fn gain_from_power(distance: f64, fading_power: f64) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::config("distance", format!("{distance} must be > 0")));
    }
    Ok(fading_power / (distance * distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_fading_gives_inverse_square() {
        assert!((gain_from_power(10.0, 1.0).unwrap() - 0.01).abs() < 1e-15);
        assert!((gain_from_power(25.0, 1.0).unwrap() - 1.0 / 625.0).abs() < 1e-15);
        assert!((gain_from_power(25.0, 1.0).unwrap() - 0.0016).abs() < 1e-15);
    }

    #[test]
    fn non_positive_distance_is_an_error() {
        assert!(gain_from_power(0.0, 1.0).is_err());
        assert!(gain_from_power(-3.0, 1.0).is_err());
        let ch = ChannelModel::new(1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ch.sample_gain(0.0, &mut rng).is_err());
    }

    #[test]
    fn monte_carlo_second_moment() {
        let ch = ChannelModel::new(1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| ch.sample_power(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - ch.mean_power()).abs() < 3.0 * se,
            "mean {mean} vs {} (se {se})",
            ch.mean_power()
        );
        assert!(draws.iter().all(|g| *g >= 0.0));
    }
}
