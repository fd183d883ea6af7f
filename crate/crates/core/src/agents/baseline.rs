use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentKind, Policy};
use crate::env::{ModelParams, Observation};

/// Spend `P_max`, or whatever is left in the battery.
pub fn greedy_power(battery: f64, max_power: f64) -> f64 {
    max_power.min(battery).max(0.0)
}

/// Uniform draw over `[0, P_max]`, clamped to the battery.
pub fn random_power<R: Rng + ?Sized>(battery: f64, max_power: f64, rng: &mut R) -> f64 {
    let p: f64 = rng.random_range(0.0..=max_power);
    p.min(battery.max(0.0))
}

/// Power that exactly meets the user's rate requirement, ignoring the devices:
/// `N_0 (2^{r_min/W} - 1) / g_u`, converted to mW and clamped to the battery and `P_max`.
/// A zero gain cannot be served and yields zero.
pub fn no_policy_power(
    user_gain: f64,
    rate_requirement: f64,
    bandwidth: f64,
    noise_power: f64,
    battery: f64,
    max_power: f64,
) -> f64 {
    if rate_requirement <= 0.0 {
        return 0.0;
    }
    if !(user_gain > 0.0) {
        log::debug!("no-policy: zero user gain, requirement cannot be met");
        return 0.0;
    }
    let snr = (rate_requirement / bandwidth * std::f64::consts::LN_2).exp_m1();
    let watts = noise_power * snr / user_gain;
    (watts * 1e3).min(max_power).min(battery).max(0.0)
}

#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    max_power: f64,
}

impl GreedyPolicy {
    pub fn new(model: &ModelParams) -> Self {
        GreedyPolicy {
            max_power: model.max_power,
        }
    }
}

impl Policy for GreedyPolicy {
    fn kind(&self) -> AgentKind {
        AgentKind::Greedy
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        greedy_power(obs.battery, self.max_power)
    }
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    max_power: f64,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(model: &ModelParams, rng: ChaCha8Rng) -> Self {
        RandomPolicy {
            max_power: model.max_power,
            rng,
        }
    }
}

impl Policy for RandomPolicy {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        random_power(obs.battery, self.max_power, &mut self.rng)
    }
}

#[derive(Debug, Clone)]
pub struct NoPolicy {
    model: ModelParams,
}

impl NoPolicy {
    pub fn new(model: &ModelParams) -> Self {
        NoPolicy {
            model: model.clone(),
        }
    }
}

impl Policy for NoPolicy {
    fn kind(&self) -> AgentKind {
        AgentKind::NoPolicy
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        let m = &self.model;
        no_policy_power(
            obs.user_gain,
            m.rate_requirement,
            m.bandwidth,
            m.noise_power,
            obs.battery,
            m.max_power,
        )
    }
}
