//! Transmit-power controllers.
//!
//! Every controller implements [`Policy`]: it sees an [`Observation`] at the
//! start of a slot, returns a power in `[0, min(P_max, B_t)]`, and is told the
//! outcome afterwards.

mod baseline;
mod dqn;
mod replay;
mod schedule;
mod tabular;

pub use baseline::{
    greedy_power, no_policy_power, random_power, GreedyPolicy, NoPolicy, RandomPolicy,
};
pub use dqn::{DqnAgent, DqnParams};
pub use replay::{ReplayMemory, Transition};
pub use schedule::EpsilonSchedule;
pub use tabular::{BatteryScale, QTable, StateBinner, TabularAgent, TabularParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{ModelParams, Observation, SlotOutcome};
use crate::error::{Error, Result};

/// The six controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Dqn,
    Trl,
    Mpc,
    Greedy,
    Random,
    NoPolicy,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Dqn,
        AgentKind::Trl,
        AgentKind::Mpc,
        AgentKind::Greedy,
        AgentKind::Random,
        AgentKind::NoPolicy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Trl => "trl",
            AgentKind::Mpc => "mpc",
            AgentKind::Greedy => "greedy",
            AgentKind::Random => "random",
            AgentKind::NoPolicy => "no-policy",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("agents", format!("unknown agent `{s}`")))
    }
}

/// What a learning agent or MPC maximises per slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Reward-1: `I_t · J_t`.
    #[default]
    Satisfaction,
    /// Reward-2: `η_t`.
    Efficiency,
}

pub fn reward(outcome: &SlotOutcome, objective: Objective) -> f64 {
    match objective {
        Objective::Satisfaction => outcome.satisfaction(),
        Objective::Efficiency => outcome.efficiency,
    }
}

/// `levels` equally spaced powers over `[0, P_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpace {
    levels: usize,
    max_power: f64,
}

impl ActionSpace {
    pub fn new(levels: usize, max_power: f64) -> Self {
        assert!(levels >= 2, "need at least two power levels");
        ActionSpace { levels, max_power }
    }

    pub fn len(&self) -> usize {
        self.levels
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.max_power / (self.levels - 1) as f64
    }

    pub fn power(&self, index: usize) -> f64 {
        if index + 1 >= self.levels {
            self.max_power
        } else {
            index as f64 * self.step()
        }
    }

    /// Nearest level to an executed power (used when the battery clamps an action).
    pub fn nearest(&self, power: f64) -> usize {
        ((power / self.step()).round() as usize).min(self.levels - 1)
    }

    /// Number of leading levels the battery can pay for. Every higher level
    /// executes as the whole battery, which is recorded as the last of these.
    pub fn feasible(&self, battery: f64) -> usize {
        if battery >= self.max_power {
            self.levels
        } else {
            self.nearest(battery.max(0.0)) + 1
        }
    }

    /// Executed power for `index` with `battery` mJ available.
    pub fn execute(&self, index: usize, battery: f64) -> f64 {
        self.power(index).min(battery.max(0.0))
    }
}

/// Network / table input: `g_u / g_ref` and the battery on a log scale,
/// `ln(1 + B_t/P_max) / ln(1 + B_max/P_max)`, so that a battery holding a few
/// slots' worth of power is distinguishable from an empty one.
pub fn state_features(obs: &Observation, model: &ModelParams) -> [f64; 2] {
    let scale = model.max_power;
    [
        obs.user_gain / model.reference_gain(),
        (obs.battery.max(0.0) / scale).ln_1p() / (model.ap_battery_max / scale).ln_1p(),
    ]
}

/// Index of the largest value; ties go to the lowest index (lowest power).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub trait Policy: Send {
    fn kind(&self) -> AgentKind;

    /// Power (mW) to spend this slot; always within `[0, min(P_max, B_t)]`.
    fn decide(&mut self, obs: &Observation) -> f64;

    /// Called after the slot with the pre-slot observation, the executed power,
    /// the outcome and the post-slot observation.
    fn feedback(
        &mut self,
        _obs: &Observation,
        _power: f64,
        _outcome: &SlotOutcome,
        _next: &Observation,
    ) -> Result<()> {
        Ok(())
    }
}
