use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, reward, state_features, ActionSpace, AgentKind, EpsilonSchedule, Objective, Policy};
use crate::env::{ModelParams, Observation, SlotOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub actions: usize,
    pub gain_bins: usize,
    pub battery_bins: usize,
    /// `[lo, hi]` range of `log10(g_u / g_ref)` covered by the gain bins.
    pub log_gain_range: [f64; 2],
    pub battery_scale: BatteryScale,
    pub epsilon: EpsilonSchedule,
}

/// How the battery axis of the table is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatteryScale {
    /// Equal-width bins of `B_t / B_max`.
    #[default]
    Linear,
    /// Equal-width bins of the log battery feature the DQN sees.
    Log,
}

impl Default for TabularParams {
    fn default() -> Self {
        TabularParams {
            learning_rate: 0.1,
            discount: 0.4,
            actions: 100,
            gain_bins: 20,
            battery_bins: 20,
            log_gain_range: [-2.5, 0.5],
            battery_scale: BatteryScale::Linear,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl TabularParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("trl.learning_rate", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("trl.discount", "must lie in [0, 1]"));
        }
        if self.actions < 2 {
            return Err(Error::config("trl.actions", "must be >= 2"));
        }
        if self.gain_bins == 0 || self.battery_bins == 0 {
            return Err(Error::config("trl.gain_bins", "bin counts must be >= 1"));
        }
        if !(self.log_gain_range[0] < self.log_gain_range[1]) {
            return Err(Error::config("trl.log_gain_range", "need lo < hi"));
        }
        self.epsilon.validate("trl")
    }
}

/// Dense `states × actions` table of action values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(states: usize, actions: usize) -> Self {
        QTable {
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions + action]
    }

    pub fn best(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    /// Largest value among the first `feasible` actions of `state`.
    pub fn max_value(&self, state: usize, feasible: usize) -> f64 {
        let n = feasible.clamp(1, self.actions);
        self.row(state)[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q(s,a) += α (r + γ v' - Q(s,a))` with `v'` the bootstrapped next-state value.
    pub fn update(&mut self, s: usize, a: usize, r: f64, next_value: f64, alpha: f64, gamma: f64) {
        let target = r + gamma * next_value;
        let q = &mut self.values[s * self.actions + a];
        *q += alpha * (target - *q);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Maps state features onto a grid: log-compressed gain × uniform bins of the battery feature.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBinner {
    gain_bins: usize,
    battery_bins: usize,
    log_range: [f64; 2],
}

impl StateBinner {
    pub fn new(gain_bins: usize, battery_bins: usize, log_range: [f64; 2]) -> Self {
        StateBinner {
            gain_bins,
            battery_bins,
            log_range,
        }
    }

    pub fn states(&self) -> usize {
        self.gain_bins * self.battery_bins
    }

    fn bin(x: f64, lo: f64, hi: f64, n: usize) -> usize {
        let f = ((x - lo) / (hi - lo) * n as f64).floor();
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(n - 1)
        }
    }

    /// Index of the cell holding `[g/g_ref, battery feature in [0, 1]]`.
    pub fn index(&self, features: [f64; 2]) -> usize {
        let lg = features[0].max(1e-300).log10();
        let g = Self::bin(lg, self.log_range[0], self.log_range[1], self.gain_bins);
        let b = Self::bin(features[1], 0.0, 1.0, self.battery_bins);
        g * self.battery_bins + b
    }
}

/// Tabular Q-learning over binned states; updated every slot, no replay.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    params: TabularParams,
    model: ModelParams,
    objective: Objective,
    actions: ActionSpace,
    binner: StateBinner,
    table: QTable,
    rng: ChaCha8Rng,
}

impl TabularAgent {
    pub fn new(params: TabularParams, model: &ModelParams, objective: Objective, rng: ChaCha8Rng) -> Self {
        let binner = StateBinner::new(params.gain_bins, params.battery_bins, params.log_gain_range);
        TabularAgent {
            actions: ActionSpace::new(params.actions, model.max_power),
            table: QTable::new(binner.states(), params.actions),
            binner,
            model: model.clone(),
            objective,
            params,
            rng,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    /// Table row for an observation.
    pub fn state(&self, obs: &Observation) -> usize {
        let features = match self.params.battery_scale {
            BatteryScale::Log => state_features(obs, &self.model),
            BatteryScale::Linear => [
                obs.user_gain / self.model.reference_gain(),
                obs.battery / self.model.ap_battery_max,
            ],
        };
        self.binner.index(features)
    }
}

impl Policy for TabularAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Trl
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        let eps = self.params.epsilon.value(obs.slot);
        let explore = self.rng.random::<f64>() < eps;
        let index = if explore {
            self.rng.random_range(0..self.actions.len())
        } else {
            let n = self.actions.feasible(obs.battery);
            argmax(&self.table.row(self.state(obs))[..n])
        };
        self.actions.execute(index, obs.battery)
    }

    fn feedback(&mut self, obs: &Observation, power: f64, outcome: &SlotOutcome, next: &Observation) -> Result<()> {
        let s = self.state(obs);
        let s2 = self.state(next);
        let a = self.actions.nearest(power);
        let r = reward(outcome, self.objective);
        let v = self.table.max_value(s2, self.actions.feasible(next.battery));
        self.table
            .update(s, a, r, v, self.params.learning_rate, self.params.discount);
        Ok(())
    }
}
