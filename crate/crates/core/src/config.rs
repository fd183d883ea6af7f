//! TOML experiment configuration.
//!
//! Every table is optional and every key has a default; unknown keys are rejected.
//!
//! ```toml
//! [experiment]
//! scenario = "solar"            # or "unlimited-energy"
//! agents = ["dqn", "mpc", "greedy"]
//! total_slots = 150000
//! episode_length = 3000
//! collection_slot = 120000
//! seeds = [1, 2, 3]
//!
//! [model]
//! max_power = 200.0
//!
//! [sweep]
//! axis = "panel-area"
//! values = [12.0, 15.0, 18.0, 21.0]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, DqnParams, Objective, TabularParams};
use crate::env::{EnvSpec, HarvesterCurve, ModelParams, SolarModel};
use crate::error::{Error, Result};
use crate::mpc::MpcParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Battery fed by the solar panel.
    #[default]
    Solar,
    /// Battery pinned at capacity.
    UnlimitedEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub agents: Vec<AgentKind>,
    /// Per-slot index optimised by DQN, TRL and MPC.
    pub objective: Objective,
    /// T.
    pub total_slots: u64,
    pub episode_length: u64,
    /// Episodes starting at or after this slot enter the summary.
    pub collection_slot: u64,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Solar,
            agents: AgentKind::ALL.to_vec(),
            objective: Objective::Satisfaction,
            total_slots: 150_000,
            episode_length: 3_000,
            collection_slot: 120_000,
            seeds: (1..=10).collect(),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::config("experiment.agents", "must name at least one agent"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].contains(a) {
                return Err(Error::config("experiment.agents", format!("`{a}` listed twice")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must list at least one seed"));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(Error::config("experiment.seeds", format!("seed {s} listed twice")));
            }
        }
        if self.episode_length == 0 {
            return Err(Error::config("experiment.episode_length", "must be >= 1"));
        }
        if !self.total_slots.is_multiple_of(self.episode_length) {
            return Err(Error::config(
                "experiment.total_slots",
                format!(
                    "{} is not a multiple of the episode length {}",
                    self.total_slots, self.episode_length
                ),
            ));
        }
        if !self.collection_slot.is_multiple_of(self.episode_length) {
            return Err(Error::config(
                "experiment.collection_slot",
                format!(
                    "{} is not a multiple of the episode length {}",
                    self.collection_slot, self.episode_length
                ),
            ));
        }
        if self.collection_slot > self.total_slots {
            return Err(Error::config(
                "experiment.collection_slot",
                format!("{} exceeds total_slots {}", self.collection_slot, self.total_slots),
            ));
        }
        Ok(())
    }

    pub fn episodes(&self) -> u64 {
        self.total_slots / self.episode_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Φ (cm²).
    PanelArea,
    /// Outer radius of the device annulus (m); the annulus keeps its width.
    DeviceDistance,
    /// Outer radius of the user annulus, i.e. the cell size (m).
    UserDistance,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PanelArea => "panel-area",
            SweepAxis::DeviceDistance => "device-distance",
            SweepAxis::UserDistance => "user-distance",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values", "must not be empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::config("sweep.values", format!("{v} must be > 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub experiment: ExperimentConfig,
    pub model: ModelParams,
    pub solar: SolarModel,
    pub harvester: HarvesterCurve,
    pub dqn: DqnParams,
    pub trl: TabularParams,
    pub mpc: MpcParams,
    pub sweep: Option<SweepConfig>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.env_spec().validate()?;
        self.dqn.validate()?;
        self.trl.validate()?;
        self.mpc.validate()?;
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    /// Environment description with the scenario applied.
    pub fn env_spec(&self) -> EnvSpec {
        let mut model = self.model.clone();
        model.unlimited_energy = self.experiment.scenario == Scenario::UnlimitedEnergy;
        EnvSpec {
            model,
            solar: self.solar.clone(),
            harvester: self.harvester.clone(),
        }
    }

    /// Copy with one sweep coordinate applied.
    pub fn with_axis_value(&self, axis: SweepAxis, value: f64) -> SimConfig {
        let mut c = self.clone();
        match axis {
            SweepAxis::PanelArea => c.solar.panel_area = value,
            SweepAxis::DeviceDistance => {
                let width = c.model.device_distance_max - c.model.device_distance_min;
                c.model.device_distance_max = value;
                c.model.device_distance_min = (value - width).max(value * 0.5);
            }
            SweepAxis::UserDistance => {
                c.model.user_distance_max = value;
                c.model.user_distance_min = c.model.user_distance_min.min(value);
            }
        }
        c
    }
}
