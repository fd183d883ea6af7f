//! Slot-level simulator of a solar-powered access point, its legacy data users
//! and its RF-charged IoT devices.
//!
//! Units: energy in mJ, transmit and incident power in mW (one slot is 1 s, so
//! a power of `x` mW spends `x` mJ per slot), noise in W, rates in bit/s and
//! energy efficiency in 1/W.

mod channel;
mod harvester;
mod solar;

pub use channel::{gain_from_power, ChannelModel};
pub use harvester::{dbm_to_mw, HarvesterCurve};
pub use solar::{SolarModel, SolarState};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Relative slack used when comparing a rate against the requirement, so that a
/// power computed by exactly inverting the rate formula counts as satisfying it.
pub const RATE_RELATIVE_SLACK: f64 = 1e-12;

/// Physical and scenario parameters of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Number of IoT devices N.
    pub num_devices: usize,
    /// Number of legacy data users U.
    pub num_users: usize,
    pub user_distance_min: f64,
    pub user_distance_max: f64,
    pub device_distance_min: f64,
    pub device_distance_max: f64,
    /// AP battery capacity B_max (mJ).
    pub ap_battery_max: f64,
    /// AP battery at slot 0 (mJ); full when absent.
    pub initial_ap_battery: Option<f64>,
    /// Device battery capacity b_max (mJ).
    pub device_battery_max: f64,
    pub initial_device_battery: f64,
    /// P_max (mW).
    pub max_power: f64,
    pub fading_mean: f64,
    pub fading_variance: f64,
    /// Channel bandwidth W (Hz).
    pub bandwidth: f64,
    /// Noise power N_0 (W).
    pub noise_power: f64,
    /// Energy per sample Ê (mJ).
    pub sample_cost: f64,
    /// Data-user rate requirement r_min (bit/s).
    pub rate_requirement: f64,
    /// Pins the AP battery at B_max (grid-powered AP). Set through the
    /// experiment scenario rather than the `[model]` table.
    #[serde(skip)]
    pub unlimited_energy: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            num_devices: 5,
            num_users: 10,
            user_distance_min: 5.0,
            user_distance_max: 25.0,
            device_distance_min: 9.0,
            device_distance_max: 10.0,
            ap_battery_max: 100_000.0,
            initial_ap_battery: None,
            device_battery_max: 50.0,
            initial_device_battery: 0.0,
            max_power: 200.0,
            fading_mean: 1.0,
            fading_variance: 0.1,
            bandwidth: 20e6,
            noise_power: 1e-6,
            sample_cost: 1.38,
            rate_requirement: 133e6,
            unlimited_energy: false,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("model.{key}"), format!("{v} must be > 0")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("model.{key}"), format!("{v} must be >= 0")))
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::config("model.num_devices", "must be >= 1"));
        }
        if self.num_users == 0 {
            return Err(Error::config("model.num_users", "must be >= 1"));
        }
        positive("user_distance_min", self.user_distance_min)?;
        positive("user_distance_max", self.user_distance_max)?;
        positive("device_distance_min", self.device_distance_min)?;
        positive("device_distance_max", self.device_distance_max)?;
        if self.user_distance_max < self.user_distance_min {
            return Err(Error::config(
                "model.user_distance_max",
                "must be >= user_distance_min",
            ));
        }
        if self.device_distance_max < self.device_distance_min {
            return Err(Error::config(
                "model.device_distance_max",
                "must be >= device_distance_min",
            ));
        }
        positive("ap_battery_max", self.ap_battery_max)?;
        if let Some(b) = self.initial_ap_battery {
            non_negative("initial_ap_battery", b)?;
            if b > self.ap_battery_max {
                return Err(Error::config(
                    "model.initial_ap_battery",
                    "exceeds ap_battery_max",
                ));
            }
        }
        positive("device_battery_max", self.device_battery_max)?;
        non_negative("initial_device_battery", self.initial_device_battery)?;
        if self.initial_device_battery > self.device_battery_max {
            return Err(Error::config(
                "model.initial_device_battery",
                "exceeds device_battery_max",
            ));
        }
        positive("max_power", self.max_power)?;
        ChannelModel::new(self.fading_mean, self.fading_variance)?;
        positive("bandwidth", self.bandwidth)?;
        positive("noise_power", self.noise_power)?;
        non_negative("sample_cost", self.sample_cost)?;
        non_negative("rate_requirement", self.rate_requirement)?;
        Ok(())
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            mean: self.fading_mean,
            variance: self.fading_variance,
        }
    }

    /// Gain normaliser for state features: `1 / d_min²` of the data users.
    pub fn reference_gain(&self) -> f64 {
        1.0 / (self.user_distance_min * self.user_distance_min)
    }

    pub fn initial_battery(&self) -> f64 {
        if self.unlimited_energy {
            self.ap_battery_max
        } else {
            self.initial_ap_battery.unwrap_or(self.ap_battery_max)
        }
    }

    /// Largest power the AP may spend with `battery` mJ in store.
    pub fn power_cap(&self, battery: f64) -> f64 {
        self.max_power.min(battery).max(0.0)
    }
}

/// Everything needed to build an [`Environment`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvSpec {
    pub model: ModelParams,
    pub solar: SolarModel,
    pub harvester: HarvesterCurve,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solar.validate()?;
        self.harvester.validate()
    }
}

/// Battery recursion of the AP: `min(B_max, B_prev - P_prev + E)`.
///
/// # Panics
/// If `power` exceeds `previous` (callers clamp actions to the battery first).
pub fn ap_battery_step(previous: f64, power: f64, arrival: f64, capacity: f64) -> f64 {
    assert!(
        power >= 0.0 && power <= previous * (1.0 + 1e-12) + 1e-12,
        "transmit power {power} exceeds stored energy {previous}"
    );
    (previous - power + arrival).min(capacity).max(0.0)
}

/// One slot of a device battery given the energy it harvested.
///
/// Harvest first; if the post-harvest level covers the sample cost the device
/// samples and pays for it. Both branches respect the capacity. Returns the new
/// level and whether the device sampled.
pub fn device_battery_step(previous: f64, harvested: f64, capacity: f64, cost: f64) -> (f64, bool) {
    let charged = (previous + harvested).min(capacity);
    if charged >= cost {
        ((charged - cost).max(0.0), true)
    } else {
        (charged, false)
    }
}

/// Shannon rate for transmit power `power_mw`, gain `gain`, bandwidth `bandwidth` (Hz)
/// and noise `noise_w` (W).
pub fn data_rate(power_mw: f64, gain: f64, bandwidth: f64, noise_w: f64) -> f64 {
    let received_w = power_mw * gain * 1e-3;
    bandwidth * (received_w / noise_w).ln_1p() / std::f64::consts::LN_2
}

pub fn rate_satisfied(rate: f64, requirement: f64) -> bool {
    rate >= requirement * (1.0 - RATE_RELATIVE_SLACK)
}

/// Energy efficiency `I·J / P` with `P` converted to watts; zero for an idle slot.
pub fn energy_efficiency(all_devices: bool, user_satisfied: bool, power_mw: f64) -> f64 {
    if power_mw > 0.0 && all_devices && user_satisfied {
        1000.0 / power_mw
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IotDevice {
    pub distance: f64,
    pub battery: f64,
    pub capacity: f64,
    pub sample_cost: f64,
}

impl IotDevice {
    /// Applies one slot at incident power `incident_mw`; returns whether it sampled.
    pub fn step(&mut self, incident_mw: f64, harvester: &HarvesterCurve) -> bool {
        let harvested = harvester.harvested(incident_mw);
        let (b, active) = device_battery_step(self.battery, harvested, self.capacity, self.sample_cost);
        self.battery = b;
        active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyUser {
    pub distance: f64,
    pub rate_requirement: f64,
}

/// Result of pushing one slot through the link and harvesting model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotPhysics {
    pub rate: f64,
    pub user_satisfied: bool,
    pub activated: usize,
    pub all_devices: bool,
    pub efficiency: f64,
}

/// Evaluates one slot at power `power` given the gains, mutating device batteries
/// in place. Shared by the real environment and the MPC virtual model.
pub fn evaluate_slot(
    model: &ModelParams,
    harvester: &HarvesterCurve,
    power: f64,
    user_gain: f64,
    device_gains: &[f64],
    device_batteries: &mut [f64],
) -> SlotPhysics {
    let rate = data_rate(power, user_gain, model.bandwidth, model.noise_power);
    let user_satisfied = rate_satisfied(rate, model.rate_requirement);
    let mut activated = 0;
    for (b, g) in device_batteries.iter_mut().zip(device_gains) {
        let harvested = harvester.harvested(power * g);
        let (next, active) =
            device_battery_step(*b, harvested, model.device_battery_max, model.sample_cost);
        *b = next;
        activated += active as usize;
    }
    let all_devices = activated == device_batteries.len();
    SlotPhysics {
        rate,
        user_satisfied,
        activated,
        all_devices,
        efficiency: energy_efficiency(all_devices, user_satisfied, power),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: u64,
    /// I_t: every device sampled.
    pub all_devices: bool,
    /// J_t: the served user met its rate requirement.
    pub user_satisfied: bool,
    /// n_t.
    pub activated: usize,
    /// η_t in 1/W.
    pub efficiency: f64,
    /// Energy that arrived for the next slot (mJ).
    pub arrival: f64,
    /// Power actually spent (mW).
    pub power: f64,
    /// r_u (bit/s).
    pub rate: f64,
}

impl SlotOutcome {
    /// I_t · J_t as 0/1.
    pub fn satisfaction(&self) -> f64 {
        (self.all_devices && self.user_satisfied) as u8 as f64
    }
}

/// What a controller at the AP can see at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub slot: u64,
    pub user: usize,
    /// Gain to the user served in this slot (known CSI).
    pub user_gain: f64,
    /// B_t (mJ).
    pub battery: f64,
    /// Device battery levels as last reported.
    pub device_batteries: Vec<f64>,
    /// Device gains realised in the previous slot, reported back with samples.
    pub reported_device_gains: Option<Vec<f64>>,
    /// Harvested energy that arrived at the start of this slot.
    pub last_arrival: Option<f64>,
}

/// The simulated network.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    channel: ChannelModel,
    devices: Vec<IotDevice>,
    users: Vec<LegacyUser>,
    battery: f64,
    solar_state: SolarState,
    slot: u64,
    current_user: usize,
    current_user_gain: f64,
    current_device_gains: Vec<f64>,
    reported_device_gains: Option<Vec<f64>>,
    last_arrival: Option<f64>,
    solar_rng: ChaCha8Rng,
    channel_rng: ChaCha8Rng,
    user_rng: ChaCha8Rng,
}

/// Area-uniform radius in the annulus `[lo, hi]` for the quantile `u`.
fn annulus_radius(lo: f64, hi: f64, u: f64) -> f64 {
    (lo * lo + u * (hi * hi - lo * lo)).sqrt()
}

impl Environment {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let m = &spec.model;
        let mut placement = stream(seed, Stream::Placement);
        let devices = (0..m.num_devices)
            .map(|_| IotDevice {
                distance: annulus_radius(
                    m.device_distance_min,
                    m.device_distance_max,
                    placement.random(),
                ),
                battery: m.initial_device_battery,
                capacity: m.device_battery_max,
                sample_cost: m.sample_cost,
            })
            .collect();
        let users = (0..m.num_users)
            .map(|_| LegacyUser {
                distance: annulus_radius(m.user_distance_min, m.user_distance_max, placement.random()),
                rate_requirement: m.rate_requirement,
            })
            .collect();
        let mut env = Environment {
            channel: m.channel(),
            battery: m.initial_battery(),
            solar_state: spec.solar.initial_state,
            devices,
            users,
            slot: 0,
            current_user: 0,
            current_user_gain: 0.0,
            current_device_gains: vec![0.0; m.num_devices],
            reported_device_gains: None,
            last_arrival: None,
            solar_rng: stream(seed, Stream::Solar),
            channel_rng: stream(seed, Stream::Channel),
            user_rng: stream(seed, Stream::UserSelection),
            spec,
        };
        env.draw_slot();
        Ok(env)
    }

    fn draw_slot(&mut self) {
        self.current_user = self.user_rng.random_range(0..self.users.len());
        let d = self.users[self.current_user].distance;
        self.current_user_gain = self.channel.sample_power(&mut self.channel_rng) / (d * d);
        for (g, dev) in self.current_device_gains.iter_mut().zip(&self.devices) {
            *g = self.channel.sample_power(&mut self.channel_rng) / (dev.distance * dev.distance);
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn model(&self) -> &ModelParams {
        &self.spec.model
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn battery(&self) -> f64 {
        self.battery
    }

    pub fn solar_state(&self) -> SolarState {
        self.solar_state
    }

    pub fn devices(&self) -> &[IotDevice] {
        &self.devices
    }

    pub fn users(&self) -> &[LegacyUser] {
        &self.users
    }

    /// Gains of the current slot, including device CSI the AP does not observe.
    pub fn current_gains(&self) -> (f64, &[f64]) {
        (self.current_user_gain, &self.current_device_gains)
    }

    /// Overrides the current slot's gains. Intended for tests that pin randomness.
    pub fn set_current_gains(&mut self, user_gain: f64, device_gains: &[f64]) {
        assert_eq!(device_gains.len(), self.devices.len());
        self.current_user_gain = user_gain;
        self.current_device_gains.copy_from_slice(device_gains);
    }

    pub fn power_cap(&self) -> f64 {
        self.spec.model.power_cap(self.battery)
    }

    pub fn observe(&self) -> Observation {
        Observation {
            slot: self.slot,
            user: self.current_user,
            user_gain: self.current_user_gain,
            battery: self.battery,
            device_batteries: self.devices.iter().map(|d| d.battery).collect(),
            reported_device_gains: self.reported_device_gains.clone(),
            last_arrival: self.last_arrival,
        }
    }

    /// Runs one slot at transmit power `power` (mW).
    ///
    /// # Panics
    /// If `power` lies outside `[0, min(P_max, B_t)]`.
    pub fn step(&mut self, power: f64) -> SlotOutcome {
        let cap = self.power_cap();
        assert!(
            power.is_finite() && power >= 0.0 && power <= cap * (1.0 + 1e-12) + 1e-12,
            "action {power} outside [0, {cap}]"
        );
        let power = power.min(cap);
        let model = &self.spec.model;
        let mut batteries: Vec<f64> = self.devices.iter().map(|d| d.battery).collect();
        let phys = evaluate_slot(
            model,
            &self.spec.harvester,
            power,
            self.current_user_gain,
            &self.current_device_gains,
            &mut batteries,
        );
        for (d, b) in self.devices.iter_mut().zip(batteries) {
            d.battery = b;
        }

        let (next_state, arrival) = self.spec.solar.sample_arrival(self.solar_state, &mut self.solar_rng);
        self.solar_state = next_state;
        if !model.unlimited_energy {
            self.battery = ap_battery_step(self.battery, power, arrival, model.ap_battery_max);
        }

        let outcome = SlotOutcome {
            slot: self.slot,
            all_devices: phys.all_devices,
            user_satisfied: phys.user_satisfied,
            activated: phys.activated,
            efficiency: phys.efficiency,
            arrival,
            power,
            rate: phys.rate,
        };
        self.reported_device_gains = Some(self.current_device_gains.clone());
        self.last_arrival = Some(arrival);
        self.slot += 1;
        self.draw_slot();
        outcome
    }
}
