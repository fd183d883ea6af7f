//! Receding-horizon power control.
//!
//! Each slot the controller forecasts the next `L` energy arrivals and channel
//! gains with one GPR per quantity, rolls a virtual copy of the network forward
//! under a constant candidate power, and applies the power with the best
//! average index for one real slot.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, Objective, Policy};
use crate::env::{evaluate_slot, EnvSpec, HarvesterCurve, ModelParams, Observation, SlotOutcome};
use crate::error::{Error, Result};
use crate::gpr::{Forecaster, GprParams};

/// Where the virtual model gets device gains from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceGainMode {
    /// Devices report realised gains one slot late; GPR forecasts from those.
    #[default]
    Reported,
    /// Use `E|Z|² / d²` for every slot.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    /// L: predicted slots after the current one.
    pub horizon: usize,
    /// k: training window per forecaster.
    pub window: usize,
    /// Ψ: requested search precision (mW). Floored at `1e-6 · P_max`.
    pub precision: f64,
    /// Points in the bracketing grid.
    pub grid_points: usize,
    pub device_gain_mode: DeviceGainMode,
    pub gpr: GprParams,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            horizon: 4,
            window: 20,
            precision: 1e-31,
            grid_points: 64,
            device_gain_mode: DeviceGainMode::Reported,
            gpr: GprParams::default(),
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon > 31 {
            return Err(Error::config("mpc.horizon", "must be <= 31"));
        }
        if self.window == 0 {
            return Err(Error::config("mpc.window", "must be >= 1"));
        }
        if !(self.precision >= 0.0) {
            return Err(Error::config("mpc.precision", "must be >= 0"));
        }
        if self.grid_points < 2 {
            return Err(Error::config("mpc.grid_points", "must be >= 2"));
        }
        self.gpr.validate()
    }

    /// Bisection stops once the bracket is narrower than this.
    pub fn effective_precision(&self, max_power: f64) -> f64 {
        self.precision.max(1e-6 * max_power)
    }
}

/// Forecast inputs for slots `t..=t+L`. Index 0 is the current slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub user_gain: Vec<f64>,
    /// `device_gains[τ][i]`.
    pub device_gains: Vec<Vec<f64>>,
    /// Energy arriving at the end of each virtual slot (mJ).
    pub arrivals: Vec<f64>,
}

impl Predictions {
    pub fn horizon(&self) -> usize {
        self.user_gain.len()
    }
}

/// The virtual network a candidate power is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct VirtualModel<'a> {
    pub model: &'a ModelParams,
    pub harvester: &'a HarvesterCurve,
    pub objective: Objective,
}

impl<'a> VirtualModel<'a> {
    pub fn new(spec: &'a EnvSpec, objective: Objective) -> Self {
        VirtualModel {
            model: &spec.model,
            harvester: &spec.harvester,
            objective,
        }
    }

    /// Average per-slot index when spending `u` mW (clamped to the virtual battery)
    /// in every predicted slot.
    pub fn rollout_value(
        &self,
        u: f64,
        battery: f64,
        device_batteries: &[f64],
        pred: &Predictions,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        self.rollout(u, battery, device_batteries, pred, scratch).0
    }

    /// Like [`rollout_value`](Self::rollout_value), also returning a signature:
    /// bit `τ` marks a virtual slot in which both user types were served, bit
    /// `32 + τ` one in which the battery, not `u`, limited the power.
    pub fn rollout(
        &self,
        u: f64,
        battery: f64,
        device_batteries: &[f64],
        pred: &Predictions,
        scratch: &mut Vec<f64>,
    ) -> (f64, u64) {
        let m = self.model;
        scratch.clear();
        scratch.extend_from_slice(device_batteries);
        let mut b = battery;
        let mut total = 0.0;
        let mut signature = 0u64;
        for tau in 0..pred.horizon() {
            let cap = m.power_cap(b);
            let p = u.min(cap);
            let phys = evaluate_slot(
                m,
                self.harvester,
                p,
                pred.user_gain[tau],
                &pred.device_gains[tau],
                scratch,
            );
            let ok = phys.all_devices && phys.user_satisfied;
            signature |= (ok as u64) << (tau % 32);
            signature |= ((u > cap) as u64) << (32 + tau % 32);
            total += match self.objective {
                Objective::Satisfaction => ok as u8 as f64,
                Objective::Efficiency => phys.efficiency,
            };
            if !m.unlimited_energy {
                b = (b - p + pred.arrivals[tau]).min(m.ap_battery_max).max(0.0);
            }
        }
        (total / pred.horizon() as f64, signature)
    }
}

/// Maximises a piecewise-smooth `probe` over `[0, cap]`.
///
/// `probe(u)` returns the value and a signature that stays constant wherever the
/// value is smooth in `u`. A `grid_points` scan brackets every signature change;
/// each bracket is bisected down to `precision` and both sides of the change
/// become candidates. Ties go to the lower power. Returns `(u, value)`.
pub fn optimize_power<F: FnMut(f64) -> (f64, u64)>(
    cap: f64,
    grid_points: usize,
    precision: f64,
    mut probe: F,
) -> (f64, f64) {
    if !(cap > 0.0) {
        return (0.0, probe(0.0).0);
    }
    let n = grid_points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { cap } else { cap * k as f64 / (n - 1) as f64 })
        .collect();
    let probes: Vec<(f64, u64)> = grid.iter().map(|u| probe(*u)).collect();

    let mut best = (grid[0], probes[0].0);
    let consider = |u: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 || (v == best.1 && u < best.0) {
            *best = (u, v);
        }
    };
    for k in 1..n {
        consider(grid[k], probes[k].0, &mut best);
    }
    // Brackets `(lo, probe(lo), hi, probe(hi))` whose ends differ in signature.
    type Probe = (f64, u64);
    let mut stack: Vec<(f64, Probe, f64, Probe)> = (1..n)
        .rev()
        .filter(|k| probes[k - 1].1 != probes[*k].1)
        .map(|k| (grid[k - 1], probes[k - 1], grid[k], probes[k]))
        .collect();
    while let Some((mut lo, mut plo, mut hi, mut phi)) = stack.pop() {
        while hi - lo > precision {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = probe(mid);
            if pm.1 == plo.1 {
                lo = mid;
                plo = pm;
            } else {
                if pm.1 != phi.1 {
                    // A third regime: the right half gets its own bracket.
                    stack.push((mid, pm, hi, phi));
                }
                hi = mid;
                phi = pm;
            }
        }
        consider(lo, plo.0, &mut best);
        consider(hi, phi.0, &mut best);
    }
    best
}

/// One forecaster per tracked quantity: arrivals, the data-user gain and each device gain.
#[derive(Debug, Clone)]
pub struct Forecasters {
    pub arrival: Forecaster,
    pub user_gain: Forecaster,
    pub device_gains: Vec<Forecaster>,
}

impl Forecasters {
    /// Cold-start fallbacks are the long-run means implied by the configuration.
    pub fn new(params: &MpcParams, spec: &EnvSpec, user_distances: &[f64], device_distances: &[f64]) -> Self {
        let channel = spec.model.channel();
        let mean_user = if user_distances.is_empty() {
            0.0
        } else {
            user_distances.iter().map(|d| channel.expected_gain(*d)).sum::<f64>()
                / user_distances.len() as f64
        };
        let f = |fallback: f64| Forecaster::new(params.window, params.gpr.clone(), fallback);
        Forecasters {
            arrival: f(spec.solar.stationary_mean_arrival()),
            user_gain: f(mean_user),
            device_gains: device_distances
                .iter()
                .map(|d| f(channel.expected_gain(*d)))
                .collect(),
        }
    }

    /// Absorbs what became known at the start of `obs.slot`: the previous slot's
    /// arrival and device reports, and the current user gain.
    pub fn update(&mut self, obs: &Observation) -> Result<()> {
        let t = obs.slot as f64;
        if let Some(e) = obs.last_arrival {
            self.arrival.push(t - 1.0, e)?;
        }
        if let Some(gains) = &obs.reported_device_gains {
            for (f, g) in self.device_gains.iter_mut().zip(gains) {
                f.push(t - 1.0, *g)?;
            }
        }
        self.user_gain.push(t, obs.user_gain)
    }
}

#[derive(Debug, Clone)]
pub struct MpcAgent {
    params: MpcParams,
    spec: EnvSpec,
    objective: Objective,
    forecasters: Forecasters,
    expected_device_gains: Vec<f64>,
    scratch: Vec<f64>,
    last_value: f64,
}

impl MpcAgent {
    pub fn new(
        params: MpcParams,
        spec: &EnvSpec,
        objective: Objective,
        user_distances: &[f64],
        device_distances: &[f64],
    ) -> Self {
        let channel = spec.model.channel();
        MpcAgent {
            forecasters: Forecasters::new(&params, spec, user_distances, device_distances),
            expected_device_gains: device_distances.iter().map(|d| channel.expected_gain(*d)).collect(),
            params,
            spec: spec.clone(),
            objective,
            scratch: Vec::new(),
            last_value: 0.0,
        }
    }

    pub fn params(&self) -> &MpcParams {
        &self.params
    }

    pub fn forecasters(&self) -> &Forecasters {
        &self.forecasters
    }

    /// Rollout value of the last decision.
    pub fn last_value(&self) -> f64 {
        self.last_value
    }

    /// Forecasts for `obs.slot ..= obs.slot + L`; the current user gain is observed.
    pub fn predictions(&self, obs: &Observation) -> Predictions {
        let t = obs.slot as f64;
        let n = self.params.horizon + 1;
        let f = &self.forecasters;
        let mut user_gain = Vec::with_capacity(n);
        let mut device_gains = Vec::with_capacity(n);
        let mut arrivals = Vec::with_capacity(n);
        for tau in 0..n {
            let q = t + tau as f64;
            user_gain.push(if tau == 0 {
                obs.user_gain
            } else {
                f.user_gain.predict(q).max(0.0)
            });
            device_gains.push(match self.params.device_gain_mode {
                DeviceGainMode::Reported => f.device_gains.iter().map(|g| g.predict(q).max(0.0)).collect(),
                DeviceGainMode::Expected => self.expected_device_gains.clone(),
            });
            arrivals.push(f.arrival.predict(q).max(0.0));
        }
        Predictions {
            user_gain,
            device_gains,
            arrivals,
        }
    }

    /// Best constant power for the given forecasts and `obs`'s battery state.
    pub fn plan(&mut self, obs: &Observation, pred: &Predictions) -> f64 {
        let vm = VirtualModel::new(&self.spec, self.objective);
        let cap = self.spec.model.power_cap(obs.battery);
        let scratch = &mut self.scratch;
        let (u, v) = optimize_power(
            cap,
            self.params.grid_points,
            self.params.effective_precision(self.spec.model.max_power),
            |u| vm.rollout(u, obs.battery, &obs.device_batteries, pred, scratch),
        );
        self.last_value = v;
        u.clamp(0.0, cap)
    }

    /// Records the observation in the forecast windows, then plans.
    pub fn try_decide(&mut self, obs: &Observation) -> Result<f64> {
        self.forecasters.update(obs)?;
        let pred = self.predictions(obs);
        Ok(self.plan(obs, &pred))
    }
}

impl Policy for MpcAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Mpc
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        match self.try_decide(obs) {
            Ok(u) => u,
            Err(e) => {
                // A failed refit leaves the previous models in place.
                log::warn!("mpc forecast update failed at slot {}: {e}", obs.slot);
                let pred = self.predictions(obs);
                self.plan(obs, &pred)
            }
        }
    }

    fn feedback(&mut self, _obs: &Observation, _power: f64, _outcome: &SlotOutcome, _next: &Observation) -> Result<()> {
        Ok(())
    }
}
