use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, reward, state_features, ActionSpace, AgentKind, EpsilonSchedule, Objective, Policy,
    ReplayMemory, Transition,
};
use crate::env::{ModelParams, Observation, SlotOutcome};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpShape, TrainSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnParams {
    /// α
    pub learning_rate: f64,
    /// γ
    pub discount: f64,
    /// N_A
    pub actions: usize,
    /// N_D
    pub memory_size: usize,
    pub minibatch: usize,
    /// K: train every this many slots.
    pub train_interval: u64,
    /// K′: copy the evaluation network into the target network every this many slots.
    pub target_sync_interval: u64,
    /// First slot at which training may happen.
    pub replay_start: u64,
    pub network: MlpShape,
    pub epsilon: EpsilonSchedule,
}

impl Default for DqnParams {
    fn default() -> Self {
        DqnParams {
            learning_rate: 1e-5,
            discount: 0.4,
            actions: 100,
            memory_size: 50_000,
            minibatch: 200,
            train_interval: 2,
            target_sync_interval: 400,
            replay_start: 3_000,
            network: MlpShape::default(),
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("dqn.learning_rate", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("dqn.discount", "must lie in [0, 1]"));
        }
        if self.actions < 2 {
            return Err(Error::config("dqn.actions", "must be >= 2"));
        }
        if self.memory_size == 0 {
            return Err(Error::config("dqn.memory_size", "must be >= 1"));
        }
        if self.minibatch == 0 {
            return Err(Error::config("dqn.minibatch", "must be >= 1"));
        }
        if self.train_interval == 0 {
            return Err(Error::config("dqn.train_interval", "must be >= 1"));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("dqn.target_sync_interval", "must be >= 1"));
        }
        if self.network.hidden.contains(&0) {
            return Err(Error::config("dqn.network.hidden", "layer widths must be >= 1"));
        }
        if !(self.network.leaky_slope.is_finite() && self.network.leaky_slope >= 0.0) {
            return Err(Error::config("dqn.network.leaky_slope", "must be >= 0"));
        }
        self.epsilon.validate("dqn")
    }
}

/// Deep Q-network agent with replay memory and a periodically synced target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    params: DqnParams,
    model: ModelParams,
    objective: Objective,
    actions: ActionSpace,
    eval: Mlp,
    target: Mlp,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    scratch: Vec<f64>,
    out: Vec<f64>,
    train_steps: u64,
    last_loss: Option<f64>,
}

impl DqnAgent {
    /// `init_rng` seeds the network weights; `rng` drives exploration and minibatch sampling.
    pub fn new(
        params: DqnParams,
        model: &ModelParams,
        objective: Objective,
        init_rng: &mut ChaCha8Rng,
        rng: ChaCha8Rng,
    ) -> Self {
        let eval = Mlp::with_shape(2, params.actions, &params.network, init_rng);
        let target = eval.clone();
        DqnAgent {
            actions: ActionSpace::new(params.actions, model.max_power),
            memory: ReplayMemory::new(params.memory_size),
            model: model.clone(),
            objective,
            eval,
            target,
            rng,
            scratch: Vec::new(),
            out: Vec::new(),
            train_steps: 0,
            last_loss: None,
            params,
        }
    }

    pub fn params(&self) -> &DqnParams {
        &self.params
    }

    pub fn evaluation_network(&self) -> &Mlp {
        &self.eval
    }

    pub fn evaluation_network_mut(&mut self) -> &mut Mlp {
        &mut self.eval
    }

    pub fn target_network(&self) -> &Mlp {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn action_space(&self) -> ActionSpace {
        self.actions
    }

    /// Replaces both networks (checkpoint restore).
    pub fn load_networks(&mut self, net: Mlp) -> Result<()> {
        if net.sizes() != self.eval.sizes() {
            return Err(Error::Format(format!(
                "network shape {:?} does not match {:?}",
                net.sizes(),
                self.eval.sizes()
            )));
        }
        self.target = net.clone();
        self.eval = net;
        Ok(())
    }

    pub fn q_values(&mut self, features: [f64; 2]) -> &[f64] {
        self.eval.forward_into(&features, &mut self.scratch, &mut self.out);
        &self.out
    }

    /// Best level among those `battery` can pay for.
    pub fn greedy_index(&mut self, features: [f64; 2], battery: f64) -> usize {
        let n = self.actions.feasible(battery);
        argmax(&self.q_values(features)[..n])
    }

    /// ε-greedy level index for the observation at `obs.slot`.
    pub fn select_index(&mut self, obs: &Observation) -> usize {
        let eps = self.params.epsilon.value(obs.slot);
        if self.rng.random::<f64>() < eps {
            self.rng.random_range(0..self.actions.len())
        } else {
            self.greedy_index(state_features(obs, &self.model), obs.battery)
        }
    }

    /// TD targets `r + γ max_a' Q(s', a'; θ')` for a batch.
    pub fn td_targets(&mut self, batch: &[&Transition]) -> Vec<f64> {
        let gamma = self.params.discount;
        batch
            .iter()
            .map(|t| {
                if gamma == 0.0 {
                    return t.reward;
                }
                self.target.forward_into(&t.next_state, &mut self.scratch, &mut self.out);
                let n = t.next_feasible.clamp(1, self.out.len());
                let best = self.out[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + gamma * best
            })
            .collect()
    }

    /// One SGD step on a fresh minibatch. No-op on an empty memory.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.memory.is_empty() {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .memory
            .sample(&mut self.rng, self.params.minibatch)
            .into_iter()
            .copied()
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = self.td_targets(&refs);
        let samples: Vec<TrainSample> = batch
            .iter()
            .zip(&targets)
            .map(|(t, y)| TrainSample {
                input: &t.state,
                action: t.action,
                target: *y,
            })
            .collect();
        let loss = self.eval.sgd_step(&samples, self.params.learning_rate)?;
        self.train_steps += 1;
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }

    /// Stores the transition for slot `slot`, trains every `K` slots from the
    /// replay start, and syncs the target network every `K′` slots.
    pub fn observe_transition(&mut self, transition: Transition, slot: u64) -> Result<()> {
        self.memory.push(transition);
        if slot >= self.params.replay_start && slot.is_multiple_of(self.params.train_interval) {
            self.train_step()?;
        }
        if slot > 0 && slot.is_multiple_of(self.params.target_sync_interval) {
            self.target.copy_from(&self.eval);
        }
        Ok(())
    }
}

impl Policy for DqnAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Dqn
    }

    fn decide(&mut self, obs: &Observation) -> f64 {
        let index = self.select_index(obs);
        self.actions.execute(index, obs.battery)
    }

    fn feedback(&mut self, obs: &Observation, power: f64, outcome: &SlotOutcome, next: &Observation) -> Result<()> {
        let t = Transition {
            state: state_features(obs, &self.model),
            action: self.actions.nearest(power),
            reward: reward(outcome, self.objective),
            next_state: state_features(next, &self.model),
            next_feasible: self.actions.feasible(next.battery),
        };
        self.observe_transition(t, obs.slot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn agent(params: DqnParams, seed: u64) -> DqnAgent {
        let mut init = stream(seed, Stream::Init);
        DqnAgent::new(
            params,
            &ModelParams::default(),
            Objective::Satisfaction,
            &mut init,
            stream(seed, Stream::Exploration),
        )
    }

    fn small() -> DqnParams {
        DqnParams {
            network: MlpShape {
                hidden: vec![8],
                leaky_slope: 0.01,
            },
            actions: 4,
            minibatch: 8,
            replay_start: 20,
            target_sync_interval: 10,
            learning_rate: 1e-2,
            ..DqnParams::default()
        }
    }

    fn tr(i: u64) -> Transition {
        let x = (i % 7) as f64 / 7.0;
        Transition {
            state: [x, 1.0 - x],
            action: (i % 4) as usize,
            reward: (i % 2) as f64,
            next_state: [1.0 - x, x],
            next_feasible: 4,
        }
    }

    fn obs(slot: u64, battery: f64) -> Observation {
        Observation {
            slot,
            user: 0,
            user_gain: 0.004,
            battery,
            device_batteries: vec![0.0; 5],
            reported_device_gains: None,
            last_arrival: None,
        }
    }

    #[test]
    fn parameters_frozen_before_replay_start() {
        let mut a = agent(small(), 1);
        let before = a.evaluation_network().clone();
        for t in 0..20 {
            a.observe_transition(tr(t), t).unwrap();
        }
        assert_eq!(a.memory().len(), 20);
        assert_eq!(a.evaluation_network(), &before);
        assert_eq!(a.train_steps(), 0);
        a.observe_transition(tr(20), 20).unwrap();
        assert_eq!(a.train_steps(), 1);
        assert_ne!(a.evaluation_network(), &before);
    }

    #[test]
    fn target_changes_only_on_sync() {
        let mut a = agent(small(), 2);
        let initial_target = a.target_network().clone();
        for t in 0..20 {
            a.observe_transition(tr(t), t).unwrap();
        }
        assert_eq!(a.target_network(), &initial_target);
        // Slot 20 trains first, then syncs.
        a.observe_transition(tr(20), 20).unwrap();
        assert_ne!(a.target_network(), &initial_target);
        assert_eq!(a.target_network(), a.evaluation_network());
        for t in 21..30 {
            a.observe_transition(tr(t), t).unwrap();
        }
        assert_ne!(a.target_network(), a.evaluation_network());
        a.observe_transition(tr(30), 30).unwrap();
        assert_eq!(a.target_network(), a.evaluation_network());
        a.observe_transition(tr(31), 31).unwrap();
        a.observe_transition(tr(32), 32).unwrap();
        assert_ne!(a.target_network(), a.evaluation_network());
    }

    #[test]
    fn myopic_targets_are_rewards() {
        let mut a = agent(DqnParams { discount: 0.0, ..small() }, 3);
        let batch: Vec<Transition> = (0..6).map(tr).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = a.td_targets(&refs);
        assert_eq!(y, batch.iter().map(|t| t.reward).collect::<Vec<_>>());
    }

    #[test]
    fn empty_memory_training_is_noop() {
        let mut a = agent(small(), 4);
        assert_eq!(a.train_step().unwrap(), None);
    }

    #[test]
    fn identical_seeds_identical_weights() {
        let run = || {
            let p = DqnParams {
                replay_start: 100,
                minibatch: 32,
                ..small()
            };
            let mut a = agent(p, 9);
            for t in 0..5000 {
                a.observe_transition(tr(t * 13 + 1), t).unwrap();
            }
            a.evaluation_network().params_flat()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn exploitation_is_deterministic_and_scale_invariant() {
        let p = DqnParams {
            epsilon: EpsilonSchedule {
                initial: 0.0,
                final_: 0.0,
                ..EpsilonSchedule::default()
            },
            ..small()
        };
        let mut a = agent(p, 5);
        let o = obs(10, 1e5);
        let first = a.select_index(&o);
        for _ in 0..20 {
            assert_eq!(a.select_index(&o), first);
        }
        // Scaling the output layer by a positive factor scales every Q-value.
        let last = a.evaluation_network_mut().layers_mut().last_mut().unwrap();
        for w in last.weights.iter_mut().chain(last.bias.iter_mut()) {
            *w *= 3.5;
        }
        assert_eq!(a.select_index(&o), first);
    }

    /// Output bias rising with the index, all weights zero: the top level is
    /// the unmasked argmax.
    fn rising_agent() -> DqnAgent {
        let p = DqnParams {
            epsilon: EpsilonSchedule {
                initial: 0.0,
                final_: 0.0,
                ..EpsilonSchedule::default()
            },
            discount: 0.5,
            ..small()
        };
        let mut a = agent(p, 8);
        let last = a.evaluation_network_mut().layers_mut().last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        for (i, b) in last.bias.iter_mut().enumerate() {
            *b = i as f64;
        }
        let net = a.evaluation_network().clone();
        a.load_networks(net).unwrap();
        a
    }

    #[test]
    fn greedy_choice_skips_unaffordable_levels() {
        let mut a = rising_agent();
        // Four levels over 200 mW: 0, 66.7, 133.3, 200.
        assert_eq!(a.select_index(&obs(0, 1e5)), 3);
        assert_eq!(a.select_index(&obs(0, 140.0)), 2);
        assert_eq!(a.select_index(&obs(0, 90.0)), 1);
        assert_eq!(a.select_index(&obs(0, 10.0)), 0);
    }

    #[test]
    fn td_maximum_runs_over_affordable_levels() {
        let mut a = rising_agent();
        let mut t = tr(0);
        t.reward = 1.0;
        for (n, best) in [(4, 3.0), (2, 1.0), (1, 0.0), (0, 0.0)] {
            t.next_feasible = n;
            assert_eq!(a.td_targets(&[&t]), vec![1.0 + 0.5 * best]);
        }
    }

    #[test]
    fn executed_power_is_clamped_to_battery() {
        let mut a = agent(DqnParams::default(), 6);
        for t in 0..500 {
            let p = a.decide(&obs(t, 40.0));
            assert!((0.0..=40.0).contains(&p));
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let p = DqnParams {
            epsilon: EpsilonSchedule {
                initial: 1.0,
                final_: 1.0,
                ..EpsilonSchedule::default()
            },
            ..DqnParams::default()
        };
        let mut a = agent(p, 7);
        let n = 10_000;
        let mut counts = vec![0usize; 100];
        for t in 0..n {
            counts[a.select_index(&obs(t, 1e5))] += 1;
        }
        let e = n as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
        // 99 dof; 0.999 quantile is about 148.2.
        assert!(chi2 < 148.2, "chi2 {chi2}");
    }
}
