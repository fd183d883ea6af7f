//! Experiment orchestration: seeded runs of every (agent, seed[, sweep value])
//! combination on a bounded worker pool, episode metrics and summaries.

mod metrics;
mod output;

pub use metrics::{mean_and_se, EpisodeAccumulator, EpisodeMetrics, METRICS};
pub use output::{
    summary_table, write_episodes_csv, write_run_outputs, write_summary_csv, write_sweep_csv,
    write_sweep_outputs, write_sweep_summary_csv,
};

use std::sync::Arc;

use rayon::prelude::*;

use crate::agents::{
    AgentKind, DqnAgent, GreedyPolicy, NoPolicy, Policy, RandomPolicy, TabularAgent,
};
use crate::config::{SimConfig, SweepAxis};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mpc::MpcAgent;
use crate::rng::{stream, Stream};

/// Builds `kind` for the network `env` was constructed with.
pub fn build_policy(kind: AgentKind, cfg: &SimConfig, env: &Environment, seed: u64) -> Box<dyn Policy> {
    let spec = env.spec();
    let model = &spec.model;
    let objective = cfg.experiment.objective;
    match kind {
        AgentKind::Dqn => {
            let mut init = stream(seed, Stream::Init);
            Box::new(DqnAgent::new(
                cfg.dqn.clone(),
                model,
                objective,
                &mut init,
                stream(seed, Stream::Exploration),
            ))
        }
        AgentKind::Trl => Box::new(TabularAgent::new(
            cfg.trl.clone(),
            model,
            objective,
            stream(seed, Stream::Exploration),
        )),
        AgentKind::Mpc => {
            let users: Vec<f64> = env.users().iter().map(|u| u.distance).collect();
            let devices: Vec<f64> = env.devices().iter().map(|d| d.distance).collect();
            Box::new(MpcAgent::new(cfg.mpc.clone(), spec, objective, &users, &devices))
        }
        AgentKind::Greedy => Box::new(GreedyPolicy::new(model)),
        AgentKind::Random => Box::new(RandomPolicy::new(model, stream(seed, Stream::Exploration))),
        AgentKind::NoPolicy => Box::new(NoPolicy::new(model)),
    }
}

/// Per-episode metrics of one (agent, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub agent: AgentKind,
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
}

impl RunResult {
    /// Means of each metric over the episodes starting at or after `collection_slot`.
    pub fn collected_means(&self, episode_length: u64, collection_slot: u64) -> Option<[f64; 4]> {
        let kept: Vec<&EpisodeMetrics> = self
            .episodes
            .iter()
            .filter(|e| e.episode_index * episode_length >= collection_slot)
            .collect();
        if kept.is_empty() {
            return None;
        }
        let mut sums = [0.0; 4];
        for e in &kept {
            for (s, v) in sums.iter_mut().zip(e.values()) {
                *s += v;
            }
        }
        Some(sums.map(|s| s / kept.len() as f64))
    }
}

/// Runs `agent` for `total_slots` on the network seeded by `seed`, calling
/// `on_episode` as each episode closes.
pub fn run_single(
    cfg: &SimConfig,
    agent: AgentKind,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeMetrics),
) -> Result<RunResult> {
    let exp = &cfg.experiment;
    let mut env = Environment::new(cfg.env_spec(), seed)?;
    let mut policy = build_policy(agent, cfg, &env, seed);
    let mut acc = EpisodeAccumulator::default();
    let mut episodes = Vec::with_capacity(exp.episodes() as usize);
    let mut obs = env.observe();
    for t in 0..exp.total_slots {
        let power = policy.decide(&obs);
        let outcome = env.step(power);
        let next = env.observe();
        policy.feedback(&obs, power, &outcome, &next)?;
        acc.record(&outcome);
        obs = next;
        if (t + 1) % exp.episode_length == 0 {
            let m = acc.finish(t / exp.episode_length);
            if let Some(name) = m.non_finite() {
                return Err(Error::Aborted(format!(
                    "{agent} seed {seed}: {name} is not finite in episode {}",
                    m.episode_index
                )));
            }
            log::debug!(
                "{agent} seed {seed} episode {}: reward {:.4}",
                m.episode_index,
                m.reward
            );
            on_episode(&m);
            episodes.push(m);
        }
    }
    Ok(RunResult { agent, seed, episodes })
}

/// One unit of work for the pool.
#[derive(Debug, Clone)]
struct Job {
    cfg: Arc<SimConfig>,
    agent: AgentKind,
    seed: u64,
}

/// Runs jobs on `workers` threads (0: all cores); results come back in job order.
fn run_jobs(jobs: &[Job], workers: usize) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("experiment.workers", e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|j| {
                let r = run_single(&j.cfg, j.agent, j.seed, |_| {});
                log::info!("finished {} seed {}", j.agent, j.seed);
                r
            })
            .collect()
    })
}

/// Mean and standard error across seeds of one agent's collected metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: AgentKind,
    pub seeds: usize,
    /// Collected episodes per seed.
    pub episodes: usize,
    pub mean: [f64; 4],
    pub std_error: [f64; 4],
}

fn summarise(cfg: &SimConfig, runs: &[RunResult]) -> Vec<SummaryRow> {
    let exp = &cfg.experiment;
    let per_episode = exp.episodes() - exp.collection_slot / exp.episode_length;
    if per_episode == 0 {
        return Vec::new();
    }
    exp.agents
        .iter()
        .filter_map(|agent| {
            let per_seed: Vec<[f64; 4]> = runs
                .iter()
                .filter(|r| r.agent == *agent)
                .filter_map(|r| r.collected_means(exp.episode_length, exp.collection_slot))
                .collect();
            if per_seed.is_empty() {
                return None;
            }
            let mut mean = [0.0; 4];
            let mut std_error = [0.0; 4];
            for k in 0..4 {
                let xs: Vec<f64> = per_seed.iter().map(|m| m[k]).collect();
                (mean[k], std_error[k]) = mean_and_se(&xs);
            }
            Some(SummaryRow {
                agent: *agent,
                seeds: per_seed.len(),
                episodes: per_episode as usize,
                mean,
                std_error,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Ordered by agent (config order), then seed (config order).
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn run(&self, agent: AgentKind, seed: u64) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.agent == agent && r.seed == seed)
    }

    pub fn summary_for(&self, agent: AgentKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.agent == agent)
    }
}

fn jobs_for(cfg: &Arc<SimConfig>) -> Vec<Job> {
    let mut jobs = Vec::new();
    for agent in &cfg.experiment.agents {
        for seed in &cfg.experiment.seeds {
            jobs.push(Job {
                cfg: Arc::clone(cfg),
                agent: *agent,
                seed: *seed,
            });
        }
    }
    jobs
}

/// Every configured agent on every configured seed.
pub fn run_experiment(cfg: &SimConfig, workers: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cfg = Arc::new(cfg.clone());
    let runs = run_jobs(&jobs_for(&cfg), workers)?;
    Ok(ExperimentResult {
        summary: summarise(&cfg, &runs),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Summary mean of `metric` (index into [`METRICS`]) for `agent` at each sweep value.
    pub fn means(&self, agent: AgentKind, metric: usize) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.result.summary_for(agent).map_or(f64::NAN, |s| s.mean[metric]))
            .collect()
    }
}

/// One experiment per value of `axis`, all runs sharing one pool.
pub fn sweep(cfg: &SimConfig, axis: SweepAxis, values: &[f64], workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::config("sweep.values", "must not be empty"));
    }
    let cfgs: Vec<Arc<SimConfig>> = values
        .iter()
        .map(|v| {
            let c = cfg.with_axis_value(axis, *v);
            c.validate()?;
            Ok(Arc::new(c))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<Job> = cfgs.iter().flat_map(jobs_for).collect();
    let mut runs = run_jobs(&jobs, workers)?.into_iter();
    let per_point = cfg.experiment.agents.len() * cfg.experiment.seeds.len();
    let points = values
        .iter()
        .zip(&cfgs)
        .map(|(v, c)| {
            let runs: Vec<RunResult> = runs.by_ref().take(per_point).collect();
            SweepPoint {
                value: *v,
                result: ExperimentResult {
                    summary: summarise(c, &runs),
                    runs,
                },
            }
        })
        .collect();
    Ok(SweepResult { axis, points })
}
