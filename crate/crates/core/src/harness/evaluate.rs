//! Frozen-policy evaluation over seeds and episodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::PolicyParams;
use crate::baseline::{simulate_aloha_users, AlohaPolicy};
use crate::env::{EnvConfig, SlotOutcome};
use crate::error::{Error, Result};
use crate::harness::metrics::{mean_metrics, MetricsSummary, WindowMetrics};
use crate::harness::occupancy::{classify_allocation, persistent_all_transmit, Allocation};
use crate::nn::NetworkParams;
use crate::rewards::RewardSpec;
use crate::seeding;
use crate::trainer::collect_episode;

const STREAM_EVAL: u64 = 21;

/// What drives the users during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// The shared DQN under the given action law.
    Dqn {
        params: &'a NetworkParams,
        policy: PolicyParams,
    },
    /// Slotted Aloha, one policy per user.
    Aloha(&'a [AlohaPolicy]),
}

/// Episode length, count and metric window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub horizon: usize,
    pub episodes: usize,
    /// Metrics use the final `window` slots (clamped to the horizon).
    pub window: usize,
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.episodes == 0 || self.window == 0 {
            return Err(Error::Config(
                "evaluation horizon, episodes and window must be positive".into(),
            ));
        }
        Ok(())
    }

    fn window_of<'o>(&self, outcomes: &'o [SlotOutcome]) -> &'o [SlotOutcome] {
        &outcomes[outcomes.len().saturating_sub(self.window)..]
    }
}

/// Results for one master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedEvaluation {
    pub seed: u64,
    /// Window metrics averaged over the seed's episodes.
    pub metrics: WindowMetrics,
    /// Allocation of the first episode's window (single-clique networks only).
    pub allocation: Option<Allocation>,
    /// Whether the first episode's window shows every user stuck on one channel.
    pub all_transmit: bool,
    /// Every slot of the first episode.
    pub trace: Vec<SlotOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_seed: Vec<SeedEvaluation>,
    pub summary: MetricsSummary,
}

fn run_episode(
    controller: &Controller,
    env: &EnvConfig,
    seed: u64,
    episode: usize,
) -> Result<Vec<SlotOutcome>> {
    let mut rng = seeding::stream(seed, &[STREAM_EVAL, episode as u64]);
    match controller {
        Controller::Dqn { params, policy } => {
            // the reward only affects credited values, which evaluation ignores
            let trace =
                collect_episode(env, params, *policy, &RewardSpec::competitive(), &mut rng)?;
            Ok(trace.outcomes)
        }
        Controller::Aloha(policies) => Ok(simulate_aloha_users(env.clone(), policies, &mut rng)?
            .outcome_log()
            .to_vec()),
    }
}

/// Evaluates `controller` on `env` (with its horizon replaced) for each seed.
///
/// Episodes of all seeds run on `workers` threads; results are gathered in
/// (seed, episode) order so every value is independent of the worker count.
pub fn evaluate_policy(
    controller: &Controller,
    env: &EnvConfig,
    settings: &EvalSettings,
    seeds: &[u64],
    workers: usize,
) -> Result<Evaluation> {
    settings.validate()?;
    let env = EnvConfig {
        horizon: settings.horizon,
        ..env.clone()
    };
    env.validate()?;
    if let Controller::Dqn { params, policy } = controller {
        policy.validate()?;
        if params.arch.num_channels != env.num_channels {
            return Err(Error::Config(format!(
                "network was trained for K = {} but the environment has K = {}",
                params.arch.num_channels, env.num_channels
            )));
        }
    }
    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..settings.episodes).map(move |e| (s, e)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut episodes: Vec<Vec<SlotOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, e)| run_episode(controller, &env, s, e))
            .collect::<Result<_>>()
    })?;

    let single_clique = env.clique_partition().len() == 1;
    let mut per_seed = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let chunk = &mut episodes[i * settings.episodes..(i + 1) * settings.episodes];
        let windows: Vec<WindowMetrics> = chunk
            .iter()
            .map(|o| WindowMetrics::from_outcomes(settings.window_of(o), env.num_users))
            .collect();
        let first = std::mem::take(&mut chunk[0]);
        let window = settings.window_of(&first);
        let allocation = if single_clique && window.len() >= crate::harness::occupancy::MIN_WINDOW {
            Some(classify_allocation(window, env.num_channels)?)
        } else {
            None
        };
        per_seed.push(SeedEvaluation {
            seed,
            metrics: mean_metrics(&windows),
            allocation,
            all_transmit: single_clique && persistent_all_transmit(window),
            trace: first,
        });
    }
    let summary = MetricsSummary::of(
        &per_seed
            .iter()
            .map(|s| s.metrics.clone())
            .collect::<Vec<_>>(),
    );
    Ok(Evaluation { per_seed, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    fn rigged(k: usize, action: usize) -> NetworkParams {
        let mut p = NetworkParams::zeros(Architecture::new(k).with_widths(2, 3, 2));
        p.advantage_out.bias.data_mut()[action] = 10.0;
        p
    }

    fn greedy() -> PolicyParams {
        PolicyParams::new(0.0, 1e6).unwrap()
    }

    fn settings(horizon: usize) -> EvalSettings {
        EvalSettings {
            horizon,
            episodes: 2,
            window: horizon,
        }
    }

    #[test]
    fn lone_transmitter() {
        let params = rigged(1, 1);
        let c = Controller::Dqn {
            params: &params,
            policy: greedy(),
        };
        let ev = evaluate_policy(&c, &EnvConfig::new(1, 1, 1), &settings(60), &[0, 1], 1).unwrap();
        assert_eq!(ev.summary.throughput.mean, 1.0);
        assert_eq!(ev.summary.idle_frac.mean, 0.0);
        assert_eq!(ev.summary.collision_frac.mean, 0.0);
        assert_eq!(ev.per_seed[0].allocation, Some(Allocation::OrthogonalFixed));
    }

    #[test]
    fn two_forced_colliders() {
        let params = rigged(1, 1);
        let c = Controller::Dqn {
            params: &params,
            policy: greedy(),
        };
        let ev = evaluate_policy(&c, &EnvConfig::new(2, 1, 1), &settings(60), &[4], 1).unwrap();
        assert_eq!(ev.summary.throughput.mean, 0.0);
        assert_eq!(ev.summary.collision_frac.mean, 1.0);
        assert!(ev.per_seed[0].all_transmit);
    }

    #[test]
    fn channel_mismatch_is_a_config_error() {
        let params = rigged(2, 1);
        let c = Controller::Dqn {
            params: &params,
            policy: greedy(),
        };
        let err =
            evaluate_policy(&c, &EnvConfig::new(2, 1, 1), &settings(60), &[0], 1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let params = NetworkParams::init(
            Architecture::new(2).with_widths(3, 4, 3),
            &mut seeding::stream(1, &[]),
        );
        let c = Controller::Dqn {
            params: &params,
            policy: PolicyParams::new(0.1, 2.0).unwrap(),
        };
        let env = EnvConfig::new(3, 2, 1);
        let a = evaluate_policy(&c, &env, &settings(80), &[1, 2, 3], 1).unwrap();
        let b = evaluate_policy(&c, &env, &settings(80), &[1, 2, 3], 3).unwrap();
        assert_eq!(a, b);
    }
}
