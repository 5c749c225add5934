//! Slotted-Aloha reference: fixed attempt probability, closed-form throughput.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, EnvConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRule {
    /// Always channel 1.
    Single,
    /// Uniform over `1..=K` on each attempt.
    Uniform { num_channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaPolicy {
    pub attempt_prob: f64,
    pub channels: ChannelRule,
}

impl AlohaPolicy {
    pub fn single(attempt_prob: f64) -> Result<AlohaPolicy> {
        AlohaPolicy::new(attempt_prob, ChannelRule::Single)
    }

    pub fn new(attempt_prob: f64, channels: ChannelRule) -> Result<AlohaPolicy> {
        if !(0.0..=1.0).contains(&attempt_prob) {
            return Err(Error::Domain(format!(
                "attempt probability {attempt_prob} not in [0, 1]"
            )));
        }
        if let ChannelRule::Uniform { num_channels: 0 } = channels {
            return Err(Error::Domain("uniform channel rule needs K >= 1".into()));
        }
        Ok(AlohaPolicy {
            attempt_prob,
            channels,
        })
    }
}

/// `p = 1/n`, the throughput-optimal attempt probability for `n` users.
pub fn optimal_attempt_prob(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("clique size must be at least 1".into()));
    }
    Ok(1.0 / n as f64)
}

/// `n p (1-p)^(n-1)`: probability that exactly one of `n` users transmits.
pub fn aloha_throughput_analytic(n: usize, p: f64) -> f64 {
    n as f64 * p * (1.0 - p).powi(n as i32 - 1)
}

/// Aloha throughput at the optimal attempt probability for a clique of `n`.
pub fn optimal_aloha_throughput(n: usize) -> Result<f64> {
    Ok(aloha_throughput_analytic(n, optimal_attempt_prob(n)?))
}

pub fn aloha_act<R: Rng + ?Sized>(policy: &AlohaPolicy, rng: &mut R) -> Action {
    if rng.gen::<f64>() >= policy.attempt_prob {
        return Action::IDLE;
    }
    match policy.channels {
        ChannelRule::Single => Action::channel(1),
        ChannelRule::Uniform { num_channels } => Action::channel(rng.gen_range(1..=num_channels)),
    }
}

/// Runs every user of `config` under the same Aloha policy for the full horizon.
pub fn simulate_aloha<R: Rng + ?Sized>(
    config: EnvConfig,
    policy: &AlohaPolicy,
    rng: &mut R,
) -> Result<Env> {
    let policies = vec![*policy; config.num_users];
    simulate_aloha_users(config, &policies, rng)
}

/// Runs user `n` of `config` under `policies[n]` for the full horizon.
pub fn simulate_aloha_users<R: Rng + ?Sized>(
    config: EnvConfig,
    policies: &[AlohaPolicy],
    rng: &mut R,
) -> Result<Env> {
    if policies.len() != config.num_users {
        return Err(Error::Shape(format!(
            "{} Aloha policies for {} users",
            policies.len(),
            config.num_users
        )));
    }
    let mut env = Env::reset(config)?;
    let mut actions = vec![Action::IDLE; policies.len()];
    while !env.is_done() {
        for (a, policy) in actions.iter_mut().zip(policies) {
            *a = aloha_act(policy, rng);
        }
        env.step(&actions)?;
    }
    Ok(env)
}

/// Per-user policies that are throughput-optimal for each user's clique.
///
/// With `K` channels picked uniformly, a clique of `n` users sees per-channel
/// attempt probability `p/K`, which is best at `1/n`; so `p = min(1, K/n)`.
pub fn clique_optimal_policies(config: &EnvConfig) -> Result<Vec<AlohaPolicy>> {
    let k = config.num_channels;
    let rule = if k == 1 {
        ChannelRule::Single
    } else {
        ChannelRule::Uniform { num_channels: k }
    };
    let mut policies = vec![AlohaPolicy::single(0.0)?; config.num_users];
    for clique in config.clique_partition() {
        let p = (k as f64 * optimal_attempt_prob(clique.len())?).min(1.0);
        for &u in &clique {
            policies[u] = AlohaPolicy::new(p, rule)?;
        }
    }
    Ok(policies)
}

/// Per-channel throughput of `n` users at their best attempt probability when
/// each attempt picks one of `k` channels uniformly.
pub fn optimal_channel_throughput(n: usize, k: usize) -> f64 {
    let q = (1.0 / n as f64).min(1.0 / k as f64);
    aloha_throughput_analytic(n, q)
}

/// Mean analytic throughput of [`clique_optimal_policies`] over the
/// (clique, channel) cells of `config`.
pub fn clique_benchmark(config: &EnvConfig) -> f64 {
    let parts = config.clique_partition();
    parts
        .iter()
        .map(|c| optimal_channel_throughput(c.len(), config.num_channels))
        .sum::<f64>()
        / parts.len() as f64
}
