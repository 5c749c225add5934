//! Slot-synchronous multichannel random-access medium.
//!
//! `N` backlogged users share `K` orthogonal channels. In each slot every user
//! either stays silent (action 0) or transmits on one channel. A transmission
//! succeeds iff it is the only one on that channel within the user's clique;
//! users in different cliques never interfere. The only feedback a user gets
//! is its own ACK bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-user action for one slot: 0 = silent, `k >= 1` = transmit on channel `k`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Action(u32);

impl Action {
    pub const IDLE: Action = Action(0);

    pub fn new(value: usize, num_channels: usize) -> Result<Action> {
        if value > num_channels {
            return Err(Error::Domain(format!(
                "action {value} outside 0..={num_channels}"
            )));
        }
        Ok(Action(value as u32))
    }

    /// Transmit on channel `k` (1-based). Does not check `k` against `K`.
    pub fn channel(k: usize) -> Action {
        Action(k as u32)
    }

    /// Action with raw index `i` (0 is silence). Does not check `i` against `K`.
    pub fn from_index(i: usize) -> Action {
        Action(i as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_transmit(self) -> bool {
        self.0 != 0
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Static description of a network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub num_users: usize,
    pub num_channels: usize,
    pub horizon: usize,
    /// Conditional rate of each channel; length `num_channels`.
    #[serde(default)]
    pub capacities: Vec<f64>,
    /// Partition of user indices (0-based) into interference cliques.
    /// Empty means one clique holding every user.
    #[serde(default)]
    pub cliques: Vec<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    /// One clique, unit capacities, seed 0.
    pub fn new(num_users: usize, num_channels: usize, horizon: usize) -> Self {
        EnvConfig {
            num_users,
            num_channels,
            horizon,
            capacities: vec![1.0; num_channels],
            cliques: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_cliques(mut self, cliques: Vec<Vec<usize>>) -> Self {
        self.cliques = cliques;
        self
    }

    pub fn with_capacities(mut self, capacities: Vec<f64>) -> Self {
        self.capacities = capacities;
        self
    }

    /// Consecutive cliques with the given sizes; `num_users` becomes their sum.
    pub fn from_clique_sizes(sizes: &[usize], num_channels: usize, horizon: usize) -> Self {
        let mut next = 0;
        let cliques = sizes
            .iter()
            .map(|&s| {
                let c: Vec<usize> = (next..next + s).collect();
                next += s;
                c
            })
            .collect();
        EnvConfig::new(next, num_channels, horizon).with_cliques(cliques)
    }

    /// Capacities, filling in the all-ones default when none were given.
    pub fn capacities(&self) -> Vec<f64> {
        if self.capacities.is_empty() {
            vec![1.0; self.num_channels]
        } else {
            self.capacities.clone()
        }
    }

    /// The clique partition, filling in the single-clique default.
    pub fn clique_partition(&self) -> Vec<Vec<usize>> {
        if self.cliques.is_empty() {
            vec![(0..self.num_users).collect()]
        } else {
            self.cliques.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::Config("num_users must be at least 1".into()));
        }
        if self.num_channels == 0 {
            return Err(Error::Config("num_channels must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let caps = self.capacities();
        if caps.len() != self.num_channels {
            return Err(Error::Config(format!(
                "{} capacities given for {} channels",
                caps.len(),
                self.num_channels
            )));
        }
        if let Some(c) = caps.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!(
                "capacity {c} is not strictly positive"
            )));
        }
        let mut seen = vec![false; self.num_users];
        for clique in self.clique_partition() {
            if clique.is_empty() {
                return Err(Error::Config("empty clique".into()));
            }
            for u in clique {
                if u >= self.num_users {
                    return Err(Error::Config(format!("clique member {u} is not a user")));
                }
                if std::mem::replace(&mut seen[u], true) {
                    return Err(Error::Config(format!("user {u} is in two cliques")));
                }
            }
        }
        if let Some(u) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("user {u} belongs to no clique")));
        }
        Ok(())
    }
}

/// What happened on one channel of one clique during a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelUse {
    Idle,
    Success(usize),
    Collision,
}

/// Resolution of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot_index: usize,
    pub actions: Vec<Action>,
    pub success: Vec<bool>,
    pub ack: Vec<bool>,
    /// Indexed `[clique * K + (k - 1)]`.
    pub channel_use: Vec<ChannelUse>,
}

impl SlotOutcome {
    /// ACK bit seen by user `n`.
    pub fn local_observation(&self, n: usize) -> bool {
        self.ack[n]
    }
}

/// Fractions of (clique, channel, slot) cells that were successful, idle, and collided.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelFractions {
    pub throughput: f64,
    pub idle: f64,
    pub collision: f64,
}

impl ChannelFractions {
    pub fn from_outcomes(outcomes: &[SlotOutcome]) -> ChannelFractions {
        let mut counts = [0usize; 3];
        for o in outcomes {
            for u in &o.channel_use {
                counts[match u {
                    ChannelUse::Success(_) => 0,
                    ChannelUse::Idle => 1,
                    ChannelUse::Collision => 2,
                }] += 1;
            }
        }
        let total = counts.iter().sum::<usize>().max(1) as f64;
        ChannelFractions {
            throughput: counts[0] as f64 / total,
            idle: counts[1] as f64 / total,
            collision: counts[2] as f64 / total,
        }
    }
}

/// Mutable simulation state of one environment instance.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    cliques: Vec<Vec<usize>>,
    current_slot: usize,
    success_counts: Vec<u64>,
    outcome_log: Vec<SlotOutcome>,
}

impl Env {
    pub fn reset(config: EnvConfig) -> Result<Env> {
        config.validate()?;
        let cliques = config.clique_partition();
        let n = config.num_users;
        Ok(Env {
            config,
            cliques,
            current_slot: 0,
            success_counts: vec![0; n],
            outcome_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn current_slot(&self) -> usize {
        self.current_slot
    }

    pub fn is_done(&self) -> bool {
        self.current_slot >= self.config.horizon
    }

    /// `x_n`: number of successful slots of each user so far.
    pub fn success_counts(&self) -> &[u64] {
        &self.success_counts
    }

    pub fn outcome_log(&self) -> &[SlotOutcome] {
        &self.outcome_log
    }

    /// Seed of an auxiliary RNG stream tied to this instance.
    pub fn stream_seed(&self, keys: &[u64]) -> u64 {
        crate::seeding::derive_seed(self.config.seed, keys)
    }

    /// Resolves one slot given every user's action.
    pub fn step(&mut self, actions: &[Action]) -> Result<&SlotOutcome> {
        if self.current_slot >= self.config.horizon {
            return Err(Error::HorizonExceeded {
                slot: self.current_slot,
                horizon: self.config.horizon,
            });
        }
        let n = self.config.num_users;
        let k = self.config.num_channels;
        if actions.len() != n {
            return Err(Error::Domain(format!(
                "{} actions for {} users",
                actions.len(),
                n
            )));
        }
        if let Some(a) = actions.iter().find(|a| a.index() > k) {
            return Err(Error::Domain(format!("action {a} outside 0..={k}")));
        }

        let mut success = vec![false; n];
        let mut channel_use = Vec::with_capacity(self.cliques.len() * k);
        // (count, last transmitter) per channel, reused across cliques
        let mut tally = vec![(0usize, 0usize); k];
        for clique in &self.cliques {
            tally.iter_mut().for_each(|t| *t = (0, 0));
            for &u in clique {
                let a = actions[u].index();
                if a > 0 {
                    tally[a - 1].0 += 1;
                    tally[a - 1].1 = u;
                }
            }
            for &(count, user) in &tally {
                channel_use.push(match count {
                    0 => ChannelUse::Idle,
                    1 => {
                        success[user] = true;
                        ChannelUse::Success(user)
                    }
                    _ => ChannelUse::Collision,
                });
            }
        }
        for (c, s) in self.success_counts.iter_mut().zip(&success) {
            *c += *s as u64;
        }
        let outcome = SlotOutcome {
            slot_index: self.current_slot,
            actions: actions.to_vec(),
            ack: success.clone(),
            success,
            channel_use,
        };
        self.current_slot += 1;
        self.outcome_log.push(outcome);
        Ok(self.outcome_log.last().expect("just pushed"))
    }
}
