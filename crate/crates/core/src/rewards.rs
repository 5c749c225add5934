//! Competitive and α-fair cooperative rewards, and discounted accumulation.
//!
//! Timing convention: the outcome of slot `t` is credited at slot `t + 1`.
//! A reward trace for an episode of `T` slots therefore has one entry per
//! slot, where entry `t` (0-based) is the reward that follows action `a(t)`.

use serde::{Deserialize, Serialize};

use crate::env::SlotOutcome;
use crate::error::{Error, Result};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardKind {
    /// Each user is paid for its own successes, one unit per slot.
    Competitive,
    /// Every user receives `sum_n f(x_n)` at the horizon and nothing before.
    AlphaFair { alpha: f64 },
}

/// Serialized as a flat table: `kind = "competitive"` or
/// `kind = "alpha_fair"` with `alpha`, plus the remaining fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RewardTable", into = "RewardTable")]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub gamma: f64,
    pub log_floor: f64,
    pub credit: Credit,
    /// Overrides the factor applied to rewards before they enter TD targets.
    pub scale: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardTable {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default = "default_log_floor")]
    log_floor: f64,
    #[serde(default, skip_serializing_if = "Credit::is_terminal")]
    credit: Credit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl TryFrom<RewardTable> for RewardSpec {
    type Error = String;

    fn try_from(t: RewardTable) -> std::result::Result<RewardSpec, String> {
        let kind = match (t.kind.as_str(), t.alpha) {
            ("competitive", None) => RewardKind::Competitive,
            ("competitive", Some(_)) => return Err("the competitive reward takes no alpha".into()),
            ("alpha_fair", Some(alpha)) => RewardKind::AlphaFair { alpha },
            ("alpha_fair", None) => return Err("the alpha_fair reward needs alpha".into()),
            (other, _) => return Err(format!("unknown reward kind {other:?}")),
        };
        Ok(RewardSpec {
            kind,
            gamma: t.gamma,
            log_floor: t.log_floor,
            credit: t.credit,
            scale: t.scale,
        })
    }
}

impl From<RewardSpec> for RewardTable {
    fn from(r: RewardSpec) -> RewardTable {
        let (kind, alpha) = match r.kind {
            RewardKind::Competitive => ("competitive", None),
            RewardKind::AlphaFair { alpha } => ("alpha_fair", Some(alpha)),
        };
        RewardTable {
            kind: kind.into(),
            alpha,
            gamma: r.gamma,
            log_floor: r.log_floor,
            credit: r.credit,
            scale: r.scale,
        }
    }
}

/// How a cooperative episode reward is spread over the slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Credit {
    /// The whole utility arrives after the last slot.
    #[default]
    Terminal,
    /// Each slot is paid the change in team utility it caused. The slot
    /// rewards sum to the terminal utility, so undiscounted returns agree.
    Incremental,
}

impl Credit {
    fn is_terminal(&self) -> bool {
        *self == Credit::Terminal
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_log_floor() -> f64 {
    DEFAULT_LOG_FLOOR
}

impl RewardSpec {
    pub fn competitive() -> Self {
        RewardSpec {
            kind: RewardKind::Competitive,
            gamma: 1.0,
            log_floor: DEFAULT_LOG_FLOOR,
            credit: Credit::Terminal,
            scale: None,
        }
    }

    pub fn alpha_fair(alpha: f64) -> Self {
        RewardSpec {
            kind: RewardKind::AlphaFair { alpha },
            gamma: 1.0,
            log_floor: DEFAULT_LOG_FLOOR,
            credit: Credit::Terminal,
            scale: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_credit(mut self, credit: Credit) -> Self {
        self.credit = credit;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let RewardKind::AlphaFair { alpha } = self.kind {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::Config(format!("alpha = {alpha} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma = {} not in [0, 1]",
                self.gamma
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config(format!(
                "log_floor = {} must be positive",
                self.log_floor
            )));
        }
        if let Some(scale) = self.scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!(
                    "reward scale = {scale} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Per-user rewards credited after each slot of an episode, `[user][t]`.
    pub fn credited_rewards(&self, outcomes: &[SlotOutcome], num_users: usize) -> Vec<Vec<f64>> {
        let horizon = outcomes.len();
        match self.kind {
            RewardKind::Competitive => (0..num_users)
                .map(|n| outcomes.iter().map(|o| competitive_reward(o, n)).collect())
                .collect(),
            RewardKind::AlphaFair { alpha } => {
                let mut counts = vec![0u64; num_users];
                let mut slot_rewards = vec![0.0; horizon];
                let mut previous = 0.0;
                for (t, o) in outcomes.iter().enumerate() {
                    for (c, &s) in counts.iter_mut().zip(&o.success) {
                        *c += s as u64;
                    }
                    if self.credit == Credit::Incremental {
                        let current = cooperative_terminal_reward(&counts, alpha, self.log_floor);
                        slot_rewards[t] = current - previous;
                        previous = current;
                    }
                }
                if self.credit == Credit::Terminal {
                    if let Some(last) = slot_rewards.last_mut() {
                        *last = cooperative_terminal_reward(&counts, alpha, self.log_floor);
                    }
                }
                vec![slot_rewards; num_users]
            }
        }
    }

    /// Factor applied to credited rewards before they enter TD targets.
    ///
    /// Cooperative terminal sums scale with `N * T`; dividing by it keeps
    /// targets of order one. Competitive rewards are used as is. An explicit
    /// `scale` takes precedence over both.
    pub fn training_scale(&self, num_users: usize, horizon: usize) -> f64 {
        if let Some(scale) = self.scale {
            return scale;
        }
        match self.kind {
            RewardKind::Competitive => 1.0,
            RewardKind::AlphaFair { .. } => 1.0 / (num_users * horizon) as f64,
        }
    }
}

/// `1_n(t-1)`: one if user `n` succeeded in the previous slot.
pub fn competitive_reward(previous: &SlotOutcome, n: usize) -> f64 {
    if previous.success[n] {
        1.0
    } else {
        0.0
    }
}

/// α-fair utility `x^(1-α) / (1-α)`, with `ln x` at α = 1.
///
/// For α >= 1 the utility is singular at zero, so `x` is replaced by
/// `max(x, log_floor)` there.
pub fn alpha_fair_utility(x: f64, alpha: f64, log_floor: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("utility argument {x} is negative")));
    }
    if alpha < 0.0 {
        return Err(Error::Domain(format!("alpha = {alpha} is negative")));
    }
    Ok(if alpha == 0.0 {
        x
    } else if alpha == 1.0 {
        x.max(log_floor).ln()
    } else {
        let base = if alpha > 1.0 { x.max(log_floor) } else { x };
        base.powf(1.0 - alpha) / (1.0 - alpha)
    })
}

/// `sum_n f(x_n)`, credited to every user at the horizon.
pub fn cooperative_terminal_reward(success_counts: &[u64], alpha: f64, log_floor: f64) -> f64 {
    success_counts
        .iter()
        .map(|&x| alpha_fair_utility(x as f64, alpha, log_floor).expect("counts are nonnegative"))
        .sum()
}

/// `R = sum_t gamma^(t-1) r(t)`.
pub fn accumulated_reward(rewards: &[f64], gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}
