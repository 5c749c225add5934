//! TOML experiment configuration and the built-in scenarios.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{PolicyParams, PolicySchedule};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Architecture};
use crate::rewards::RewardSpec;
use crate::seeding;
use crate::trainer::{Topology, TrainConfig};

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// Names of the built-in scenarios.
pub const SCENARIOS: [&str; 4] = ["cliques", "sumrate-4x2", "competitive-3x2", "lograte-4x2"];

const STREAM_EVAL_TOPOLOGY: u64 = 11;

/// Random clique sizes, drawn uniformly from `min_size..=max_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliqueDraw {
    pub min_size: usize,
    pub max_size: usize,
    /// Cliques per training episode.
    pub train_count: usize,
    /// Cliques in each seed's evaluation network.
    pub eval_count: usize,
}

/// `[env]`: the network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// Number of users; leave out when `random_cliques` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_users: Option<usize>,
    pub num_channels: usize,
    /// Training episode length.
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub capacities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cliques: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_cliques: Option<CliqueDraw>,
}

/// `[train]`: optimizer and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    #[serde(default = "default_sync")]
    pub target_sync_period: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_clip")]
    pub grad_clip: f64,
    #[serde(default = "default_input_width")]
    pub input_width: usize,
    #[serde(default = "default_lstm_width")]
    pub lstm_width: usize,
    #[serde(default = "default_head_width")]
    pub head_width: usize,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn default_sync() -> usize {
    5
}
fn default_lr() -> f64 {
    AdamConfig::default().learning_rate
}
fn default_clip() -> f64 {
    1.0
}
fn default_input_width() -> usize {
    32
}
fn default_lstm_width() -> usize {
    64
}
fn default_head_width() -> usize {
    32
}

/// `[policy]`: exploration schedule for training and the evaluation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default = "default_alpha_start")]
    pub alpha_start: f64,
    #[serde(default = "default_alpha_decay")]
    pub alpha_decay: f64,
    #[serde(default = "default_alpha_floor")]
    pub alpha_floor: f64,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default = "default_alpha_floor")]
    pub eval_alpha_explore: f64,
    #[serde(default = "default_beta_end")]
    pub eval_beta: f64,
}

fn default_alpha_start() -> f64 {
    PolicySchedule::default().alpha_start
}
fn default_alpha_decay() -> f64 {
    PolicySchedule::default().alpha_decay
}
fn default_alpha_floor() -> f64 {
    PolicySchedule::default().alpha_floor
}
fn default_beta_start() -> f64 {
    PolicySchedule::default().beta_start
}
fn default_beta_end() -> f64 {
    PolicySchedule::default().beta_end
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            alpha_start: default_alpha_start(),
            alpha_decay: default_alpha_decay(),
            alpha_floor: default_alpha_floor(),
            beta_start: default_beta_start(),
            beta_end: default_beta_end(),
            eval_alpha_explore: default_alpha_floor(),
            eval_beta: default_beta_end(),
        }
    }
}

impl PolicySection {
    pub fn schedule(&self) -> PolicySchedule {
        PolicySchedule {
            alpha_start: self.alpha_start,
            alpha_decay: self.alpha_decay,
            alpha_floor: self.alpha_floor,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
        }
    }

    pub fn evaluation(&self) -> Result<PolicyParams> {
        PolicyParams::new(self.eval_alpha_explore, self.eval_beta)
    }
}

/// `[eval]`: evaluation episodes and Monte-Carlo seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Evaluation episode length.
    pub horizon: usize,
    pub episodes: usize,
    /// Metrics use the final `window` slots of each episode.
    pub window: usize,
    /// Number of master seeds in a sweep (`seed`, `seed + 1`, ...).
    pub seeds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// A complete, versioned experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub env: EnvSection,
    pub reward: RewardSpec,
    pub train: TrainSection,
    #[serde(default)]
    pub policy: PolicySection,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    /// One of the built-in scenarios in [`SCENARIOS`].
    pub fn scenario(name: &str) -> Result<ExperimentConfig> {
        let text = match name {
            "cliques" => include_str!("../../configs/cliques.toml"),
            "sumrate-4x2" => include_str!("../../configs/sumrate-4x2.toml"),
            "competitive-3x2" => include_str!("../../configs/competitive-3x2.toml"),
            "lograte-4x2" => include_str!("../../configs/lograte-4x2.toml"),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario {other:?} (expected one of {})",
                    SCENARIOS.join(", ")
                )))
            }
        };
        ExperimentConfig::from_toml_str(text)
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// [`config_hash`](Self::config_hash) as an integer, as stored in checkpoints.
    pub fn config_hash_u64(&self) -> u64 {
        u64::from_str_radix(&self.config_hash(), 16).expect("hash is 16 hex digits")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        match (&self.env.num_users, &self.env.random_cliques) {
            (Some(_), None) => {}
            (None, Some(draw)) => {
                if draw.min_size == 0
                    || draw.min_size > draw.max_size
                    || draw.train_count == 0
                    || draw.eval_count == 0
                {
                    return Err(Error::Config(format!("bad random_cliques {draw:?}")));
                }
                if !self.env.cliques.is_empty() {
                    return Err(Error::Config(
                        "random_cliques and cliques are exclusive".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::Config(
                    "set exactly one of env.num_users and env.random_cliques".into(),
                ))
            }
        }
        if self.eval.horizon == 0 || self.eval.episodes == 0 || self.eval.seeds == 0 {
            return Err(Error::Config(
                "eval horizon, episodes and seeds must be positive".into(),
            ));
        }
        if self.eval.window == 0 || self.eval.window > self.eval.horizon {
            return Err(Error::Config(format!(
                "eval window {} must lie in 1..={}",
                self.eval.window, self.eval.horizon
            )));
        }
        self.policy.evaluation()?;
        self.train_config(self.seed)?.validate()?;
        self.eval_env(self.seed)?.validate()
    }

    fn base_env(&self, horizon: usize) -> EnvConfig {
        let n = self.env.num_users.unwrap_or(1);
        EnvConfig::new(n, self.env.num_channels, horizon)
            .with_capacities(self.env.capacities.clone())
            .with_cliques(self.env.cliques.clone())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::new(self.env.num_channels).with_widths(
            self.train.input_width,
            self.train.lstm_width,
            self.train.head_width,
        )
    }

    /// Trainer configuration for master seed `seed`.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let topology = match self.env.random_cliques {
            Some(d) => Topology::RandomCliques {
                count: d.train_count,
                min_size: d.min_size,
                max_size: d.max_size,
            },
            None => Topology::Fixed,
        };
        let env = match self.env.random_cliques {
            // placeholder instance, replaced by a fresh draw every episode
            Some(d) => EnvConfig::from_clique_sizes(
                &vec![d.min_size; d.train_count],
                self.env.num_channels,
                self.env.horizon,
            )
            .with_capacities(self.env.capacities.clone()),
            None => self.base_env(self.env.horizon),
        };
        Ok(TrainConfig {
            env,
            topology,
            arch: self.architecture(),
            reward: self.reward,
            iterations: self.train.iterations,
            episodes_per_iteration: self.train.episodes_per_iteration,
            target_sync_period: self.train.target_sync_period,
            optimizer: AdamConfig {
                learning_rate: self.train.learning_rate,
                ..AdamConfig::default()
            },
            grad_clip: self.train.grad_clip,
            schedule: self.policy.schedule(),
            seed,
        })
    }

    /// Evaluation network for master seed `seed`; random clique sizes are drawn from the seed.
    pub fn eval_env(&self, seed: u64) -> Result<EnvConfig> {
        Ok(match self.env.random_cliques {
            Some(d) => {
                let mut rng = seeding::stream(seed, &[STREAM_EVAL_TOPOLOGY]);
                let sizes: Vec<usize> = (0..d.eval_count)
                    .map(|_| rng.gen_range(d.min_size..=d.max_size))
                    .collect();
                EnvConfig::from_clique_sizes(&sizes, self.env.num_channels, self.eval.horizon)
                    .with_capacities(self.env.capacities.clone())
            }
            None => self.base_env(self.eval.horizon),
        }
        .with_seed(seed))
    }
}
