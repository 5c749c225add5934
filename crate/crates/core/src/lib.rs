//! Distributed dynamic spectrum access with deep multi-user reinforcement learning.
//!
//! Users share `K` orthogonal channels in slotted time. Each slot a user either
//! stays silent or transmits on one channel, and learns only whether its own
//! packet got through. A single DQN (dense input layer, LSTM, dueling heads) is
//! trained centrally on episodes generated by all users and then deployed
//! unchanged at every user, which acts on its own history alone.
//!
//! Modules, bottom to top:
//!
//! * [`env`]: the multi-user channel-access simulator.
//! * [`rewards`]: competitive and alpha-fair cooperative rewards.
//! * [`nn`]: the recurrent dueling Q-network, BPTT, Adam and checkpoints.
//! * [`agent`]: observation encoding and the exploration policy.
//! * [`trainer`]: double-Q training with a periodically synced target network.
//! * [`baseline`]: slotted-Aloha reference policies.
//! * [`gametheory`]: brute-force equilibrium and optimality oracles.
//! * [`harness`]: scenario configs, evaluation, metrics and output files.

pub mod agent;
pub mod baseline;
pub mod env;
pub mod error;
pub mod gametheory;
pub mod harness;
pub mod nn;
pub mod rewards;
pub mod seeding;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/environment.md")]
    struct Environment;
    #[doc = include_str!("../../../book/src/rewards.md")]
    struct Rewards;
    #[doc = include_str!("../../../book/src/network.md")]
    struct Network;
    #[doc = include_str!("../../../book/src/agent.md")]
    struct Agent;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/baseline.md")]
    struct Baseline;
    #[doc = include_str!("../../../book/src/gametheory.md")]
    struct GameTheory;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
