//! Per-user execution: observation encoding, the shared DQN, and the
//! softmax-with-uniform-exploration action law.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::nn::{forward, LstmState, NetworkParams};

/// Builds the `2K + 2` network input from the previous slot.
///
/// Entries `0..=K` one-hot the previous action (index 0 = silent), the next
/// `K` are the channel capacities, and the last is the ACK bit.
pub fn encode_input(last_action: Action, last_ack: bool, capacities: &[f64]) -> Result<Vec<f64>> {
    let k = capacities.len();
    if last_action.index() > k {
        return Err(Error::Domain(format!(
            "previous action {last_action} outside 0..={k}"
        )));
    }
    let mut x = vec![0.0; 2 * k + 2];
    x[last_action.index()] = 1.0;
    x[k + 1..2 * k + 1].copy_from_slice(capacities);
    if last_ack && last_action.is_transmit() {
        x[2 * k + 1] = 1.0;
    }
    Ok(x)
}

/// Exploration mixture weight and inverse temperature of the action law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub alpha_explore: f64,
    pub beta: f64,
}

impl PolicyParams {
    pub fn new(alpha_explore: f64, beta: f64) -> Result<PolicyParams> {
        let p = PolicyParams {
            alpha_explore,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Near-greedy setting used for evaluation runs.
    pub fn evaluation() -> PolicyParams {
        PolicyParams {
            alpha_explore: 0.005,
            beta: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_explore) {
            return Err(Error::Config(format!(
                "alpha_explore = {} not in [0, 1]",
                self.alpha_explore
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta = {} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

/// Annealing of the policy parameters across training iterations.
///
/// `alpha_explore` decays geometrically to a floor; `beta` rises linearly
/// from `beta_start` to `beta_end` over the training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySchedule {
    pub alpha_start: f64,
    pub alpha_decay: f64,
    pub alpha_floor: f64,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for PolicySchedule {
    fn default() -> Self {
        PolicySchedule {
            alpha_start: 0.05,
            alpha_decay: 0.995,
            alpha_floor: 0.005,
            beta_start: 1.0,
            beta_end: 20.0,
        }
    }
}

impl PolicySchedule {
    /// Policy for `iteration` (0-based) out of `total` iterations.
    pub fn at(&self, iteration: usize, total: usize) -> PolicyParams {
        let alpha =
            (self.alpha_start * self.alpha_decay.powi(iteration as i32)).max(self.alpha_floor);
        let frac = if total <= 1 {
            1.0
        } else {
            (iteration as f64 / (total - 1) as f64).min(1.0)
        };
        PolicyParams {
            alpha_explore: alpha.min(1.0),
            beta: self.beta_start + (self.beta_end - self.beta_start) * frac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.at(0, 1).validate()?;
        PolicyParams::new(self.alpha_floor, self.beta_start)?;
        if !(self.alpha_decay > 0.0 && self.alpha_decay <= 1.0) {
            return Err(Error::Config(format!(
                "alpha_decay = {} not in (0, 1]",
                self.alpha_decay
            )));
        }
        Ok(())
    }
}

/// `Pr(a) = (1 - alpha) softmax(beta Q)(a) + alpha / (K + 1)`.
pub fn policy_distribution(q: &[f64], policy: PolicyParams) -> Result<Vec<f64>> {
    if let Some(v) = q.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("Q value {v}")));
    }
    let n = q.len() as f64;
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = q.iter().map(|v| (policy.beta * (v - max)).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p = (1.0 - policy.alpha_explore) * *p / total + policy.alpha_explore / n;
    }
    Ok(probs)
}

/// Draws an index from a probability vector with one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Result of one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Network input fed at this slot.
    pub input: Vec<f64>,
    /// Q-values produced from that input.
    pub q: Vec<f64>,
}

/// Private per-user state: recurrent memory plus the last (action, ACK).
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub user_id: usize,
    lstm: LstmState,
    last_action: Action,
    last_ack: bool,
    capacities: Vec<f64>,
}

impl Agent {
    pub fn new(user_id: usize, lstm_width: usize, capacities: Vec<f64>) -> Agent {
        Agent {
            user_id,
            lstm: LstmState::zeros(lstm_width),
            last_action: Action::IDLE,
            last_ack: false,
            capacities,
        }
    }

    pub fn lstm_state(&self) -> &LstmState {
        &self.lstm
    }

    pub fn last_action(&self) -> Action {
        self.last_action
    }

    pub fn last_ack(&self) -> bool {
        self.last_ack
    }

    /// Back to the episode-start state: silent, no ACK, zero memory.
    pub fn reset(&mut self) {
        let width = self.lstm.width();
        self.lstm = LstmState::zeros(width);
        self.last_action = Action::IDLE;
        self.last_ack = false;
    }

    pub fn current_input(&self) -> Result<Vec<f64>> {
        encode_input(self.last_action, self.last_ack, &self.capacities)
    }

    /// Runs the network on the current input and samples an action.
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        params: &NetworkParams,
        policy: PolicyParams,
        rng: &mut R,
    ) -> Result<Decision> {
        let input = self.current_input()?;
        let (q, next) = forward(params, &input, &self.lstm)?;
        self.lstm = next;
        let probs = policy_distribution(&q, policy)?;
        let action = Action::channel(sample_index(&probs, rng));
        Ok(Decision { action, input, q })
    }

    /// Records the outcome of the slot. A silent user never holds an ACK.
    pub fn observe(&mut self, action: Action, ack: bool) {
        self.last_action = action;
        self.last_ack = ack && action.is_transmit();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encoding_examples() {
        assert_eq!(
            encode_input(Action::channel(1), true, &[1.0, 1.0]).unwrap(),
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(
            encode_input(Action::IDLE, false, &[1.0, 1.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]
        );
        let agent = Agent::new(0, 4, vec![1.0, 1.0]);
        assert_eq!(
            agent.current_input().unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]
        );
        assert!(encode_input(Action::channel(3), false, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn observe_then_encode() {
        let mut agent = Agent::new(0, 4, vec![1.0, 1.0]);
        agent.observe(Action::channel(2), true);
        assert_eq!(
            agent.current_input().unwrap(),
            vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]
        );
        agent.observe(Action::IDLE, true);
        assert!(!agent.last_ack());
        agent.reset();
        assert_eq!(agent, Agent::new(0, 4, vec![1.0, 1.0]));
    }

    #[test]
    fn distribution_examples() {
        let q = [0.3, -2.0, 5.0];
        let uniform = policy_distribution(&q, PolicyParams::new(0.0, 0.0).unwrap()).unwrap();
        assert!(uniform.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let uniform = policy_distribution(&q, PolicyParams::new(1.0, 7.0).unwrap()).unwrap();
        assert!(uniform.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let p =
            policy_distribution(&[0.0, 3f64.ln()], PolicyParams::new(0.0, 1.0).unwrap()).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(policy_distribution(&[f64::NAN, 0.0], PolicyParams::evaluation()).is_err());
    }

    #[test]
    fn policy_params_validated() {
        assert!(PolicyParams::new(1.5, 1.0).is_err());
        assert!(PolicyParams::new(0.1, -1.0).is_err());
        assert!(PolicySchedule::default().validate().is_ok());
    }

    #[test]
    fn schedule_anneals() {
        let s = PolicySchedule::default();
        let first = s.at(0, 101);
        let last = s.at(100, 101);
        assert_eq!(
            first,
            PolicyParams {
                alpha_explore: 0.05,
                beta: 1.0
            }
        );
        assert!((last.beta - 20.0).abs() < 1e-12);
        assert!((last.alpha_explore - 0.05 * 0.995f64.powi(100)).abs() < 1e-15);
        assert_eq!(s.at(5000, 6000).alpha_explore, 0.005);
    }

    #[test]
    fn greedy_limit_and_uniform_limit() {
        let arch = Architecture::new(2).with_widths(3, 4, 3);
        let mut params = NetworkParams::zeros(arch);
        params
            .advantage_out
            .bias
            .data_mut()
            .copy_from_slice(&[0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agent = Agent::new(0, 4, vec![1.0, 1.0]);
        let greedy = PolicyParams::new(0.0, 1e6).unwrap();
        for _ in 0..1000 {
            let d = agent.act(&params, greedy, &mut rng).unwrap();
            assert_eq!(d.action, Action::channel(2));
        }
        let mut counts = [0usize; 3];
        let uniform = PolicyParams::new(1.0, 1e6).unwrap();
        for _ in 0..30_000 {
            counts[agent
                .act(&params, uniform, &mut rng)
                .unwrap()
                .action
                .index()] += 1;
        }
        for c in counts {
            assert!(
                (c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.015,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn seeded_actions_reproduce() {
        let arch = Architecture::new(2).with_widths(3, 4, 3);
        let params = NetworkParams::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut agent = Agent::new(0, 4, vec![1.0, 1.0]);
            (0..50)
                .map(|i| {
                    let d = agent
                        .act(&params, PolicyParams::new(0.1, 2.0).unwrap(), &mut rng)
                        .unwrap();
                    agent.observe(d.action, i % 3 == 0);
                    d.action
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
