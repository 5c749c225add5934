//! Adaptive-moment (Adam) optimizer and global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    3e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub first_moment: NetworkParams,
    pub second_moment: NetworkParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> OptimizerState {
        OptimizerState {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn optimizer_step(
    params: &mut NetworkParams,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if params.arch != grads.arch || params.arch != state.first_moment.arch {
        return Err(Error::Shape(format!(
            "optimizer shapes differ: params {:?}, grads {:?}, moments {:?}",
            params.arch, grads.arch, state.first_moment.arch
        )));
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let correction1 = 1.0 - beta1.powi(state.step as i32);
    let correction2 = 1.0 - beta2.powi(state.step as i32);
    let OptimizerState {
        first_moment,
        second_moment,
        ..
    } = state;
    for (((p, g), m), v) in params
        .arrays_mut()
        .into_iter()
        .zip(grads.arrays())
        .zip(first_moment.arrays_mut())
        .zip(second_moment.arrays_mut())
    {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (NetworkParams, OptimizerState) {
        let arch = Architecture::new(1).with_widths(2, 3, 2);
        let p = NetworkParams::init(arch, &mut ChaCha8Rng::seed_from_u64(1));
        let s = OptimizerState::new(&p, AdamConfig::default());
        (p, s)
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut p, mut s) = setup();
        let before = p.clone();
        let g = p.zeros_like();
        optimizer_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_moves_against_its_sign() {
        let (mut p, mut s) = setup();
        let start = p.value_out.bias.data()[0];
        let mut g = p.zeros_like();
        g.value_out.bias.data_mut()[0] = 0.5;
        g.advantage_out.bias.data_mut()[0] = -0.5;
        let adv_start = p.advantage_out.bias.data()[0];
        for _ in 0..50 {
            optimizer_step(&mut p, &g, &mut s).unwrap();
        }
        assert!(p.value_out.bias.data()[0] < start);
        assert!(p.advantage_out.bias.data()[0] > adv_start);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so |update| = lr*|g|/(|g|+eps).
        for g0 in [1e-3, 0.2, -7.0, 1e4] {
            let (mut p, mut s) = setup();
            let start = p.input.weight.data()[0];
            let mut g = p.zeros_like();
            g.input.weight.data_mut()[0] = g0;
            optimizer_step(&mut p, &g, &mut s).unwrap();
            let moved = p.input.weight.data()[0] - start;
            let expected = -s.config.learning_rate * g0 / (g0.abs() + s.config.epsilon);
            assert!((moved - expected).abs() < 1e-12);
            assert!((moved.abs() - s.config.learning_rate).abs() < 1e-7);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (mut p, mut s) = setup();
        let other = NetworkParams::zeros(Architecture::new(2).with_widths(2, 3, 2));
        assert!(matches!(
            optimizer_step(&mut p, &other, &mut s),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn clipping_caps_norm() {
        let (p, _) = setup();
        let mut g = p.clone();
        let norm = g.squared_norm().sqrt();
        assert!(norm > 1.0);
        assert_eq!(clip_global_norm(&mut g, 1.0), norm);
        assert!((g.squared_norm().sqrt() - 1.0).abs() < 1e-12);
        let mut small = p.zeros_like();
        small.input.bias.data_mut()[0] = 0.1;
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.input.bias.data()[0], 0.1);
    }
}
