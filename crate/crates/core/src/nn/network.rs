//! The recurrent dueling Q-network and backpropagation through time.
//!
//! Data flow for one slot:
//!
//! ```text
//! x (2K+2) -> dense + tanh (H_in) -> LSTM (H) -+-> dense + relu -> dense -> V
//!                                              +-> dense + relu -> dense -> A (K+1)
//! Q = V + A
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    combine_gates, Dense, LstmCell, LstmState, GATE_CANDIDATE, GATE_FORGET, GATE_INPUT, GATE_OUTPUT,
};
use super::tensor::{ensure_finite, Tensor};
use crate::error::{Error, Result};

/// Layer widths of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub num_channels: usize,
    #[serde(default = "default_input_width")]
    pub input_width: usize,
    #[serde(default = "default_lstm_width")]
    pub lstm_width: usize,
    #[serde(default = "default_head_width")]
    pub head_width: usize,
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

impl Architecture {
    /// Default widths: 32 -> LSTM 64 -> heads of 32.
    pub fn new(num_channels: usize) -> Architecture {
        Architecture {
            num_channels,
            input_width: default_input_width(),
            lstm_width: default_lstm_width(),
            head_width: default_head_width(),
        }
    }

    pub fn with_widths(mut self, input: usize, lstm: usize, head: usize) -> Architecture {
        self.input_width = input;
        self.lstm_width = lstm;
        self.head_width = head;
        self
    }

    /// `2K + 2`.
    pub fn observation_len(&self) -> usize {
        2 * self.num_channels + 2
    }

    /// `K + 1`.
    pub fn num_actions(&self) -> usize {
        self.num_channels + 1
    }

    pub fn param_count(&self) -> usize {
        let (x, e, h, d, a) = (
            self.observation_len(),
            self.input_width,
            self.lstm_width,
            self.head_width,
            self.num_actions(),
        );
        (x * e + e) + (4 * h * (e + h) + 4 * h) + (h * d + d) + (d + 1) + (h * d + d) + (d * a + a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0
            || self.input_width == 0
            || self.lstm_width == 0
            || self.head_width == 0
        {
            return Err(Error::Config(format!(
                "all layer widths must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// All weights of one DQN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub arch: Architecture,
    pub input: Dense,
    pub lstm: LstmCell,
    pub value_hidden: Dense,
    pub value_out: Dense,
    pub advantage_hidden: Dense,
    pub advantage_out: Dense,
}

/// Gradients share the parameter layout.
pub type Gradients = NetworkParams;

pub const ARRAY_NAMES: [&str; 12] = [
    "input.weight",
    "input.bias",
    "lstm.weight",
    "lstm.bias",
    "value_hidden.weight",
    "value_hidden.bias",
    "value_out.weight",
    "value_out.bias",
    "advantage_hidden.weight",
    "advantage_hidden.bias",
    "advantage_out.weight",
    "advantage_out.bias",
];

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> NetworkParams {
        let (x, e, h, d, a) = (
            arch.observation_len(),
            arch.input_width,
            arch.lstm_width,
            arch.head_width,
            arch.num_actions(),
        );
        NetworkParams {
            arch,
            input: Dense::zeros(x, e),
            lstm: LstmCell::zeros(e, h),
            value_hidden: Dense::zeros(h, d),
            value_out: Dense::zeros(d, 1),
            advantage_hidden: Dense::zeros(h, d),
            advantage_out: Dense::zeros(d, a),
        }
    }

    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> NetworkParams {
        let (x, e, h, d, a) = (
            arch.observation_len(),
            arch.input_width,
            arch.lstm_width,
            arch.head_width,
            arch.num_actions(),
        );
        NetworkParams {
            arch,
            input: Dense::init(x, e, rng),
            lstm: LstmCell::init(e, h, rng),
            value_hidden: Dense::init(h, d, rng),
            value_out: Dense::init(d, 1, rng),
            advantage_hidden: Dense::init(h, d, rng),
            advantage_out: Dense::init(d, a, rng),
        }
    }

    pub fn zeros_like(&self) -> NetworkParams {
        NetworkParams::zeros(self.arch)
    }

    /// Parameter arrays in canonical order (see [`ARRAY_NAMES`]).
    pub fn arrays(&self) -> [&Tensor; 12] {
        [
            &self.input.weight,
            &self.input.bias,
            &self.lstm.weight,
            &self.lstm.bias,
            &self.value_hidden.weight,
            &self.value_hidden.bias,
            &self.value_out.weight,
            &self.value_out.bias,
            &self.advantage_hidden.weight,
            &self.advantage_hidden.bias,
            &self.advantage_out.weight,
            &self.advantage_out.bias,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.input.weight,
            &mut self.input.bias,
            &mut self.lstm.weight,
            &mut self.lstm.bias,
            &mut self.value_hidden.weight,
            &mut self.value_hidden.bias,
            &mut self.value_out.weight,
            &mut self.value_out.bias,
            &mut self.advantage_hidden.weight,
            &mut self.advantage_hidden.bias,
            &mut self.advantage_out.weight,
            &mut self.advantage_out.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.arrays().iter().map(|t| t.len()).sum()
    }

    /// Overwrites `self` with the contents of `src` (target-network sync).
    pub fn copy_from(&mut self, src: &NetworkParams) {
        self.clone_from(src);
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &NetworkParams) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.arrays_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum()
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for (name, t) in ARRAY_NAMES.iter().zip(self.arrays()) {
            t.ensure_finite(name)?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.arch.lstm_width)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.observation_len() {
            return Err(Error::Shape(format!(
                "network input has length {}, expected {}",
                x.len(),
                self.arch.observation_len()
            )));
        }
        ensure_finite(x, "network input")
    }
}

/// Everything backpropagation needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    /// tanh output of the input layer.
    pub embed: Vec<f64>,
    /// `[embed; h_prev]`.
    pub xh: Vec<f64>,
    /// Activated gates `[i, f, o, g]`.
    pub gates: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub value_hidden: Vec<f64>,
    pub advantage_hidden: Vec<f64>,
    pub q: Vec<f64>,
}

/// Forward pass over a whole episode from the zero state.
#[derive(Debug, Clone, Default)]
pub struct SequenceCache {
    pub steps: Vec<StepCache>,
}

impl SequenceCache {
    pub fn q(&self, t: usize) -> &[f64] {
        &self.steps[t].q
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn step_cached(params: &NetworkParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let arch = &params.arch;
    let mut embed = vec![0.0; arch.input_width];
    params.input.apply(x, &mut embed);
    embed.iter_mut().for_each(|v| *v = v.tanh());

    let mut xh = Vec::with_capacity(arch.input_width + arch.lstm_width);
    xh.extend_from_slice(&embed);
    xh.extend_from_slice(h_prev);
    let mut gates = vec![0.0; 4 * arch.lstm_width];
    params.lstm.gates(&xh, &mut gates);
    let mut c = vec![0.0; arch.lstm_width];
    let mut h = vec![0.0; arch.lstm_width];
    combine_gates(&gates, c_prev, &mut c, &mut h);

    let mut value_hidden = vec![0.0; arch.head_width];
    params.value_hidden.apply(&h, &mut value_hidden);
    relu_in_place(&mut value_hidden);
    let mut value = [0.0];
    params.value_out.apply(&value_hidden, &mut value);

    let mut advantage_hidden = vec![0.0; arch.head_width];
    params.advantage_hidden.apply(&h, &mut advantage_hidden);
    relu_in_place(&mut advantage_hidden);
    let mut q = vec![0.0; arch.num_actions()];
    params.advantage_out.apply(&advantage_hidden, &mut q);
    // dueling: Q = V + A
    q.iter_mut().for_each(|a| *a += value[0]);

    StepCache {
        x: x.to_vec(),
        embed,
        xh,
        gates,
        c_prev: c_prev.to_vec(),
        c,
        h,
        value_hidden,
        advantage_hidden,
        q,
    }
}

#[inline]
fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// One step: Q-values for input `x` and the updated recurrent state.
pub fn forward(
    params: &NetworkParams,
    x: &[f64],
    state: &LstmState,
) -> Result<(Vec<f64>, LstmState)> {
    params.check_input(x)?;
    if state.width() != params.arch.lstm_width || state.c.len() != params.arch.lstm_width {
        return Err(Error::Shape(format!(
            "state width {} differs from LSTM width {}",
            state.width(),
            params.arch.lstm_width
        )));
    }
    let step = step_cached(params, x, &state.h, &state.c);
    ensure_finite(&step.q, "Q output")?;
    Ok((
        step.q,
        LstmState {
            h: step.h,
            c: step.c,
        },
    ))
}

/// Runs an input sequence from the zero state, keeping every intermediate.
pub fn forward_sequence_cached(
    params: &NetworkParams,
    inputs: &[Vec<f64>],
) -> Result<SequenceCache> {
    let width = params.arch.lstm_width;
    let mut steps: Vec<StepCache> = Vec::with_capacity(inputs.len());
    let zero = vec![0.0; width];
    for (t, x) in inputs.iter().enumerate() {
        params.check_input(x)?;
        let step = match steps.last() {
            Some(prev) => step_cached(params, x, &prev.h, &prev.c),
            None => step_cached(params, x, &zero, &zero),
        };
        ensure_finite(&step.q, &format!("Q output at step {t}"))?;
        steps.push(step);
    }
    Ok(SequenceCache { steps })
}

/// Q-values for every prefix of `inputs`, starting from the zero state.
pub fn forward_sequence(params: &NetworkParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut state = params.initial_state();
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (q, next) = forward(params, x, &state)?;
        out.push(q);
        state = next;
    }
    Ok(out)
}

/// Squared-error loss on masked entries and its gradient, through time.
///
/// Loss is `sum_t sum_a mask[t][a] * (Q_t(a) - target[t][a])^2`, summed
/// (not averaged). Returns the gradients and the loss.
pub fn backward_bptt(
    params: &NetworkParams,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    mask: &[Vec<bool>],
) -> Result<(Gradients, f64)> {
    let cache = forward_sequence_cached(params, inputs)?;
    let mut grads = params.zeros_like();
    let loss = accumulate_gradients(params, &cache, targets, mask, &mut grads)?;
    Ok((grads, loss))
}

/// Adds the gradient of the masked squared error of `cache` into `grads`.
pub fn accumulate_gradients(
    params: &NetworkParams,
    cache: &SequenceCache,
    targets: &[Vec<f64>],
    mask: &[Vec<bool>],
    grads: &mut Gradients,
) -> Result<f64> {
    let steps = cache.len();
    if targets.len() != steps || mask.len() != steps {
        return Err(Error::Shape(format!(
            "{steps} steps but {} targets and {} masks",
            targets.len(),
            mask.len()
        )));
    }
    let arch = params.arch;
    let (e, h, d, a) = (
        arch.input_width,
        arch.lstm_width,
        arch.head_width,
        arch.num_actions(),
    );

    let mut loss = 0.0;
    let mut dq_all = vec![vec![0.0; a]; steps];
    for t in 0..steps {
        if targets[t].len() != a || mask[t].len() != a {
            return Err(Error::Shape(format!(
                "target/mask at step {t} must have length {a}"
            )));
        }
        let mut step_loss = 0.0;
        for k in 0..a {
            if mask[t][k] {
                let diff = cache.steps[t].q[k] - targets[t][k];
                step_loss += diff * diff;
                dq_all[t][k] = 2.0 * diff;
            }
        }
        if !step_loss.is_finite() {
            return Err(Error::Numeric(format!("loss at step {t} is {step_loss}")));
        }
        loss += step_loss;
    }

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dhead = vec![0.0; d];
    let mut dz = vec![0.0; 4 * h];
    let mut dxh = vec![0.0; e + h];
    let mut dembed = vec![0.0; e];
    for t in (0..steps).rev() {
        let s = &cache.steps[t];
        let dq = &dq_all[t];
        dh.copy_from_slice(&dh_next);

        if dq.iter().any(|g| *g != 0.0) {
            // advantage head
            dhead.iter_mut().for_each(|v| *v = 0.0);
            params.advantage_out.backprop(
                &mut grads.advantage_out,
                &s.advantage_hidden,
                dq,
                Some(&mut dhead),
            );
            for (g, act) in dhead.iter_mut().zip(&s.advantage_hidden) {
                if *act <= 0.0 {
                    *g = 0.0;
                }
            }
            params.advantage_hidden.backprop(
                &mut grads.advantage_hidden,
                &s.h,
                &dhead,
                Some(&mut dh),
            );

            // value head: dV = sum_a dQ(a)
            let dv = [dq.iter().sum::<f64>()];
            dhead.iter_mut().for_each(|v| *v = 0.0);
            params
                .value_out
                .backprop(&mut grads.value_out, &s.value_hidden, &dv, Some(&mut dhead));
            for (g, act) in dhead.iter_mut().zip(&s.value_hidden) {
                if *act <= 0.0 {
                    *g = 0.0;
                }
            }
            params
                .value_hidden
                .backprop(&mut grads.value_hidden, &s.h, &dhead, Some(&mut dh));
        }

        // LSTM cell
        for j in 0..h {
            let i_g = s.gates[GATE_INPUT * h + j];
            let f_g = s.gates[GATE_FORGET * h + j];
            let o_g = s.gates[GATE_OUTPUT * h + j];
            let g_g = s.gates[GATE_CANDIDATE * h + j];
            let tc = s.c[j].tanh();
            let dc = dc_next[j] + dh[j] * o_g * (1.0 - tc * tc);
            dz[GATE_INPUT * h + j] = dc * g_g * i_g * (1.0 - i_g);
            dz[GATE_FORGET * h + j] = dc * s.c_prev[j] * f_g * (1.0 - f_g);
            dz[GATE_OUTPUT * h + j] = dh[j] * tc * o_g * (1.0 - o_g);
            dz[GATE_CANDIDATE * h + j] = dc * i_g * (1.0 - g_g * g_g);
            dc_next[j] = dc * f_g;
        }
        dxh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &g) in dz.iter().enumerate() {
            if g != 0.0 {
                super::tensor::axpy(g, &s.xh, grads.lstm.weight.row_mut(r));
                super::tensor::axpy(g, params.lstm.weight.row(r), &mut dxh);
            }
        }
        super::tensor::axpy(1.0, &dz, grads.lstm.bias.data_mut());
        dh_next.copy_from_slice(&dxh[e..]);

        // input layer (tanh)
        for k in 0..e {
            dembed[k] = dxh[k] * (1.0 - s.embed[k] * s.embed[k]);
        }
        params.input.backprop(&mut grads.input, &s.x, &dembed, None);
    }
    Ok(loss)
}
