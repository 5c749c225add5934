//! Dense layers, the LSTM cell and the dueling head combiner.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, ensure_finite, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b`; `W` is `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Dense {
        Dense {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Dense {
        let mut d = Dense::zeros(inputs, outputs);
        let bound = 1.0 / (inputs as f64).sqrt();
        d.weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-bound..=bound));
        d
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs());
        let b = self.bias.data();
        for (i, o) in out.iter_mut().enumerate() {
            *o = b[i] + dot(self.weight.row(i), x);
        }
    }

    /// Accumulates `dW += dy x^T`, `db += dy`, and (optionally) `dx += W^T dy`.
    #[inline]
    pub(crate) fn backprop(&self, grad: &mut Dense, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        for (i, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, x, grad.weight.row_mut(i));
            }
        }
        axpy(1.0, dy, grad.bias.data_mut());
        if let Some(dx) = dx {
            for (i, &g) in dy.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, self.weight.row(i), dx);
                }
            }
        }
    }
}

/// Hidden and cell vectors of an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(width: usize) -> LstmState {
        LstmState {
            h: vec![0.0; width],
            c: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.h.len()
    }
}

/// Standard LSTM cell. The gate pre-activations are `W [x; h] + b` with
/// rows grouped as input, forget, output, candidate (`H` rows each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub weight: Tensor,
    pub bias: Tensor,
}

pub(crate) const GATE_INPUT: usize = 0;
pub(crate) const GATE_FORGET: usize = 1;
pub(crate) const GATE_OUTPUT: usize = 2;
pub(crate) const GATE_CANDIDATE: usize = 3;

impl LstmCell {
    pub fn zeros(inputs: usize, width: usize) -> LstmCell {
        LstmCell {
            weight: Tensor::zeros(&[4 * width, inputs + width]),
            bias: Tensor::zeros(&[4 * width]),
        }
    }

    /// Uniform `±1/sqrt(in + H)` weights, zero bias except forget gate = 1.
    pub fn init<R: Rng + ?Sized>(inputs: usize, width: usize, rng: &mut R) -> LstmCell {
        let mut cell = LstmCell::zeros(inputs, width);
        let bound = 1.0 / ((inputs + width) as f64).sqrt();
        cell.weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-bound..=bound));
        cell.bias.data_mut()[GATE_FORGET * width..(GATE_FORGET + 1) * width].fill(1.0);
        cell
    }

    pub fn width(&self) -> usize {
        self.weight.shape()[0] / 4
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1] - self.width()
    }

    /// Computes activated gates `[i, f, o, g]` for the concatenated input `xh`.
    #[inline]
    pub(crate) fn gates(&self, xh: &[f64], gates: &mut [f64]) {
        let h = self.width();
        let b = self.bias.data();
        for (r, out) in gates.iter_mut().enumerate() {
            let z = b[r] + dot(self.weight.row(r), xh);
            *out = if r / h == GATE_CANDIDATE {
                z.tanh()
            } else {
                sigmoid(z)
            };
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM step: returns the new `(h, c)`.
pub fn lstm_step(cell: &LstmCell, x: &[f64], state: &LstmState) -> Result<LstmState> {
    let width = cell.width();
    if x.len() != cell.inputs() {
        return Err(Error::Shape(format!(
            "LSTM input has length {}, expected {}",
            x.len(),
            cell.inputs()
        )));
    }
    if state.h.len() != width || state.c.len() != width {
        return Err(Error::Shape(format!(
            "LSTM state width differs from {width}"
        )));
    }
    ensure_finite(x, "lstm input")?;
    let mut xh = Vec::with_capacity(x.len() + width);
    xh.extend_from_slice(x);
    xh.extend_from_slice(&state.h);
    let mut gates = vec![0.0; 4 * width];
    cell.gates(&xh, &mut gates);
    let mut next = LstmState::zeros(width);
    combine_gates(&gates, &state.c, &mut next.c, &mut next.h);
    Ok(next)
}

/// `c' = f*c + i*g`, `h' = o*tanh(c')`.
#[inline]
pub(crate) fn combine_gates(gates: &[f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64]) {
    let w = c.len();
    for j in 0..w {
        let i = gates[GATE_INPUT * w + j];
        let f = gates[GATE_FORGET * w + j];
        let o = gates[GATE_OUTPUT * w + j];
        let g = gates[GATE_CANDIDATE * w + j];
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
}

/// `Q(a) = V + A(a)`, with no mean subtraction on the advantages.
pub fn dueling_combine(value: f64, advantages: &[f64]) -> Vec<f64> {
    advantages.iter().map(|a| value + a).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
