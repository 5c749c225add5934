//! Minimal differentiable core: dense layers, one LSTM cell, dueling heads,
//! masked squared-error loss with BPTT, and Adam.

mod adam;
pub mod checkpoint;
mod layers;
mod network;
mod tensor;

pub use adam::{clip_global_norm, optimizer_step, AdamConfig, OptimizerState};
pub use layers::{argmax, dueling_combine, lstm_step, Dense, LstmCell, LstmState};
pub use network::{
    accumulate_gradients, backward_bptt, forward, forward_sequence, forward_sequence_cached,
    Architecture, Gradients, NetworkParams, SequenceCache, StepCache, ARRAY_NAMES,
};
pub use tensor::Tensor;

/// Deep copy of a parameter set.
pub fn clone_params(params: &NetworkParams) -> NetworkParams {
    params.clone()
}

/// `dst <- src`.
pub fn copy_into(dst: &mut NetworkParams, src: &NetworkParams) {
    dst.copy_from(src);
}
