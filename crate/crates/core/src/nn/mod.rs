//! Double-precision tensors, reverse-mode differentiation and the actor and
//! critic networks.

mod adam;
mod checkpoint;
mod gaussian;
mod gradcheck;
mod graph;
mod init;
mod policy;
mod tensor;

pub use adam::{clip_global_norm, global_norm, Adam, AdamConfig};
pub use checkpoint::{decode_into, encode_params, Checkpoint, TensorRecord};
pub use gaussian::{
    deterministic_action, entropy, gaussian_log_prob, sample_action, squash, squash_log_jacobian,
    squashed_log_prob, unsquash, SampledAction,
};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, RELATIVE_FLOOR, STEP};
pub use graph::{Gradients, Graph, Var};
pub use init::{fan_in_uniform, orthogonal};
pub use policy::{
    forward_actor, forward_critic, Architecture, Backbone, ConvBlock, ImageInput, InputScaling,
    ObsBatch, ParamSet, PolicyParams, ValueParams, INITIAL_STD,
};
pub use tensor::Tensor;

use crate::error::Result;

/// Reverse-mode gradients of the scalar `loss` for each of `vars`; inputs
/// that do not affect the loss get zeros.
pub fn compute_gradients(g: &Graph<'_>, loss: Var, vars: &[Var]) -> Result<Vec<Tensor>> {
    let mut grads = g.backward(loss)?;
    Ok(vars
        .iter()
        .map(|&v| grads.take_or_zeros(v, g.value(v)))
        .collect())
}
