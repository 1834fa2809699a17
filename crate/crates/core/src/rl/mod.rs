//! Minimal dense-network machinery: forward pass, exact backpropagation,
//! Gaussian policy head, Adam, and the policy checkpoint format.

mod adam;
mod checkpoint;
mod gaussian;
mod net;

pub use adam::{adam_update, OptimizerState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_policy, save_policy, MAGIC};
pub use gaussian::{
    gaussian_logprob, sample_action, standard_normal, GaussianHead, SampledAction, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use net::{Activation, DenseNet, ForwardCache, NetGradients};
