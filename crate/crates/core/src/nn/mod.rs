//! Dense ReLU networks trained with softmax cross-entropy and Adam.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod matrix;
mod network;
mod spec;

pub use adam::{adam_step, OptimConfig};
pub use gradcheck::gradient_check;
pub use matrix::{dot, Matrix};
pub use network::{
    backward, forward, init_network, loss_and_accuracy, per_sample_loss, softmax_rows, DenseLayer,
    ForwardTrace, Gradients, LayerGrad, NetworkState,
};
pub(crate) use network::argmax;
pub use spec::{NetworkSpec, Preset, CIFAR10_CLASSES, CIFAR10_INPUT_DIM};
