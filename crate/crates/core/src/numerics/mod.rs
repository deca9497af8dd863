//! Dense tensors and hand-derived forward/backward kernels for the layers
//! the autoencoder uses.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod convlstm;
pub mod gradcheck;
pub mod loss;
pub mod tensor;

pub use activation::{sigmoid, sigmoid_backward, tanh, tanh_backward};
pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, deconv2d_backward, deconv2d_forward, ConvGrads, ConvSpec};
pub use convlstm::{
    convlstm_cell_backward, convlstm_cell_step, ConvLstmCache, ConvLstmGrads, ConvLstmParams, ConvLstmStep,
    ConvLstmWeights,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::mse_loss;
pub use tensor::{Real, Tensor};
