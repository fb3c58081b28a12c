//! The small convolutional denoiser, its hand-written backward pass and the Adam optimizer.

mod activation;
mod adam;
mod conv;
mod loss;
mod model;
mod snapshot;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_backward};
pub use adam::{AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_backward_params, conv2d_forward, Conv2d, ConvGrads};
pub use loss::mse_loss;
pub use model::{
    param_count, ForwardCache, NetParams, ParamGrads, DEFAULT_LEAKY_SLOPE, DEFAULT_WIDTHS,
};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use tensor::{Real, Tensor4};
