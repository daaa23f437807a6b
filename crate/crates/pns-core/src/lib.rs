//! Normalized self-attention over short video clips, at desk scale.
//!
//! The crate provides the attention block itself (constrained-neighborhood,
//! channel-grouped, temporally normalized), exact reverse-mode gradients
//! for every operation, a brute-force dense attention oracle used to
//! cross-check the constrained kernels, a toy encoder/decoder segmentation
//! model with its training loop, synthetic moving-blob video data, and the
//! segmentation metrics battery.
//!
//! Everything is pure CPU code over a minimal row-major tensor type.
//! Training and inference run in `f32`; gradient verification and oracle
//! comparisons run in `f64`.

pub mod error;
pub mod io;
pub mod tensor;
pub(crate) mod par;

pub use error::{Error, Result};
pub use io::{read_mask_pgm, read_tensor, read_tensor_f32, write_mask_pgm, write_tensor, AnyTensor};
pub use tensor::{
    channel_split, concat_channels, layer_norm_temporal, linear_embed, rowwise_max, softmax_rows,
    BoolMat, DType, Element, LinearWeights, Tensor,
};
