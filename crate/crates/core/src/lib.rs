//! Multi-reference super-resolution by posterior fusion.
//!
//! Several single-reference SR outputs of one low-resolution image are
//! merged with per-pixel adaptive masks and per-candidate global weights.
//! The crate also carries the evaluation side: luma PSNR/SSIM, dataset
//! preparation and parameter sweeps.

pub mod dataset;
pub mod error;
pub mod fusion;
pub mod image;
pub mod io;
pub mod metrics;
pub mod resample;
pub mod sweep;

pub use error::{Error, Result};
pub use fusion::{
    adaptive_weight_mask, binary_masks, fuse, global_weights, masked_fuse, naive_fuse,
    BinaryMask, CandidateSet, CropPolicy, FusionConfig, FusionReport, WeightMask,
};
pub use image::{luma, rgb_to_ycbcr, ycbcr_to_rgb, ImagePlane, RgbImage, YcbcrImage};
pub use metrics::{evaluate, psnr_y, ssim_y, MetricResult};
pub use resample::{bicubic_resample, resample_rgb};
