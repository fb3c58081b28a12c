//! Synthetic mixed Poisson-Gaussian noise for building training inputs from a pre-denoised image.
//!
//! Injection happens in two passes on the normalized `[0, 1]` intensity scale:
//!
//! 1. region-wise: the image is tiled into `stride x stride` chunks with mean `M`. Each pixel `x`
//!    of a chunk becomes `P(lp * x) / lp + N(0, sg^2)` where `sg = k_g * M / 255` and
//!    `lp = k_p / max(M, 1/255)`, so brighter chunks get more Gaussian and relatively stronger
//!    Poisson noise.
//! 2. overall: every pixel becomes `P(lambda_p * x) / lambda_p`.
//!
//! Results are clipped to `[0, 1]` after each pass. Every channel draws from its own derived
//! stream, so the output does not depend on the order in which channels are processed.

mod inject;
mod rng;
mod sampler;

pub use inject::{
    amplify_channels, inject, inject_channel, inject_overall, inject_region_wise, region_mask,
    region_noise_params, RegionMask, MASK_FLOOR,
};
pub use rng::{RngStream, StreamRng};
pub use sampler::{ln_factorial, sample_gaussian, sample_poisson, INVERSION_LIMIT};

use crate::error::{Error, Result};
use crate::prefilter::FilterSpec;

/// Noise-injection hyperparameters for one microscope / noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Channel amplification factor: each channel is repeated this many times before injection.
    pub lambda_amp: usize,
    /// Side of the square chunks of the region mask, in pixels.
    pub stride: usize,
    /// Gaussian mapping factor, on the 8-bit intensity scale.
    pub k_g: f64,
    /// Poisson mapping factor.
    pub k_p: f64,
    /// Poisson factor of the overall pass.
    pub lambda_p: f64,
    pub filter: FilterSpec,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            lambda_amp: 2,
            stride: 75,
            k_g: 200.0,
            k_p: 30.0,
            lambda_p: 60.0,
            filter: FilterSpec::median(3),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_amp < 1 {
            return Err(Error::param("lambda_amp must be at least 1"));
        }
        if self.stride < 1 {
            return Err(Error::param("stride must be at least 1"));
        }
        if !(self.k_g >= 0.0 && self.k_g.is_finite()) {
            return Err(Error::param(format!(
                "k_g must be non-negative, got {}",
                self.k_g
            )));
        }
        if !(self.k_p > 0.0 && self.k_p.is_finite()) {
            return Err(Error::param(format!(
                "k_p must be positive, got {}",
                self.k_p
            )));
        }
        if !(self.lambda_p > 0.0 && self.lambda_p.is_finite()) {
            return Err(Error::param(format!(
                "lambda_p must be positive, got {}",
                self.lambda_p
            )));
        }
        self.filter.validate()
    }
}
