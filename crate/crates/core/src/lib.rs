//! Zero-shot denoising of fluorescence microscopy images.
//!
//! A single noisy image is pre-denoised, the result is corrupted many times with synthetic
//! mixed Poisson-Gaussian noise, and a small convolutional network is trained to map those
//! corrupted copies back to the pre-denoised image. The trained network is then applied to the
//! original noisy image.

pub mod error;
pub mod image;
pub mod net;
pub mod noise;
pub mod pipeline;
pub mod prefilter;

pub use error::{Error, Result};
pub use image::{BitDepth, Image};
