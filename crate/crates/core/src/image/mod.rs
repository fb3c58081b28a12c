//! Grayscale raster images in the normalized `[0, 1]` intensity domain.
//!
//! Pixels are stored row-major and channel-last (`data[(y * width + x) * channels + c]`).
//! Multi-plane stacks (for example a TIFF time series) keep one plane per channel.

mod io;
mod metrics;

pub use io::{load_image, save_image};
pub use metrics::{psnr, quality, ssim, QualityReport, SSIM_WINDOW};

use crate::error::{Error, Result};

/// Smallest edge length accepted for an image, so a 3x3 kernel always fits.
pub const MIN_EDGE: usize = 3;

/// Sample depth of the file an image was loaded from; also the depth it is saved at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest integer sample, `2^bits - 1`.
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
    depth: BitDepth,
}

impl Image {
    /// Builds an image from channel-last data, validating shape and intensity range.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
        depth: BitDepth,
    ) -> Result<Self> {
        if height < MIN_EDGE || width < MIN_EDGE {
            return Err(Error::InvalidImage(format!(
                "{height}x{width} is smaller than the {MIN_EDGE}x{MIN_EDGE} minimum"
            )));
        }
        if channels == 0 {
            return Err(Error::InvalidImage("image has no channels".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage(format!(
                "intensity {} at index {bad} is outside [0, 1]",
                data[bad]
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
            depth,
        })
    }

    /// Like [`Image::new`] but clamps every value into `[0, 1]` first. NaN maps to 0.
    pub fn from_clamped(
        height: usize,
        width: usize,
        channels: usize,
        mut data: Vec<f32>,
        depth: BitDepth,
    ) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, channels, data, depth)
    }

    /// Single-channel 16-bit image filled from `f(y, x)`; values are clamped.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::from_clamped(height, width, 1, data, BitDepth::Sixteen)
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::from_fn(height, width, |_, _| value)
    }

    /// Stacks equally sized single-channel images as channels of one image.
    pub fn from_planes(planes: &[Image]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidImage("no planes to stack".into()))?;
        let (h, w) = (first.height, first.width);
        let mut channels = 0;
        for p in planes {
            if p.height != h || p.width != w {
                return Err(Error::mismatch(format!(
                    "plane {}x{} differs from {h}x{w}",
                    p.height, p.width
                )));
            }
            channels += p.channels;
        }
        let mut data = Vec::with_capacity(h * w * channels);
        for i in 0..h * w {
            for p in planes {
                data.extend_from_slice(&p.data[i * p.channels..(i + 1) * p.channels]);
            }
        }
        Ok(Image {
            height: h,
            width: w,
            channels,
            data,
            depth: first.depth,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn with_depth(mut self, depth: BitDepth) -> Self {
        self.depth = depth;
        self
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copies channel `c` out as a contiguous row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f32> {
        assert!(c < self.channels, "channel {c} out of range");
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.plane(c),
            depth: self.depth,
        }
    }

    /// Rebuilds an image of this shape from per-channel planes, clamping into `[0, 1]`.
    pub(crate) fn with_planes(&self, planes: Vec<Vec<f32>>) -> Image {
        debug_assert_eq!(planes.len(), self.channels);
        let n = self.height * self.width;
        let mut data = vec![0.0f32; n * planes.len()];
        for (c, plane) in planes.iter().enumerate() {
            debug_assert_eq!(plane.len(), n);
            for (i, &v) in plane.iter().enumerate() {
                data[i * planes.len() + c] = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            }
        }
        Image {
            height: self.height,
            width: self.width,
            channels: planes.len(),
            data,
            depth: self.depth,
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}
