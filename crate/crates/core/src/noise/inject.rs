use rayon::prelude::*;

use super::rng::RngStream;
use super::sampler::{gaussian_unchecked, poisson_unchecked};
use super::NoiseConfig;
use crate::error::{Error, Result};
use crate::image::Image;

/// Lower bound applied to a chunk mean before dividing by it.
pub const MASK_FLOOR: f64 = 1.0 / 255.0;

const REGION_STREAM: u64 = 0;
const OVERALL_STREAM: u64 = 1;

/// Repeats every channel `lambda_amp` times: output channel `j` copies input channel `j / lambda_amp`.
pub fn amplify_channels(img: &Image, lambda_amp: usize) -> Result<Image> {
    if lambda_amp < 1 {
        return Err(Error::param("lambda_amp must be at least 1"));
    }
    if lambda_amp == 1 {
        return Ok(img.clone());
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(img.data().len() * lambda_amp);
    for px in img.data().chunks_exact(c) {
        for &v in px {
            data.extend(std::iter::repeat_n(v, lambda_amp));
        }
    }
    Image::new(img.height(), img.width(), c * lambda_amp, data, img.depth())
}

/// Per-chunk mean intensity over a `stride x stride` tiling anchored at the top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub height: usize,
    pub width: usize,
    pub stride: usize,
    pub chunk_rows: usize,
    pub chunk_cols: usize,
    /// Row-major chunk means.
    pub means: Vec<f64>,
}

impl RegionMask {
    #[inline]
    pub fn chunk_of(&self, y: usize, x: usize) -> usize {
        (y / self.stride) * self.chunk_cols + x / self.stride
    }

    pub fn mean_at(&self, row: usize, col: usize) -> f64 {
        self.means[row * self.chunk_cols + col]
    }

    /// `(sigma_g, lambda_p)` for every chunk.
    pub fn noise_params(&self, k_g: f64, k_p: f64) -> Vec<(f64, f64)> {
        self.means
            .iter()
            .map(|&m| region_noise_params(m, k_g, k_p))
            .collect()
    }
}

/// Gaussian deviation and Poisson factor for a chunk of mean intensity `mean`.
pub fn region_noise_params(mean: f64, k_g: f64, k_p: f64) -> (f64, f64) {
    (k_g * mean / 255.0, k_p / mean.max(MASK_FLOOR))
}

/// Chunk means of channel 0 (after amplification all copies of a channel are identical).
pub fn region_mask(img: &Image, stride: usize) -> Result<RegionMask> {
    if stride < 1 {
        return Err(Error::param("stride must be at least 1"));
    }
    let (h, w) = (img.height(), img.width());
    let chunk_rows = h.div_ceil(stride);
    let chunk_cols = w.div_ceil(stride);
    let mut sums = vec![0.0f64; chunk_rows * chunk_cols];
    let mut counts = vec![0usize; chunk_rows * chunk_cols];
    let c = img.channels();
    for y in 0..h {
        let row = &img.data()[y * w * c..(y + 1) * w * c];
        for x in 0..w {
            let k = (y / stride) * chunk_cols + x / stride;
            sums[k] += row[x * c] as f64;
            counts[k] += 1;
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s / n as f64)
        .collect();
    Ok(RegionMask {
        height: h,
        width: w,
        stride,
        chunk_rows,
        chunk_cols,
        means,
    })
}

fn region_plane(
    plane: &[f32],
    width: usize,
    mask: &RegionMask,
    params: &[(f64, f64)],
    stream: RngStream,
) -> Vec<f32> {
    let mut rng = stream.rng();
    plane
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (sigma, lambda) = params[mask.chunk_of(i / width, i % width)];
            let poisson = poisson_unchecked(&mut rng, lambda * x as f64) as f64 / lambda;
            let gauss = gaussian_unchecked(&mut rng, sigma);
            (poisson + gauss).clamp(0.0, 1.0) as f32
        })
        .collect()
}

fn overall_plane(plane: &[f32], lambda: f64, stream: RngStream) -> Vec<f32> {
    let mut rng = stream.rng();
    plane
        .iter()
        .map(|&x| {
            let v = poisson_unchecked(&mut rng, lambda * x as f64) as f64 / lambda;
            v.clamp(0.0, 1.0) as f32
        })
        .collect()
}

fn check_mask(img: &Image, mask: &RegionMask) -> Result<()> {
    let expected_rows = mask.height.div_ceil(mask.stride.max(1));
    let expected_cols = mask.width.div_ceil(mask.stride.max(1));
    if img.height() != mask.height
        || img.width() != mask.width
        || mask.chunk_rows != expected_rows
        || mask.chunk_cols != expected_cols
        || mask.means.len() != mask.chunk_rows * mask.chunk_cols
    {
        return Err(Error::mismatch(format!(
            "mask for {}x{} (stride {}) does not fit image {}x{}",
            mask.height,
            mask.width,
            mask.stride,
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

fn check_region_factors(k_g: f64, k_p: f64) -> Result<()> {
    if !(k_g >= 0.0 && k_g.is_finite()) {
        return Err(Error::param(format!("k_g must be non-negative, got {k_g}")));
    }
    if !(k_p > 0.0 && k_p.is_finite()) {
        return Err(Error::param(format!("k_p must be positive, got {k_p}")));
    }
    Ok(())
}

/// Adds signal-adaptive mixed Poisson-Gaussian noise chunk by chunk.
///
/// Channel `c` draws from `rng.derive(c)`.
pub fn inject_region_wise(
    img: &Image,
    mask: &RegionMask,
    k_g: f64,
    k_p: f64,
    rng: RngStream,
) -> Result<Image> {
    check_mask(img, mask)?;
    check_region_factors(k_g, k_p)?;
    let params = mask.noise_params(k_g, k_p);
    let planes = (0..img.channels())
        .into_par_iter()
        .map(|c| {
            region_plane(
                &img.plane(c),
                img.width(),
                mask,
                &params,
                rng.derive(c as u64),
            )
        })
        .collect();
    Ok(img.with_planes(planes))
}

/// Replaces every pixel `x` by `P(lambda_p * x) / lambda_p`. Channel `c` draws from `rng.derive(c)`.
pub fn inject_overall(img: &Image, lambda_p: f64, rng: RngStream) -> Result<Image> {
    if !(lambda_p > 0.0 && lambda_p.is_finite()) {
        return Err(Error::param(format!(
            "lambda_p must be positive, got {lambda_p}"
        )));
    }
    let planes = (0..img.channels())
        .into_par_iter()
        .map(|c| overall_plane(&img.plane(c), lambda_p, rng.derive(c as u64)))
        .collect();
    Ok(img.with_planes(planes))
}

/// Full injection: region-wise pass on `rng.derive(0)`, then the overall pass on `rng.derive(1)`.
///
/// The mask is computed from `img` with `cfg.stride`.
pub fn inject(img: &Image, cfg: &NoiseConfig, rng: RngStream) -> Result<Image> {
    cfg.validate()?;
    let mask = region_mask(img, cfg.stride)?;
    let noisy = inject_region_wise(img, &mask, cfg.k_g, cfg.k_p, rng.derive(REGION_STREAM))?;
    inject_overall(&noisy, cfg.lambda_p, rng.derive(OVERALL_STREAM))
}

/// Channel `c` of `inject(img, cfg, rng)` with a precomputed mask, without touching other channels.
pub fn inject_channel(
    img: &Image,
    c: usize,
    mask: &RegionMask,
    cfg: &NoiseConfig,
    rng: RngStream,
) -> Result<Vec<f32>> {
    check_mask(img, mask)?;
    check_region_factors(cfg.k_g, cfg.k_p)?;
    let params = mask.noise_params(cfg.k_g, cfg.k_p);
    let region = region_plane(
        &img.plane(c),
        img.width(),
        mask,
        &params,
        rng.derive(REGION_STREAM).derive(c as u64),
    );
    Ok(overall_plane(
        &region,
        cfg.lambda_p,
        rng.derive(OVERALL_STREAM).derive(c as u64),
    ))
}
