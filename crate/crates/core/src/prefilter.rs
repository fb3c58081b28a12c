//! Pre-denoising filters that produce the training target and the noise-injection substrate.
//!
//! Both filters replicate edge pixels at the borders and run independently per channel.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Median,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub window: usize,
    /// Gaussian standard deviation in pixels; `None` means `window / 6`.
    pub gaussian_sigma: Option<f64>,
}

impl FilterSpec {
    pub fn median(window: usize) -> Self {
        FilterSpec {
            kind: FilterKind::Median,
            window,
            gaussian_sigma: None,
        }
    }

    pub fn gaussian(window: usize) -> Self {
        FilterSpec {
            kind: FilterKind::Gaussian,
            window,
            gaussian_sigma: None,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.gaussian_sigma.unwrap_or(self.window as f64 / 6.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_window(self.window)?;
        if self.kind == FilterKind::Gaussian && !(self.sigma() > 0.0 && self.sigma().is_finite()) {
            return Err(Error::param(format!(
                "gaussian sigma must be positive, got {}",
                self.sigma()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        match self.kind {
            FilterKind::Median => median_filter(img, self.window),
            FilterKind::Gaussian => gaussian_filter(img, self.window, self.sigma()),
        }
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::median(3)
    }
}

fn check_window(window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "filter window must be odd and at least 3, got {window}"
        )));
    }
    Ok(())
}

fn check_fits(img: &Image, window: usize) -> Result<()> {
    if window > img.height().min(img.width()) {
        return Err(Error::param(format!(
            "filter window {window} exceeds image size {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Median of each `window x window` neighborhood.
pub fn median_filter(img: &Image, window: usize) -> Result<Image> {
    check_window(window)?;
    check_fits(img, window)?;
    let (h, w) = (img.height(), img.width());
    let r = (window / 2) as isize;
    let mid = window * window / 2;
    let planes = (0..img.channels())
        .map(|c| {
            let src = img.plane(c);
            let mut out = vec![0.0f32; h * w];
            let mut buf = Vec::with_capacity(window * window);
            for y in 0..h {
                for x in 0..w {
                    buf.clear();
                    for dy in -r..=r {
                        let row = clamp_index(y as isize + dy, h) * w;
                        for dx in -r..=r {
                            buf.push(src[row + clamp_index(x as isize + dx, w)]);
                        }
                    }
                    let (_, m, _) = buf.select_nth_unstable_by(mid, f32::total_cmp);
                    out[y * w + x] = *m;
                }
            }
            out
        })
        .collect();
    Ok(img.with_planes(planes))
}

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let r = (window / 2) as f64;
    let mut k: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with a renormalized `window`-tap kernel.
pub fn gaussian_filter(img: &Image, window: usize, sigma: f64) -> Result<Image> {
    check_window(window)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    check_fits(img, window)?;
    let (h, w) = (img.height(), img.width());
    let k = gaussian_kernel(window, sigma);
    let r = (window / 2) as isize;
    let planes = (0..img.channels())
        .map(|c| {
            let src = img.plane(c);
            let mut tmp = vec![0.0f64; h * w];
            for y in 0..h {
                for x in 0..w {
                    tmp[y * w + x] = k
                        .iter()
                        .enumerate()
                        .map(|(i, kw)| {
                            kw * src[y * w + clamp_index(x as isize + i as isize - r, w)] as f64
                        })
                        .sum();
                }
            }
            let mut out = vec![0.0f32; h * w];
            for y in 0..h {
                for x in 0..w {
                    let v: f64 = k
                        .iter()
                        .enumerate()
                        .map(|(i, kw)| {
                            kw * tmp[clamp_index(y as isize + i as isize - r, h) * w + x]
                        })
                        .sum();
                    out[y * w + x] = v as f32;
                }
            }
            // Rounding can leave the result one ulp outside the input range.
            let (lo, hi) = src
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            out.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
            out
        })
        .collect();
    Ok(img.with_planes(planes))
}
