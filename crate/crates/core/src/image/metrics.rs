use super::Image;
use crate::error::{Error, Result};

/// Side length of the SSIM Gaussian window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// PSNR and SSIM of one image against a reference.
///
/// A PSNR of `f64::INFINITY` means the images are identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn quality(img: &Image, reference: &Image) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(img, reference)?,
        ssim: ssim(img, reference)?,
    })
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::mismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB with peak 1.0, averaged over channels.
///
/// Identical images yield `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let c = a.channels();
    let n = (a.height() * a.width()) as f64;
    let mut total = 0.0;
    for ch in 0..c {
        let mse = a
            .data()
            .iter()
            .skip(ch)
            .step_by(c)
            .zip(b.data().iter().skip(ch).step_by(c))
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            / n;
        total += psnr_from_mse(mse);
    }
    Ok(total / c as f64)
}

pub(crate) fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

fn gaussian_window_1d() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Weighted sum of every 11x11 window fully inside the `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let oh = h - SSIM_WINDOW + 1;
    let ow = w - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        let dst = &mut rows[y * ow..(y + 1) * ow];
        for (x, d) in dst.iter_mut().enumerate() {
            *d = k
                .iter()
                .zip(&src[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (i, &kw) in k.iter().enumerate() {
            let src = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (d, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *d += kw * s;
            }
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let k = gaussian_window_1d();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, h, w, &k);
    let mu_b = filter_valid(b, h, w, &k);
    let e_aa = filter_valid(&aa, h, w, &k);
    let e_bb = filter_valid(&bb, h, w, &k);
    let e_ab = filter_valid(&ab, h, w, &k);
    let n = mu_a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    sum / n as f64
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and
/// dynamic range 1.0, averaged over all window positions inside the image and over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidImage(format!(
            "{h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let c = a.channels();
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a.plane(ch).into_iter().map(f64::from).collect();
        let pb: Vec<f64> = b.plane(ch).into_iter().map(f64::from).collect();
        total += ssim_plane(&pa, &pb, h, w);
    }
    Ok(total / c as f64)
}
