//! Poisson and Gaussian variates on top of [`StreamRng`].

use super::rng::StreamRng;
use crate::error::{Error, Result};

/// Means below this use sequential-search inversion; at or above it, transformed rejection.
pub const INVERSION_LIMIT: f64 = 10.0;

/// Draws from Poisson(`mean`). A mean of zero returns 0 without consuming randomness.
pub fn sample_poisson(rng: &mut StreamRng, mean: f64) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::param(format!(
            "poisson mean must be finite and non-negative, got {mean}"
        )));
    }
    Ok(poisson_unchecked(rng, mean))
}

/// [`sample_poisson`] without argument validation; `mean` must be finite and `>= 0`.
#[inline]
pub(crate) fn poisson_unchecked(rng: &mut StreamRng, mean: f64) -> u64 {
    if mean == 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion(rng: &mut StreamRng, mean: f64) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        if p == 0.0 {
            // cdf has saturated below u through rounding; the remaining mass is negligible
            break;
        }
        cdf += p;
    }
    k
}

/// Transformed rejection with squeeze (Hörmann's PTRS), valid for `mean >= 10`.
fn poisson_ptrs(rng: &mut StreamRng, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if !(k >= 0.0) || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)` for integral `k >= 0`: exact summation below 16, Stirling series above.
pub fn ln_factorial(k: f64) -> f64 {
    if k < 16.0 {
        let mut acc = 0.0;
        let mut i = 2.0;
        while i <= k {
            acc += f64::ln(i);
            i += 1.0;
        }
        return acc;
    }
    let n = k + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n
        + 0.5 * std::f64::consts::TAU.ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Zero-mean normal draw with standard deviation `sigma`. `sigma == 0` returns 0 without drawing.
pub fn sample_gaussian(rng: &mut StreamRng, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!(
            "gaussian sigma must be finite and non-negative, got {sigma}"
        )));
    }
    Ok(gaussian_unchecked(rng, sigma))
}

#[inline]
pub(crate) fn gaussian_unchecked(rng: &mut StreamRng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        sigma * rng.standard_normal()
    }
}
