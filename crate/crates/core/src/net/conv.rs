//! Stride-1 "same" convolution (cross-correlation) with zero padding.
//!
//! Work is split across output planes with rayon when planes are large; each plane is computed
//! by one task in a fixed order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::tensor::{Real, Tensor4};
use crate::error::{Error, Result};

/// Planes at least this large are processed in parallel.
const PAR_MIN_PIXELS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Odd kernel side (1 or 3 in this network).
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor4<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel side must be odd");
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    fn w(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> T {
        self.weight[((oc * self.in_channels + ic) * self.kernel + ky) * self.kernel + kx]
    }

    fn check_input(&self, input: &Tensor4<T>) -> Result<()> {
        if input.channels != self.in_channels {
            return Err(Error::mismatch(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        if self.weight.len() != self.out_channels * self.fan_in()
            || self.bias.len() != self.out_channels
        {
            return Err(Error::mismatch(
                "convolution weight or bias has the wrong length",
            ));
        }
        Ok(())
    }
}

/// Range of output coordinates `i` for which `i + d` stays inside `0..n`.
#[inline]
fn valid_range(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    (lo, hi.max(lo))
}

#[inline]
fn axpy<T: Real>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn for_each_plane<T: Real, F>(data: &mut [T], plane: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if plane >= PAR_MIN_PIXELS {
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(i, p)| f(i, p));
    } else {
        data.chunks_mut(plane)
            .enumerate()
            .for_each(|(i, p)| f(i, p));
    }
}

pub fn conv2d_forward<T: Real>(input: &Tensor4<T>, conv: &Conv2d<T>) -> Result<Tensor4<T>> {
    conv.check_input(input)?;
    let (n_batch, _, h, w) = input.shape();
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let mut out = Tensor4::zeros(n_batch, conv.out_channels, h, w);
    for_each_plane(&mut out.data, h * w, |idx, plane| {
        let (n, oc) = (idx / conv.out_channels, idx % conv.out_channels);
        plane.fill(conv.bias[oc]);
        for y in 0..h {
            let row = &mut plane[y * w..(y + 1) * w];
            for ic in 0..conv.in_channels {
                let src = input.plane(n, ic);
                for ky in 0..k {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = &src[sy as usize * w..(sy as usize + 1) * w];
                    for kx in 0..k {
                        let dx = kx as isize - pad;
                        let (x0, x1) = valid_range(w, dx);
                        let s0 = (x0 as isize + dx) as usize;
                        axpy(
                            &mut row[x0..x1],
                            conv.w(oc, ic, ky, kx),
                            &src_row[s0..s0 + (x1 - x0)],
                        );
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Exact gradients of [`conv2d_forward`] with respect to its input, weights and bias.
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    conv: &Conv2d<T>,
) -> Result<ConvGrads<T>> {
    backward_impl(grad_out, input, conv, true)
}

/// Like [`conv2d_backward`] but skips the input gradient (first layer).
pub fn conv2d_backward_params<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    conv: &Conv2d<T>,
) -> Result<ConvGrads<T>> {
    backward_impl(grad_out, input, conv, false)
}

fn backward_impl<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    conv: &Conv2d<T>,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    conv.check_input(input)?;
    let (n_batch, _, h, w) = input.shape();
    if grad_out.shape() != (n_batch, conv.out_channels, h, w) {
        return Err(Error::mismatch(format!(
            "output gradient {:?} does not match forward output {:?}",
            grad_out.shape(),
            (n_batch, conv.out_channels, h, w)
        )));
    }
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let kk = k * k;

    // weights and bias: one task per output channel
    let per_oc: Vec<(Vec<T>, T)> = {
        let job = |oc: usize| {
            let mut gw = vec![T::zero(); conv.in_channels * kk];
            let mut gb = T::zero();
            for n in 0..n_batch {
                let g = grad_out.plane(n, oc);
                gb += g.iter().copied().sum::<T>();
                for ic in 0..conv.in_channels {
                    let src = input.plane(n, ic);
                    for ky in 0..k {
                        let dy = ky as isize - pad;
                        let (y0, y1) = valid_range(h, dy);
                        for kx in 0..k {
                            let dx = kx as isize - pad;
                            let (x0, x1) = valid_range(w, dx);
                            let s0 = (x0 as isize + dx) as usize;
                            let mut acc = T::zero();
                            for y in y0..y1 {
                                let sy = (y as isize + dy) as usize;
                                acc += dot(
                                    &g[y * w + x0..y * w + x1],
                                    &src[sy * w + s0..sy * w + s0 + (x1 - x0)],
                                );
                            }
                            gw[ic * kk + ky * k + kx] += acc;
                        }
                    }
                }
            }
            (gw, gb)
        };
        if h * w >= PAR_MIN_PIXELS {
            (0..conv.out_channels).into_par_iter().map(job).collect()
        } else {
            (0..conv.out_channels).map(job).collect()
        }
    };
    let mut weight = Vec::with_capacity(conv.weight.len());
    let mut bias = Vec::with_capacity(conv.out_channels);
    for (gw, gb) in per_oc {
        weight.extend(gw);
        bias.push(gb);
    }

    let input_grad = if want_input {
        let mut gi = Tensor4::zeros(n_batch, conv.in_channels, h, w);
        for_each_plane(&mut gi.data, h * w, |idx, plane| {
            let (n, ic) = (idx / conv.in_channels, idx % conv.in_channels);
            for sy in 0..h {
                let row = &mut plane[sy * w..(sy + 1) * w];
                for oc in 0..conv.out_channels {
                    let g = grad_out.plane(n, oc);
                    for ky in 0..k {
                        let y = sy as isize - (ky as isize - pad);
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let g_row = &g[y as usize * w..(y as usize + 1) * w];
                        for kx in 0..k {
                            let dx = kx as isize - pad;
                            let (x0, x1) = valid_range(w, dx);
                            let s0 = (x0 as isize + dx) as usize;
                            axpy(
                                &mut row[s0..s0 + (x1 - x0)],
                                conv.w(oc, ic, ky, kx),
                                &g_row[x0..x1],
                            );
                        }
                    }
                }
            }
        });
        Some(gi)
    } else {
        None
    };

    Ok(ConvGrads {
        input: input_grad,
        weight,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngStream;

    fn random_tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor4<f64> {
        let mut r = RngStream::new(seed).rng();
        Tensor4::from_vec(
            n,
            c,
            h,
            w,
            (0..n * c * h * w)
                .map(|_| r.uniform() * 2.0 - 1.0)
                .collect(),
        )
        .unwrap()
    }

    fn random_conv(ci: usize, co: usize, k: usize, seed: u64) -> Conv2d<f64> {
        let mut r = RngStream::new(seed).derive(1).rng();
        let mut conv = Conv2d::zeros(ci, co, k);
        conv.weight.iter_mut().for_each(|v| *v = r.uniform() - 0.5);
        conv.bias.iter_mut().for_each(|v| *v = r.uniform() - 0.5);
        conv
    }

    /// Six nested loops straight from the definition.
    fn reference_forward(input: &Tensor4<f64>, conv: &Conv2d<f64>) -> Tensor4<f64> {
        let (nb, ci, h, w) = input.shape();
        let p = (conv.kernel / 2) as isize;
        let mut out = Tensor4::zeros(nb, conv.out_channels, h, w);
        for n in 0..nb {
            for oc in 0..conv.out_channels {
                for y in 0..h {
                    for x in 0..w {
                        let mut s = conv.bias[oc];
                        for ic in 0..ci {
                            for ky in 0..conv.kernel {
                                for kx in 0..conv.kernel {
                                    let sy = y as isize + ky as isize - p;
                                    let sx = x as isize + kx as isize - p;
                                    if sy >= 0 && sx >= 0 && sy < h as isize && sx < w as isize {
                                        s += conv.w(oc, ic, ky, kx)
                                            * input.plane(n, ic)[sy as usize * w + sx as usize];
                                    }
                                }
                            }
                        }
                        out.data[((n * conv.out_channels + oc) * h + y) * w + x] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn pointwise_affine() {
        let mut conv = Conv2d::<f64>::zeros(1, 1, 1);
        conv.weight[0] = 2.5;
        conv.bias[0] = -0.5;
        let input = Tensor4::from_vec(1, 1, 4, 4, vec![0.3; 16]).unwrap();
        let out = conv2d_forward(&input, &conv).unwrap();
        assert!(out.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn zero_padding_arithmetic() {
        let mut conv = Conv2d::<f32>::zeros(1, 1, 3);
        conv.weight.fill(1.0);
        let input = Tensor4::from_vec(1, 1, 5, 5, vec![1.0f32; 25]).unwrap();
        let out = conv2d_forward(&input, &conv).unwrap();
        assert_eq!(out.data[2 * 5 + 2], 9.0);
        assert_eq!(out.data[0], 4.0);
        assert_eq!(out.data[2], 6.0);
    }

    #[test]
    fn forward_matches_reference() {
        let input = random_tensor(1, 4, 8, 8, 1);
        for (k, co) in [(3, 5), (1, 3)] {
            let conv = random_conv(4, co, k, 2);
            let got = conv2d_forward(&input, &conv).unwrap();
            let want = reference_forward(&input, &conv);
            for (a, b) in got.data.iter().zip(&want.data) {
                assert!((a - b).abs() <= 1e-5);
            }
        }
        // large planes take the parallel path
        let input = random_tensor(2, 2, 70, 65, 3);
        let conv = random_conv(2, 3, 3, 4);
        let got = conv2d_forward(&input, &conv).unwrap();
        let want = reference_forward(&input, &conv);
        for (a, b) in got.data.iter().zip(&want.data) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let conv = random_conv(2, 3, 3, 1);
        let bad = random_tensor(1, 3, 6, 6, 1);
        assert!(conv2d_forward(&bad, &conv).is_err());
        let input = random_tensor(1, 2, 6, 6, 1);
        let bad_grad = random_tensor(1, 2, 6, 6, 2);
        assert!(conv2d_backward(&bad_grad, &input, &conv).is_err());
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let conv = random_conv(2, 3, 3, 5);
        let input = random_tensor(1, 2, 6, 6, 6);
        let g = Tensor4::zeros(1, 3, 6, 6);
        let grads = conv2d_backward(&g, &input, &conv).unwrap();
        assert!(grads.weight.iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
        assert!(grads.input.unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_gradient_is_plane_sum() {
        let conv = random_conv(2, 3, 3, 7);
        let input = random_tensor(2, 2, 6, 6, 8);
        let g = random_tensor(2, 3, 6, 6, 9);
        let grads = conv2d_backward(&g, &input, &conv).unwrap();
        for oc in 0..3 {
            let want: f64 = (0..2).map(|n| g.plane(n, oc).iter().sum::<f64>()).sum();
            assert!((grads.bias[oc] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        // loss = <G, conv(x)> so dL/dtheta is the backward pass applied to G
        let input = random_tensor(1, 2, 6, 6, 10);
        let conv = random_conv(2, 3, 3, 11);
        let g = random_tensor(1, 3, 6, 6, 12);
        let loss = |x: &Tensor4<f64>, c: &Conv2d<f64>| -> f64 {
            conv2d_forward(x, c)
                .unwrap()
                .data
                .iter()
                .zip(&g.data)
                .map(|(a, b)| a * b)
                .sum()
        };
        let grads = conv2d_backward(&g, &input, &conv).unwrap();
        let h = 1e-3;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);

        for i in 0..conv.weight.len() {
            let (mut p, mut m) = (conv.clone(), conv.clone());
            p.weight[i] += h;
            m.weight[i] -= h;
            let num = (loss(&input, &p) - loss(&input, &m)) / (2.0 * h);
            assert!(rel(grads.weight[i], num) <= 1e-3, "weight {i}");
        }
        for i in 0..conv.bias.len() {
            let (mut p, mut m) = (conv.clone(), conv.clone());
            p.bias[i] += h;
            m.bias[i] -= h;
            let num = (loss(&input, &p) - loss(&input, &m)) / (2.0 * h);
            assert!(rel(grads.bias[i], num) <= 1e-3, "bias {i}");
        }
        let gi = grads.input.unwrap();
        for i in 0..input.data.len() {
            let (mut p, mut m) = (input.clone(), input.clone());
            p.data[i] += h;
            m.data[i] -= h;
            let num = (loss(&p, &conv) - loss(&m, &conv)) / (2.0 * h);
            assert!(rel(gi.data[i], num) <= 1e-3, "input {i}");
        }
        let params_only = conv2d_backward_params(&g, &input, &conv).unwrap();
        assert!(params_only.input.is_none());
        assert_eq!(params_only.weight, grads.weight);
    }

    #[test]
    fn parallel_backward_matches_serial_reference() {
        let input = random_tensor(1, 2, 80, 60, 20);
        let conv = random_conv(2, 3, 3, 21);
        let g = random_tensor(1, 3, 80, 60, 22);
        let grads = conv2d_backward(&g, &input, &conv).unwrap();
        // direct definition of the weight gradient
        for oc in 0..3 {
            for ic in 0..2 {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let mut s = 0.0;
                        for y in 0..80isize {
                            for x in 0..60isize {
                                let (sy, sx) = (y + ky as isize - 1, x + kx as isize - 1);
                                if sy >= 0 && sx >= 0 && sy < 80 && sx < 60 {
                                    s += g.plane(0, oc)[(y * 60 + x) as usize]
                                        * input.plane(0, ic)[(sy * 60 + sx) as usize];
                                }
                            }
                        }
                        let got = grads.weight[((oc * 2 + ic) * 3 + ky) * 3 + kx];
                        assert!((got - s).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
