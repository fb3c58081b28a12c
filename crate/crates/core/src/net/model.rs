use super::activation::{leaky_relu, leaky_relu_backward};
use super::conv::{conv2d_backward, conv2d_backward_params, conv2d_forward, Conv2d};
use super::tensor::{Real, Tensor4};
use crate::error::{Error, Result};
use crate::noise::RngStream;

pub const DEFAULT_WIDTHS: (usize, usize) = (16, 24);
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Weights of the three-layer denoiser:
/// `conv3x3(1 -> c1) -> LeakyReLU -> conv3x3(c1 -> c2) -> LeakyReLU -> conv1x1(c2 -> 1)`.
///
/// The output is the denoised image itself (no residual connection) and is not clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub conv3: Conv2d<T>,
    pub leaky_slope: T,
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub input: Tensor4<T>,
    pub pre1: Tensor4<T>,
    pub act1: Tensor4<T>,
    pub pre2: Tensor4<T>,
    pub act2: Tensor4<T>,
}

/// Gradients in the order of [`NetParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub tensors: [Vec<T>; 6],
}

impl<T: Real> ParamGrads<T> {
    pub fn as_slices(&self) -> [&[T]; 6] {
        let [a, b, c, d, e, f] = &self.tensors;
        [a, b, c, d, e, f]
    }
}

/// Closed-form parameter count for widths `(c1, c2)`.
pub fn param_count(c1: usize, c2: usize) -> usize {
    (9 * c1 + c1) + (9 * c1 * c2 + c2) + (c2 + 1)
}

impl<T: Real> NetParams<T> {
    pub fn zeros(c1: usize, c2: usize, leaky_slope: f64) -> Self {
        NetParams {
            conv1: Conv2d::zeros(1, c1, 3),
            conv2: Conv2d::zeros(c1, c2, 3),
            conv3: Conv2d::zeros(c2, 1, 1),
            leaky_slope: T::of(leaky_slope),
        }
    }

    /// Every weight and bias uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` of its layer,
    /// drawn in the order conv1, conv2, conv3 (weights before biases).
    pub fn init(rng: RngStream, c1: usize, c2: usize, leaky_slope: f64) -> Result<Self> {
        if c1 < 1 || c2 < 1 {
            return Err(Error::param(format!(
                "layer widths must be at least 1, got ({c1}, {c2})"
            )));
        }
        if !(0.0..1.0).contains(&leaky_slope) {
            return Err(Error::param(format!(
                "leaky slope must lie in [0, 1), got {leaky_slope}"
            )));
        }
        let mut params = Self::zeros(c1, c2, leaky_slope);
        let mut r = rng.rng();
        for conv in [&mut params.conv1, &mut params.conv2, &mut params.conv3] {
            let bound = 1.0 / (conv.fan_in() as f64).sqrt();
            for v in conv.weight.iter_mut().chain(conv.bias.iter_mut()) {
                *v = T::of((2.0 * r.uniform() - 1.0) * bound);
            }
        }
        Ok(params)
    }

    pub fn widths(&self) -> (usize, usize) {
        (self.conv1.out_channels, self.conv2.out_channels)
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count() + self.conv2.param_count() + self.conv3.param_count()
    }

    pub fn tensors(&self) -> [&[T]; 6] {
        [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.conv3.weight,
            &self.conv3.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 6] {
        [
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.conv3.weight,
            &mut self.conv3.bias,
        ]
    }

    pub fn tensor_lengths(&self) -> [usize; 6] {
        self.tensors().map(|t| t.len())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &Tensor4<T>) -> Result<(Tensor4<T>, ForwardCache<T>)> {
        if input.channels != 1 {
            return Err(Error::mismatch(format!(
                "network input must have 1 channel, got {}",
                input.channels
            )));
        }
        let pre1 = conv2d_forward(input, &self.conv1)?;
        let act1 = leaky_relu(&pre1, self.leaky_slope);
        let pre2 = conv2d_forward(&act1, &self.conv2)?;
        let act2 = leaky_relu(&pre2, self.leaky_slope);
        let out = conv2d_forward(&act2, &self.conv3)?;
        Ok((
            out,
            ForwardCache {
                input: input.clone(),
                pre1,
                act1,
                pre2,
                act2,
            },
        ))
    }

    /// Output only, without keeping activations.
    pub fn predict(&self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        if input.channels != 1 {
            return Err(Error::mismatch(format!(
                "network input must have 1 channel, got {}",
                input.channels
            )));
        }
        let a1 = leaky_relu(&conv2d_forward(input, &self.conv1)?, self.leaky_slope);
        let a2 = leaky_relu(&conv2d_forward(&a1, &self.conv2)?, self.leaky_slope);
        conv2d_forward(&a2, &self.conv3)
    }

    /// Parameter gradients given the loss gradient with respect to the network output.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_out: &Tensor4<T>,
    ) -> Result<ParamGrads<T>> {
        let g3 = conv2d_backward(grad_out, &cache.act2, &self.conv3)?;
        let g_pre2 = leaky_relu_backward(
            g3.input.as_ref().expect("input gradient requested"),
            &cache.pre2,
            self.leaky_slope,
        )?;
        let g2 = conv2d_backward(&g_pre2, &cache.act1, &self.conv2)?;
        let g_pre1 = leaky_relu_backward(
            g2.input.as_ref().expect("input gradient requested"),
            &cache.pre1,
            self.leaky_slope,
        )?;
        let g1 = conv2d_backward_params(&g_pre1, &cache.input, &self.conv1)?;
        Ok(ParamGrads {
            tensors: [g1.weight, g1.bias, g2.weight, g2.bias, g3.weight, g3.bias],
        })
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> NetParams<U> {
        let conv = |c: &Conv2d<T>| Conv2d {
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            kernel: c.kernel,
            weight: c.weight.iter().map(|v| U::of(v.as_f64())).collect(),
            bias: c.bias.iter().map(|v| U::of(v.as_f64())).collect(),
        };
        NetParams {
            conv1: conv(&self.conv1),
            conv2: conv(&self.conv2),
            conv3: conv(&self.conv3),
            leaky_slope: U::of(self.leaky_slope.as_f64()),
        }
    }
}
