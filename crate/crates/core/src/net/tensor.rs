use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

use crate::error::{Error, Result};

/// Scalar type of the network: `f32` for training, `f64` for gradient checking.
pub trait Real: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense NCHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Tensor4 {
            batch,
            channels,
            height,
            width,
            data: vec![T::zero(); batch * channels * height * width],
        }
    }

    pub fn from_vec(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        if data.len() != batch * channels * height * width {
            return Err(Error::mismatch(format!(
                "{} values for a {batch}x{channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Tensor4 {
            batch,
            channels,
            height,
            width,
            data,
        })
    }

    /// A single `1 x 1 x height x width` tensor from a row-major plane.
    pub fn from_plane(height: usize, width: usize, plane: &[f32]) -> Result<Self> {
        Self::from_vec(
            1,
            1,
            height,
            width,
            plane.iter().map(|&v| T::of(v as f64)).collect(),
        )
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.batch, self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.plane_len();
        let start = (n * self.channels + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates tensors of equal C x H x W along the batch axis.
    pub fn stack(items: &[Tensor4<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::mismatch("cannot stack zero tensors"))?;
        let mut data = Vec::new();
        let mut batch = 0;
        for t in items {
            if (t.channels, t.height, t.width) != (first.channels, first.height, first.width) {
                return Err(Error::mismatch("stacked tensors differ in shape"));
            }
            batch += t.batch;
            data.extend_from_slice(&t.data);
        }
        Self::from_vec(batch, first.channels, first.height, first.width, data)
    }
}

pub(crate) fn check_same_shape<T: Real>(a: &Tensor4<T>, b: &Tensor4<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}
