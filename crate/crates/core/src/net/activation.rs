use super::tensor::{check_same_shape, Real, Tensor4};
use crate::error::Result;

/// `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu<T: Real>(input: &Tensor4<T>, slope: T) -> Tensor4<T> {
    let mut out = input.clone();
    for v in &mut out.data {
        if *v < T::zero() {
            *v *= slope;
        }
    }
    out
}

/// Multiplies `grad_out` by the activation derivative at the cached forward input.
/// The derivative at exactly zero is taken to be 1.
pub fn leaky_relu_backward<T: Real>(
    grad_out: &Tensor4<T>,
    input: &Tensor4<T>,
    slope: T,
) -> Result<Tensor4<T>> {
    check_same_shape(grad_out, input, "leaky relu backward")?;
    let mut g = grad_out.clone();
    for (gv, &x) in g.data.iter_mut().zip(&input.data) {
        if x < T::zero() {
            *gv *= slope;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition() {
        let t = Tensor4::from_vec(1, 1, 1, 4, vec![-1.0f64, 0.0, 0.5, 2.0]).unwrap();
        let out = leaky_relu(&t, 0.01);
        assert_eq!(out.data, vec![-0.01, 0.0, 0.5, 2.0]);
        let g = Tensor4::from_vec(1, 1, 1, 4, vec![1.0; 4]).unwrap();
        let back = leaky_relu_backward(&g, &t, 0.01).unwrap();
        assert_eq!(back.data, vec![0.01, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn finite_differences_away_from_zero() {
        let xs = [-2.0f64, -0.3, -0.05, 0.07, 0.9, 3.0];
        let t = Tensor4::from_vec(1, 1, 1, xs.len(), xs.to_vec()).unwrap();
        let ones = Tensor4::from_vec(1, 1, 1, xs.len(), vec![1.0; xs.len()]).unwrap();
        let analytic = leaky_relu_backward(&ones, &t, 0.1).unwrap();
        let h = 1e-6;
        for (i, &x) in xs.iter().enumerate() {
            let f = |v: f64| if v >= 0.0 { v } else { 0.1 * v };
            let num = (f(x + h) - f(x - h)) / (2.0 * h);
            let a = analytic.data[i];
            assert!((a - num).abs() / a.abs() <= 1e-4);
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor4::<f32>::zeros(1, 1, 2, 2);
        let b = Tensor4::<f32>::zeros(1, 2, 2, 2);
        assert!(leaky_relu_backward(&a, &b, 0.01).is_err());
    }
}
