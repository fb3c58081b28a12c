use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for a list of parameter tensors, with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    /// Zero moments for tensors of the given lengths.
    pub fn new(lengths: &[usize], config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::param(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::param("adam betas must lie in [0, 1)"));
        }
        Ok(AdamState {
            config,
            first_moment: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
            step_count: 0,
        })
    }

    /// One update of every tensor in `params` using the matching entry of `grads`.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::mismatch(format!(
                "adam state tracks {} tensors, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[i].len() || g.len() != p.len() {
                return Err(Error::mismatch(format!(
                    "adam tensor {i} has the wrong length"
                )));
            }
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for j in 0..p.len() {
                let gj = g[j].as_f64();
                let mj = beta1 * m[j].as_f64() + (1.0 - beta1) * gj;
                let vj = beta2 * v[j].as_f64() + (1.0 - beta2) * gj * gj;
                m[j] = T::of(mj);
                v[j] = T::of(vj);
                let m_hat = mj / bias1;
                let v_hat = vj / bias2;
                p[j] = T::of(p[j].as_f64() - lr * m_hat / (v_hat.sqrt() + epsilon));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut theta = vec![0.3f32, -1.2, 4.0];
        let before = theta.clone();
        let mut adam = AdamState::<f32>::new(&[3], AdamConfig::default()).unwrap();
        adam.step(&mut [&mut theta[..]], &[&[0.0; 3][..]]).unwrap();
        assert_eq!(theta, before);
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut theta = [1.0f64];
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::default()).unwrap();
        adam.step(&mut [&mut theta[..]], &[&[1.0][..]]).unwrap();
        let want = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((theta[0] - want).abs() < 1e-12);
        assert!((theta[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let bad = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::<f32>::new(&[1], bad).is_err());
        let mut adam = AdamState::<f32>::new(&[2], AdamConfig::default()).unwrap();
        let mut p = [0.0f32; 3];
        assert!(adam.step(&mut [&mut p[..]], &[&[0.0; 3][..]]).is_err());
        assert_eq!(adam.step_count, 0);
    }
}
