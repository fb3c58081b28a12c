//! Full-network finite-difference check in f64.

use fm2s::net::{mse_loss, NetParams, Tensor4};
use fm2s::noise::RngStream;

fn loss_and_signs(net: &NetParams<f64>, x: &Tensor4<f64>, t: &Tensor4<f64>) -> (f64, Vec<bool>) {
    let (out, cache) = net.forward(x).unwrap();
    let signs = cache
        .pre1
        .data
        .iter()
        .chain(&cache.pre2.data)
        .map(|&v| v >= 0.0)
        .collect();
    (mse_loss(&out, t).unwrap().0, signs)
}

fn numeric(
    net: &NetParams<f64>,
    x: &Tensor4<f64>,
    t: &Tensor4<f64>,
    tensor: usize,
    idx: usize,
) -> f64 {
    let (_, base) = loss_and_signs(net, x, t);
    let mut h = 1e-5;
    loop {
        let mut plus = net.clone();
        plus.tensors_mut()[tensor][idx] += h;
        let mut minus = net.clone();
        minus.tensors_mut()[tensor][idx] -= h;
        let (lp, sp) = loss_and_signs(&plus, x, t);
        let (lm, sm) = loss_and_signs(&minus, x, t);
        // Crossing a LeakyReLU kink biases the central difference; shrink the step instead.
        if (sp == base && sm == base) || h < 1e-9 {
            return (lp - lm) / (2.0 * h);
        }
        h /= 10.0;
    }
}

fn check(seed: u64, widths: (usize, usize)) {
    let net = NetParams::<f64>::init(RngStream::new(seed), widths.0, widths.1, 0.01).unwrap();
    let mut r = RngStream::new(seed).derive(99).rng();
    let x = Tensor4::from_vec(1, 1, 8, 8, (0..64).map(|_| r.uniform()).collect()).unwrap();
    let t = Tensor4::from_vec(1, 1, 8, 8, (0..64).map(|_| r.uniform()).collect()).unwrap();
    let (out, cache) = net.forward(&x).unwrap();
    let (_, g) = mse_loss(&out, &t).unwrap();
    let grads = net.backward(&cache, &g).unwrap();
    let mut worst = 0.0f64;
    for (ti, analytic) in grads.tensors.iter().enumerate() {
        for (i, &a) in analytic.iter().enumerate() {
            let n = numeric(&net, &x, &t, ti, i);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-3, "seed {seed}: worst relative error {worst}");
}

#[test]
fn full_network_default_widths() {
    for seed in [0, 1] {
        check(seed, (16, 24));
    }
}

#[test]
fn full_network_narrow() {
    for seed in 10..16 {
        check(seed, (3, 4));
    }
}
