use fm2s::net::{AdamConfig, AdamState};

// f(theta) = a/2 (theta - c)^2, written out long-hand with running powers of beta.
fn reference(theta0: f64, a: f64, c: f64, steps: usize) -> Vec<f64> {
    let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
    let (mut m, mut v, mut b1t, mut b2t) = (0.0, 0.0, 1.0, 1.0);
    let mut theta = theta0;
    let mut out = Vec::new();
    for _ in 0..steps {
        let g = a * (theta - c);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        b1t *= b1;
        b2t *= b2;
        theta -= lr * (m / (1.0 - b1t)) / ((v / (1.0 - b2t)).sqrt() + eps);
        out.push(theta);
    }
    out
}

#[test]
fn quadratic_trajectory_matches_reference() {
    for (theta0, a, c) in [(1.0, 2.0, -0.5), (-3.0, 0.1, 0.0), (0.2, 50.0, 0.21)] {
        let want = reference(theta0, a, c, 100);
        let mut theta = [theta0];
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::default()).unwrap();
        for w in want {
            let g = [a * (theta[0] - c)];
            adam.step(&mut [&mut theta[..]], &[&g[..]]).unwrap();
            assert!((theta[0] - w).abs() <= 1e-6, "{} vs {w}", theta[0]);
        }
        assert_eq!(adam.step_count, 100);
    }
}

#[test]
fn first_step_from_one() {
    let mut theta = [1.0f32];
    let mut adam = AdamState::<f32>::new(&[1], AdamConfig::default()).unwrap();
    adam.step(&mut [&mut theta[..]], &[&[1.0f32][..]]).unwrap();
    assert!((theta[0] - 0.999).abs() < 1e-6);
}
