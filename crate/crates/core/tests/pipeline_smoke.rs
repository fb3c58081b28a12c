use fm2s::image::{psnr, Image};
use fm2s::noise::{NoiseConfig, RngStream};
use fm2s::pipeline::{
    build_training_set, denoise, train_stage1, train_stage2, TrainConfig, Trainer,
};
use fm2s::prefilter::median_filter;

fn scene(h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |y, x| {
        let d2 = (y as f32 - 14.0).powi(2) + (x as f32 - 20.0).powi(2);
        0.05 + 0.5 * (-d2 / 60.0).exp() + if x > 28 { 0.1 } else { 0.0 }
    })
    .unwrap()
}

fn vanishing() -> NoiseConfig {
    NoiseConfig {
        k_g: 0.0,
        k_p: 1e9,
        lambda_p: 1e9,
        stride: 8,
        ..NoiseConfig::default()
    }
}

#[test]
fn constant_image_is_reproduced() {
    let img = Image::constant(32, 32, 0.4).unwrap();
    let cfg = TrainConfig {
        sample_size: 60,
        seed: 1,
        ..TrainConfig::default()
    };
    let r = denoise(&img, &NoiseConfig::default(), &cfg).unwrap();
    assert_eq!(r.steps_run, 5 + 5 * 60);
    let p = psnr(&r.output, &img).unwrap();
    assert!(p.is_finite() && p > 30.0, "psnr {p}");
}

#[test]
fn stage1_loss_does_not_increase() {
    let noisy = scene(32, 40);
    let u = median_filter(&noisy, 3).unwrap();
    let one = TrainConfig {
        stage1_steps: 1,
        seed: 4,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(&one).unwrap();
    let first = train_stage1(&mut t, &noisy, &u, &one).unwrap();
    let mut t = Trainer::new(&one).unwrap();
    let five = TrainConfig {
        stage1_steps: 5,
        ..one
    };
    let last = train_stage1(&mut t, &noisy, &u, &five).unwrap();
    assert!(first > 0.0);
    assert!(last <= first, "{last} > {first}");
}

#[test]
fn vanishing_noise_training_reduces_loss() {
    let img = scene(32, 40);
    let cfg = TrainConfig {
        epochs: 4,
        sample_size: 30,
        seed: 2,
        ..TrainConfig::default()
    };
    let set = build_training_set(&img, &vanishing(), cfg.sample_size, RngStream::new(8)).unwrap();
    let mut t = Trainer::new(&cfg).unwrap();
    let report = train_stage2(&mut t, &set, &cfg).unwrap();
    assert_eq!(t.steps(), 4 * 30);
    let l = &report.epoch_mean_losses;
    assert!(l[3] < l[0], "{l:?}");
    assert!(report.final_loss < l[0]);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let img = scene(24, 24);
    let cfg = TrainConfig {
        epochs: 2,
        sample_size: 10,
        seed: 77,
        ..TrainConfig::default()
    };
    let noise = NoiseConfig {
        stride: 12,
        ..NoiseConfig::default()
    };
    let a = denoise(&img, &noise, &cfg).unwrap();
    let b = denoise(&img, &noise, &cfg).unwrap();
    assert_eq!(a.output.data(), b.output.data());
    assert_eq!(a.stage2_epoch_losses, b.stage2_epoch_losses);
    let c = denoise(&img, &noise, &TrainConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.output.data(), c.output.data());
}

#[test]
fn multi_channel_output_matches_shape() {
    let stack = Image::from_planes(&[scene(20, 20), scene(20, 20)]).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        sample_size: 8,
        ..TrainConfig::default()
    };
    let noise = NoiseConfig {
        lambda_amp: 2,
        stride: 5,
        ..NoiseConfig::default()
    };
    let r = denoise(&stack, &noise, &cfg).unwrap();
    assert!(r.output.same_shape(&stack));
    assert_eq!(r.steps_run, 5 + 8);
}

#[test]
fn thread_count_does_not_change_output() {
    let img = Image::from_fn(64, 72, |y, x| 0.1 + 0.4 * (((y / 9) + (x / 7)) % 2) as f32).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        sample_size: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let noise = NoiseConfig {
        stride: 16,
        ..NoiseConfig::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| denoise(&img, &noise, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.output.data(), b.output.data());
    assert_eq!(a.params, b.params);
}
