//! The full zero-shot procedure for one image.
//!
//! 1. Pre-denoise the noisy image `y` to get the target `u`.
//! 2. Amplify the channels of `u` and inject synthetic noise repeatedly to build a fixed set of
//!    `sample_size` single-channel training inputs.
//! 3. Stage 1: `stage1_steps` Adam updates fitting `f(y) -> u`.
//! 4. Stage 2: `epochs` shuffled passes over the sample set fitting `f(sample) -> u`,
//!    one update per sample.
//! 5. Apply the network to `y` and clip to `[0, 1]`.
//!
//! Everything is driven by a single seed; repeated runs produce bit-identical output.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::net::{
    mse_loss, AdamConfig, AdamState, NetParams, Tensor4, DEFAULT_LEAKY_SLOPE, DEFAULT_WIDTHS,
};
use crate::noise::{
    amplify_channels, inject_channel, region_mask, NoiseConfig, RegionMask, RngStream,
};

const INIT_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub stage1_steps: usize,
    pub epochs: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub net_widths: (usize, usize),
    pub leaky_slope: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            stage1_steps: 5,
            epochs: 5,
            sample_size: 450,
            seed: 0,
            net_widths: DEFAULT_WIDTHS,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_steps < 1 || self.epochs < 1 || self.sample_size < 1 {
            return Err(Error::param(
                "stage1_steps, epochs and sample_size must all be at least 1",
            ));
        }
        if self.net_widths.0 < 1 || self.net_widths.1 < 1 {
            return Err(Error::param("network widths must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::param("leaky slope must lie in [0, 1)"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::param("adam betas must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Optimizer updates performed by a full run.
    pub fn total_steps(&self) -> usize {
        self.stage1_steps + self.epochs * self.sample_size
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// The fixed set of noise-injected training inputs.
///
/// Samples are regenerated on demand from their stream rather than stored: sample `i` is channel
/// `i % (lambda * C)` of injection event `i / (lambda * C)` applied to the amplified target, and
/// its training target is channel `(i % (lambda * C)) / lambda` of `u`.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    target: Image,
    amplified: Image,
    mask: RegionMask,
    noise: NoiseConfig,
    stream: RngStream,
    sample_size: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.sample_size
    }

    pub fn is_empty(&self) -> bool {
        self.sample_size == 0
    }

    /// The pre-denoised image `u`.
    pub fn target(&self) -> &Image {
        &self.target
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn samples_per_event(&self) -> usize {
        self.amplified.channels()
    }

    /// Injection events needed to produce `len()` samples.
    pub fn events(&self) -> usize {
        self.sample_size.div_ceil(self.samples_per_event())
    }

    /// Channel of `u` that sample `i` is trained against.
    pub fn target_channel(&self, i: usize) -> usize {
        (i % self.samples_per_event()) / self.noise.lambda_amp
    }

    /// Row-major plane of sample `i`.
    pub fn sample_plane(&self, i: usize) -> Result<Vec<f32>> {
        if i >= self.sample_size {
            return Err(Error::param(format!(
                "sample {i} out of range ({} samples)",
                self.sample_size
            )));
        }
        let per_event = self.samples_per_event();
        inject_channel(
            &self.amplified,
            i % per_event,
            &self.mask,
            &self.noise,
            self.stream.derive((i / per_event) as u64),
        )
    }

    pub fn sample(&self, i: usize) -> Result<Image> {
        let plane = self.sample_plane(i)?;
        Image::new(
            self.target.height(),
            self.target.width(),
            1,
            plane,
            self.target.depth(),
        )
    }

    /// All samples in order.
    pub fn materialize(&self) -> Result<Vec<Image>> {
        (0..self.sample_size).map(|i| self.sample(i)).collect()
    }
}

/// Pre-denoises `noisy` and prepares `sample_size` noise-injected samples of it.
pub fn build_training_set(
    noisy: &Image,
    noise: &NoiseConfig,
    sample_size: usize,
    rng: RngStream,
) -> Result<TrainingSet> {
    noise.validate()?;
    if sample_size < 1 {
        return Err(Error::param("sample_size must be at least 1"));
    }
    let target = noise.filter.apply(noisy)?;
    let amplified = amplify_channels(&target, noise.lambda_amp)?;
    let mask = region_mask(&amplified, noise.stride)?;
    Ok(TrainingSet {
        target,
        amplified,
        mask,
        noise: *noise,
        stream: rng,
        sample_size,
    })
}

/// Network, optimizer state and step counter for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: NetParams<f32>,
    pub adam: AdamState<f32>,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (c1, c2) = cfg.net_widths;
        let params = NetParams::init(
            RngStream::new(cfg.seed).derive(INIT_STREAM),
            c1,
            c2,
            cfg.leaky_slope,
        )?;
        let adam = AdamState::new(&params.tensor_lengths(), cfg.adam())?;
        Ok(Trainer { params, adam })
    }

    pub fn steps(&self) -> usize {
        self.adam.step_count as usize
    }

    /// One Adam update on a single `(input, target)` pair; returns the loss before the update.
    pub fn step(&mut self, input: &Tensor4<f32>, target: &Tensor4<f32>) -> Result<f64> {
        let (pred, cache) = self.params.forward(input)?;
        let (loss, grad) = mse_loss(&pred, target)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: self.steps(),
                loss,
            });
        }
        let grads = self.params.backward(&cache, &grad)?;
        let mut tensors = self.params.tensors_mut();
        self.adam.step(&mut tensors, &grads.as_slices())?;
        Ok(loss)
    }

    /// Network output for every channel of `img`, clipped to `[0, 1]`.
    pub fn apply(&self, img: &Image) -> Result<Image> {
        apply_network(&self.params, img)
    }
}

pub fn apply_network(params: &NetParams<f32>, img: &Image) -> Result<Image> {
    let planes = (0..img.channels())
        .map(|c| {
            let input = Tensor4::from_plane(img.height(), img.width(), &img.plane(c))?;
            Ok(params.predict(&input)?.data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(img.with_planes(planes))
}

fn channel_tensors(img: &Image) -> Result<Vec<Tensor4<f32>>> {
    (0..img.channels())
        .map(|c| Tensor4::from_plane(img.height(), img.width(), &img.plane(c)))
        .collect()
}

/// Stage 1: `stage1_steps` updates on `(y, u)`, cycling through channels. Returns the last loss.
pub fn train_stage1(
    trainer: &mut Trainer,
    noisy: &Image,
    target: &Image,
    cfg: &TrainConfig,
) -> Result<f64> {
    if !noisy.same_shape(target) {
        return Err(Error::mismatch("noisy image and target differ in shape"));
    }
    let inputs = channel_tensors(noisy)?;
    let targets = channel_tensors(target)?;
    let mut loss = f64::NAN;
    for s in 0..cfg.stage1_steps {
        let c = s % inputs.len();
        loss = trainer.step(&inputs[c], &targets[c])?;
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Report {
    pub final_loss: f64,
    /// Mean training loss of each epoch.
    pub epoch_mean_losses: Vec<f64>,
}

/// Stage 2: `epochs` passes over the sample set in a freshly shuffled order each epoch.
pub fn train_stage2(
    trainer: &mut Trainer,
    set: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<Stage2Report> {
    if set.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    let targets = channel_tensors(set.target())?;
    let (h, w) = (set.target().height(), set.target().width());
    let mut shuffle = RngStream::new(cfg.seed).derive(SHUFFLE_STREAM).rng();
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut report = Stage2Report {
        final_loss: f64::NAN,
        epoch_mean_losses: Vec::with_capacity(cfg.epochs),
    };
    for _ in 0..cfg.epochs {
        shuffle.shuffle(&mut order);
        let mut sum = 0.0;
        for &i in &order {
            let input = Tensor4::from_plane(h, w, &set.sample_plane(i)?)?;
            let loss = trainer.step(&input, &targets[set.target_channel(i)])?;
            sum += loss;
            report.final_loss = loss;
        }
        report.epoch_mean_losses.push(sum / order.len() as f64);
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub output: Image,
    /// The pre-denoised training target `u`.
    pub target: Image,
    pub params: NetParams<f32>,
    pub stage1_final_loss: f64,
    pub stage2_final_loss: f64,
    pub stage2_epoch_losses: Vec<f64>,
    pub wall_time: f64,
    pub steps_run: usize,
}

/// Runs the whole procedure on one noisy image.
pub fn denoise(noisy: &Image, noise: &NoiseConfig, cfg: &TrainConfig) -> Result<DenoiseResult> {
    let start = Instant::now();
    cfg.validate()?;
    let set = build_training_set(
        noisy,
        noise,
        cfg.sample_size,
        RngStream::new(cfg.seed).derive(SAMPLE_STREAM),
    )?;
    let mut trainer = Trainer::new(cfg)?;
    let stage1_final_loss = train_stage1(&mut trainer, noisy, set.target(), cfg)?;
    let stage2 = train_stage2(&mut trainer, &set, cfg)?;
    let output = trainer.apply(noisy)?;
    Ok(DenoiseResult {
        output,
        target: set.target().clone(),
        steps_run: trainer.steps(),
        params: trainer.params,
        stage1_final_loss,
        stage2_final_loss: stage2.final_loss,
        stage2_epoch_losses: stage2.epoch_mean_losses,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
