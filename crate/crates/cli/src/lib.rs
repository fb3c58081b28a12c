//! Command-line front end: `denoise`, `bench` and `inject` subcommands, configuration profiles
//! and the CSV benchmark report.

pub mod bench;
pub mod config;
pub mod error;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fm2s::image::{load_image, save_image};
use fm2s::net::write_snapshot;
use fm2s::noise::{inject, RngStream};
use fm2s::pipeline::denoise;

pub use config::ProfileConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fm2s",
    version,
    about = "Zero-shot fluorescence microscopy denoising"
)]
pub struct Cli {
    /// Worker threads for the numeric kernels (defaults to all cores).
    #[arg(long, global = true, env = "FM2S_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Denoise a directory of images and score them against clean references.
    Bench(BenchArgs),
    /// Write the pre-denoised input after one synthetic noise injection.
    Inject(InjectArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Shipped profile, e.g. confocal_avg1 or srdtrans.
    #[arg(long, conflicts_with = "config")]
    pub profile: Option<String>,
    /// Configuration file in `key = value` form.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set epochs=3`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the pre-denoised training target.
    #[arg(long)]
    pub dump_target: Option<PathBuf>,
    /// Also write the trained network weights.
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub noisy_dir: PathBuf,
    #[arg(long)]
    pub clean_dir: PathBuf,
    /// CSV report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Images denoised concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Leave the `seconds` column empty so reports are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ProfileConfig, CliError> {
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        config::resolve(
            self.profile.as_deref(),
            text.as_deref(),
            &self.overrides,
            self.seed,
        )
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case the existing one is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Denoise(a) => cmd_denoise(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Inject(a) => cmd_inject(&a),
    }
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<(), CliError> {
    let cfg = a.config.resolve()?;
    let noisy = load_image(&a.input)?;
    let result = denoise(&noisy, &cfg.noise, &cfg.train)?;
    save_image(&result.output, &a.output)?;
    if let Some(p) = &a.dump_target {
        save_image(&result.target, p)?;
    }
    if let Some(p) = &a.save_weights {
        let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        write_snapshot(&result.params, BufWriter::new(f))?;
    }
    println!(
        "stage1_loss={:.6e} stage2_loss={:.6e} steps={} seconds={:.2}",
        result.stage1_final_loss, result.stage2_final_loss, result.steps_run, result.wall_time
    );
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let cfg = a.config.resolve()?;
    let report = bench::run_bench(&a.noisy_dir, &a.clean_dir, &cfg, a.jobs, !a.no_timing)?;
    write_report(&report, &a.out)?;
    let (noisy, out, _) = report.means();
    println!(
        "{} images: psnr {} -> {}, ssim {} -> {}",
        report.rows.len(),
        bench::metric(noisy.psnr),
        bench::metric(out.psnr),
        bench::metric(noisy.ssim),
        bench::metric(out.ssim)
    );
    Ok(())
}

fn write_report(report: &bench::BenchReport, path: &Path) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    report
        .write_csv(BufWriter::new(f))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_inject(a: &InjectArgs) -> Result<(), CliError> {
    let cfg = a.config.resolve()?;
    let img = load_image(&a.input)?;
    let u = cfg.noise.filter.apply(&img)?;
    let out = inject(&u, &cfg.noise, RngStream::new(cfg.train.seed))?;
    save_image(&out, &a.output)?;
    Ok(())
}
