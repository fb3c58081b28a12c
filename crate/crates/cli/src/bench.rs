//! Batch denoising of a directory against clean references, reported as CSV.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fm2s::image::{load_image, quality, QualityReport};
use fm2s::noise::RngStream;
use fm2s::pipeline::denoise;
use rayon::prelude::*;

use crate::config::ProfileConfig;
use crate::error::CliError;

pub const CSV_HEADER: [&str; 6] = [
    "filename",
    "psnr_noisy",
    "ssim_noisy",
    "psnr_out",
    "ssim_out",
    "seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub filename: String,
    pub noisy: QualityReport,
    pub output: QualityReport,
    /// Wall-clock time, absent when timing is disabled.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Arithmetic means of every numeric column.
    pub fn means(&self) -> (QualityReport, QualityReport, Option<f64>) {
        let n = self.rows.len() as f64;
        let avg = |f: &dyn Fn(&BenchRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        let noisy = QualityReport {
            psnr: avg(&|r| r.noisy.psnr),
            ssim: avg(&|r| r.noisy.ssim),
        };
        let output = QualityReport {
            psnr: avg(&|r| r.output.psnr),
            ssim: avg(&|r| r.output.ssim),
        };
        let seconds = self
            .rows
            .iter()
            .map(|r| r.seconds)
            .sum::<Option<f64>>()
            .map(|s| s / n);
        (noisy, output, seconds)
    }

    /// One row per image followed by a `mean` row. Infinite PSNR is written as `inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record(record(&r.filename, &r.noisy, &r.output, r.seconds))?;
        }
        let (noisy, output, seconds) = self.means();
        out.write_record(record("mean", &noisy, &output, seconds))?;
        out.flush()?;
        Ok(())
    }
}

fn record(
    name: &str,
    noisy: &QualityReport,
    output: &QualityReport,
    seconds: Option<f64>,
) -> [String; 6] {
    [
        name.to_string(),
        metric(noisy.psnr),
        metric(noisy.ssim),
        metric(output.psnr),
        metric(output.ssim),
        seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
    ]
}

pub fn metric(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn image_names(dir: &Path) -> Result<BTreeSet<String>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let ext = Path::new(&name)
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if entry.path().is_file() && matches!(ext.as_deref(), Some("png" | "tif" | "tiff")) {
            names.insert(name);
        }
    }
    Ok(names)
}

/// Image filenames present in both directories, sorted. Any difference is an error.
pub fn matched_files(noisy_dir: &Path, clean_dir: &Path) -> Result<Vec<String>, CliError> {
    let noisy = image_names(noisy_dir)?;
    let clean = image_names(clean_dir)?;
    if noisy != clean {
        let only = |a: &BTreeSet<String>, b: &BTreeSet<String>| {
            a.difference(b).cloned().collect::<Vec<_>>().join(", ")
        };
        return Err(CliError::Config(format!(
            "file sets differ; only in {}: [{}]; only in {}: [{}]",
            noisy_dir.display(),
            only(&noisy, &clean),
            clean_dir.display(),
            only(&clean, &noisy)
        )));
    }
    if noisy.is_empty() {
        return Err(CliError::Config(format!(
            "no images found in {}",
            noisy_dir.display()
        )));
    }
    Ok(noisy.into_iter().collect())
}

/// Seed used for the image at `index` of the sorted file list.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    RngStream::new(seed).derive(index as u64).rng().next_u64()
}

fn bench_one(
    noisy_dir: &Path,
    clean_dir: &Path,
    name: &str,
    seed: u64,
    cfg: &ProfileConfig,
    timing: bool,
) -> Result<BenchRow, CliError> {
    let noisy = load_image(noisy_dir.join(name))?;
    let clean = load_image(clean_dir.join(name))?;
    let start = Instant::now();
    let train = fm2s::pipeline::TrainConfig { seed, ..cfg.train };
    let result = denoise(&noisy, &cfg.noise, &train)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchRow {
        filename: name.to_string(),
        noisy: quality(&noisy, &clean)?,
        output: quality(&result.output, &clean)?,
        seconds: timing.then_some(seconds),
    })
}

/// Denoises every matched image, up to `jobs` at a time.
pub fn run_bench(
    noisy_dir: &Path,
    clean_dir: &Path,
    cfg: &ProfileConfig,
    jobs: usize,
    timing: bool,
) -> Result<BenchReport, CliError> {
    let names = matched_files(noisy_dir, clean_dir)?;
    let run = |(i, name): (usize, &String)| {
        bench_one(
            noisy_dir,
            clean_dir,
            name,
            image_seed(cfg.train.seed, i),
            cfg,
            timing,
        )
    };
    let rows = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} jobs: {e}")))?;
        pool.install(|| {
            names
                .par_iter()
                .enumerate()
                .map(run)
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        names
            .iter()
            .enumerate()
            .map(run)
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(BenchReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, p: f64, s: f64, secs: Option<f64>) -> BenchRow {
        BenchRow {
            filename: name.into(),
            noisy: QualityReport { psnr: p, ssim: s },
            output: QualityReport {
                psnr: p + 2.0,
                ssim: s + 0.1,
            },
            seconds: secs,
        }
    }

    #[test]
    fn means_are_arithmetic() {
        let r = BenchReport {
            rows: vec![
                row("a", 20.0, 0.5, Some(1.0)),
                row("b", 30.0, 0.7, Some(3.0)),
            ],
        };
        let (n, o, s) = r.means();
        assert_eq!((n.psnr, o.psnr, s), (25.0, 27.0, Some(2.0)));
        assert!((n.ssim - 0.6).abs() < 1e-12);
        let r = BenchReport {
            rows: vec![row("a", 20.0, 0.5, None)],
        };
        assert_eq!(r.means().2, None);
    }

    #[test]
    fn csv_layout() {
        let r = BenchReport {
            rows: vec![
                row("x,1.png", f64::INFINITY, 1.0, None),
                row("y.png", 20.0, 0.5, None),
            ],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "filename,psnr_noisy,ssim_noisy,psnr_out,ssim_out,seconds"
        );
        assert_eq!(lines[1], "\"x,1.png\",inf,1.000000,inf,1.100000,");
        assert!(lines[3].starts_with("mean,inf,0.750000,inf,"));
    }

    #[test]
    fn seeds_differ_per_image() {
        assert_ne!(image_seed(7, 0), image_seed(7, 1));
        assert_eq!(image_seed(7, 3), image_seed(7, 3));
    }
}
