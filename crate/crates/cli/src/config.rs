//! Flat `key = value` configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value   # trailing comment
//! ```
//!
//! Blank lines are ignored and keys may not repeat within one file. Unset keys keep their
//! defaults. Recognized keys:
//!
//! | key            | meaning                                  |
//! |----------------|------------------------------------------|
//! | `lambda_amp`   | channel amplification factor             |
//! | `stride`       | region chunk side in pixels              |
//! | `filter`       | pre-denoise window size                  |
//! | `filter_kind`  | `median` or `gaussian`                   |
//! | `gaussian_sigma` | Gaussian filter sigma (default window/6) |
//! | `k_g`, `k_p`   | region Gaussian and Poisson factors      |
//! | `lambda_p`     | overall Poisson factor                   |
//! | `lr`, `beta1`, `beta2` | Adam settings                    |
//! | `stage1_steps`, `epochs`, `sample_size` | training schedule |
//! | `seed`         | master seed                              |
//! | `width1`, `width2` | hidden layer widths                  |
//! | `leaky_slope`  | LeakyReLU negative slope                 |

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use fm2s::noise::NoiseConfig;
use fm2s::pipeline::TrainConfig;
use fm2s::prefilter::FilterKind;

use crate::error::CliError;

pub const KEYS: &[&str] = &[
    "lambda_amp",
    "stride",
    "filter",
    "filter_kind",
    "gaussian_sigma",
    "k_g",
    "k_p",
    "lambda_p",
    "lr",
    "beta1",
    "beta2",
    "stage1_steps",
    "epochs",
    "sample_size",
    "seed",
    "width1",
    "width2",
    "leaky_slope",
];

macro_rules! profile {
    ($name:literal) => {
        ($name, include_str!(concat!("../profiles/", $name, ".cfg")))
    };
}

/// Shipped profiles, by name.
pub const PROFILES: &[(&str, &str)] = &[
    profile!("confocal_avg1"),
    profile!("confocal_avg2"),
    profile!("confocal_avg4"),
    profile!("confocal_avg8"),
    profile!("confocal_avg16"),
    profile!("twophoton_avg1"),
    profile!("twophoton_avg2"),
    profile!("twophoton_avg4"),
    profile!("twophoton_avg8"),
    profile!("twophoton_avg16"),
    profile!("widefield_avg1"),
    profile!("widefield_avg2"),
    profile!("widefield_avg4"),
    profile!("widefield_avg8"),
    profile!("widefield_avg16"),
    profile!("srdtrans"),
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileConfig {
    pub noise: NoiseConfig,
    pub train: TrainConfig,
}

impl ProfileConfig {
    pub fn builtin(name: &str) -> Result<Self, CliError> {
        let (_, text) = PROFILES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = PROFILES.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown profile '{name}' (known: {})",
                known.join(", ")
            ))
        })?;
        Self::parse(text).map_err(|e| CliError::Config(format!("profile {name}: {e}")))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ProfileConfig::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value'", n + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
            cfg.set(key, value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects key=value, got '{assignment}'"))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let n = &mut self.noise;
        let t = &mut self.train;
        match key {
            "lambda_amp" => n.lambda_amp = parse(key, value)?,
            "stride" => n.stride = parse(key, value)?,
            "filter" => n.filter.window = parse(key, value)?,
            "filter_kind" => {
                n.filter.kind = match value {
                    "median" => FilterKind::Median,
                    "gaussian" => FilterKind::Gaussian,
                    _ => {
                        return Err(CliError::Config(format!(
                            "filter_kind must be 'median' or 'gaussian', got '{value}'"
                        )))
                    }
                }
            }
            "gaussian_sigma" => n.filter.gaussian_sigma = Some(parse(key, value)?),
            "k_g" => n.k_g = parse(key, value)?,
            "k_p" => n.k_p = parse(key, value)?,
            "lambda_p" => n.lambda_p = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "stage1_steps" => t.stage1_steps = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "sample_size" => t.sample_size = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "width1" => t.net_widths.0 = parse(key, value)?,
            "width2" => t.net_widths.1 = parse(key, value)?,
            "leaky_slope" => t.leaky_slope = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.noise
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Every key, in the order of [`KEYS`].
    pub fn serialize(&self) -> String {
        let n = &self.noise;
        let t = &self.train;
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("lambda_amp", &n.lambda_amp);
        put("stride", &n.stride);
        put("filter", &n.filter.window);
        put(
            "filter_kind",
            &match n.filter.kind {
                FilterKind::Median => "median",
                FilterKind::Gaussian => "gaussian",
            },
        );
        if let Some(s) = n.filter.gaussian_sigma {
            put("gaussian_sigma", &s);
        }
        put("k_g", &n.k_g);
        put("k_p", &n.k_p);
        put("lambda_p", &n.lambda_p);
        put("lr", &t.lr);
        put("beta1", &t.beta1);
        put("beta2", &t.beta2);
        put("stage1_steps", &t.stage1_steps);
        put("epochs", &t.epochs);
        put("sample_size", &t.sample_size);
        put("seed", &t.seed);
        put("width1", &t.net_widths.0);
        put("width2", &t.net_widths.1);
        put("leaky_slope", &t.leaky_slope);
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value '{value}' for {key}")))
}

/// Resolves the effective configuration from a profile name or config file plus overrides.
pub fn resolve(
    profile: Option<&str>,
    config_text: Option<&str>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<ProfileConfig, CliError> {
    let mut cfg = match (profile, config_text) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--profile and --config are mutually exclusive".into(),
            ))
        }
        (Some(name), None) => ProfileConfig::builtin(name)?,
        (None, Some(text)) => ProfileConfig::parse(text)?,
        (None, None) => ProfileConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fm2s::prefilter::FilterSpec;

    // (profile, lambda, stride, filter, k_g, k_p, lambda_p) for every shipped profile.
    const GOLDEN: &[(&str, usize, usize, usize, f64, f64, f64)] = &[
        ("confocal_avg1", 2, 75, 3, 200.0, 30.0, 70.0),
        ("confocal_avg2", 2, 75, 3, 125.0, 95.0, 285.0),
        ("confocal_avg4", 2, 75, 3, 70.0, 195.0, 485.0),
        ("confocal_avg8", 2, 75, 3, 10.0, 240.0, 650.0),
        ("confocal_avg16", 2, 75, 3, 5.0, 650.0, 1400.0),
        ("twophoton_avg1", 2, 75, 3, 175.0, 30.0, 60.0),
        ("twophoton_avg2", 2, 75, 3, 150.0, 85.0, 300.0),
        ("twophoton_avg4", 2, 75, 3, 90.0, 300.0, 480.0),
        ("twophoton_avg8", 2, 75, 3, 20.0, 185.0, 600.0),
        ("twophoton_avg16", 2, 75, 3, 15.0, 850.0, 3800.0),
        ("widefield_avg1", 1, 75, 11, 220.0, 45.0, 2000.0),
        ("widefield_avg2", 1, 75, 11, 220.0, 100.0, 2500.0),
        ("widefield_avg4", 1, 75, 11, 60.0, 650.0, 3500.0),
        ("widefield_avg8", 1, 75, 11, 20.0, 600.0, 4000.0),
        ("widefield_avg16", 1, 75, 11, 1.0, 1500.0, 4800.0),
        ("srdtrans", 5, 5, 3, 60.0, 30.0, 150.0),
    ];

    #[test]
    fn shipped_profiles_match_tables() {
        assert_eq!(GOLDEN.len(), PROFILES.len());
        for &(name, lambda, stride, filter, k_g, k_p, lambda_p) in GOLDEN {
            let p = ProfileConfig::builtin(name).unwrap();
            let n = &p.noise;
            assert_eq!(
                (
                    n.lambda_amp,
                    n.stride,
                    n.filter.window,
                    n.k_g,
                    n.k_p,
                    n.lambda_p
                ),
                (lambda, stride, filter, k_g, k_p, lambda_p),
                "{name}"
            );
            assert_eq!(n.filter.kind, FilterKind::Median);
            assert_eq!(p.train, TrainConfig::default());
            p.validate().unwrap();
        }
    }

    #[test]
    fn round_trip_all_profiles() {
        for (name, _) in PROFILES {
            let p = ProfileConfig::builtin(name).unwrap();
            assert_eq!(ProfileConfig::parse(&p.serialize()).unwrap(), p, "{name}");
        }
        let mut odd = ProfileConfig::default();
        odd.noise.filter = FilterSpec {
            gaussian_sigma: Some(0.7),
            ..FilterSpec::gaussian(5)
        };
        odd.train.lr = 3.3e-4;
        odd.train.seed = u64::MAX;
        assert_eq!(ProfileConfig::parse(&odd.serialize()).unwrap(), odd);
    }

    #[test]
    fn grammar() {
        let p = ProfileConfig::parse("# header\n\n  k_g = 12.5  # inline\nepochs=2\n").unwrap();
        assert_eq!(p.noise.k_g, 12.5);
        assert_eq!(p.train.epochs, 2);
        assert!(ProfileConfig::parse("k_g 12").is_err());
        assert!(ProfileConfig::parse("nope = 1").is_err());
        assert!(ProfileConfig::parse("k_g = abc").is_err());
        assert!(ProfileConfig::parse("k_g = 1\nk_g = 2").is_err());
        assert!(ProfileConfig::parse("filter_kind = box").is_err());
    }

    #[test]
    fn resolution_order() {
        let p = resolve(
            Some("confocal_avg1"),
            None,
            &["k_g=1".into(), "epochs = 3".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(
            (p.noise.k_g, p.noise.k_p, p.train.epochs, p.train.seed),
            (1.0, 30.0, 3, 9)
        );
        assert!(matches!(
            resolve(Some("confocal_avg3"), None, &[], None),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            resolve(Some("srdtrans"), Some(""), &[], None),
            Err(CliError::Usage(_))
        ));
        assert!(resolve(None, None, &["stride=0".into()], None).is_err());
        assert_eq!(
            resolve(None, None, &[], None).unwrap(),
            ProfileConfig::default()
        );
    }

    #[test]
    fn serialized_keys_are_known() {
        let mut p = ProfileConfig::default();
        p.noise.filter.gaussian_sigma = Some(1.0);
        let text = p.serialize();
        let keys: Vec<&str> = text
            .lines()
            .map(|l| l.split(" = ").next().unwrap())
            .collect();
        assert_eq!(keys, KEYS);
    }
}
