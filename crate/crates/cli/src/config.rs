//! Flat `key = value` experiment configuration.
//!
//! Command-line flags override file values; unknown keys are rejected so a
//! typo cannot silently fall back to a default. `#`-prefixed lines and blank
//! lines are comments.

use std::fmt;
use std::path::{Path, PathBuf};

use triboot::model::TrainConfig;
use triboot::ssl::{PoolScheme, SslConfig, Strategy, VoteRule};

use crate::CliError;

/// Everything one experiment needs: data source, splits, strategy, seeds,
/// and the bootstrapping/training settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source_domain: String,
    pub target_domain: String,
    pub source_path: Option<PathBuf>,
    pub target_path: Option<PathBuf>,
    pub synthetic: bool,
    pub synth_n_source: usize,
    pub synth_n_target: usize,
    pub synth_rotation_degrees: f64,
    pub synth_noise_sigma: f64,
    pub strategy: Strategy,
    pub n_seeds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub n_labeled_source: usize,
    pub n_unlabeled_target: usize,
    pub n_validation_target: usize,
    pub max_features: usize,
    pub tau: f64,
    pub throttle_n: usize,
    pub outer_epochs: usize,
    pub pool_scheme: PoolScheme,
    pub vote: VoteRule,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub init_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let ssl = SslConfig::default();
        ExperimentConfig {
            source_domain: "source".into(),
            target_domain: "target".into(),
            source_path: None,
            target_path: None,
            synthetic: false,
            synth_n_source: 200,
            synth_n_target: 1700,
            synth_rotation_degrees: 30.0,
            synth_noise_sigma: 0.3,
            strategy: Strategy::SrcOnly,
            n_seeds: 10,
            seed: 100,
            out_dir: PathBuf::from("runs"),
            jobs: 1,
            n_labeled_source: 2000,
            n_unlabeled_target: 2000,
            n_validation_target: 200,
            max_features: 5000,
            tau: ssl.tau,
            throttle_n: ssl.throttle_n,
            outer_epochs: ssl.outer_epochs,
            pool_scheme: ssl.pool_scheme,
            vote: ssl.vote,
            learning_rate: train.learning_rate,
            max_epochs: train.max_epochs,
            patience: train.patience,
            batch_size: train.batch_size,
            gamma: train.gamma,
            init_scale: train.init_scale,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_pool(v: &str) -> Result<PoolScheme, String> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["fixed", k] => k
            .parse()
            .map(PoolScheme::Fixed)
            .map_err(|_| format!("bad pool size {k:?}")),
        ["linear", base, rate] => {
            let base = base.parse().map_err(|_| format!("bad pool base {base:?}"))?;
            let rate = rate.parse().map_err(|_| format!("bad pool rate {rate:?}"))?;
            Ok(PoolScheme::LinearGrowth { base, rate })
        }
        _ => Err(format!("expected fixed:<n> or linear:<base>:<rate>, got {v:?}")),
    }
}

fn parse_vote(v: &str) -> Result<VoteRule, String> {
    match v {
        "majority" => Ok(VoteRule::Majority),
        "head3" => Ok(VoteRule::Head3),
        _ => Err(format!("expected majority or head3, got {v:?}")),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::input(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|msg| {
                CliError::input(format!("{}:{}: {msg}", path.display(), lineno + 1))
            })?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        macro_rules! num {
            () => {
                value.parse().map_err(|_| format!("bad value {value:?} for {key}"))?
            };
        }
        match key {
            "source_domain" => self.source_domain = value.to_string(),
            "target_domain" => self.target_domain = value.to_string(),
            "source_path" => self.source_path = Some(PathBuf::from(value)),
            "target_path" => self.target_path = Some(PathBuf::from(value)),
            "synthetic" => self.synthetic = parse_bool(value)?,
            "synth_n_source" => self.synth_n_source = num!(),
            "synth_n_target" => self.synth_n_target = num!(),
            "synth_rotation_degrees" => self.synth_rotation_degrees = num!(),
            "synth_noise_sigma" => self.synth_noise_sigma = num!(),
            "strategy" => {
                self.strategy = value.parse().map_err(|e| format!("{e}"))?;
            }
            "n_seeds" => self.n_seeds = num!(),
            "seed" => self.seed = num!(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "jobs" => self.jobs = num!(),
            "n_labeled_source" => self.n_labeled_source = num!(),
            "n_unlabeled_target" => self.n_unlabeled_target = num!(),
            "n_validation_target" => self.n_validation_target = num!(),
            "max_features" => self.max_features = num!(),
            "tau" => self.tau = num!(),
            "throttle_n" => self.throttle_n = num!(),
            "outer_epochs" => self.outer_epochs = num!(),
            "pool_scheme" => self.pool_scheme = parse_pool(value)?,
            "vote" => self.vote = parse_vote(value)?,
            "learning_rate" => self.learning_rate = num!(),
            "max_epochs" => self.max_epochs = num!(),
            "patience" => self.patience = num!(),
            "batch_size" => self.batch_size = num!(),
            "gamma" => self.gamma = num!(),
            "init_scale" => self.init_scale = num!(),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_seeds == 0 {
            return Err(CliError::input("n_seeds must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(CliError::input("jobs must be at least 1"));
        }
        if !self.synthetic && (self.source_path.is_none() || self.target_path.is_none()) {
            return Err(CliError::input(
                "source_path and target_path are required unless synthetic = true",
            ));
        }
        self.ssl_config(self.seed)
            .validate()
            .map_err(|e| CliError::input(format!("invalid configuration: {e}")))
    }

    /// Bootstrapping settings for one seed.
    pub fn ssl_config(&self, seed: u64) -> SslConfig {
        SslConfig {
            tau: self.tau,
            throttle_n: self.throttle_n,
            outer_epochs: self.outer_epochs,
            pool_scheme: self.pool_scheme,
            vote: self.vote,
            seed,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                max_epochs: self.max_epochs,
                patience: self.patience,
                batch_size: self.batch_size,
                gamma: self.gamma,
                seed,
                init_scale: self.init_scale,
            },
            capture_trace: false,
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} [{}], {} seeds from {}",
            self.source_domain,
            self.target_domain,
            self.strategy,
            self.n_seeds,
            self.seed
        )
    }
}
