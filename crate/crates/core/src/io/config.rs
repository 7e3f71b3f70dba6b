//! Flat `key = value` experiment configuration with `#` comments.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::channel::{ChannelConfig, PowerReference};
use crate::model::{NetworkSpec, Variant, DEFAULT_BITS, DEFAULT_FILTERS};
use crate::train::{AdamConfig, TrainConfig};

/// Code sizes allowed by the replication presets at `K = 9`.
pub const PRESET_CODE_SIZES: [usize; 4] = [2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    /// 1-based line number, 0 for whole-file checks.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn whole(message: impl Into<String>) -> Self {
        Self { line: 0, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Train (or load) one model and evaluate it.
    Single,
    /// Variants a–f at every code size in the grid.
    Table1,
    /// PSCDN over the code-size grid times the SNR grid.
    Fig3Pscdn,
    /// Parameter count and median inference time.
    Table2Pscdn,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Single => "single",
            Preset::Table1 => "table1",
            Preset::Fig3Pscdn => "fig3-pscdn",
            Preset::Table2Pscdn => "table2-pscdn",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Preset::Single, Preset::Table1, Preset::Fig3Pscdn, Preset::Table2Pscdn]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset {s:?}"))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub model: Variant,
    pub k: usize,
    pub c: usize,
    pub n: usize,
    pub train: TrainConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// Independent training runs per grid cell; the median is reported.
    pub runs: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub snr_grid: Vec<f64>,
    pub code_sizes: Vec<usize>,
    pub timing_repetitions: usize,
    /// Load these weights instead of training.
    pub weights: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Single,
            model: Variant::Pscdn,
            k: DEFAULT_BITS,
            c: 2,
            n: DEFAULT_FILTERS,
            train: TrainConfig::default(),
            train_size: 100_000,
            val_size: 30_000,
            test_size: 100_000,
            runs: 1,
            output_dir: PathBuf::from("out"),
            seed: 0,
            snr_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            code_sizes: PRESET_CODE_SIZES.to_vec(),
            timing_repetitions: 5,
            weights: None,
            train_data: None,
            val_data: None,
            test_data: None,
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, String>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("bad value {value:?} for {key}: {e}"))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, String>
where
    V::Err: fmt::Display,
{
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn join<V: fmt::Display>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults. Unknown and repeated keys
    /// are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key}")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let path = || Some(PathBuf::from(value)).filter(|_| !value.is_empty());
        match key {
            "preset" => self.preset = value.parse()?,
            "model" => self.model = value.parse().map_err(|e| format!("{e}"))?,
            "k" => self.k = parse_value(key, value)?,
            "c" => self.c = parse_value(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "epochs" => self.train.epochs = parse_value(key, value)?,
            "batch_size" => self.train.batch_size = parse_value(key, value)?,
            "lr0" => self.train.lr0 = parse_value(key, value)?,
            "decay_rate" => self.train.decay_rate = parse_value(key, value)?,
            "decay_steps" => self.train.decay_steps = parse_value(key, value)?,
            "train_snr_db" => self.train.channel.snr_db = parse_value(key, value)?,
            "channel_gain" => self.train.channel.gain = parse_value(key, value)?,
            "power_reference" => {
                self.train.channel.power = match value {
                    "unit" => PowerReference::Unit,
                    "empirical" => PowerReference::BatchEmpirical,
                    _ => return Err(format!("power_reference must be unit or empirical, got {value:?}")),
                }
            }
            "adam_beta1" => self.train.adam.beta1 = parse_value(key, value)?,
            "adam_beta2" => self.train.adam.beta2 = parse_value(key, value)?,
            "adam_eps" => self.train.adam.eps = parse_value(key, value)?,
            "train_size" => self.train_size = parse_value(key, value)?,
            "val_size" => self.val_size = parse_value(key, value)?,
            "test_size" => self.test_size = parse_value(key, value)?,
            "runs" => self.runs = parse_value(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_value(key, value)?,
            "snr_grid" => self.snr_grid = parse_list(key, value)?,
            "code_sizes" => self.code_sizes = parse_list(key, value)?,
            "timing_repetitions" => self.timing_repetitions = parse_value(key, value)?,
            "weights" => self.weights = path(),
            "train_data" => self.train_data = path(),
            "val_data" => self.val_data = path(),
            "test_data" => self.test_data = path(),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Checks cross-field constraints and that referenced files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = self.network_spec()?;
        self.train.validate(&spec).map_err(|e| ConfigError::whole(e.to_string()))?;
        if self.train.channel.snr_db.is_nan() || !self.train.channel.gain.is_finite() {
            return Err(ConfigError::whole("train_snr_db and channel_gain must be numbers"));
        }
        if self.val_size == 0 || self.test_size == 0 || (self.train_size == 0 && self.weights.is_none()) {
            return Err(ConfigError::whole("dataset sizes must be positive"));
        }
        if self.runs == 0 {
            return Err(ConfigError::whole("runs must be at least 1"));
        }
        if self.timing_repetitions < 3 {
            return Err(ConfigError::whole("timing_repetitions must be at least 3"));
        }
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|s| s.is_nan()) {
            return Err(ConfigError::whole("snr_grid must list at least one SNR"));
        }
        if self.preset != Preset::Single {
            if self.k != DEFAULT_BITS {
                return Err(ConfigError::whole(format!("preset {} requires k = {DEFAULT_BITS}", self.preset)));
            }
            let sizes = if self.preset == Preset::Table2Pscdn { std::slice::from_ref(&self.c) } else { &self.code_sizes };
            if sizes.is_empty() || sizes.iter().any(|c| !PRESET_CODE_SIZES.contains(c)) {
                return Err(ConfigError::whole(format!(
                    "preset {} needs code sizes within {:?}",
                    self.preset, PRESET_CODE_SIZES
                )));
            }
        }
        for path in [&self.weights, &self.train_data, &self.val_data, &self.test_data].into_iter().flatten() {
            if !path.is_file() {
                return Err(ConfigError::whole(format!("referenced file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn network_spec(&self) -> Result<NetworkSpec, ConfigError> {
        NetworkSpec::build(self.model, self.k, self.n, self.c).map_err(|e| ConfigError::whole(e.to_string()))
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let power = match t.channel.power {
            PowerReference::Unit => "unit",
            PowerReference::BatchEmpirical => "empirical",
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("preset", self.preset.to_string());
        kv("model", self.model.name().to_string());
        kv("k", self.k.to_string());
        kv("c", self.c.to_string());
        kv("n", self.n.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("lr0", t.lr0.to_string());
        kv("decay_rate", t.decay_rate.to_string());
        kv("decay_steps", t.decay_steps.to_string());
        kv("train_snr_db", t.channel.snr_db.to_string());
        kv("channel_gain", t.channel.gain.to_string());
        kv("power_reference", power.to_string());
        kv("adam_beta1", t.adam.beta1.to_string());
        kv("adam_beta2", t.adam.beta2.to_string());
        kv("adam_eps", t.adam.eps.to_string());
        kv("train_size", self.train_size.to_string());
        kv("val_size", self.val_size.to_string());
        kv("test_size", self.test_size.to_string());
        kv("runs", self.runs.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("snr_grid", join(&self.snr_grid));
        kv("code_sizes", join(&self.code_sizes));
        kv("timing_repetitions", self.timing_repetitions.to_string());
        kv("weights", path(&self.weights));
        kv("train_data", path(&self.train_data));
        kv("val_data", path(&self.val_data));
        kv("test_data", path(&self.test_data));
        out
    }

    /// Training configuration for run `run` (0-based); runs differ only in seed.
    pub fn train_config(&self, run: usize) -> TrainConfig {
        TrainConfig { seed: self.seed.wrapping_add(run as u64), ..self.train.clone() }
    }

    /// Evaluation channel at `snr_db`, otherwise identical to training.
    pub fn channel_at(&self, snr_db: f64) -> ChannelConfig {
        ChannelConfig { snr_db, ..self.train.channel }
    }

    pub fn adam(&self) -> AdamConfig {
        self.train.adam
    }
}
