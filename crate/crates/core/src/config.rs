//! Flat `section.key = value` configuration.
//!
//! Values are layered: built-in defaults, then a config file, then
//! environment variables (`EDGESPIKE_` followed by the key in upper case with
//! dots as underscores, e.g. `EDGESPIKE_TRAINER_EPOCHS`), then command-line
//! flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adapt::{AdaptConfig, AdaptMode};
use crate::encoding::{EncoderConfig, Scheme};
use crate::error::{Error, Result};
use crate::hardware::{ChipModel, MapperConfig};
use crate::io::read_text;
use crate::seed::derive;
use crate::snn::{NeuronParams, ResetMode};
use crate::training::{GradMode, TrainConfig};

pub const ENV_PREFIX: &str = "EDGESPIKE_";

/// Every key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "global seed; every module seed is derived from it"),
    ("chip", "desk16", "chip preset (loihi2-like, truenorth-like, desk16) or chip file path"),
    ("out", "out", "output directory"),
    ("data.train", "", "training dataset (text or packed binary)"),
    ("data.test", "", "test dataset; falls back to a split of data.train"),
    ("data.test_fraction", "0.25", "share of data.train held out when data.test is unset"),
    ("network.preset", "desk-mlp", "network shape for training (desk-mlp, desk-cnn)"),
    ("network.path", "", "trained network file for map and run"),
    ("network.mapping", "", "mapping file for run; computed when unset"),
    ("network.beta", "0.9", "membrane leak factor"),
    ("network.v_th", "1", "firing threshold"),
    ("network.v_reset", "0", "reset potential for hard reset"),
    ("network.reset", "subtract", "reset mode (subtract, hard)"),
    ("encoder.scheme", "hybrid", "spike encoding (rate, latency, hybrid)"),
    ("encoder.timesteps", "20", "simulation horizon T"),
    ("encoder.alpha", "0.5", "hybrid threshold modulation"),
    ("encoder.v_th_base", "1", "hybrid encoder threshold"),
    ("trainer.epochs", "20", "training epochs"),
    ("trainer.batch_size", "16", "minibatch size"),
    ("trainer.learning_rate", "0.003", "SGD step size"),
    ("trainer.lambda_hw", "0", "weight of the mapping cost in the total loss"),
    ("trainer.surrogate_width", "0.5", "boxcar half-width in threshold units"),
    ("trainer.grad_mode", "hard_forward", "hard_forward or smooth_forward"),
    ("trainer.steepness", "auto", "sigmoid slope for smooth_forward"),
    ("trainer.init_gain", "1", "initial weight scale times 1/sqrt(fan_in)"),
    ("mapper.beta1", "1", "weight of the core-count term"),
    ("mapper.beta2", "1", "weight of the inter-core traffic term"),
    ("mapper.beta3", "1", "weight of the synaptic memory term"),
    ("mapper.max_iters", "50", "local search passes"),
    ("mapper.exact_limit", "12", "exhaustive search up to this many neurons"),
    ("adapt.enabled", "off", "runtime threshold adaptation (on, off)"),
    ("adapt.a_target", "0.05", "target spikes per neuron per step"),
    ("adapt.gamma", "0.1", "adaptation gain"),
    ("adapt.th_min", "0.5", "lower threshold clamp, times the base threshold"),
    ("adapt.th_max", "2", "upper threshold clamp, times the base threshold"),
    ("adapt.window", "1", "steps averaged into the activity estimate"),
    ("adapt.mode", "gating", "gating or homeostatic"),
    ("run.timing", "off", "record wall-clock stage latencies (on, off)"),
    ("run.activity_csv", "off", "write the adaptation trajectory CSV (on, off)"),
];

/// Key-value settings with provenance-free layering.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

pub fn env_var_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

impl Settings {
    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown setting '{key}' (see show-config)")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a config file. `[section]` lines prefix the keys that follow.
    pub fn merge_text(&mut self, text: &str, path: &str) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected 'key = value'"))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if !known(&key) {
                return Err(Error::parse(path, i + 1, format!("unknown setting '{key}'")));
            }
            self.values.insert(key, v.trim().to_string());
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = read_text(path)?;
        self.merge_text(&text, &path.display().to_string())
    }

    /// Applies environment overrides from `lookup` (normally
    /// `std::env::var`).
    pub fn merge_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (k, _, _) in KEYS {
            if let Some(v) = lookup(&env_var_name(k)) {
                self.values.insert(k.to_string(), v.trim().to_string());
            }
        }
    }

    /// Every setting with its current value, one per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut section = "";
        for (k, _, help) in KEYS {
            let sec = k.split_once('.').map_or("", |p| p.0);
            if sec != section {
                s.push('\n');
                section = sec;
            }
            let _ = writeln!(s, "{k} = {}    # {help}", self.get(k));
        }
        s.trim_start().to_string()
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| Error::Config(format!("{key} = '{v}' is not a valid value (env: {})", env_var_name(key))))
    }

    fn switch(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "on" | "true" | "1" | "yes" => Ok(true),
            "off" | "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("{key} = '{v}' must be on or off"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }
}

/// Typed view of the settings, with module seeds derived from the global
/// seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub chip: ChipModel,
    pub out: PathBuf,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub test_fraction: f64,
    pub preset: String,
    pub network: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub neuron: NeuronParams,
    pub encoder: EncoderConfig,
    pub trainer: TrainConfig,
    pub mapper: MapperConfig,
    pub adaptive: bool,
    pub adapt: AdaptConfig,
    pub timing: bool,
    pub activity_csv: bool,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let seed: u64 = s.parse("seed")?;
        let chip = load_chip(s.get("chip"))?;
        let neuron = NeuronParams {
            beta: s.parse("network.beta")?,
            v_th_base: s.parse("network.v_th")?,
            v_reset: s.parse("network.v_reset")?,
            reset_mode: ResetMode::parse(s.get("network.reset"))
                .ok_or_else(|| Error::Config(format!("network.reset = '{}' must be subtract or hard", s.get("network.reset"))))?,
        };
        neuron.validate()?;
        let encoder = EncoderConfig {
            scheme: Scheme::parse(s.get("encoder.scheme"))
                .ok_or_else(|| Error::Config(format!("encoder.scheme = '{}' must be rate, latency or hybrid", s.get("encoder.scheme"))))?,
            timesteps: s.parse("encoder.timesteps")?,
            alpha: s.parse("encoder.alpha")?,
            v_th_base: s.parse("encoder.v_th_base")?,
            seed: derive(seed, "encoder"),
        };
        encoder.validate()?;
        let steepness = match s.get("trainer.steepness") {
            "auto" | "" => None,
            _ => Some(s.parse("trainer.steepness")?),
        };
        let trainer = TrainConfig {
            epochs: s.parse("trainer.epochs")?,
            batch_size: s.parse("trainer.batch_size")?,
            learning_rate: s.parse("trainer.learning_rate")?,
            lambda_hw: s.parse("trainer.lambda_hw")?,
            surrogate_width: s.parse("trainer.surrogate_width")?,
            grad_mode: GradMode::parse(s.get("trainer.grad_mode")).ok_or_else(|| {
                Error::Config(format!(
                    "trainer.grad_mode = '{}' must be hard_forward or smooth_forward",
                    s.get("trainer.grad_mode")
                ))
            })?,
            steepness,
            init_gain: s.parse("trainer.init_gain")?,
            seed: derive(seed, "trainer"),
            parallel: true,
        };
        trainer.validate()?;
        let mapper = MapperConfig {
            beta1: s.parse("mapper.beta1")?,
            beta2: s.parse("mapper.beta2")?,
            beta3: s.parse("mapper.beta3")?,
            max_iters: s.parse("mapper.max_iters")?,
            seed: derive(seed, "mapper"),
            exact_limit: s.parse("mapper.exact_limit")?,
        };
        mapper.validate()?;
        let adapt = AdaptConfig {
            a_target: s.parse("adapt.a_target")?,
            gamma: s.parse("adapt.gamma")?,
            th_min: s.parse("adapt.th_min")?,
            th_max: s.parse("adapt.th_max")?,
            window: s.parse("adapt.window")?,
            mode: AdaptMode::parse(s.get("adapt.mode"))
                .ok_or_else(|| Error::Config(format!("adapt.mode = '{}' must be gating or homeostatic", s.get("adapt.mode"))))?,
        };
        adapt.validate()?;
        let test_fraction: f64 = s.parse("data.test_fraction")?;
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("data.test_fraction must lie in [0, 1), got {test_fraction}")));
        }
        Ok(RunConfig {
            seed,
            chip,
            out: PathBuf::from(s.get("out")),
            train_data: s.path("data.train"),
            test_data: s.path("data.test"),
            test_fraction,
            preset: s.get("network.preset").to_string(),
            network: s.path("network.path"),
            mapping: s.path("network.mapping"),
            neuron,
            encoder,
            trainer,
            mapper,
            adaptive: s.switch("adapt.enabled")?,
            adapt,
            timing: s.switch("run.timing")?,
            activity_csv: s.switch("run.activity_csv")?,
        })
    }
}

/// Chip by preset name, or from a `key = value` chip file.
pub fn load_chip(spec: &str) -> Result<ChipModel> {
    if let Some(c) = ChipModel::preset(spec) {
        return Ok(c);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!(
            "chip '{spec}' is neither a preset ({}) nor an existing file",
            ChipModel::PRESETS.join(", ")
        )));
    }
    parse_chip(&read_text(path)?, spec)
}

pub fn parse_chip(text: &str, path: &str) -> Result<ChipModel> {
    let mut chip = ChipModel::desk16();
    chip.name = Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into());
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected 'key = value'"))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = || Error::parse(path, i + 1, format!("bad value '{v}' for '{k}'"));
        match k {
            "name" => chip.name = v.to_string(),
            "n_cores" => chip.n_cores = v.parse().map_err(|_| bad())?,
            "neurons_per_core" => chip.neurons_per_core = v.parse().map_err(|_| bad())?,
            "synapses_per_core" => chip.synapses_per_core = v.parse().map_err(|_| bad())?,
            "e_sop_pj" => chip.e_sop_pj = v.parse().map_err(|_| bad())?,
            "e_spike_pj" => chip.e_spike_pj = v.parse().map_err(|_| bad())?,
            "inter_core_cost" => chip.inter_core_cost = v.parse().map_err(|_| bad())?,
            "e_neuron_update_pj" => chip.e_neuron_update_pj = v.parse().map_err(|_| bad())?,
            "e_routing_pj" => chip.e_routing_pj = v.parse().map_err(|_| bad())?,
            _ => return Err(Error::parse(path, i + 1, format!("unknown chip key '{k}'"))),
        }
    }
    chip.validate()?;
    Ok(chip)
}
