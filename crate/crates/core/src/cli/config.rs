//! Run configuration and its line-oriented `key=value` file form.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{SplitMode, SplitSpec, DEFAULT_MAX_DEFINITION_LEN, DEFAULT_NEGATIVE_RATIO};
use crate::error::{Error, Result};
use crate::eval::{InferenceMode, DEFAULT_AP_K, DEFAULT_SENSE_CAP};
use crate::model::{AblationMask, Architecture, ModelConfig, TrainConfig, DEFAULT_LEARNING_RATE};
use crate::numcore::DEFAULT_EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub relations: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Directory holding `train.tsv`, `dev.tsv` and `test.tsv`.
    pub data_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Instance file to evaluate; defaults to `<data_dir>/test.tsv`.
    pub eval_file: Option<PathBuf>,
    /// Prediction file written by `eval`.
    pub predictions: Option<PathBuf>,

    pub dim: usize,
    pub architecture: Architecture,
    pub mask: AblationMask,
    pub share_weights: bool,
    pub max_definition_len: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,

    pub mode: InferenceMode,
    pub sense_cap: usize,
    pub ap_k: usize,

    pub split_mode: SplitMode,
    pub fractions: [f64; 3],
    pub negative_ratio: f64,
    pub synthetic_taxonomy: usize,
    pub synthetic_vocab: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            relations: None,
            embeddings: None,
            lexicon: None,
            data_dir: None,
            model: None,
            eval_file: None,
            predictions: None,
            dim: 300,
            architecture: Architecture::FourWay,
            mask: AblationMask::default(),
            share_weights: false,
            max_definition_len: DEFAULT_MAX_DEFINITION_LEN,
            learning_rate: DEFAULT_LEARNING_RATE,
            epsilon: DEFAULT_EPSILON,
            epochs: 50,
            batch_size: 32,
            patience: 5,
            seed: 13,
            mode: InferenceMode::TopDef,
            sense_cap: DEFAULT_SENSE_CAP,
            ap_k: DEFAULT_AP_K,
            split_mode: SplitMode::Random,
            fractions: [0.8, 0.1, 0.1],
            negative_ratio: DEFAULT_NEGATIVE_RATIO,
            synthetic_taxonomy: 200,
            synthetic_vocab: 300,
        }
    }
}

fn path_value(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            architecture: self.architecture,
            mask: self.mask,
            share_weights: self.share_weights,
            max_definition_len: self.max_definition_len,
            learning_rate: self.learning_rate,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: (self.patience > 0).then_some(self.patience),
            // Shuffling gets its own stream so it does not replay the
            // initializer's draws.
            seed: self.seed.wrapping_add(1),
            track_train_accuracy: false,
            parallel: true,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            mode: self.split_mode,
            fractions: self.fractions,
            seed: self.seed,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = self.fractions;
        for (k, v) in [
            ("relations", path_value(&self.relations)),
            ("embeddings", path_value(&self.embeddings)),
            ("lexicon", path_value(&self.lexicon)),
            ("data_dir", path_value(&self.data_dir)),
            ("model", path_value(&self.model)),
            ("eval_file", path_value(&self.eval_file)),
            ("predictions", path_value(&self.predictions)),
            ("dim", self.dim.to_string()),
            ("architecture", self.architecture.to_string()),
            ("mask", self.mask.to_string()),
            ("share_weights", self.share_weights.to_string()),
            ("max_definition_len", self.max_definition_len.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("mode", self.mode.to_string()),
            ("sense_cap", self.sense_cap.to_string()),
            ("ap_k", self.ap_k.to_string()),
            ("split_mode", self.split_mode.to_string()),
            ("fractions", format!("{},{},{}", f[0], f[1], f[2])),
            ("negative_ratio", self.negative_ratio.to_string()),
            ("synthetic_taxonomy", self.synthetic_taxonomy.to_string()),
            ("synthetic_vocab", self.synthetic_vocab.to_string()),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "relations" => self.relations = path(),
            "embeddings" => self.embeddings = path(),
            "lexicon" => self.lexicon = path(),
            "data_dir" => self.data_dir = path(),
            "model" => self.model = path(),
            "eval_file" => self.eval_file = path(),
            "predictions" => self.predictions = path(),
            "dim" => self.dim = parse(key, value)?,
            "architecture" => self.architecture = parse(key, value)?,
            "mask" => self.mask = parse(key, value)?,
            "share_weights" => self.share_weights = parse(key, value)?,
            "max_definition_len" => self.max_definition_len = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "sense_cap" => self.sense_cap = parse(key, value)?,
            "ap_k" => self.ap_k = parse(key, value)?,
            "split_mode" => self.split_mode = parse(key, value)?,
            "fractions" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?;
                self.fractions = parts
                    .try_into()
                    .map_err(|_| Error::Config(format!("fractions needs three values, got {value:?}")))?;
            }
            "negative_ratio" => self.negative_ratio = parse(key, value)?,
            "synthetic_taxonomy" => self.synthetic_taxonomy = parse(key, value)?,
            "synthetic_vocab" => self.synthetic_vocab = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Defaults overlaid with the settings in `text`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
