use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use wsd_core::datasets::DatasetConfig;
use wsd_core::encoder::EncoderConfig;
use wsd_core::inference::InferenceConfig;
use wsd_core::lexicon::LexiconOptions;
use wsd_core::losses::ContrastiveForm;
use wsd_core::training::{Preset, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub xml: PathBuf,
    pub key: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub lexicon: PathBuf,
    #[serde(default)]
    pub train: Vec<CorpusPaths>,
    #[serde(default)]
    pub dev: Option<CorpusPaths>,
    #[serde(default)]
    pub test: Vec<CorpusPaths>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// Overrides `dataset.seed` and `train.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub contrastive_form: ContrastiveForm,
    #[serde(default)]
    pub exclude_from_all: Vec<String>,
    #[serde(default)]
    pub lexicon: LexiconOptions,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default = "TrainConfig::small_encoder", deserialize_with = "small_encoder_defaults")]
    pub train: TrainConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
}

fn default_preset() -> String {
    Preset::HypernymThenTriplet.name().to_string()
}

/// Missing `[train]` keys fall back to the small-encoder defaults.
fn small_encoder_defaults<'de, D: Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
    let given = Map::<String, Value>::deserialize(d)?;
    let Ok(Value::Object(mut merged)) = serde_json::to_value(TrainConfig::small_encoder()) else {
        unreachable!("TrainConfig serializes to an object")
    };
    merged.extend(given);
    serde_json::from_value(Value::Object(merged)).map_err(D::Error::custom)
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Relative paths are
    /// taken from the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        if let Some(seed) = cfg.seed {
            cfg.dataset.seed = seed;
            cfg.train.seed = seed;
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        fix(&mut p.lexicon);
        fix(&mut p.out);
        for c in p.train.iter_mut().chain(p.dev.iter_mut()).chain(p.test.iter_mut()) {
            fix(&mut c.xml);
            fix(&mut c.key);
        }
    }

    pub fn preset(&self) -> Result<Preset> {
        self.preset.parse::<Preset>().map_err(anyhow::Error::msg)
    }

    /// Checks that every referenced input exists and the options are sane.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        if !p.lexicon.is_dir() {
            bail!("lexicon directory {} does not exist", p.lexicon.display());
        }
        for c in p.train.iter().chain(p.dev.iter()).chain(p.test.iter()) {
            for f in [&c.xml, &c.key] {
                if !f.is_file() {
                    bail!("corpus file {} does not exist", f.display());
                }
            }
        }
        if self.dataset.oversample_ratio == 0 {
            bail!("dataset.oversample_ratio must be at least 1");
        }
        if self.encoder.dim == 0 {
            bail!("encoder.dim must be at least 1");
        }
        self.train.validate()?;
        self.preset()?;
        Ok(())
    }

    /// Test corpora followed by the dev corpus, which also counts toward the
    /// overall score unless excluded.
    pub fn eval_corpora(&self) -> Vec<CorpusPaths> {
        let mut all = self.paths.test.clone();
        if let Some(dev) = &self.paths.dev {
            if !all.iter().any(|c| c.xml == dev.xml) {
                all.push(dev.clone());
            }
        }
        all
    }

    pub fn datasets_dir(&self) -> PathBuf {
        self.paths.out.join("datasets")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.paths.out.join("checkpoints")
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths.out.join("model.ckpt")
    }
}
