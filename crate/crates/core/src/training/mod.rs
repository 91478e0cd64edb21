//! Optimizer, warmup schedule, per-task batching and the training loop.
//!
//! A stage trains one model on one or more training sets (each set is a
//! task) under one objective. Dev evaluation runs the real disambiguation
//! path every `checkpoint_interval` steps and at every epoch end, and the
//! best checkpoint is replaced only on strict improvement.

mod batching;
mod optim;
mod plan;

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batching::{batch_count, epoch_batches, Batch};
pub use optim::{lr_at, Optimizer, OptimizerKind};
pub use plan::{build_vocabulary, run_plan, PlanOutcome, Preset, Stage, StagePlan};

use crate::corpus::AnnotatedCorpus;
use crate::datasets::{TrainingRows, TrainingSet, WeakConfig};
use crate::encoder::{EncoderError, EncoderModel, TokenId};
use crate::inference::{self, GlossIndex, InferenceConfig, InferenceError};
use crate::lexicon::Lexicon;
use crate::losses::{self, LossConfig, LossError, PairInput, TripletInput};
use crate::scoring::{self, Predictions};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set {0:?} is empty")]
    EmptyTrainingSet(String),
    #[error("stage has no training sets")]
    NoTrainingSets,
    #[error("training set {set:?} does not fit objective {objective:?}")]
    IncompatibleSet { set: String, objective: losses::Objective },
    #[error("unknown training set {0:?} in stage plan")]
    UnknownSet(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("non-finite loss or gradient at step {step}; last finite parameters: {checkpoint:?}")]
    DivergenceDetected { step: usize, checkpoint: Option<PathBuf> },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("dev scoring failed: {0}")]
    Scoring(#[from] scoring::ScoringError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub warmup_ratio: f64,
    /// Steps between dev evaluations.
    pub checkpoint_interval: usize,
    pub optimizer: OptimizerKind,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 2,
            base_lr: 2e-5,
            warmup_ratio: 0.1,
            checkpoint_interval: 10_000,
            optimizer: OptimizerKind::Adamw,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults for the small from-scratch encoder: a larger learning rate
    /// than suits pretrained weights.
    pub fn small_encoder() -> Self {
        Self {
            base_lr: 1e-2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::BadConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad("warmup_ratio must be in [0, 1)");
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return bad("base_lr must be finite and non-negative");
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("adam parameters out of range");
        }
        Ok(())
    }
}

/// What a stage needs besides the model and the data.
#[derive(Clone, Copy)]
pub struct TrainEnv<'a> {
    pub lex: &'a Lexicon,
    pub dev: Option<&'a AnnotatedCorpus>,
    pub weak: &'a WeakConfig,
    pub inference: &'a InferenceConfig,
    /// Where best checkpoints are written; nothing is written when `None`.
    pub out_dir: Option<&'a Path>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DevPoint {
    pub step: usize,
    pub epoch: usize,
    pub f1: Option<f64>,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub stage: String,
    pub sets: Vec<String>,
    pub loss: LossConfig,
    pub config: TrainConfig,
    pub steps: usize,
    pub loss_trace: Vec<f64>,
    pub epoch_mean_loss: Vec<f64>,
    /// Dev F1 of the starting parameters, not a checkpoint candidate.
    pub init_dev_f1: Option<f64>,
    pub dev_trace: Vec<DevPoint>,
    pub best_step: usize,
    pub best_dev_f1: Option<f64>,
    /// File name relative to the output directory.
    pub best_checkpoint: Option<String>,
    pub init_fingerprint: String,
    pub best_fingerprint: String,
}

enum Encoded {
    Pairs(Vec<(Vec<TokenId>, Vec<TokenId>, f64)>),
    Triplets(Vec<[Vec<TokenId>; 3]>),
}

fn encode_rows(model: &EncoderModel, rows: &TrainingRows) -> Encoded {
    let v = model.vocab();
    match rows {
        TrainingRows::Pairs(p) => Encoded::Pairs(
            p.iter()
                .map(|r| (v.tokenize(&r.a), v.tokenize(&r.b), r.label as f64))
                .collect(),
        ),
        TrainingRows::Triplets(t) => Encoded::Triplets(
            t.iter()
                .map(|r| [v.tokenize(&r.anchor), v.tokenize(&r.positive), v.tokenize(&r.negative)])
                .collect(),
        ),
    }
}

/// Loss and accumulated gradients of one batch.
fn batch_step(
    model: &EncoderModel,
    task: &Encoded,
    rows: &[usize],
    loss: &LossConfig,
) -> Result<(f64, crate::encoder::Gradients), TrainError> {
    let inputs: Vec<Vec<&[TokenId]>> = match task {
        Encoded::Pairs(p) => rows.iter().map(|&i| vec![&p[i].0[..], &p[i].1[..]]).collect(),
        Encoded::Triplets(t) => rows.iter().map(|&i| t[i].iter().map(Vec::as_slice).collect()).collect(),
    };
    let embedded: Vec<Vec<Vec<f64>>> = inputs
        .par_iter()
        .map(|ex| ex.iter().map(|ids| model.encode(ids).map(|e| e.0)).collect())
        .collect::<Result<_, _>>()?;
    let batch = match task {
        Encoded::Pairs(p) => {
            let inp: Vec<PairInput<'_>> = rows
                .iter()
                .zip(&embedded)
                .map(|(&i, e)| PairInput {
                    u: &e[0],
                    v: &e[1],
                    y: p[i].2,
                })
                .collect();
            losses::pair_batch_loss(loss, &inp)?
        }
        Encoded::Triplets(_) => {
            let inp: Vec<TripletInput<'_>> = embedded
                .iter()
                .map(|e| TripletInput {
                    anchor: &e[0],
                    positive: &e[1],
                    negative: &e[2],
                })
                .collect();
            losses::triplet_batch_loss(loss, &inp)?
        }
    };
    let parts = inputs
        .par_iter()
        .zip(&batch.grads)
        .map(|(ex, grads)| {
            ex.iter()
                .zip(grads)
                .filter(|(_, g)| g.iter().any(|&x| x != 0.0))
                .map(|(ids, g)| model.encode_backward(ids, g))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut grads = model.zero_gradients();
    for g in parts.iter().flatten() {
        grads.add(model.dim(), g);
    }
    Ok((batch.value, grads))
}

/// F1 of the model on the dev corpus via the full inference path.
pub fn dev_f1(model: &EncoderModel, env: &TrainEnv<'_>) -> Result<Option<f64>, TrainError> {
    let Some(dev) = env.dev else {
        return Ok(None);
    };
    let keys = inference::index_keys_for(&[dev], env.lex);
    let index = GlossIndex::build_for(model, env.lex, &env.weak.gloss_separator, &keys)?;
    let preds = inference::predict_corpus(&index, model, env.lex, dev, env.weak.marker_style, env.inference)?;
    let preds = Predictions::from_predictions(&preds)?;
    Ok(Some(scoring::score(&preds, &dev.gold, env.lex)?.f1))
}

fn write_checkpoint(model: &EncoderModel, dir: &Path, name: &str) -> Result<PathBuf, TrainError> {
    fs::create_dir_all(dir).map_err(|source| TrainError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    model.save(&path).map_err(|e| match e {
        EncoderError::Io { path, source } => TrainError::Io { path, source },
        other => other.into(),
    })?;
    Ok(path)
}

/// Trains `model` on `sets` and returns the best checkpoint with its report.
///
/// Without a dev corpus every evaluation point counts as an improvement, so
/// the last one wins.
pub fn train_stage(
    stage: &str,
    mut model: EncoderModel,
    sets: &[&TrainingSet],
    loss: &LossConfig,
    cfg: &TrainConfig,
    env: &TrainEnv<'_>,
) -> Result<(EncoderModel, TrainReport), TrainError> {
    cfg.validate()?;
    loss.validate()?;
    if sets.is_empty() {
        return Err(TrainError::NoTrainingSets);
    }
    for s in sets {
        if s.rows.is_empty() {
            return Err(TrainError::EmptyTrainingSet(s.name.clone()));
        }
        let triplets = matches!(s.rows, TrainingRows::Triplets(_));
        if triplets != loss.objective.uses_triplets() {
            return Err(TrainError::IncompatibleSet {
                set: s.name.clone(),
                objective: loss.objective,
            });
        }
    }

    let tasks: Vec<Encoded> = sets.iter().map(|s| encode_rows(&model, &s.rows)).collect();
    let sizes: Vec<usize> = sets.iter().map(|s| s.rows.len()).collect();
    let per_epoch: usize = sizes.iter().map(|&n| batch_count(n, cfg.batch_size)).sum();
    let total = per_epoch * cfg.epochs;
    let best_name = format!("{stage}.best.ckpt");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, &model);

    let init_fingerprint = model.fingerprint();
    let mut report = TrainReport {
        stage: stage.to_string(),
        sets: sets.iter().map(|s| s.name.clone()).collect(),
        loss: loss.clone(),
        config: cfg.clone(),
        steps: 0,
        loss_trace: Vec::with_capacity(total),
        epoch_mean_loss: Vec::new(),
        init_dev_f1: dev_f1(&model, env)?,
        dev_trace: Vec::new(),
        best_step: 0,
        best_dev_f1: None,
        best_checkpoint: None,
        best_fingerprint: init_fingerprint.clone(),
        init_fingerprint,
    };
    let mut best = model.clone();
    info!("stage {stage}: {} sets, {total} steps", sets.len());

    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let batches = epoch_batches(&sizes, cfg.batch_size, &mut rng);
        let n_batches = batches.len();
        for (b_i, batch) in batches.into_iter().enumerate() {
            let (value, grads) = batch_step(&model, &tasks[batch.task], &batch.rows, loss)?;
            if !value.is_finite() || !grads.is_finite() {
                let checkpoint = match env.out_dir {
                    Some(dir) => Some(write_checkpoint(&model, dir, &format!("{stage}.last-finite.ckpt"))?),
                    None => None,
                };
                return Err(TrainError::DivergenceDetected { step, checkpoint });
            }
            opt.step(&mut model, &grads, lr_at(step, total, cfg), cfg);
            if !model.is_finite() {
                let checkpoint = report.best_checkpoint.as_ref().zip(env.out_dir).map(|(n, d)| d.join(n));
                return Err(TrainError::DivergenceDetected { step, checkpoint });
            }
            step += 1;
            epoch_loss += value;
            report.loss_trace.push(value);

            let epoch_end = b_i + 1 == n_batches;
            if step % cfg.checkpoint_interval == 0 || epoch_end {
                let f1 = dev_f1(&model, env)?;
                let improved = match (f1, report.best_dev_f1) {
                    (Some(f), Some(b)) => f > b,
                    _ => true,
                };
                debug!("stage {stage} step {step}: dev f1 {f1:?}, improved {improved}");
                report.dev_trace.push(DevPoint {
                    step,
                    epoch,
                    f1,
                    improved,
                });
                if improved {
                    best = model.clone();
                    report.best_step = step;
                    report.best_dev_f1 = f1;
                    report.best_fingerprint = best.fingerprint();
                    if let Some(dir) = env.out_dir {
                        write_checkpoint(&best, dir, &best_name)?;
                        report.best_checkpoint = Some(best_name.clone());
                    }
                }
            }
        }
        let mean = epoch_loss / n_batches.max(1) as f64;
        info!("stage {stage} epoch {}: mean loss {mean:.6}", epoch + 1);
        report.epoch_mean_loss.push(mean);
    }
    report.steps = step;
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            warmup_ratio: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
