use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::{train_stage, TrainConfig, TrainEnv, TrainError, TrainReport};
use crate::datasets::{weak_supervise_gloss, TrainingSet};
use crate::encoder::{EncoderModel, Vocabulary};
use crate::lexicon::Lexicon;
use crate::losses::{ContrastiveForm, LossConfig, Objective};

/// Vocabulary over all training texts and every weakly supervised gloss the
/// index can contain.
pub fn build_vocabulary(sets: &[&TrainingSet], lex: &Lexicon, gloss_separator: &str, min_count: usize) -> Vocabulary {
    let mut tokens: Vec<String> = Vec::new();
    for s in sets {
        for t in s.rows.texts() {
            tokens.extend(t.tokens.iter().cloned());
        }
    }
    for (lemma, _, ids) in lex.sense_entries() {
        for id in ids {
            if let Some(syn) = lex.synset(id) {
                if let Ok(t) = weak_supervise_gloss(lemma, &syn.gloss, gloss_separator) {
                    tokens.extend(t.tokens);
                }
            }
        }
    }
    Vocabulary::build(tokens.iter().map(String::as_str), min_count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    /// Names of the training sets; each one is a separate task.
    pub sets: Vec<String>,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub name: String,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    ContrastiveOnly,
    OnlineContrastiveOnly,
    CosineOnly,
    TripletOnly,
    MtThenGloss,
    HypernymThenTriplet,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::ContrastiveOnly,
        Preset::OnlineContrastiveOnly,
        Preset::CosineOnly,
        Preset::TripletOnly,
        Preset::MtThenGloss,
        Preset::HypernymThenTriplet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ContrastiveOnly => "contrastive-only",
            Preset::OnlineContrastiveOnly => "online-contrastive-only",
            Preset::CosineOnly => "cosine-only",
            Preset::TripletOnly => "triplet-only",
            Preset::MtThenGloss => "mt_then_gloss",
            Preset::HypernymThenTriplet => "hypernym_then_triplet",
        }
    }

    /// Builds the stage list. Stage `i` trains with seed `train.seed + i`.
    pub fn plan(self, train: &TrainConfig, form: ContrastiveForm) -> StagePlan {
        let stage = |i: u64, name: &str, sets: &[&str], objective: Objective| Stage {
            name: name.to_string(),
            sets: sets.iter().map(|s| s.to_string()).collect(),
            loss: LossConfig {
                contrastive_form: form,
                ..LossConfig::new(objective)
            },
            train: TrainConfig {
                seed: train.seed.wrapping_add(i),
                ..train.clone()
            },
        };
        let stages = match self {
            Preset::ContrastiveOnly => vec![stage(0, "context_gloss", &["context_gloss"], Objective::Contrastive)],
            Preset::OnlineContrastiveOnly => vec![stage(
                0,
                "context_gloss",
                &["context_gloss"],
                Objective::OnlineContrastive,
            )],
            Preset::CosineOnly => vec![stage(0, "context_gloss", &["context_gloss"], Objective::Cosine)],
            Preset::TripletOnly => vec![stage(0, "triplets", &["triplets"], Objective::Triplet)],
            Preset::MtThenGloss => vec![
                stage(
                    0,
                    "multi_task",
                    &["context_gloss", "context_hypernym"],
                    Objective::Contrastive,
                ),
                stage(1, "context_gloss", &["context_gloss"], Objective::Contrastive),
            ],
            Preset::HypernymThenTriplet => vec![
                stage(0, "context_hypernym", &["context_hypernym"], Objective::Contrastive),
                stage(1, "triplets", &["triplets"], Objective::Triplet),
            ],
        };
        StagePlan {
            name: self.name().to_string(),
            stages,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!("unknown preset {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub model: EncoderModel,
    pub reports: Vec<TrainReport>,
}

/// Runs the stages in order; each starts from the previous stage's best
/// checkpoint.
pub fn run_plan(
    plan: &StagePlan,
    sets: &[TrainingSet],
    init: EncoderModel,
    env: &TrainEnv<'_>,
) -> Result<PlanOutcome, TrainError> {
    let mut model = init;
    let mut reports = Vec::new();
    for (i, stage) in plan.stages.iter().enumerate() {
        let chosen = stage
            .sets
            .iter()
            .map(|name| {
                sets.iter()
                    .find(|s| &s.name == name)
                    .ok_or_else(|| TrainError::UnknownSet(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = format!("{}-stage{}-{}", plan.name, i + 1, stage.name);
        info!("running {label}");
        let (best, report) = train_stage(&label, model, &chosen, &stage.loss, &stage.train, env)?;
        model = best;
        reports.push(report);
    }
    Ok(PlanOutcome { model, reports })
}
