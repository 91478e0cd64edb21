use std::path::Path;

use wsd_core::corpus::AnnotatedCorpus;
use wsd_core::datasets::{build_all, DatasetConfig, TrainingSet};
use wsd_core::encoder::EncoderModel;
use wsd_core::inference::{self, GlossIndex, InferenceConfig, SenseFrequency};
use wsd_core::scoring::{self, Predictions};
use wsd_core::synthetic::{generate_toy, ToyBundle, ToyConfig};
use wsd_core::training::{build_vocabulary, run_plan, PlanOutcome, Preset, TrainConfig, TrainEnv};

pub const EPOCHS: usize = 5;
pub const INTERVAL: usize = 50;
pub const DIM: usize = 64;

pub struct ToyRun {
    pub bundle: ToyBundle,
    pub outcome: PlanOutcome,
    pub test_f1: f64,
    pub mfs_f1: f64,
    pub random_f1: f64,
}

pub fn toy_sets(bundle: &ToyBundle, cfg: &DatasetConfig) -> [TrainingSet; 3] {
    build_all(std::slice::from_ref(&bundle.train), &bundle.lexicon, cfg)
        .unwrap()
        .0
}

pub fn f1_on(model: &EncoderModel, bundle: &ToyBundle, corpus: &AnnotatedCorpus) -> f64 {
    let weak = DatasetConfig::default().weak();
    let keys = inference::index_keys_for(&[corpus], &bundle.lexicon);
    let index = GlossIndex::build_for(model, &bundle.lexicon, &weak.gloss_separator, &keys).unwrap();
    let preds = inference::predict_corpus(
        &index,
        model,
        &bundle.lexicon,
        corpus,
        weak.marker_style,
        &InferenceConfig::default(),
    )
    .unwrap();
    let preds = Predictions::from_predictions(&preds).unwrap();
    scoring::score(&preds, &corpus.gold, &bundle.lexicon).unwrap().f1
}

pub fn mfs_f1(bundle: &ToyBundle) -> f64 {
    let freq = SenseFrequency::from_corpora(&[&bundle.train], &bundle.lexicon);
    let preds = inference::mfs_corpus(&freq, &bundle.lexicon, &bundle.test, &InferenceConfig::default());
    let preds = Predictions::from_predictions(&preds).unwrap();
    scoring::score(&preds, &bundle.test.gold, &bundle.lexicon).unwrap().f1
}

/// Generates the toy data under `dir`, trains `preset` and scores the test split.
pub fn toy_run(dir: &Path, seed: u64, preset: Preset) -> ToyRun {
    let bundle = generate_toy(
        &dir.join("data"),
        &ToyConfig {
            seed,
            ..ToyConfig::default()
        },
    )
    .unwrap();
    let dcfg = DatasetConfig::default();
    let sets = toy_sets(&bundle, &dcfg);
    let refs: Vec<&TrainingSet> = sets.iter().collect();
    let vocab = build_vocabulary(&refs, &bundle.lexicon, &dcfg.gloss_separator, 1);
    let model = EncoderModel::new(vocab, DIM, true, seed).unwrap();
    let train = TrainConfig {
        epochs: EPOCHS,
        checkpoint_interval: INTERVAL,
        seed,
        ..TrainConfig::small_encoder()
    };
    let weak = dcfg.weak();
    let inf = InferenceConfig::default();
    let out = dir.join("ckpt");
    let env = TrainEnv {
        lex: &bundle.lexicon,
        dev: Some(&bundle.dev),
        weak: &weak,
        inference: &inf,
        out_dir: Some(&out),
    };
    let plan = preset.plan(&train, Default::default());
    let outcome = run_plan(&plan, &sets, model, &env).unwrap();
    let test_f1 = f1_on(&outcome.model, &bundle, &bundle.test);
    let mfs = mfs_f1(&bundle);
    let random_f1 = bundle.random_baseline_f1();
    ToyRun {
        bundle,
        outcome,
        test_f1,
        mfs_f1: mfs,
        random_f1,
    }
}
