mod common;

use common::toy::{toy_run, toy_sets};
use wsd_core::datasets::{DatasetConfig, TrainingRows, TrainingSet, WeakConfig};
use wsd_core::encoder::EncoderModel;
use wsd_core::inference::InferenceConfig;
use wsd_core::losses::{LossConfig, Objective};
use wsd_core::synthetic::{generate_toy, ToyBundle, ToyConfig};
use wsd_core::training::*;

fn small_bundle(dir: &std::path::Path, seed: u64) -> ToyBundle {
    let cfg = ToyConfig {
        seed,
        train: 200,
        dev: 60,
        test: 60,
        ..ToyConfig::default()
    };
    generate_toy(dir, &cfg).unwrap()
}

fn fresh_model(bundle: &ToyBundle, sets: &[TrainingSet], seed: u64) -> EncoderModel {
    let refs: Vec<&TrainingSet> = sets.iter().collect();
    let vocab = build_vocabulary(&refs, &bundle.lexicon, wsd_core::text::GLOSS_SEPARATOR, 1);
    EncoderModel::new(vocab, 32, true, seed).unwrap()
}

fn env<'a>(
    bundle: &'a ToyBundle,
    dev: bool,
    weak: &'a WeakConfig,
    inf: &'a InferenceConfig,
    out: Option<&'a std::path::Path>,
) -> TrainEnv<'a> {
    TrainEnv {
        lex: &bundle.lexicon,
        dev: dev.then_some(&bundle.dev),
        weak,
        inference: inf,
        out_dir: out,
    }
}

fn first_pairs(set: &TrainingSet, n: usize) -> TrainingSet {
    let TrainingRows::Pairs(p) = &set.rows else {
        panic!("pair set expected")
    };
    TrainingSet {
        rows: TrainingRows::Pairs(p[..n].to_vec()),
        ..set.clone()
    }
}

#[test]
fn step_count_follows_batching() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_bundle(dir.path(), 4);
    let sets = toy_sets(&bundle, &DatasetConfig::default());
    let set = first_pairs(&sets[0], 64);
    let (weak, inf) = (WeakConfig::default(), InferenceConfig::default());
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::small_encoder()
    };
    let model = fresh_model(&bundle, &sets, 1);
    let (_, report) = train_stage(
        "count",
        model,
        &[&set],
        &LossConfig::new(Objective::Contrastive),
        &cfg,
        &env(&bundle, false, &weak, &inf, None),
    )
    .unwrap();
    assert_eq!(report.steps, 6);
    assert_eq!(report.loss_trace.len(), 6);
    assert_eq!(report.epoch_mean_loss.len(), 3);
    // Dev-less: one point per epoch end, each an improvement, last wins.
    assert_eq!(report.dev_trace.len(), 3);
    assert!(report.dev_trace.iter().all(|p| p.improved && p.f1.is_none()));
    assert_eq!(report.best_step, 6);
}

#[test]
fn best_checkpoint_is_first_strict_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let run = toy_run(dir.path(), 5, Preset::ContrastiveOnly);
    let r = &run.outcome.reports[0];
    assert!(r.init_dev_f1.is_some());
    let mut best: Option<f64> = None;
    let mut best_step = 0;
    for p in &r.dev_trace {
        let f = p.f1.unwrap();
        let improved = best.is_none_or(|b| f > b);
        assert_eq!(p.improved, improved, "step {}", p.step);
        if improved {
            best = Some(f);
            best_step = p.step;
        }
    }
    assert_eq!(r.best_dev_f1, best);
    assert_eq!(r.best_step, best_step);

    // The saved checkpoint is the returned model, bit for bit.
    let name = r.best_checkpoint.as_ref().unwrap();
    let loaded = EncoderModel::load(&dir.path().join("ckpt").join(name)).unwrap();
    assert_eq!(loaded.to_bytes(), run.outcome.model.to_bytes());
    assert_eq!(loaded.fingerprint(), r.best_fingerprint);
}

#[test]
fn same_seed_runs_are_identical() {
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = toy_run(a_dir.path(), 2, Preset::HypernymThenTriplet);
    let b = toy_run(b_dir.path(), 2, Preset::HypernymThenTriplet);
    assert_eq!(a.outcome.model.to_bytes(), b.outcome.model.to_bytes());
    assert_eq!(a.outcome.reports, b.outcome.reports);
    assert_eq!(a.test_f1, b.test_f1);
}

#[test]
fn stages_chain_through_best_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let run = toy_run(dir.path(), 3, Preset::HypernymThenTriplet);
    let [first, second] = &run.outcome.reports[..] else {
        panic!("two stages expected")
    };
    assert_eq!(second.init_fingerprint, first.best_fingerprint);
    assert_eq!(run.outcome.model.fingerprint(), second.best_fingerprint);
    assert_eq!(second.loss.margin, 5.0);
    assert_eq!(second.config.seed, first.config.seed + 1);
}

#[test]
fn epoch_loss_decreases_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_bundle(dir.path(), 6);
    let sets = toy_sets(&bundle, &DatasetConfig::default());
    let (weak, inf) = (WeakConfig::default(), InferenceConfig::default());
    let cfg = TrainConfig {
        epochs: 3,
        seed: 6,
        ..TrainConfig::small_encoder()
    };
    let (_, report) = train_stage(
        "mono",
        fresh_model(&bundle, &sets, 6),
        &[&sets[0]],
        &LossConfig::new(Objective::Contrastive),
        &cfg,
        &env(&bundle, false, &weak, &inf, None),
    )
    .unwrap();
    let l = &report.epoch_mean_loss;
    assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_bundle(&dir.path().join("data"), 7);
    let sets = toy_sets(&bundle, &DatasetConfig::default());
    let (weak, inf) = (WeakConfig::default(), InferenceConfig::default());
    let cfg = TrainConfig {
        base_lr: 1e300,
        warmup_ratio: 0.0,
        epochs: 5,
        ..TrainConfig::small_encoder()
    };
    let out = dir.path().join("ckpt");
    let err = train_stage(
        "boom",
        fresh_model(&bundle, &sets, 7),
        &[&sets[0]],
        &LossConfig::new(Objective::Cosine),
        &cfg,
        &env(&bundle, false, &weak, &inf, Some(&out)),
    )
    .unwrap_err();
    let TrainError::DivergenceDetected { checkpoint, .. } = err else {
        panic!("unexpected error {err}")
    };
    if let Some(path) = checkpoint {
        assert!(path.exists());
    }
}

#[test]
fn objective_must_match_row_shape() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_bundle(dir.path(), 8);
    let sets = toy_sets(&bundle, &DatasetConfig::default());
    let (weak, inf) = (WeakConfig::default(), InferenceConfig::default());
    let e = env(&bundle, false, &weak, &inf, None);
    let model = fresh_model(&bundle, &sets, 8);
    let cfg = TrainConfig::small_encoder();
    let err = train_stage(
        "x",
        model.clone(),
        &[&sets[2]],
        &LossConfig::new(Objective::Contrastive),
        &cfg,
        &e,
    );
    assert!(matches!(err, Err(TrainError::IncompatibleSet { .. })));
    let err = train_stage(
        "x",
        model.clone(),
        &[&sets[0]],
        &LossConfig::new(Objective::Triplet),
        &cfg,
        &e,
    );
    assert!(matches!(err, Err(TrainError::IncompatibleSet { .. })));
    let empty = first_pairs(&sets[0], 0);
    let err = train_stage("x", model, &[&empty], &LossConfig::new(Objective::Cosine), &cfg, &e);
    assert!(matches!(err, Err(TrainError::EmptyTrainingSet(_))));
}
