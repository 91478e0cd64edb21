use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use serde::Serialize;
use wsd_core::corpus::{parse_corpus, AnnotatedCorpus};
use wsd_core::datasets::{build_all, TrainingSet};
use wsd_core::encoder::EncoderModel;
use wsd_core::inference::{self, GlossIndex, SenseFrequency};
use wsd_core::lexicon::{parse_lexicon_with, Lexicon};
use wsd_core::scoring::{self, EvalSet, Predictions};
use wsd_core::synthetic::{self, ToyConfig};
use wsd_core::training::{self, build_vocabulary, TrainEnv, TrainError};

use crate::config::{CorpusPaths, RunConfig};
use crate::{Failure, SourceArgs};

type Outcome = Result<(), Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn data_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn train_err(e: TrainError) -> Failure {
    match e {
        TrainError::BadConfig(_) => Failure::Config(e.into()),
        TrainError::EmptyTrainingSet(_)
        | TrainError::NoTrainingSets
        | TrainError::UnknownSet(_)
        | TrainError::IncompatibleSet { .. }
        | TrainError::Io { .. } => Failure::Data(e.into()),
        _ => Failure::Training(e.into()),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path).map_err(config_err)?;
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, Failure> {
    info!("reading lexicon {}", cfg.paths.lexicon.display());
    parse_lexicon_with(&cfg.paths.lexicon, &cfg.lexicon).map_err(data_err)
}

fn load_corpora(paths: &[CorpusPaths]) -> Result<Vec<AnnotatedCorpus>, Failure> {
    paths
        .iter()
        .map(|c| parse_corpus(&c.xml, Some(&c.key)).map_err(data_err))
        .collect()
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(data_err)
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(data_err)
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `text` to `output`, or to standard output when `None`.
fn emit(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to standard output")
            .map_err(data_err),
    }
}

pub fn build_datasets(config: &Path, oversample: Option<usize>, no_gloss_gloss: bool) -> Outcome {
    let mut cfg = load_config(config)?;
    if let Some(r) = oversample {
        if r == 0 {
            return Err(config_err(anyhow!("--oversample must be at least 1")));
        }
        cfg.dataset.oversample_ratio = r;
    }
    if no_gloss_gloss {
        cfg.dataset.gloss_gloss = false;
    }
    if cfg.paths.train.is_empty() {
        return Err(config_err(anyhow!("paths.train lists no corpora")));
    }
    let lex = load_lexicon(&cfg)?;
    let corpora = load_corpora(&cfg.paths.train)?;
    let (sets, report) = build_all(&corpora, &lex, &cfg.dataset).map_err(data_err)?;
    let dir = cfg.datasets_dir();
    create_dir(&dir)?;
    for set in &sets {
        let path = dir.join(format!("{}.tsv", set.name));
        set.write_tsv(&path).map_err(data_err)?;
        info!("{}: {} rows", path.display(), set.rows.len());
    }
    write_file(&dir.join("build_report.json"), to_json(&report).as_bytes())
}

pub fn train(config: &Path, preset: Option<String>, epochs: Option<usize>, seed: Option<u64>) -> Outcome {
    let mut cfg = load_config(config)?;
    if let Some(p) = preset {
        cfg.preset = p;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let preset = cfg.preset().map_err(config_err)?;
    let plan = preset.plan(&cfg.train, cfg.contrastive_form);
    let mut names: Vec<&str> = plan
        .stages
        .iter()
        .flat_map(|s| s.sets.iter().map(String::as_str))
        .collect();
    names.sort_unstable();
    names.dedup();
    let sets = names
        .iter()
        .map(|name| {
            let path = cfg.datasets_dir().join(format!("{name}.tsv"));
            if !path.is_file() {
                return Err(data_err(anyhow!(
                    "{} is missing; run build-datasets first",
                    path.display()
                )));
            }
            TrainingSet::read_tsv(&path, name).map_err(data_err)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let lex = load_lexicon(&cfg)?;
    let dev = cfg
        .paths
        .dev
        .as_ref()
        .map(|d| load_corpora(std::slice::from_ref(d)))
        .transpose()?;
    let dev = dev.as_ref().map(|d| &d[0]);
    let refs: Vec<&TrainingSet> = sets.iter().collect();
    let vocab = build_vocabulary(&refs, &lex, &cfg.dataset.gloss_separator, cfg.encoder.min_count);
    info!("vocabulary: {} tokens", vocab.len());
    let model = EncoderModel::from_config(vocab, &cfg.encoder, cfg.train.seed).map_err(config_err)?;
    let weak = cfg.dataset.weak();
    let ckpt_dir = cfg.checkpoints_dir();
    let env = TrainEnv {
        lex: &lex,
        dev,
        weak: &weak,
        inference: &cfg.inference,
        out_dir: Some(&ckpt_dir),
    };
    let outcome = training::run_plan(&plan, &sets, model, &env).map_err(train_err)?;
    write_file(&cfg.model_path(), &outcome.model.to_bytes())?;
    write_file(
        &cfg.paths.out.join("train_report.json"),
        to_json(&outcome.reports).as_bytes(),
    )
}

fn load_model(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EncoderModel, Failure> {
    let path = checkpoint.map_or_else(|| cfg.model_path(), Path::to_path_buf);
    if !path.is_file() {
        return Err(data_err(anyhow!("checkpoint {} does not exist", path.display())));
    }
    EncoderModel::load(&path).map_err(data_err)
}

fn model_predictions(
    cfg: &RunConfig,
    model: &EncoderModel,
    lex: &Lexicon,
    corpora: &[AnnotatedCorpus],
    index: Option<&Path>,
) -> Result<Vec<Vec<inference::Prediction>>, Failure> {
    let sep = &cfg.dataset.gloss_separator;
    let index = match index {
        Some(p) if p.is_file() => {
            let idx = GlossIndex::load(p).map_err(data_err)?;
            idx.check_model(model).map_err(data_err)?;
            if idx.gloss_separator() != sep {
                return Err(config_err(anyhow!(
                    "index {} was built with gloss separator {:?}",
                    p.display(),
                    idx.gloss_separator()
                )));
            }
            idx
        }
        Some(p) => {
            let idx = GlossIndex::build(model, lex, sep).map_err(data_err)?;
            idx.save(p).map_err(data_err)?;
            idx
        }
        None => {
            let refs: Vec<&AnnotatedCorpus> = corpora.iter().collect();
            GlossIndex::build_for(model, lex, sep, &inference::index_keys_for(&refs, lex)).map_err(data_err)?
        }
    };
    corpora
        .iter()
        .map(|c| {
            inference::predict_corpus(&index, model, lex, c, cfg.dataset.marker_style, &cfg.inference).map_err(data_err)
        })
        .collect()
}

pub fn predict(
    config: &Path,
    checkpoint: Option<PathBuf>,
    corpus: Option<PathBuf>,
    output: Option<PathBuf>,
    index: Option<PathBuf>,
) -> Outcome {
    let cfg = load_config(config)?;
    let model = load_model(&cfg, checkpoint.as_deref())?;
    let lex = load_lexicon(&cfg)?;
    match corpus {
        Some(xml) => {
            let c = parse_corpus(&xml, None).map_err(data_err)?;
            let preds = model_predictions(&cfg, &model, &lex, std::slice::from_ref(&c), index.as_deref())?;
            emit(output.as_deref(), &inference::format_predictions(&preds[0]))
        }
        None => {
            if output.is_some() {
                return Err(config_err(anyhow!("--output needs --corpus")));
            }
            let corpora = load_corpora(&cfg.eval_corpora())?;
            let preds = model_predictions(&cfg, &model, &lex, &corpora, index.as_deref())?;
            for (c, p) in corpora.iter().zip(&preds) {
                let path = cfg.paths.out.join("predictions").join(format!("{}.key.txt", c.name));
                write_file(&path, inference::format_predictions(p).as_bytes())?;
                info!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

/// Test corpora with their predictions, from files or from the model.
fn test_predictions(
    cfg: &RunConfig,
    lex: &Lexicon,
    source: &SourceArgs,
) -> Result<(Vec<AnnotatedCorpus>, Vec<Predictions>), Failure> {
    let eval = cfg.eval_corpora();
    if eval.is_empty() {
        return Err(config_err(anyhow!("paths.test and paths.dev list no corpora")));
    }
    let corpora = load_corpora(&eval)?;
    let preds = match &source.predictions {
        Some(dir) => corpora
            .iter()
            .map(|c| {
                let path = dir.join(format!("{}.key.txt", c.name));
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read predictions {}", path.display()))
                    .map_err(data_err)?;
                Predictions::parse(&text)
                    .with_context(|| path.display().to_string())
                    .map_err(data_err)
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => {
            let model = load_model(cfg, source.checkpoint.as_deref())?;
            model_predictions(cfg, &model, lex, &corpora, None)?
                .iter()
                .map(|p| Predictions::from_predictions(p).map_err(data_err))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok((corpora, preds))
}

fn eval_sets<'a>(corpora: &'a [AnnotatedCorpus], preds: &'a [Predictions]) -> Vec<EvalSet<'a>> {
    corpora
        .iter()
        .zip(preds)
        .map(|(corpus, predictions)| EvalSet { corpus, predictions })
        .collect()
}

pub fn evaluate(config: &Path, source: &SourceArgs, exclude: Vec<String>, exclude_dev: bool, table: bool) -> Outcome {
    let mut cfg = load_config(config)?;
    cfg.exclude_from_all.extend(exclude);
    let lex = load_lexicon(&cfg)?;
    let (corpora, preds) = test_predictions(&cfg, &lex, source)?;
    if exclude_dev {
        if let Some(dev) = &cfg.paths.dev {
            let name = corpora[cfg.eval_corpora().iter().position(|c| c.xml == dev.xml).unwrap()]
                .name
                .clone();
            cfg.exclude_from_all.push(name);
        }
    }
    let report = scoring::evaluate(&eval_sets(&corpora, &preds), &lex, &cfg.exclude_from_all).map_err(data_err)?;
    let text = if table {
        scoring::render_table(&[(cfg.preset.clone(), &report)])
    } else {
        to_json(&report)
    };
    emit(source.output.as_deref(), &text)
}

pub fn split_analysis(config: &Path, source: &SourceArgs) -> Outcome {
    let cfg = load_config(config)?;
    let lex = load_lexicon(&cfg)?;
    let train = load_corpora(&cfg.paths.train)?;
    let (corpora, preds) = test_predictions(&cfg, &lex, source)?;
    let train_refs: Vec<&AnnotatedCorpus> = train.iter().collect();
    let report = scoring::seen_unseen_split(&eval_sets(&corpora, &preds), &train_refs, &lex).map_err(data_err)?;
    emit(source.output.as_deref(), &to_json(&report))
}

pub fn mfs_baseline(config: &Path, output: Option<PathBuf>) -> Outcome {
    let cfg = load_config(config)?;
    let eval = cfg.eval_corpora();
    if eval.is_empty() {
        return Err(config_err(anyhow!("paths.test and paths.dev list no corpora")));
    }
    let lex = load_lexicon(&cfg)?;
    let train = load_corpora(&cfg.paths.train)?;
    let test = load_corpora(&eval)?;
    let freq = SenseFrequency::from_corpora(&train.iter().collect::<Vec<_>>(), &lex);
    let mut preds = Vec::new();
    for c in &test {
        let p = inference::mfs_corpus(&freq, &lex, c, &cfg.inference);
        let path = cfg.paths.out.join("mfs").join(format!("{}.key.txt", c.name));
        write_file(&path, inference::format_predictions(&p).as_bytes())?;
        preds.push(Predictions::from_predictions(&p).map_err(data_err)?);
    }
    let report = scoring::evaluate(&eval_sets(&test, &preds), &lex, &cfg.exclude_from_all).map_err(data_err)?;
    emit(output.as_deref(), &to_json(&report))
}

pub fn generate_toy(out: &Path, seed: u64) -> Outcome {
    let toy = ToyConfig {
        seed,
        ..ToyConfig::default()
    };
    let bundle = synthetic::generate_toy(out, &toy).map_err(data_err)?;
    let rel = |p: &Path| p.strip_prefix(out).unwrap_or(p).display().to_string();
    let corpus = |i: usize| {
        format!(
            "{{ xml = {:?}, key = {:?} }}",
            rel(&bundle.files[i].0),
            rel(&bundle.files[i].1)
        )
    };
    let text = format!(
        "seed = {seed}\n\
         preset = \"contrastive-only\"\n\n\
         [paths]\n\
         lexicon = {:?}\n\
         train = [{}]\n\
         dev = {}\n\
         test = [{}]\n\
         out = \"run\"\n\n\
         [encoder]\n\
         dim = 64\n\n\
         [train]\n\
         epochs = 5\n\
         checkpoint_interval = 50\n",
        rel(&bundle.lexicon_dir),
        corpus(0),
        corpus(1),
        corpus(2),
    );
    write_file(&out.join("config.toml"), text.as_bytes())
}
