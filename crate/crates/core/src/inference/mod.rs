//! Disambiguation by nearest gloss: embed the marked context, compare it with
//! the indexed gloss embeddings of every candidate synset, take the argmax.

mod index;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use index::GlossIndex;

use crate::corpus::{AnnotatedCorpus, Sentence};
use crate::datasets::{mark_target, DatasetError, MarkerStyle};
use crate::encoder::{EncoderError, EncoderModel};
use crate::lexicon::{Lexicon, Pos, SynsetId};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("index was built by model {index}, not {model}")]
    FingerprintMismatch { index: String, model: String },
    #[error("invalid index file: {0}")]
    BadIndex(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// Restrict candidates to the instance's part of speech.
    pub pos_filter: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { pos_filter: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub instance_id: String,
    /// `None` means the system abstained.
    pub synset: Option<SynsetId>,
    pub key: Option<String>,
    /// Score of each candidate, in canonical sense order.
    pub scores: Vec<(SynsetId, f64)>,
    /// Set when the candidate set was empty and the first-sense fallback ran.
    pub backoff: bool,
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Index of the maximum, preferring the earliest on ties. NaN never wins.
fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn lookup_pos(pos: Option<Pos>, pos_filter: bool) -> Vec<Pos> {
    match pos {
        Some(p) if pos_filter => vec![p.coarse()],
        _ => Pos::COARSE.to_vec(),
    }
}

fn decide(instance_id: &str, lex: &Lexicon, lemma: &str, scores: Vec<(SynsetId, f64)>) -> Prediction {
    let values: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    let (synset, backoff) = match argmax(&values) {
        Some(i) => (Some(scores[i].0), false),
        None if scores.is_empty() => (lex.first_sense_any_pos(lemma).map(|s| s.id), true),
        None => (None, false),
    };
    Prediction {
        instance_id: instance_id.to_string(),
        key: synset.and_then(|id| lex.sense_key(lemma, &id)).map(str::to_string),
        synset,
        scores,
        backoff,
    }
}

/// Disambiguates token `target` of `sentence`.
///
/// `pos` of `None` searches every part of speech. An empty candidate set
/// falls back to the lexicon's first sense for the lemma under any part of
/// speech, or abstains if the lemma is unknown.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    index: &GlossIndex,
    model: &EncoderModel,
    lex: &Lexicon,
    sentence: &Sentence,
    target: usize,
    lemma: &str,
    pos: Option<Pos>,
    marker_style: MarkerStyle,
    cfg: &InferenceConfig,
) -> Result<Prediction, InferenceError> {
    let candidates: Vec<_> = lookup_pos(pos, cfg.pos_filter)
        .into_iter()
        .flat_map(|p| index.get(lemma, p))
        .collect();
    let scores = if candidates.is_empty() {
        Vec::new()
    } else {
        let context = model.encode_text(&mark_target(sentence, target, marker_style))?;
        candidates
            .iter()
            .map(|(id, e)| (*id, cosine_similarity(&context, e)))
            .collect()
    };
    let id = sentence.tokens[target].instance_id.as_deref().unwrap_or("");
    Ok(decide(id, lex, lemma, scores))
}

/// Predictions for every instance of the corpus, in document order.
pub fn predict_corpus(
    index: &GlossIndex,
    model: &EncoderModel,
    lex: &Lexicon,
    corpus: &AnnotatedCorpus,
    marker_style: MarkerStyle,
    cfg: &InferenceConfig,
) -> Result<Vec<Prediction>, InferenceError> {
    index.check_model(model)?;
    corpus
        .instances()
        .par_iter()
        .map(|inst| {
            let tok = inst.token();
            predict(
                index,
                model,
                lex,
                inst.sentence,
                inst.index,
                &tok.lookup_lemma(),
                tok.pos.lexicon_pos(),
                marker_style,
                cfg,
            )
        })
        .collect()
}

/// Every lexicon key a corpus can look up, across all parts of speech.
pub fn index_keys_for(corpora: &[&AnnotatedCorpus], lex: &Lexicon) -> BTreeSet<(String, Pos)> {
    let mut keys = BTreeSet::new();
    for c in corpora {
        for inst in c.instances() {
            let lemma = inst.token().lookup_lemma();
            for p in Pos::COARSE {
                if !lex.candidate_ids(&lemma, p).is_empty() {
                    keys.insert((lemma.clone(), p));
                }
            }
        }
    }
    keys
}

/// Key-file lines `instance_id sense_key`; abstentions are omitted.
pub fn format_predictions(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        if let Some(k) = &p.key {
            let _ = writeln!(out, "{} {}", p.instance_id, k);
        }
    }
    out
}

/// Gold sense counts per `(lemma, coarse POS)` from tagged training data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SenseFrequency {
    counts: HashMap<(String, Pos), BTreeMap<SynsetId, usize>>,
}

impl SenseFrequency {
    /// Counts each resolvable gold synset once per instance; instances whose
    /// keys do not resolve are ignored.
    pub fn from_corpora(corpora: &[&AnnotatedCorpus], lex: &Lexicon) -> Self {
        let mut freq = Self::default();
        for c in corpora {
            for inst in c.instances() {
                let tok = inst.token();
                let (Some(pos), Ok(gold)) = (tok.pos.lexicon_pos(), c.gold.resolve(inst.id, lex)) else {
                    continue;
                };
                freq.record(&tok.lookup_lemma(), pos, &gold);
            }
        }
        freq
    }

    pub fn record(&mut self, lemma: &str, pos: Pos, synsets: &[SynsetId]) {
        let entry = self.counts.entry((lemma.to_string(), pos.coarse())).or_default();
        for id in synsets {
            *entry.entry(*id).or_default() += 1;
        }
    }

    pub fn count(&self, lemma: &str, pos: Pos, id: &SynsetId) -> usize {
        self.counts
            .get(&(lemma.to_string(), pos.coarse()))
            .and_then(|m| m.get(id))
            .copied()
            .unwrap_or(0)
    }
}

/// Most frequent training sense; ties and unseen lemmas go to the first sense.
pub fn mfs_predict(
    freq: &SenseFrequency,
    lex: &Lexicon,
    instance_id: &str,
    lemma: &str,
    pos: Option<Pos>,
    cfg: &InferenceConfig,
) -> Prediction {
    let scores = lookup_pos(pos, cfg.pos_filter)
        .into_iter()
        .flat_map(|p| {
            lex.candidate_ids(lemma, p)
                .iter()
                .map(move |id| (*id, freq.count(lemma, p, id) as f64))
        })
        .collect();
    decide(instance_id, lex, lemma, scores)
}

pub fn mfs_corpus(
    freq: &SenseFrequency,
    lex: &Lexicon,
    corpus: &AnnotatedCorpus,
    cfg: &InferenceConfig,
) -> Vec<Prediction> {
    corpus
        .instances()
        .iter()
        .map(|inst| {
            let tok = inst.token();
            mfs_predict(freq, lex, inst.id, &tok.lookup_lemma(), tok.pos.lexicon_pos(), cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lower_rank_on_ties() {
        assert_eq!(argmax(&[0.9, 0.1]), Some(0));
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.1]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn cosine_edge_cases() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine_similarity(&[2.0, 0.0], &[5.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
