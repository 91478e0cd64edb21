//! Micro-averaged precision, recall and F1, as in the standard all-words
//! evaluation framework, plus per-POS and seen/unseen breakdowns.
//!
//! An instance counts as correct when its predicted sense resolves to any of
//! its gold synsets. Scores are on a 0–100 scale.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{AnnotatedCorpus, GoldKeys};
use crate::inference::Prediction;
use crate::lexicon::{Lexicon, Pos, SynsetId};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("more than one prediction for instance {0}")]
    DuplicatePrediction(String),
    #[error("prediction for instance {0}, which has no gold annotation")]
    UnknownInstance(String),
    #[error("line {0}: expected `instance_id sense_key`")]
    MalformedLine(usize),
}

/// One answer per instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions(BTreeMap<String, String>);

impl Predictions {
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, ScoringError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (id, key) in pairs {
            let id = id.into();
            if map.contains_key(&id) {
                return Err(ScoringError::DuplicatePrediction(id));
            }
            map.insert(id, key.into());
        }
        Ok(Self(map))
    }

    pub fn from_predictions(preds: &[Prediction]) -> Result<Self, ScoringError> {
        Self::from_pairs(
            preds
                .iter()
                .filter_map(|p| p.key.as_ref().map(|k| (p.instance_id.clone(), k.clone()))),
        )
    }

    /// Parses key-file lines; extra keys after the first are ignored.
    pub fn parse(text: &str) -> Result<Self, ScoringError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (None, _) => continue,
                (Some(id), Some(key)) => pairs.push((id.to_string(), key.to_string())),
                (Some(_), None) => return Err(ScoringError::MalformedLine(i + 1)),
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Score {
    pub total: usize,
    pub attempted: usize,
    pub correct: usize,
    pub abstained: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Score {
    pub fn from_counts(total: usize, attempted: usize, correct: usize) -> Self {
        let pct = |n: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
        let (precision, recall) = (pct(correct, attempted), pct(correct, total));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            total,
            attempted,
            correct,
            abstained: total - attempted,
            precision,
            recall,
            f1,
        }
    }

    fn add(&mut self, other: &Score) {
        *self = Self::from_counts(
            self.total + other.total,
            self.attempted + other.attempted,
            self.correct + other.correct,
        );
    }
}

/// Whether the predicted key matches a gold key directly or by synset.
fn judge(gold_keys: &BTreeSet<String>, predicted: &str, lex: &Lexicon) -> bool {
    if gold_keys.contains(predicted) {
        return true;
    }
    let Some(p) = lex.resolve_key(predicted) else {
        return false;
    };
    gold_keys.iter().any(|k| lex.resolve_key(k) == Some(p))
}

fn check_known(predictions: &Predictions, gold: &GoldKeys) -> Result<(), ScoringError> {
    match predictions.0.keys().find(|id| gold.get(id).is_none()) {
        Some(id) => Err(ScoringError::UnknownInstance(id.clone())),
        None => Ok(()),
    }
}

/// Scores predictions against every gold instance.
pub fn score(predictions: &Predictions, gold: &GoldKeys, lex: &Lexicon) -> Result<Score, ScoringError> {
    check_known(predictions, gold)?;
    let (mut attempted, mut correct) = (0, 0);
    for (id, keys) in gold.iter() {
        if let Some(p) = predictions.get(id) {
            attempted += 1;
            correct += judge(keys, p, lex) as usize;
        }
    }
    Ok(Score::from_counts(gold.len(), attempted, correct))
}

/// Predictions for one evaluation corpus.
pub struct EvalSet<'a> {
    pub corpus: &'a AnnotatedCorpus,
    pub predictions: &'a Predictions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// In input order.
    pub datasets: Vec<(String, Score)>,
    pub all: Score,
    /// Datasets left out of `all`.
    pub excluded_from_all: Vec<String>,
    /// Over the sets included in `all`; keys are `noun`, `verb`, `adj`, `adv`.
    pub per_pos: BTreeMap<String, Score>,
}

fn pos_name(p: Pos) -> &'static str {
    match p.coarse() {
        Pos::Noun => "noun",
        Pos::Verb => "verb",
        Pos::Adj => "adj",
        _ => "adv",
    }
}

/// `(instance id, POS, outcome)`; outcome is `None` for an abstention.
type Judged<'a> = (&'a str, Option<Pos>, Option<bool>);

fn per_instance<'a>(set: &EvalSet<'a>, lex: &Lexicon) -> Result<Vec<Judged<'a>>, ScoringError> {
    check_known(set.predictions, &set.corpus.gold)?;
    Ok(set
        .corpus
        .instances()
        .into_iter()
        .map(|inst| {
            let outcome = set
                .predictions
                .get(inst.id)
                .map(|p| set.corpus.gold.get(inst.id).is_some_and(|keys| judge(keys, p, lex)));
            (inst.id, inst.token().pos.lexicon_pos(), outcome)
        })
        .collect())
}

fn tally<'b>(rows: impl Iterator<Item = &'b Option<bool>>) -> Score {
    let (mut total, mut attempted, mut correct) = (0, 0, 0);
    for r in rows {
        total += 1;
        if let Some(ok) = r {
            attempted += 1;
            correct += *ok as usize;
        }
    }
    Score::from_counts(total, attempted, correct)
}

/// Per-dataset, overall and per-POS scores. Instances are the tagged tokens
/// of each corpus. Sets named in `exclude_from_all` still get their own row.
pub fn evaluate(sets: &[EvalSet<'_>], lex: &Lexicon, exclude_from_all: &[String]) -> Result<EvalReport, ScoringError> {
    let mut datasets = Vec::new();
    let mut all = Score::default();
    let mut per_pos: BTreeMap<String, Score> = Pos::COARSE
        .iter()
        .map(|p| (pos_name(*p).to_string(), Score::default()))
        .collect();
    for set in sets {
        let rows = per_instance(set, lex)?;
        let s = tally(rows.iter().map(|r| &r.2));
        datasets.push((set.corpus.name.clone(), s));
        if exclude_from_all.contains(&set.corpus.name) {
            continue;
        }
        all.add(&s);
        for p in Pos::COARSE {
            let ps = tally(rows.iter().filter(|r| r.1.map(Pos::coarse) == Some(p)).map(|r| &r.2));
            per_pos.get_mut(pos_name(p)).unwrap().add(&ps);
        }
    }
    Ok(EvalReport {
        datasets,
        all,
        excluded_from_all: exclude_from_all.to_vec(),
        per_pos,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketSizes {
    pub dataset: String,
    pub seen: usize,
    pub unseen: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitReport {
    pub overall: Score,
    pub seen: Score,
    pub unseen: Score,
    pub buckets: Vec<BucketSizes>,
    /// Instance ids per bucket, in input order.
    #[serde(skip)]
    pub seen_ids: Vec<String>,
    #[serde(skip)]
    pub unseen_ids: Vec<String>,
}

/// Splits test instances by whether any of their gold synsets is tagged
/// anywhere in the training corpora, then scores each bucket.
pub fn seen_unseen_split(
    sets: &[EvalSet<'_>],
    train: &[&AnnotatedCorpus],
    lex: &Lexicon,
) -> Result<SplitReport, ScoringError> {
    let seen_synsets: HashSet<SynsetId> = train
        .iter()
        .flat_map(|c| {
            c.gold
                .iter()
                .flat_map(|(_, keys)| keys.iter().filter_map(|k| lex.resolve_key(k)))
        })
        .collect();
    let (mut seen_rows, mut unseen_rows) = (Vec::new(), Vec::new());
    let (mut seen_ids, mut unseen_ids) = (Vec::new(), Vec::new());
    let mut buckets = Vec::new();
    let mut all_rows = Vec::new();
    for set in sets {
        let rows = per_instance(set, lex)?;
        let mut b = BucketSizes {
            dataset: set.corpus.name.clone(),
            seen: 0,
            unseen: 0,
        };
        for (id, _, outcome) in rows {
            let is_seen = set.corpus.gold.get(id).is_some_and(|keys| {
                keys.iter()
                    .any(|k| lex.resolve_key(k).is_some_and(|s| seen_synsets.contains(&s)))
            });
            if is_seen {
                b.seen += 1;
                seen_rows.push(outcome);
                seen_ids.push(id.to_string());
            } else {
                b.unseen += 1;
                unseen_rows.push(outcome);
                unseen_ids.push(id.to_string());
            }
            all_rows.push(outcome);
        }
        buckets.push(b);
    }
    Ok(SplitReport {
        overall: tally(all_rows.iter()),
        seen: tally(seen_rows.iter()),
        unseen: tally(unseen_rows.iter()),
        buckets,
        seen_ids,
        unseen_ids,
    })
}

/// Aligned text table: one row per system, dataset columns, then the four
/// POS columns and the overall F1.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut header = vec!["System".to_string()];
    header.extend(first.datasets.iter().map(|(n, _)| n.clone()));
    header.extend(["Noun", "Verb", "Adj", "Adv", "All"].map(String::from));
    let mut lines = vec![header];
    for (name, r) in rows {
        let mut line = vec![name.clone()];
        line.extend(r.datasets.iter().map(|(_, s)| format!("{:.1}", s.f1)));
        for p in Pos::COARSE {
            line.push(format!("{:.1}", r.per_pos[pos_name(p)].f1));
        }
        line.push(format!("{:.1}", r.all.f1));
        lines.push(line);
    }
    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            lines
                .iter()
                .map(|l| l.get(c).map_or(0, |s| s.chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in &lines {
        for (c, cell) in l.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push('\n');
    }
    out
}
