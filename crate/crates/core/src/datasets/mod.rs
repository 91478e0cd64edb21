//! Weakly supervised training data.
//!
//! Context sentences get marker tokens around the target word; glosses get
//! the sense lemma prepended, followed by a separator token. Three training
//! sets are built from annotated corpora: context–gloss pairs,
//! context–hypernym-gloss pairs and (context, gold gloss, other gloss)
//! triplets.

mod build;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::lexicon::SynsetId;
use crate::text::{self, CLOSE_MARKER, GLOSS_SEPARATOR, OPEN_MARKER};

pub use build::{build_all, build_context_gloss, build_context_hypernym, build_triplets, BuildReport, BuildReports};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("token {index} of sentence {sentence} is not a tagged instance")]
    NotAnInstance { sentence: String, index: usize },
    #[error("empty lemma")]
    EmptyLemma,
    #[error("empty gloss for lemma {0:?}")]
    EmptyGloss(String),
    #[error("oversample ratio must be at least 1")]
    BadRatio,
    #[error("{path}:{line_no}: malformed row")]
    MalformedRow { path: PathBuf, line_no: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerStyle {
    /// `«t»` / `«/t»` vocabulary items.
    #[default]
    Dedicated,
    /// Literal double quotes on both sides.
    Quote,
}

impl MarkerStyle {
    fn tokens(self) -> (&'static str, &'static str) {
        match self {
            MarkerStyle::Dedicated => (OPEN_MARKER, CLOSE_MARKER),
            MarkerStyle::Quote => ("\"", "\""),
        }
    }
}

/// How targets and glosses are marked; shared by training and inference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakConfig {
    pub marker_style: MarkerStyle,
    pub gloss_separator: String,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            marker_style: MarkerStyle::Dedicated,
            gloss_separator: GLOSS_SEPARATOR.to_string(),
        }
    }
}

/// A token sequence ready for the encoder. Tokens never contain whitespace.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeakText {
    pub tokens: Vec<String>,
}

impl WeakText {
    /// Space-joined form used in dataset files.
    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn parse(rendered: &str) -> Self {
        Self {
            tokens: rendered
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }
}

impl fmt::Display for WeakText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Marks `target` in `sentence` without checking that it is a tagged instance.
pub fn mark_target(sentence: &Sentence, target: usize, style: MarkerStyle) -> WeakText {
    let (open, close) = style.tokens();
    let mut tokens = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        let words = text::split_words(&text::lemma_to_words(&tok.surface));
        if i == target {
            tokens.push(open.to_string());
            tokens.extend(words);
            tokens.push(close.to_string());
        } else {
            tokens.extend(words);
        }
    }
    WeakText { tokens }
}

/// Context text with markers around the tagged target token.
pub fn weak_supervise_context(
    sentence: &Sentence,
    target: usize,
    style: MarkerStyle,
) -> Result<WeakText, DatasetError> {
    match sentence.tokens.get(target) {
        Some(t) if t.instance_id.is_some() => Ok(mark_target(sentence, target, style)),
        _ => Err(DatasetError::NotAnInstance {
            sentence: sentence.sent_id.clone(),
            index: target,
        }),
    }
}

/// Gloss text: lemma words, the separator, then the definition.
pub fn weak_supervise_gloss(lemma: &str, gloss: &str, separator: &str) -> Result<WeakText, DatasetError> {
    let lemma_tokens = text::split_words(&text::lemma_to_words(lemma));
    if lemma_tokens.is_empty() {
        return Err(DatasetError::EmptyLemma);
    }
    let gloss_tokens = text::split_words(gloss);
    if gloss_tokens.is_empty() {
        return Err(DatasetError::EmptyGloss(lemma.to_string()));
    }
    let mut tokens = lemma_tokens;
    tokens.push(separator.to_string());
    tokens.extend(gloss_tokens);
    Ok(WeakText { tokens })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ContextGloss,
    ContextHypernym,
    GlossGloss,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::ContextGloss => "context_gloss",
            Task::ContextHypernym => "context_hypernym",
            Task::GlossGloss => "gloss_gloss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "context_gloss" => Some(Task::ContextGloss),
            "context_hypernym" => Some(Task::ContextHypernym),
            "gloss_gloss" => Some(Task::GlossGloss),
            _ => None,
        }
    }
}

/// Where a built row came from; absent for rows read back from files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowOrigin {
    pub instance_id: String,
    /// Synset whose gloss is the second text (the positive, for triplets).
    pub synset: SynsetId,
    /// Negative synset of a triplet.
    pub other: Option<SynsetId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingPair {
    pub task: Task,
    pub label: u8,
    pub a: WeakText,
    pub b: WeakText,
    pub origin: Option<RowOrigin>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingTriplet {
    pub anchor: WeakText,
    pub positive: WeakText,
    pub negative: WeakText,
    pub origin: Option<RowOrigin>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrainingRows {
    Pairs(Vec<TrainingPair>),
    Triplets(Vec<TrainingTriplet>),
}

impl TrainingRows {
    pub fn len(&self) -> usize {
        match self {
            TrainingRows::Pairs(p) => p.len(),
            TrainingRows::Triplets(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every text in the rows, in row order.
    pub fn texts(&self) -> Vec<&WeakText> {
        match self {
            TrainingRows::Pairs(p) => p.iter().flat_map(|r| [&r.a, &r.b]).collect(),
            TrainingRows::Triplets(t) => t.iter().flat_map(|r| [&r.anchor, &r.positive, &r.negative]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub oversample_ratio: usize,
    pub gloss_gloss: bool,
    pub dedup_hypernyms: bool,
    pub marker_style: MarkerStyle,
    pub gloss_separator: String,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn weak(&self) -> WeakConfig {
        WeakConfig {
            marker_style: self.marker_style,
            gloss_separator: self.gloss_separator.clone(),
        }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            oversample_ratio: 3,
            gloss_gloss: true,
            dedup_hypernyms: false,
            marker_style: MarkerStyle::Dedicated,
            gloss_separator: GLOSS_SEPARATOR.to_string(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub name: String,
    pub rows: TrainingRows,
    /// Names of the source corpora.
    pub provenance: Vec<String>,
    pub config: DatasetConfig,
}

impl TrainingSet {
    pub fn pairs(&self) -> &[TrainingPair] {
        match &self.rows {
            TrainingRows::Pairs(p) => p,
            TrainingRows::Triplets(_) => &[],
        }
    }

    pub fn triplets(&self) -> &[TrainingTriplet] {
        match &self.rows {
            TrainingRows::Triplets(t) => t,
            TrainingRows::Pairs(_) => &[],
        }
    }

    /// Writes one tab-separated row per line.
    pub fn write_tsv(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        match &self.rows {
            TrainingRows::Pairs(rows) => {
                for r in rows {
                    writeln!(w, "{}\t{}\t{}\t{}", r.task.as_str(), r.label, r.a, r.b).map_err(io)?;
                }
            }
            TrainingRows::Triplets(rows) => {
                for r in rows {
                    writeln!(w, "{}\t{}\t{}", r.anchor, r.positive, r.negative).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }

    /// Reads a dataset file; four columns are pairs, three are triplets.
    pub fn read_tsv(path: &Path, name: &str) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |line_no| DatasetError::MalformedRow {
            path: path.to_path_buf(),
            line_no,
        };
        let mut pairs = Vec::new();
        let mut triplets = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                [task, label, a, b] if triplets.is_empty() => {
                    let task = Task::parse(task).ok_or_else(|| bad(i + 1))?;
                    let label = match *label {
                        "0" => 0,
                        "1" => 1,
                        _ => return Err(bad(i + 1)),
                    };
                    pairs.push(TrainingPair {
                        task,
                        label,
                        a: WeakText::parse(a),
                        b: WeakText::parse(b),
                        origin: None,
                    });
                }
                [a, p, n] if pairs.is_empty() => triplets.push(TrainingTriplet {
                    anchor: WeakText::parse(a),
                    positive: WeakText::parse(p),
                    negative: WeakText::parse(n),
                    origin: None,
                }),
                _ => return Err(bad(i + 1)),
            }
        }
        let rows = if triplets.is_empty() {
            TrainingRows::Pairs(pairs)
        } else {
            TrainingRows::Triplets(triplets)
        };
        Ok(Self {
            name: name.to_string(),
            rows,
            provenance: Vec::new(),
            config: DatasetConfig::default(),
        })
    }
}
