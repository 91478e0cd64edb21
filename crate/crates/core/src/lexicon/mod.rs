//! In-memory WordNet 3.0 sense inventory.
//!
//! [`parse_lexicon`] reads `data.{noun,verb,adj,adv}`, `index.{noun,verb,adj,adv}`
//! and `index.sense` from a database directory. The result maps every
//! `(lemma, pos)` pair to its synsets in canonical sense order, resolves sense
//! keys to synsets, and keeps the immediate hypernym edges of every synset.
//!
//! Adjective satellites (`s`) share the adjective offset space and are looked
//! up under [`Pos::Adj`].

mod format;
mod writer;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use format::{split_gloss, DataLine, DataWord, IndexLine, Pointer, SenseIndexLine, SenseKeyParts};
pub use writer::{write_database, SynsetDraft};

use crate::text;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file}:{line_no}: malformed line: {reason}")]
    MalformedLine {
        file: PathBuf,
        line_no: usize,
        reason: String,
    },
    #[error("synset {synset} points to missing synset {target}")]
    DanglingPointer { synset: SynsetId, target: SynsetId },
    #[error("{file}:{line_no}: reference to missing synset {target}")]
    DanglingReference {
        file: PathBuf,
        line_no: usize,
        target: SynsetId,
    },
    #[error("synset {synset} has a hypernym {target} of incompatible part of speech")]
    IncompatibleHypernym { synset: SynsetId, target: SynsetId },
    #[error("no sense key in index.sense for lemma {lemma:?} in synset {synset}")]
    MissingSenseKey { lemma: String, synset: SynsetId },
    #[error("unknown synset {0}")]
    UnknownSynset(SynsetId),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// WordNet part of speech, including the adjective satellite type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "n")]
    Noun,
    #[serde(rename = "v")]
    Verb,
    #[serde(rename = "a")]
    Adj,
    #[serde(rename = "s")]
    AdjSat,
    #[serde(rename = "r")]
    Adv,
}

impl Pos {
    /// The four lookup categories, in the order used for cross-POS fallbacks.
    pub const COARSE: [Pos; 4] = [Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv];

    pub fn code(self) -> char {
        match self {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
            Pos::Adj => 'a',
            Pos::AdjSat => 's',
            Pos::Adv => 'r',
        }
    }

    pub fn from_code(s: &str) -> Result<Self, String> {
        match s {
            "n" => Ok(Pos::Noun),
            "v" => Ok(Pos::Verb),
            "a" => Ok(Pos::Adj),
            "s" => Ok(Pos::AdjSat),
            "r" => Ok(Pos::Adv),
            other => Err(format!("unknown part of speech {other:?}")),
        }
    }

    /// Satellites collapse onto adjectives.
    pub fn coarse(self) -> Pos {
        match self {
            Pos::AdjSat => Pos::Adj,
            p => p,
        }
    }

    fn file_suffix(self) -> &'static str {
        match self.coarse() {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adv => "adv",
            _ => "adj",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Synset identifier: part of speech plus byte offset in its data file.
///
/// Equality, hashing and ordering use the coarse POS, so `a/01436003` and
/// `s/01436003` name the same synset.
#[derive(Clone, Copy, Debug)]
pub struct SynsetId {
    pub pos: Pos,
    pub offset: u32,
}

impl SynsetId {
    pub fn new(pos: Pos, offset: u32) -> Self {
        Self { pos, offset }
    }

    fn key(&self) -> (Pos, u32) {
        (self.pos.coarse(), self.offset)
    }
}

impl PartialEq for SynsetId {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for SynsetId {}

impl std::hash::Hash for SynsetId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for SynsetId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SynsetId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{:08}", self.pos.code(), self.offset)
    }
}

impl FromStr for SynsetId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (pos, offset) = s
            .split_once('/')
            .ok_or_else(|| format!("synset id {s:?} is not pos/offset"))?;
        Ok(Self::new(Pos::from_code(pos)?, format::parse_offset(offset)?))
    }
}

impl Serialize for SynsetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SynsetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synset {
    pub id: SynsetId,
    pub lex_filenum: u8,
    /// Lemmas as written in the data file, `_`-joined.
    pub lemmas: Vec<String>,
    /// Definition text, usage examples removed.
    pub gloss: String,
    pub examples: Vec<String>,
    /// Immediate hypernyms (`@`, and `@i` unless disabled).
    pub hypernyms: Vec<SynsetId>,
    /// Every pointer of the line, hypernyms included.
    pub pointers: Vec<Pointer>,
}

impl Synset {
    fn from_line(line: DataLine, opts: &LexiconOptions) -> Result<Self, String> {
        let (gloss, examples) = split_gloss(&line.gloss);
        if gloss.is_empty() {
            return Err("empty gloss".into());
        }
        let hypernyms = line
            .pointers
            .iter()
            .filter(|p| p.is_hypernym() || (opts.instance_hypernyms && p.is_instance_hypernym()))
            .map(|p| p.target)
            .collect();
        Ok(Self {
            id: SynsetId::new(line.ss_type, line.offset),
            lex_filenum: line.lex_filenum,
            lemmas: line.words.into_iter().map(|w| w.lemma).collect(),
            gloss,
            examples,
            hypernyms,
            pointers: line.pointers,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconOptions {
    /// Count `@i` instance-hypernym pointers as hypernyms.
    pub instance_hypernyms: bool,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        Self {
            instance_hypernyms: true,
        }
    }
}

/// The parsed sense inventory. Immutable once built.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    synsets: BTreeMap<SynsetId, Synset>,
    senses: BTreeMap<(String, Pos), Vec<SynsetId>>,
    sense_keys: BTreeMap<String, SynsetId>,
    keys_by_sense: HashMap<(String, SynsetId), String>,
}

fn read(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Lines that carry data: the license preamble is indented by two spaces.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.starts_with(' ') && !l.trim().is_empty())
}

pub fn parse_lexicon(dir: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    parse_lexicon_with(dir, &LexiconOptions::default())
}

pub fn parse_lexicon_with(dir: impl AsRef<Path>, opts: &LexiconOptions) -> Result<Lexicon, LexiconError> {
    let dir = dir.as_ref();
    let mut lex = Lexicon::default();

    for pos in Pos::COARSE {
        let path = dir.join(format!("data.{}", pos.file_suffix()));
        let text = read(&path)?;
        for (line_no, line) in content_lines(&text) {
            let malformed = |reason: String| LexiconError::MalformedLine {
                file: path.clone(),
                line_no,
                reason,
            };
            let parsed = DataLine::parse(line).map_err(malformed)?;
            if parsed.ss_type.coarse() != pos {
                return Err(malformed(format!(
                    "synset type {} in data.{}",
                    parsed.ss_type,
                    pos.file_suffix()
                )));
            }
            let synset = Synset::from_line(parsed, opts).map_err(malformed)?;
            if lex.synsets.insert(synset.id, synset.clone()).is_some() {
                return Err(malformed(format!("duplicate offset {}", synset.id)));
            }
        }
    }

    for synset in lex.synsets.values() {
        for p in &synset.pointers {
            if !lex.synsets.contains_key(&p.target) {
                return Err(LexiconError::DanglingPointer {
                    synset: synset.id,
                    target: p.target,
                });
            }
        }
        for h in &synset.hypernyms {
            if h.pos.coarse() != synset.id.pos.coarse() {
                return Err(LexiconError::IncompatibleHypernym {
                    synset: synset.id,
                    target: *h,
                });
            }
        }
    }

    for pos in Pos::COARSE {
        let path = dir.join(format!("index.{}", pos.file_suffix()));
        let text = read(&path)?;
        for (line_no, line) in content_lines(&text) {
            let entry = IndexLine::parse(line).map_err(|reason| LexiconError::MalformedLine {
                file: path.clone(),
                line_no,
                reason,
            })?;
            let mut ids = Vec::with_capacity(entry.offsets.len());
            for off in entry.offsets {
                let probe = SynsetId::new(pos, off);
                let id = lex
                    .synsets
                    .get(&probe)
                    .map(|s| s.id)
                    .ok_or(LexiconError::DanglingReference {
                        file: path.clone(),
                        line_no,
                        target: probe,
                    })?;
                ids.push(id);
            }
            lex.senses.insert((entry.lemma.to_lowercase(), pos), ids);
        }
    }

    let path = dir.join("index.sense");
    let text = read(&path)?;
    for (line_no, line) in content_lines(&text) {
        let entry = SenseIndexLine::parse(line).map_err(|reason| LexiconError::MalformedLine {
            file: path.clone(),
            line_no,
            reason,
        })?;
        let id = lex
            .synsets
            .get(&entry.synset())
            .map(|s| s.id)
            .ok_or(LexiconError::DanglingReference {
                file: path.clone(),
                line_no,
                target: entry.synset(),
            })?;
        lex.keys_by_sense
            .insert((entry.parts.lemma.to_lowercase(), id), entry.key.clone());
        lex.sense_keys.insert(entry.key, id);
    }

    for ((lemma, _), ids) in &lex.senses {
        for id in ids {
            if !lex.keys_by_sense.contains_key(&(lemma.clone(), *id)) {
                return Err(LexiconError::MissingSenseKey {
                    lemma: lemma.clone(),
                    synset: *id,
                });
            }
        }
    }
    Ok(lex)
}

impl Lexicon {
    pub fn synset(&self, id: &SynsetId) -> Option<&Synset> {
        self.synsets.get(id)
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    /// Every `(lemma, pos)` key with its synset ids in sense order.
    pub fn sense_entries(&self) -> impl Iterator<Item = (&str, Pos, &[SynsetId])> {
        self.senses
            .iter()
            .map(|((lemma, pos), ids)| (lemma.as_str(), *pos, ids.as_slice()))
    }

    /// Synset ids for a lemma in canonical sense order; empty when unknown.
    pub fn candidate_ids(&self, lemma: &str, pos: Pos) -> &[SynsetId] {
        self.senses
            .get(&(text::lookup_lemma(lemma), pos.coarse()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn candidates(&self, lemma: &str, pos: Pos) -> Vec<&Synset> {
        self.candidate_ids(lemma, pos)
            .iter()
            .map(|id| &self.synsets[id])
            .collect()
    }

    /// First sense of the lemma, trying noun, verb, adjective, adverb in turn.
    pub fn first_sense_any_pos(&self, lemma: &str) -> Option<&Synset> {
        Pos::COARSE
            .iter()
            .find_map(|p| self.candidate_ids(lemma, *p).first())
            .map(|id| &self.synsets[id])
    }

    pub fn immediate_hypernyms(&self, id: &SynsetId) -> Result<Vec<&Synset>, LexiconError> {
        let synset = self.synset(id).ok_or(LexiconError::UnknownSynset(*id))?;
        Ok(synset.hypernyms.iter().map(|h| &self.synsets[h]).collect())
    }

    pub fn resolve_key(&self, raw: &str) -> Option<SynsetId> {
        self.sense_keys.get(raw).copied()
    }

    pub fn sense_keys(&self) -> impl Iterator<Item = (&str, SynsetId)> {
        self.sense_keys.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// The sense key naming `id` as a sense of `lemma`.
    pub fn sense_key(&self, lemma: &str, id: &SynsetId) -> Option<&str> {
        self.keys_by_sense
            .get(&(text::lookup_lemma(lemma), *id))
            .map(String::as_str)
    }

    /// Returns a hypernym cycle among synsets of `pos`, if one exists.
    pub fn find_hypernym_cycle(&self, pos: Pos) -> Option<Vec<SynsetId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: HashMap<SynsetId, Mark> = HashMap::new();
        for start in self.synsets.keys().filter(|id| id.pos.coarse() == pos.coarse()) {
            if marks.contains_key(start) {
                continue;
            }
            // Iterative DFS: (node, next child index), plus the current path.
            let mut stack = vec![(*start, 0usize)];
            let mut path = vec![*start];
            marks.insert(*start, Mark::Open);
            while let Some((node, child)) = stack.last_mut() {
                let hyps = &self.synsets[node].hypernyms;
                if *child < hyps.len() {
                    let next = hyps[*child];
                    *child += 1;
                    match marks.get(&next) {
                        Some(Mark::Open) => {
                            let from = path.iter().position(|p| *p == next).unwrap_or(0);
                            return Some(path[from..].to_vec());
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next, Mark::Open);
                            stack.push((next, 0));
                            path.push(next);
                        }
                    }
                } else {
                    marks.insert(*node, Mark::Done);
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }
}
