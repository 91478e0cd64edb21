//! Sense-annotated corpora in the unified evaluation-framework format.
//!
//! The XML file holds `<text>` documents of `<sentence>` elements, whose
//! children are plain `<wf>` tokens or sense-tagged `<instance>` tokens. Gold
//! labels live in a separate key file with one `instance_id key [key ...]`
//! line per instance.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, Pos, SynsetId};
use crate::text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: malformed XML: {reason}")]
    MalformedXml { path: PathBuf, reason: String },
    #[error("{path}:{line_no}: malformed key line")]
    MalformedKeyLine { path: PathBuf, line_no: usize },
    #[error("instance {0} has no gold key")]
    MissingGold(String),
    #[error("key file names unknown instance {0}")]
    UnknownInstance(String),
    #[error("instance id {0} occurs twice")]
    DuplicateInstance(String),
    #[error("sentence {0} has no tokens")]
    EmptySentence(String),
    #[error("sense key {0} does not resolve in the lexicon")]
    UnresolvableKey(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse part-of-speech tag of a corpus token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenPos {
    Noun,
    Verb,
    Adj,
    Adv,
    Other(String),
}

impl TokenPos {
    pub fn from_tag(tag: &str) -> Self {
        match tag {
            "NOUN" => TokenPos::Noun,
            "VERB" => TokenPos::Verb,
            "ADJ" => TokenPos::Adj,
            "ADV" => TokenPos::Adv,
            other => TokenPos::Other(other.to_string()),
        }
    }

    pub fn tag(&self) -> &str {
        match self {
            TokenPos::Noun => "NOUN",
            TokenPos::Verb => "VERB",
            TokenPos::Adj => "ADJ",
            TokenPos::Adv => "ADV",
            TokenPos::Other(t) => t,
        }
    }

    /// Lexicon category; satellites are covered by `Adj`.
    pub fn lexicon_pos(&self) -> Option<Pos> {
        match self {
            TokenPos::Noun => Some(Pos::Noun),
            TokenPos::Verb => Some(Pos::Verb),
            TokenPos::Adj => Some(Pos::Adj),
            TokenPos::Adv => Some(Pos::Adv),
            TokenPos::Other(_) => None,
        }
    }

    pub fn from_lexicon(pos: Pos) -> Self {
        match pos.coarse() {
            Pos::Noun => TokenPos::Noun,
            Pos::Verb => TokenPos::Verb,
            Pos::Adv => TokenPos::Adv,
            _ => TokenPos::Adj,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: TokenPos,
    pub instance_id: Option<String>,
}

impl Token {
    /// Lemma normalized for lexicon lookup (`_`-joined, lowercase).
    pub fn lookup_lemma(&self) -> String {
        text::lookup_lemma(&self.lemma)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub sent_id: String,
    pub tokens: Vec<Token>,
}

/// Gold sense keys per instance id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldKeys(BTreeMap<String, BTreeSet<String>>);

impl GoldKeys {
    pub fn get(&self, instance_id: &str) -> Option<&BTreeSet<String>> {
        self.0.get(instance_id)
    }

    pub fn insert(&mut self, instance_id: impl Into<String>, keys: impl IntoIterator<Item = String>) {
        self.0.entry(instance_id.into()).or_default().extend(keys);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Resolves every gold key of the instance to its synset.
    pub fn resolve(&self, instance_id: &str, lex: &Lexicon) -> Result<Vec<SynsetId>, CorpusError> {
        let keys = self
            .get(instance_id)
            .ok_or_else(|| CorpusError::MissingGold(instance_id.to_string()))?;
        let mut out = Vec::with_capacity(keys.len());
        for k in keys {
            let id = lex
                .resolve_key(k)
                .ok_or_else(|| CorpusError::UnresolvableKey(k.clone()))?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedCorpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
    pub gold: GoldKeys,
}

/// A tagged token located inside its sentence.
#[derive(Clone, Copy, Debug)]
pub struct InstanceRef<'a> {
    pub sentence: &'a Sentence,
    pub index: usize,
    pub id: &'a str,
}

impl<'a> InstanceRef<'a> {
    pub fn token(&self) -> &'a Token {
        &self.sentence.tokens[self.index]
    }
}

impl AnnotatedCorpus {
    /// Every tagged instance, in document order.
    pub fn instances(&self) -> Vec<InstanceRef<'_>> {
        self.sentences
            .iter()
            .flat_map(|s| {
                s.tokens.iter().enumerate().filter_map(move |(i, t)| {
                    t.instance_id.as_deref().map(|id| InstanceRef {
                        sentence: s,
                        index: i,
                        id,
                    })
                })
            })
            .collect()
    }

    /// Renders the corpus in framework XML.
    pub fn to_xml(&self) -> String {
        use quick_xml::escape::escape;
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n");
        let _ = writeln!(out, "<corpus lang=\"en\" source=\"{}\">", escape(&self.name));
        let mut open_doc: Option<&str> = None;
        for s in &self.sentences {
            if open_doc != Some(s.doc_id.as_str()) {
                if open_doc.is_some() {
                    out.push_str("</text>\n");
                }
                let _ = writeln!(out, "<text id=\"{}\">", escape(&s.doc_id));
                open_doc = Some(&s.doc_id);
            }
            let _ = writeln!(out, "<sentence id=\"{}\">", escape(&s.sent_id));
            for t in &s.tokens {
                match &t.instance_id {
                    Some(id) => {
                        let _ = writeln!(
                            out,
                            "<instance id=\"{}\" lemma=\"{}\" pos=\"{}\">{}</instance>",
                            escape(id),
                            escape(&t.lemma),
                            escape(t.pos.tag()),
                            escape(&t.surface)
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "<wf lemma=\"{}\" pos=\"{}\">{}</wf>",
                            escape(&t.lemma),
                            escape(t.pos.tag()),
                            escape(&t.surface)
                        );
                    }
                }
            }
            out.push_str("</sentence>\n");
        }
        if open_doc.is_some() {
            out.push_str("</text>\n");
        }
        out.push_str("</corpus>\n");
        out
    }

    /// Renders the gold key file, in document order.
    pub fn to_key_file(&self) -> String {
        let mut out = String::new();
        for inst in self.instances() {
            if let Some(keys) = self.gold.get(inst.id) {
                out.push_str(inst.id);
                for k in keys {
                    out.push(' ');
                    out.push_str(k);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, xml_path: &Path, key_path: &Path) -> std::io::Result<()> {
        fs::write(xml_path, self.to_xml())?;
        fs::write(key_path, self.to_key_file())
    }
}

fn corpus_name(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .unwrap_or("corpus")
        .to_string()
}

/// Parses a framework XML file and, when given, its gold key file.
///
/// The corpus name is the XML file name up to the first `.`.
pub fn parse_corpus(xml_path: &Path, key_path: Option<&Path>) -> Result<AnnotatedCorpus, CorpusError> {
    let xml = fs::read_to_string(xml_path).map_err(|source| CorpusError::Io {
        path: xml_path.to_path_buf(),
        source,
    })?;
    let sentences = parse_xml(&xml).map_err(|reason| CorpusError::MalformedXml {
        path: xml_path.to_path_buf(),
        reason,
    })?;
    let mut corpus = AnnotatedCorpus {
        name: corpus_name(xml_path),
        sentences,
        gold: GoldKeys::default(),
    };
    let mut seen = HashSet::new();
    for inst in corpus.instances() {
        if !seen.insert(inst.id) {
            return Err(CorpusError::DuplicateInstance(inst.id.to_string()));
        }
    }
    if let Some(key_path) = key_path {
        let text = fs::read_to_string(key_path).map_err(|source| CorpusError::Io {
            path: key_path.to_path_buf(),
            source,
        })?;
        let gold = parse_keys(&text, key_path)?;
        for (id, _) in gold.iter() {
            if !seen.contains(id) {
                return Err(CorpusError::UnknownInstance(id.to_string()));
            }
        }
        for id in &seen {
            if gold.get(id).is_none() {
                return Err(CorpusError::MissingGold(id.to_string()));
            }
        }
        corpus.gold = gold;
    }
    Ok(corpus)
}

/// Parses key-file text: `instance_id key1 [key2 ...]` per line.
pub fn parse_keys(text: &str, path: &Path) -> Result<GoldKeys, CorpusError> {
    let mut gold = GoldKeys::default();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let keys: Vec<String> = fields.map(str::to_string).collect();
        if keys.is_empty() || gold.get(id).is_some() {
            return Err(CorpusError::MalformedKeyLine {
                path: path.to_path_buf(),
                line_no: i + 1,
            });
        }
        gold.insert(id, keys);
    }
    Ok(gold)
}

fn attrs(e: &BytesStart<'_>) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| err.to_string())?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|err| err.to_string())?.into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

struct OpenToken {
    attrs: BTreeMap<String, String>,
    instance: bool,
    surface: String,
}

fn parse_xml(xml: &str) -> Result<Vec<Sentence>, String> {
    let mut reader = Reader::from_str(xml);
    let mut sentences = Vec::new();
    let mut doc_id = String::new();
    let mut current: Option<Sentence> = None;
    let mut token: Option<OpenToken> = None;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| format!("at byte {}: {e}", reader.buffer_position()))?;
        match event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"corpus" => {}
            Event::Start(e) if e.name().as_ref() == b"text" => {
                doc_id = attrs(&e)?.remove("id").unwrap_or_default();
            }
            Event::Start(e) if e.name().as_ref() == b"sentence" => {
                if current.is_some() {
                    return Err("nested <sentence>".into());
                }
                let id = attrs(&e)?.remove("id").ok_or("<sentence> without id")?;
                current = Some(Sentence {
                    doc_id: doc_id.clone(),
                    sent_id: id,
                    tokens: Vec::new(),
                });
            }
            Event::Start(e) if matches!(e.name().as_ref(), b"wf" | b"instance") => {
                if current.is_none() || token.is_some() {
                    return Err("token outside a sentence".into());
                }
                token = Some(OpenToken {
                    attrs: attrs(&e)?,
                    instance: e.name().as_ref() == b"instance",
                    surface: String::new(),
                });
            }
            Event::Text(t) => {
                let t = t.unescape().map_err(|e| e.to_string())?;
                if let Some(tok) = token.as_mut() {
                    tok.surface.push_str(&t);
                } else if !t.trim().is_empty() {
                    return Err(format!("stray text {:?}", t.trim()));
                }
            }
            Event::End(e) if matches!(e.name().as_ref(), b"wf" | b"instance") => {
                let tok = token.take().ok_or("unbalanced token end")?;
                let sentence = current.as_mut().ok_or("token outside a sentence")?;
                sentence.tokens.push(finish_token(tok)?);
            }
            Event::End(e) if e.name().as_ref() == b"sentence" => {
                let s = current.take().ok_or("unbalanced </sentence>")?;
                if s.tokens.is_empty() {
                    return Err(format!("sentence {} has no tokens", s.sent_id));
                }
                sentences.push(s);
            }
            Event::End(e) if matches!(e.name().as_ref(), b"text" | b"corpus") => {}
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
            other => return Err(format!("unexpected element {other:?}")),
        }
    }
    if current.is_some() || token.is_some() {
        return Err("unexpected end of file".into());
    }
    Ok(sentences)
}

fn finish_token(mut tok: OpenToken) -> Result<Token, String> {
    let surface = tok.surface.trim().to_string();
    let lemma = tok.attrs.remove("lemma").unwrap_or_else(|| surface.clone());
    let pos = TokenPos::from_tag(tok.attrs.get("pos").map(String::as_str).unwrap_or("X"));
    let instance_id = if tok.instance {
        Some(tok.attrs.remove("id").ok_or("<instance> without id")?)
    } else {
        None
    };
    Ok(Token {
        surface,
        lemma,
        pos,
        instance_id,
    })
}
