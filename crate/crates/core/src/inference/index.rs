use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::datasets::weak_supervise_gloss;
use crate::encoder::{Embedding, EncoderModel};
use crate::lexicon::{Lexicon, Pos, SynsetId};

const MAGIC: &[u8; 8] = b"WSDIDX\0\x01";
const VERSION: u32 = 1;

/// Pre-computed gloss embeddings for every candidate synset of a
/// `(lemma, coarse POS)` key, in canonical sense order.
#[derive(Clone, Debug, PartialEq)]
pub struct GlossIndex {
    fingerprint: String,
    dim: usize,
    gloss_separator: String,
    entries: BTreeMap<(String, Pos), Vec<(SynsetId, Embedding)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    fingerprint: String,
    dim: usize,
    gloss_separator: String,
    key_count: usize,
    keys: Vec<KeyHeader>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyHeader {
    lemma: String,
    pos: Pos,
    synsets: Vec<SynsetId>,
}

impl GlossIndex {
    /// Indexes every sense entry of the lexicon.
    pub fn build(model: &EncoderModel, lex: &Lexicon, gloss_separator: &str) -> Result<Self, InferenceError> {
        let keys = lex.sense_entries().map(|(l, p, _)| (l.to_string(), p)).collect();
        Self::build_for(model, lex, gloss_separator, &keys)
    }

    /// Indexes only the given keys; keys unknown to the lexicon are skipped.
    pub fn build_for(
        model: &EncoderModel,
        lex: &Lexicon,
        gloss_separator: &str,
        keys: &BTreeSet<(String, Pos)>,
    ) -> Result<Self, InferenceError> {
        let keys: Vec<&(String, Pos)> = keys
            .iter()
            .filter(|(l, p)| !lex.candidate_ids(l, *p).is_empty())
            .collect();
        let encoded = keys
            .par_iter()
            .map(|(lemma, pos)| {
                let list = lex
                    .candidates(lemma, *pos)
                    .into_iter()
                    .map(|s| {
                        let text = weak_supervise_gloss(lemma, &s.gloss, gloss_separator)?;
                        Ok((s.id, model.encode_text(&text)?))
                    })
                    .collect::<Result<Vec<_>, InferenceError>>()?;
                Ok(((lemma.clone(), *pos), list))
            })
            .collect::<Result<Vec<_>, InferenceError>>()?;
        Ok(Self {
            fingerprint: model.fingerprint(),
            dim: model.dim(),
            gloss_separator: gloss_separator.to_string(),
            entries: encoded.into_iter().collect(),
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gloss_separator(&self) -> &str {
        &self.gloss_separator
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, lemma: &str, pos: Pos) -> &[(SynsetId, Embedding)] {
        self.entries
            .get(&(lemma.to_string(), pos.coarse()))
            .map_or(&[], Vec::as_slice)
    }

    /// Fails unless the index was built by exactly this model.
    pub fn check_model(&self, model: &EncoderModel) -> Result<(), InferenceError> {
        let actual = model.fingerprint();
        if actual == self.fingerprint {
            Ok(())
        } else {
            Err(InferenceError::FingerprintMismatch {
                index: self.fingerprint.clone(),
                model: actual,
            })
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            version: VERSION,
            fingerprint: self.fingerprint.clone(),
            dim: self.dim,
            gloss_separator: self.gloss_separator.clone(),
            key_count: self.entries.len(),
            keys: self
                .entries
                .iter()
                .map(|((lemma, pos), list)| KeyHeader {
                    lemma: lemma.clone(),
                    pos: *pos,
                    synsets: list.iter().map(|(id, _)| *id).collect(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for list in self.entries.values() {
            for (_, e) in list {
                for x in e.iter() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, InferenceError> {
        let bad = |m: &str| InferenceError::BadIndex(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(&e.to_string()))?;
        if header.version != VERSION || header.key_count != header.keys.len() {
            return Err(bad("inconsistent header"));
        }
        let total: usize = header.keys.iter().map(|k| k.synsets.len()).sum();
        let data = &body[hlen..];
        if data.len() != total * header.dim * 8 {
            return Err(bad("embedding block size does not match the header"));
        }
        let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut entries = BTreeMap::new();
        for k in header.keys {
            let list = k
                .synsets
                .into_iter()
                .map(|id| (id, Embedding(values.by_ref().take(header.dim).collect())))
                .collect();
            entries.insert((k.lemma, k.pos), list);
        }
        Ok(Self {
            fingerprint: header.fingerprint,
            dim: header.dim,
            gloss_separator: header.gloss_separator,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), InferenceError> {
        fs::write(path, self.to_bytes()).map_err(|source| InferenceError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, InferenceError> {
        let bytes = fs::read(path).map_err(|source| InferenceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
