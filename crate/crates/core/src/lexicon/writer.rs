use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use super::format::{DataLine, DataWord, IndexLine, Pointer, SenseIndexLine, SenseKeyParts};
use super::{Pos, SynsetId};

/// A synset to be written; hypernyms refer to other drafts by index.
///
/// Sense order for a lemma follows draft order.
#[derive(Clone, Debug)]
pub struct SynsetDraft {
    pub pos: Pos,
    pub lex_filenum: u8,
    pub lemmas: Vec<String>,
    /// Raw gloss, definition optionally followed by `; "example"` segments.
    pub gloss: String,
    pub hypernyms: Vec<usize>,
    pub instance_hypernyms: Vec<usize>,
}

/// Writes `data.*`, `index.*` and `index.sense` for the drafts into `dir`.
///
/// Offsets are real byte offsets into the written data files. Reverse `~`/`~i`
/// pointers are emitted for every hypernym edge.
pub fn write_database(dir: &Path, drafts: &[SynsetDraft]) -> io::Result<Vec<SynsetId>> {
    let invalid = |msg: String| io::Error::new(io::ErrorKind::InvalidInput, msg);
    for (i, d) in drafts.iter().enumerate() {
        if d.lemmas.is_empty() || d.gloss.trim().is_empty() {
            return Err(invalid(format!("draft {i} needs lemmas and a gloss")));
        }
        for &h in d.hypernyms.iter().chain(&d.instance_hypernyms) {
            if h >= drafts.len() {
                return Err(invalid(format!("draft {i} points past the end")));
            }
        }
    }

    // lex_id counters per (lemma, file, lex_filenum).
    let mut counters: BTreeMap<(String, Pos, u8), u8> = BTreeMap::new();
    let words: Vec<Vec<DataWord>> = drafts
        .iter()
        .map(|d| {
            d.lemmas
                .iter()
                .map(|l| {
                    let c = counters
                        .entry((l.to_lowercase(), d.pos.coarse(), d.lex_filenum))
                        .or_insert(0);
                    let lex_id = *c;
                    *c = c.saturating_add(1);
                    DataWord {
                        lemma: l.clone(),
                        lex_id,
                        marker: None,
                    }
                })
                .collect()
        })
        .collect();

    let mut pointers: Vec<Vec<(String, usize)>> = vec![Vec::new(); drafts.len()];
    for (i, d) in drafts.iter().enumerate() {
        for &h in &d.hypernyms {
            pointers[i].push(("@".into(), h));
            pointers[h].push(("~".into(), i));
        }
        for &h in &d.instance_hypernyms {
            pointers[i].push(("@i".into(), h));
            pointers[h].push(("~i".into(), i));
        }
    }

    let line_for = |i: usize, offsets: &[u32]| DataLine {
        offset: offsets[i],
        lex_filenum: drafts[i].lex_filenum,
        ss_type: drafts[i].pos,
        words: words[i].clone(),
        pointers: pointers[i]
            .iter()
            .map(|(sym, t)| Pointer {
                symbol: sym.clone(),
                target: SynsetId::new(drafts[*t].pos, offsets[*t]),
                source: 0,
                target_word: 0,
            })
            .collect(),
        frames: Vec::new(),
        gloss: drafts[i].gloss.trim().to_string(),
    };

    // Line lengths do not depend on offset values (fixed 8-digit fields).
    let zeros = vec![0u32; drafts.len()];
    let mut offsets = vec![0u32; drafts.len()];
    for pos in Pos::COARSE {
        let mut at = 0u32;
        for i in (0..drafts.len()).filter(|&i| drafts[i].pos.coarse() == pos) {
            offsets[i] = at;
            at += line_for(i, &zeros).render().len() as u32 + 1;
        }
    }
    let ids: Vec<SynsetId> = drafts
        .iter()
        .zip(&offsets)
        .map(|(d, &o)| SynsetId::new(d.pos, o))
        .collect();

    let mut senses: BTreeMap<(String, Pos), Vec<usize>> = BTreeMap::new();
    for (i, d) in drafts.iter().enumerate() {
        for l in &d.lemmas {
            let list = senses.entry((l.to_lowercase(), d.pos.coarse())).or_default();
            if !list.contains(&i) {
                list.push(i);
            }
        }
    }

    let mut sense_lines = Vec::new();
    for pos in Pos::COARSE {
        let mut data = String::new();
        for i in (0..drafts.len()).filter(|&i| drafts[i].pos.coarse() == pos) {
            data.push_str(&line_for(i, &offsets).render());
            data.push('\n');
        }
        let mut index = String::new();
        for ((lemma, p), list) in senses.iter().filter(|((_, p), _)| *p == pos) {
            let symbols: BTreeSet<&str> = list
                .iter()
                .flat_map(|&i| pointers[i].iter().map(|(s, _)| s.as_str()))
                .collect();
            let line = IndexLine {
                lemma: lemma.clone(),
                pos: *p,
                ptr_symbols: symbols.into_iter().map(str::to_string).collect(),
                tagsense_cnt: 0,
                offsets: list.iter().map(|&i| offsets[i]).collect(),
            };
            index.push_str(&line.render());
            index.push('\n');
            for (rank, &i) in list.iter().enumerate() {
                let word = words[i]
                    .iter()
                    .find(|w| w.lemma.to_lowercase() == *lemma)
                    .expect("lemma listed for its own synset");
                let key = format!(
                    "{}%{}:{:02}:{:02}::",
                    lemma,
                    SenseKeyParts::ss_digit(drafts[i].pos),
                    drafts[i].lex_filenum,
                    word.lex_id
                );
                sense_lines.push(SenseIndexLine {
                    parts: SenseKeyParts::parse(&key).map_err(invalid)?,
                    key,
                    offset: offsets[i],
                    sense_number: rank as u32 + 1,
                    tag_cnt: 0,
                });
            }
        }
        fs::write(dir.join(format!("data.{}", pos.file_suffix())), data)?;
        fs::write(dir.join(format!("index.{}", pos.file_suffix())), index)?;
    }
    sense_lines.sort_by(|a, b| a.key.cmp(&b.key));
    let mut sense = String::new();
    for l in &sense_lines {
        sense.push_str(&l.render());
        sense.push('\n');
    }
    fs::write(dir.join("index.sense"), sense)?;
    Ok(ids)
}
