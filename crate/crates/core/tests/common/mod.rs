#![allow(dead_code)]

pub mod gradcheck;
pub mod toy;

use std::path::Path;

use wsd_core::corpus::{AnnotatedCorpus, GoldKeys, Sentence, Token, TokenPos};
use wsd_core::lexicon::{parse_lexicon, write_database, Lexicon, Pos, SynsetDraft, SynsetId};

/// Lemma `poly{n}` has `n` noun senses for n in 1..=6; `twin` has two senses
/// with identical glosses; `run` has three verb senses and one noun sense.
pub struct Fixture {
    pub lex: Lexicon,
    pub senses: Vec<(String, Pos, Vec<SynsetId>)>,
}

pub fn fixture_lexicon(dir: &Path) -> Fixture {
    let mut drafts = vec![
        SynsetDraft {
            pos: Pos::Noun,
            lex_filenum: 3,
            lemmas: vec!["entity".into()],
            gloss: "that which exists".into(),
            hypernyms: vec![],
            instance_hypernyms: vec![],
        },
        SynsetDraft {
            pos: Pos::Verb,
            lex_filenum: 29,
            lemmas: vec!["act".into()],
            gloss: "do something".into(),
            hypernyms: vec![],
            instance_hypernyms: vec![],
        },
    ];
    let mut groups: Vec<(String, Pos, Vec<usize>)> = Vec::new();
    let mut add = |lemma: &str, pos: Pos, glosses: Vec<String>, drafts: &mut Vec<SynsetDraft>| {
        let root = if pos == Pos::Noun { 0 } else { 1 };
        let mut idx = Vec::new();
        for (k, g) in glosses.into_iter().enumerate() {
            // Every other sense gets its own intermediate hypernym.
            let parent = if k % 2 == 1 {
                drafts.push(SynsetDraft {
                    pos,
                    lex_filenum: if pos == Pos::Noun { 5 } else { 30 },
                    lemmas: vec![format!("{lemma}_kind{k}")],
                    gloss: format!("a general kind number {k} of {lemma}"),
                    hypernyms: vec![root],
                    instance_hypernyms: vec![],
                });
                drafts.len() - 1
            } else {
                root
            };
            drafts.push(SynsetDraft {
                pos,
                lex_filenum: if pos == Pos::Noun { 6 } else { 31 },
                lemmas: vec![lemma.to_string()],
                gloss: g,
                hypernyms: vec![parent],
                instance_hypernyms: vec![],
            });
            idx.push(drafts.len() - 1);
        }
        groups.push((lemma.to_string(), pos, idx));
    };
    for n in 1..=6 {
        let glosses = (0..n).map(|k| format!("meaning {k} of the word poly{n}")).collect();
        add(&format!("poly{n}"), Pos::Noun, glosses, &mut drafts);
    }
    add("twin", Pos::Noun, vec!["a matching thing".into(); 2], &mut drafts);
    add(
        "run",
        Pos::Verb,
        (0..3).map(|k| format!("move fast in manner {k}")).collect(),
        &mut drafts,
    );
    add("run", Pos::Noun, vec!["a score in baseball".into()], &mut drafts);
    let ids = write_database(dir, &drafts).unwrap();
    let lex = parse_lexicon(dir).unwrap();
    let senses = groups
        .into_iter()
        .map(|(l, p, idx)| (l, p, idx.into_iter().map(|i| ids[i]).collect()))
        .collect();
    Fixture { lex, senses }
}

/// One instance in its own short sentence.
pub struct Item<'a> {
    pub lemma: &'a str,
    pub pos: Pos,
    /// Gold synsets; must be senses of `lemma`.
    pub gold: Vec<SynsetId>,
}

pub fn corpus_from(name: &str, lex: &Lexicon, items: &[Item<'_>]) -> AnnotatedCorpus {
    let mut sentences = Vec::new();
    let mut gold = GoldKeys::default();
    for (i, it) in items.iter().enumerate() {
        let id = format!("{name}.d000.s{i:03}.t000");
        let word = |w: &str| Token {
            surface: w.to_string(),
            lemma: w.to_string(),
            pos: TokenPos::Other("X".into()),
            instance_id: None,
        };
        let tokens = vec![
            word("the"),
            Token {
                surface: it.lemma.to_string(),
                lemma: it.lemma.to_string(),
                pos: TokenPos::from_lexicon(it.pos),
                instance_id: Some(id.clone()),
            },
            word(&format!("cue{}", i % 7)),
            word("."),
        ];
        let keys = it.gold.iter().map(|s| {
            lex.sense_key(it.lemma, s)
                .expect("gold is a sense of the lemma")
                .to_string()
        });
        gold.insert(id, keys);
        sentences.push(Sentence {
            doc_id: format!("{name}.d000"),
            sent_id: format!("{name}.d000.s{i:03}"),
            tokens,
        });
    }
    AnnotatedCorpus {
        name: name.to_string(),
        sentences,
        gold,
    }
}

pub fn senses_of<'f>(fx: &'f Fixture, lemma: &str, pos: Pos) -> &'f [SynsetId] {
    &fx.senses
        .iter()
        .find(|(l, p, _)| l == lemma && *p == pos)
        .expect("fixture lemma")
        .2
}
