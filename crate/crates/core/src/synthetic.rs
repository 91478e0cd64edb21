//! Generator for a small, fully controlled sense inventory and tagged
//! corpora, used for end-to-end checks at desk scale.
//!
//! Every lemma is a made-up word with a few senses. Each sense owns a set of
//! context cue words (seen only in sentences) and a disjoint set of gloss
//! words (seen only in its definition), so a model must learn the link from
//! training pairs. Sense frequency falls off as `1/rank`, which gives a
//! most-frequent-sense baseline of roughly 55%.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedCorpus, GoldKeys, Sentence, Token, TokenPos};
use crate::lexicon::{parse_lexicon, write_database, Lexicon, LexiconError, Pos, SynsetDraft, SynsetId};

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("invalid toy config: {0}")]
    BadConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub seed: u64,
    pub nouns: usize,
    pub verbs: usize,
    pub min_senses: usize,
    pub max_senses: usize,
    pub noun_categories: usize,
    pub verb_categories: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub cues_per_sense: usize,
    pub cues_per_context: usize,
    pub gloss_words: usize,
    pub fillers: usize,
    pub fillers_per_context: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            nouns: 7,
            verbs: 3,
            min_senses: 2,
            max_senses: 4,
            noun_categories: 6,
            verb_categories: 4,
            train: 500,
            dev: 100,
            test: 200,
            cues_per_sense: 6,
            cues_per_context: 3,
            gloss_words: 5,
            fillers: 40,
            fillers_per_context: 4,
        }
    }
}

/// Paths and parsed contents of a generated toy dataset.
#[derive(Clone, Debug)]
pub struct ToyBundle {
    pub lexicon_dir: PathBuf,
    pub lexicon: Lexicon,
    pub train: AnnotatedCorpus,
    pub dev: AnnotatedCorpus,
    pub test: AnnotatedCorpus,
    /// `(xml, key)` per split, in train, dev, test order.
    pub files: Vec<(PathBuf, PathBuf)>,
}

impl ToyBundle {
    pub fn mean_polysemy(&self) -> f64 {
        let mut total = 0usize;
        let mut n = 0usize;
        for inst in self.test.instances() {
            let t = inst.token();
            if let Some(p) = t.pos.lexicon_pos() {
                total += self.lexicon.candidate_ids(&t.lookup_lemma(), p).len();
                n += 1;
            }
        }
        total as f64 / n.max(1) as f64
    }

    /// Expected F1 of guessing uniformly among candidates.
    pub fn random_baseline_f1(&self) -> f64 {
        let mut sum = 0.0;
        let insts = self.test.instances();
        for inst in &insts {
            let t = inst.token();
            if let Some(p) = t.pos.lexicon_pos() {
                sum += 1.0 / self.lexicon.candidate_ids(&t.lookup_lemma(), p).len().max(1) as f64;
            }
        }
        100.0 * sum / insts.len().max(1) as f64
    }
}

struct SenseSpec {
    cues: Vec<String>,
    category: usize,
}

struct LemmaSpec {
    word: String,
    pos: Pos,
    senses: Vec<SenseSpec>,
    /// Draft index of each sense.
    drafts: Vec<usize>,
}

struct Words {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
        const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
        loop {
            let syllables = self.rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
                w.push_str(VOWELS.choose(&mut self.rng).unwrap());
            }
            if self.rng.gen_bool(0.5) {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn many(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

impl ToyConfig {
    fn validate(&self) -> Result<(), ToyError> {
        let bad = |m: &str| Err(ToyError::BadConfig(m.to_string()));
        if self.min_senses < 1 || self.min_senses > self.max_senses {
            return bad("need 1 <= min_senses <= max_senses");
        }
        if (self.nouns > 0 && self.noun_categories < self.max_senses)
            || (self.verbs > 0 && self.verb_categories < self.max_senses)
        {
            return bad("each part of speech needs at least max_senses categories");
        }
        if self.nouns + self.verbs == 0 || self.cues_per_context > self.cues_per_sense || self.gloss_words == 0 {
            return bad("degenerate sizes");
        }
        if self.fillers_per_context > self.fillers {
            return bad("fillers_per_context exceeds fillers");
        }
        Ok(())
    }
}

/// Writes the lexicon and the three splits under `dir` and parses them back.
pub fn generate_toy(dir: &Path, cfg: &ToyConfig) -> Result<ToyBundle, ToyError> {
    cfg.validate()?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ToyError::Io { path, source }
    };
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        used: BTreeSet::new(),
    };
    let mut drafts: Vec<SynsetDraft> = Vec::new();
    let mut draft = |pos: Pos, lex_filenum: u8, lemma: String, gloss: String, hypernyms: Vec<usize>| {
        drafts.push(SynsetDraft {
            pos,
            lex_filenum,
            lemmas: vec![lemma],
            gloss,
            hypernyms,
            instance_hypernyms: Vec::new(),
        });
        drafts.len() - 1
    };

    // Roots, then categories with their own cue and gloss vocabulary.
    let noun_root = draft(
        Pos::Noun,
        3,
        words.fresh(),
        words.many(cfg.gloss_words).join(" "),
        vec![],
    );
    let verb_root = draft(
        Pos::Verb,
        29,
        words.fresh(),
        words.many(cfg.gloss_words).join(" "),
        vec![],
    );
    let mut categories: Vec<(Pos, usize, Vec<String>)> = Vec::new();
    for (pos, n, root) in [
        (Pos::Noun, cfg.noun_categories, noun_root),
        (Pos::Verb, cfg.verb_categories, verb_root),
    ] {
        for _ in 0..n {
            let name = words.fresh();
            let gloss = words.many(cfg.gloss_words).join(" ");
            let filenum = if pos == Pos::Noun { 5 } else { 30 };
            let d = draft(pos, filenum, name, gloss, vec![root]);
            categories.push((pos, d, words.many(2)));
        }
    }

    let mut lemmas: Vec<LemmaSpec> = Vec::new();
    let plan: Vec<Pos> = std::iter::repeat_n(Pos::Noun, cfg.nouns)
        .chain(std::iter::repeat_n(Pos::Verb, cfg.verbs))
        .collect();
    for pos in plan {
        let word = words.fresh();
        let n_senses = words.rng.gen_range(cfg.min_senses..=cfg.max_senses);
        let pool: Vec<usize> = (0..categories.len()).filter(|&c| categories[c].0 == pos).collect();
        let chosen: Vec<usize> = pool.choose_multiple(&mut words.rng, n_senses).copied().collect();
        let mut spec = LemmaSpec {
            word: word.clone(),
            pos,
            senses: Vec::new(),
            drafts: Vec::new(),
        };
        for &category in &chosen {
            let cues = words.many(cfg.cues_per_sense);
            let gloss_words = words.many(cfg.gloss_words);
            let gloss = format!("{}; \"the {} {}\"", gloss_words.join(" "), word, gloss_words[0]);
            let filenum = if pos == Pos::Noun { 6 } else { 31 };
            let d = draft(pos, filenum, word.clone(), gloss, vec![categories[category].1]);
            spec.senses.push(SenseSpec { cues, category });
            spec.drafts.push(d);
        }
        lemmas.push(spec);
    }
    let fillers = words.many(cfg.fillers);

    let lexicon_dir = dir.join("lexicon");
    fs::create_dir_all(&lexicon_dir).map_err(io(&lexicon_dir))?;
    let ids: Vec<SynsetId> = write_database(&lexicon_dir, &drafts).map_err(io(&lexicon_dir))?;
    let lexicon = parse_lexicon(&lexicon_dir)?;

    let mut rng = words.rng;
    let mut make = |name: &str, count: usize| -> AnnotatedCorpus {
        let mut sentences = Vec::with_capacity(count);
        let mut gold = GoldKeys::default();
        for i in 0..count {
            let lemma = &lemmas[rng.gen_range(0..lemmas.len())];
            let weights: Vec<f64> = (1..=lemma.senses.len()).map(|r| 1.0 / r as f64).collect();
            let s = WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng);
            let sense = &lemma.senses[s];
            let mut context: Vec<Token> = Vec::new();
            let plain = |w: &str, pos: TokenPos| Token {
                surface: w.to_string(),
                lemma: w.to_string(),
                pos,
                instance_id: None,
            };
            for w in sense.cues.choose_multiple(&mut rng, cfg.cues_per_context) {
                context.push(plain(w, TokenPos::Noun));
            }
            context.push(plain(
                categories[sense.category].2.choose(&mut rng).unwrap(),
                TokenPos::Noun,
            ));
            for w in fillers.choose_multiple(&mut rng, cfg.fillers_per_context) {
                context.push(plain(w, TokenPos::Other("X".into())));
            }
            context.shuffle(&mut rng);
            let id = format!("{name}.d000.s{i:04}.t000");
            let at = rng.gen_range(0..=context.len());
            context.insert(
                at,
                Token {
                    surface: lemma.word.clone(),
                    lemma: lemma.word.clone(),
                    pos: TokenPos::from_lexicon(lemma.pos),
                    instance_id: Some(id.clone()),
                },
            );
            let synset = ids[lemma.drafts[s]];
            let key = lexicon
                .sense_key(&lemma.word, &synset)
                .expect("written lemma has a key")
                .to_string();
            gold.insert(id, [key]);
            sentences.push(Sentence {
                doc_id: format!("{name}.d000"),
                sent_id: format!("{name}.d000.s{i:04}"),
                tokens: context,
            });
        }
        AnnotatedCorpus {
            name: name.to_string(),
            sentences,
            gold,
        }
    };
    let train = make("toy_train", cfg.train);
    let dev = make("toy_dev", cfg.dev);
    let test = make("toy_test", cfg.test);

    let mut files = Vec::new();
    for c in [&train, &dev, &test] {
        let xml = dir.join(format!("{}.data.xml", c.name));
        let key = dir.join(format!("{}.gold.key.txt", c.name));
        c.write(&xml, &key).map_err(io(&xml))?;
        files.push((xml, key));
    }
    Ok(ToyBundle {
        lexicon_dir,
        lexicon,
        train,
        dev,
        test,
        files,
    })
}
