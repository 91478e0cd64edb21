use std::collections::HashSet;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    weak_supervise_context, weak_supervise_gloss, DatasetConfig, DatasetError, RowOrigin, Task, TrainingPair,
    TrainingRows, TrainingSet, TrainingTriplet, WeakText,
};
use crate::corpus::{AnnotatedCorpus, InstanceRef};
use crate::lexicon::{Lexicon, Synset, SynsetId};

/// Row and skip statistics of one built training set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub set: String,
    pub corpora: Vec<String>,
    pub instances: usize,
    pub used: usize,
    pub skipped_unresolvable_key: usize,
    pub skipped_untagged_pos: usize,
    pub skipped_gold_not_in_candidates: usize,
    /// Instances whose gold synsets have no hypernym (hypernym set only).
    pub gold_without_hypernym: usize,
    /// Single-sense instances (contribute no triplets).
    pub monosemous: usize,
    pub rows: usize,
    pub positives: usize,
    pub negatives: usize,
    pub gloss_gloss: usize,
}

impl BuildReport {
    fn merge(&mut self, other: &BuildReport) {
        self.instances += other.instances;
        self.used += other.used;
        self.skipped_unresolvable_key += other.skipped_unresolvable_key;
        self.skipped_untagged_pos += other.skipped_untagged_pos;
        self.skipped_gold_not_in_candidates += other.skipped_gold_not_in_candidates;
        self.gold_without_hypernym += other.gold_without_hypernym;
        self.monosemous += other.monosemous;
        self.rows += other.rows;
        self.positives += other.positives;
        self.negatives += other.negatives;
        self.gloss_gloss += other.gloss_gloss;
    }
}

/// Sidecar report for a full dataset build.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReports {
    pub config: DatasetConfig,
    pub context_gloss: BuildReport,
    pub context_hypernym: BuildReport,
    pub triplets: BuildReport,
}

struct Prepared<'a> {
    id: &'a str,
    lemma: String,
    context: WeakText,
    candidates: Vec<&'a Synset>,
    is_gold: Vec<bool>,
}

impl Prepared<'_> {
    fn origin(&self, synset: SynsetId, other: Option<SynsetId>) -> Option<RowOrigin> {
        Some(RowOrigin {
            instance_id: self.id.to_string(),
            synset,
            other,
        })
    }

    fn gloss(&self, synset: &Synset, cfg: &DatasetConfig) -> Result<WeakText, DatasetError> {
        weak_supervise_gloss(&self.lemma, &synset.gloss, &cfg.gloss_separator)
    }
}

fn prepare<'a>(
    corpus: &AnnotatedCorpus,
    inst: InstanceRef<'a>,
    lex: &'a Lexicon,
    cfg: &DatasetConfig,
    report: &mut BuildReport,
) -> Result<Option<Prepared<'a>>, DatasetError> {
    report.instances += 1;
    let token = inst.token();
    let Some(pos) = token.pos.lexicon_pos() else {
        report.skipped_untagged_pos += 1;
        return Ok(None);
    };
    let gold = match corpus.gold.resolve(inst.id, lex) {
        Ok(g) => g,
        Err(e) => {
            debug!("skipping {}: {e}", inst.id);
            report.skipped_unresolvable_key += 1;
            return Ok(None);
        }
    };
    let lemma = token.lookup_lemma();
    let candidates = lex.candidates(&lemma, pos);
    let is_gold: Vec<bool> = candidates.iter().map(|c| gold.contains(&c.id)).collect();
    if !is_gold.contains(&true) {
        debug!(
            "skipping {}: gold synset not among candidates of {lemma}/{pos}",
            inst.id
        );
        report.skipped_gold_not_in_candidates += 1;
        return Ok(None);
    }
    report.used += 1;
    Ok(Some(Prepared {
        id: inst.id,
        context: weak_supervise_context(inst.sentence, inst.index, cfg.marker_style)?,
        lemma,
        candidates,
        is_gold,
    }))
}

/// Runs `rows_for` over every instance of every corpus, in corpus order.
fn run<R, F>(
    set: &str,
    corpora: &[AnnotatedCorpus],
    lex: &Lexicon,
    cfg: &DatasetConfig,
    rows_for: F,
) -> Result<(Vec<R>, BuildReport), DatasetError>
where
    R: Send,
    F: Fn(&Prepared<'_>, &mut BuildReport) -> Result<Vec<R>, DatasetError> + Sync,
{
    if cfg.oversample_ratio < 1 {
        return Err(DatasetError::BadRatio);
    }
    let work: Vec<(&AnnotatedCorpus, InstanceRef<'_>)> = corpora
        .iter()
        .flat_map(|c| c.instances().into_iter().map(move |i| (c, i)))
        .collect();
    let outcomes = work
        .par_iter()
        .map(|(corpus, inst)| {
            let mut report = BuildReport::default();
            let rows = match prepare(corpus, *inst, lex, cfg, &mut report)? {
                Some(p) => rows_for(&p, &mut report)?,
                None => Vec::new(),
            };
            Ok((rows, report))
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    let mut report = BuildReport {
        set: set.to_string(),
        corpora: corpora.iter().map(|c| c.name.clone()).collect(),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for (r, rep) in outcomes {
        report.merge(&rep);
        rows.extend(r);
    }
    report.rows = rows.len();
    Ok((rows, report))
}

fn pair_set(name: &str, corpora: &[AnnotatedCorpus], cfg: &DatasetConfig, rows: Vec<TrainingPair>) -> TrainingSet {
    TrainingSet {
        name: name.to_string(),
        rows: TrainingRows::Pairs(rows),
        provenance: corpora.iter().map(|c| c.name.clone()).collect(),
        config: cfg.clone(),
    }
}

/// Context–gloss pairs: each gold sense `oversample_ratio` times with label 1,
/// every other sense once with label 0, plus (optionally) every unordered pair
/// of candidate glosses with label 0.
pub fn build_context_gloss(
    corpora: &[AnnotatedCorpus],
    lex: &Lexicon,
    cfg: &DatasetConfig,
) -> Result<(TrainingSet, BuildReport), DatasetError> {
    let (rows, report) = run("context_gloss", corpora, lex, cfg, |p, rep| {
        let glosses = p
            .candidates
            .iter()
            .map(|c| p.gloss(c, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for ((c, gloss), &gold) in p.candidates.iter().zip(&glosses).zip(&p.is_gold) {
            let copies = if gold { cfg.oversample_ratio } else { 1 };
            for _ in 0..copies {
                rows.push(TrainingPair {
                    task: Task::ContextGloss,
                    label: u8::from(gold),
                    a: p.context.clone(),
                    b: gloss.clone(),
                    origin: p.origin(c.id, None),
                });
            }
            if gold {
                rep.positives += copies;
            } else {
                rep.negatives += 1;
            }
        }
        if cfg.gloss_gloss {
            for i in 0..glosses.len() {
                for j in i + 1..glosses.len() {
                    rows.push(TrainingPair {
                        task: Task::GlossGloss,
                        label: 0,
                        a: glosses[i].clone(),
                        b: glosses[j].clone(),
                        origin: p.origin(p.candidates[j].id, Some(p.candidates[i].id)),
                    });
                    rep.gloss_gloss += 1;
                    rep.negatives += 1;
                }
            }
        }
        Ok(rows)
    })?;
    Ok((pair_set("context_gloss", corpora, cfg, rows), report))
}

/// Context–hypernym pairs: glosses of the gold synsets' immediate hypernyms
/// are positives (oversampled), those of the other candidates' hypernyms are
/// negatives. A hypernym gloss is prefixed with the hypernym's first lemma.
pub fn build_context_hypernym(
    corpora: &[AnnotatedCorpus],
    lex: &Lexicon,
    cfg: &DatasetConfig,
) -> Result<(TrainingSet, BuildReport), DatasetError> {
    let (rows, report) = run("context_hypernym", corpora, lex, cfg, |p, rep| {
        let hyper_gloss = |h: &Synset| weak_supervise_gloss(&h.lemmas[0], &h.gloss, &cfg.gloss_separator);
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (c, _) in p.candidates.iter().zip(&p.is_gold).filter(|(_, g)| **g) {
            for h in &c.hypernyms {
                let h = lex.synset(h).expect("hypernyms resolve after parse");
                let text = hyper_gloss(h)?;
                seen.insert(h.id);
                for _ in 0..cfg.oversample_ratio {
                    rows.push(TrainingPair {
                        task: Task::ContextHypernym,
                        label: 1,
                        a: p.context.clone(),
                        b: text.clone(),
                        origin: p.origin(h.id, None),
                    });
                }
                rep.positives += cfg.oversample_ratio;
            }
        }
        if rows.is_empty() {
            rep.gold_without_hypernym += 1;
        }
        for (c, _) in p.candidates.iter().zip(&p.is_gold).filter(|(_, g)| !**g) {
            for h in &c.hypernyms {
                if cfg.dedup_hypernyms && !seen.insert(*h) {
                    continue;
                }
                let h = lex.synset(h).expect("hypernyms resolve after parse");
                rows.push(TrainingPair {
                    task: Task::ContextHypernym,
                    label: 0,
                    a: p.context.clone(),
                    b: hyper_gloss(h)?,
                    origin: p.origin(h.id, Some(c.id)),
                });
                rep.negatives += 1;
            }
        }
        Ok(rows)
    })?;
    Ok((pair_set("context_hypernym", corpora, cfg, rows), report))
}

/// (context, gold gloss, other gloss) triplets, one per non-gold sense.
/// Not oversampled.
pub fn build_triplets(
    corpora: &[AnnotatedCorpus],
    lex: &Lexicon,
    cfg: &DatasetConfig,
) -> Result<(TrainingSet, BuildReport), DatasetError> {
    let (rows, report) = run("triplets", corpora, lex, cfg, |p, rep| {
        if p.candidates.len() == 1 {
            rep.monosemous += 1;
        }
        let mut rows = Vec::new();
        for (pos_c, _) in p.candidates.iter().zip(&p.is_gold).filter(|(_, g)| **g) {
            let positive = p.gloss(pos_c, cfg)?;
            for (neg_c, _) in p.candidates.iter().zip(&p.is_gold).filter(|(_, g)| !**g) {
                rows.push(TrainingTriplet {
                    anchor: p.context.clone(),
                    positive: positive.clone(),
                    negative: p.gloss(neg_c, cfg)?,
                    origin: p.origin(pos_c.id, Some(neg_c.id)),
                });
                rep.positives += 1;
            }
        }
        Ok(rows)
    })?;
    let set = TrainingSet {
        name: "triplets".into(),
        rows: TrainingRows::Triplets(rows),
        provenance: corpora.iter().map(|c| c.name.clone()).collect(),
        config: cfg.clone(),
    };
    Ok((set, report))
}

/// Builds all three sets: `[context_gloss, context_hypernym, triplets]`.
pub fn build_all(
    corpora: &[AnnotatedCorpus],
    lex: &Lexicon,
    cfg: &DatasetConfig,
) -> Result<([TrainingSet; 3], BuildReports), DatasetError> {
    let (cg, cg_rep) = build_context_gloss(corpora, lex, cfg)?;
    let (ch, ch_rep) = build_context_hypernym(corpora, lex, cfg)?;
    let (tr, tr_rep) = build_triplets(corpora, lex, cfg)?;
    Ok((
        [cg, ch, tr],
        BuildReports {
            config: cfg.clone(),
            context_gloss: cg_rep,
            context_hypernym: ch_rep,
            triplets: tr_rep,
        },
    ))
}
