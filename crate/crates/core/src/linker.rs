//! Characteristic-to-anchor linking and nodule profile assembly.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{sentence_of_tokens, Prepared};
use crate::schema::{AnnotatedDocument, EntityMention, NoduleProfile, Relation};

/// Name of the feature set on the candidate closest to its head.
pub const NEAREST_FEATURE: &str = "nearest";

const MAGIC: &str = "nodule-extract linker";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkerConfig {
    /// Largest sentence distance between a characteristic and its anchor.
    pub scope: usize,
    pub max_candidates_per_head: usize,
    pub score_threshold: f64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig { scope: 1, max_candidates_per_head: 4, score_threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub head: EntityMention,
    pub tail: EntityMention,
    /// Anchor first token minus head first token.
    pub token_distance: i64,
    /// Anchor sentence minus head sentence.
    pub sentence_distance: i64,
    pub features: Vec<String>,
}

/// Token and sentence position of a mention.
#[derive(Debug, Clone, Copy)]
struct Position {
    first: usize,
    sentence: usize,
    line: usize,
}

fn positions(text: &str, prepared: &Prepared, mentions: &[&EntityMention]) -> Vec<Position> {
    let sent_of = sentence_of_tokens(&prepared.sentences, prepared.tokens.len());
    // line number of every char start, via the count of preceding newlines
    let mut line_starts = vec![0usize];
    for (i, c) in text.chars().enumerate() {
        if c == '\n' {
            line_starts.push(i + 1);
        }
    }
    mentions
        .iter()
        .map(|m| {
            let first = prepared
                .tokens
                .partition_point(|t| t.span.end <= m.span.start)
                .min(prepared.tokens.len().saturating_sub(1));
            let sentence = sent_of.get(first).copied().unwrap_or(0);
            let line = line_starts.partition_point(|&s| s <= m.span.start).saturating_sub(1);
            Position { first, sentence, line }
        })
        .collect()
}

fn distance_bucket(d: i64) -> String {
    let a = d.unsigned_abs();
    let b = match a {
        0..=2 => a.to_string(),
        3..=4 => "3-4".into(),
        5..=8 => "5-8".into(),
        9..=16 => "9-16".into(),
        _ => "17+".into(),
    };
    if d < 0 {
        format!("-{b}")
    } else {
        b
    }
}

/// Pairs each characteristic with the anchors at most `scope` sentences away,
/// keeping the `max_candidates_per_head` nearest by token distance (ties go
/// to the earlier anchor). Candidates come grouped by head in mention order,
/// nearest first.
pub fn generate_candidates(doc: &AnnotatedDocument, prepared: &Prepared, config: &LinkerConfig) -> Vec<CandidatePair> {
    candidates_for(&doc.text, prepared, &doc.mentions, config)
}

fn candidates_for(
    text: &str,
    prepared: &Prepared,
    mentions: &[EntityMention],
    config: &LinkerConfig,
) -> Vec<CandidatePair> {
    let ms: Vec<&EntityMention> = mentions.iter().collect();
    let pos = positions(text, prepared, &ms);
    let anchors: Vec<usize> = (0..ms.len()).filter(|&i| ms[i].category.is_anchor()).collect();
    let mut anchor_sentences: HashSet<usize> = HashSet::new();
    for &a in &anchors {
        anchor_sentences.insert(pos[a].sentence);
    }
    let mut out = Vec::new();
    for h in (0..ms.len()).filter(|&i| ms[i].category.is_characteristic()) {
        let hp = pos[h];
        let mut near: Vec<(usize, i64)> = anchors
            .iter()
            .copied()
            .filter(|&a| a != h && pos[a].sentence.abs_diff(hp.sentence) <= config.scope)
            .map(|a| (a, pos[a].first as i64 - hp.first as i64))
            .collect();
        near.sort_by_key(|&(a, d)| (d.unsigned_abs(), ms[a].span.start, a));
        near.truncate(config.max_candidates_per_head);
        let own = anchor_sentences.contains(&hp.sentence);
        for (rank, &(a, d)) in near.iter().enumerate() {
            let ap = pos[a];
            let sd = ap.sentence as i64 - hp.sentence as i64;
            let (lo, hi) = if ap.first < hp.first { (ap.first, hp.first) } else { (hp.first, ap.first) };
            let between = anchors.iter().filter(|&&o| o != a && pos[o].first > lo && pos[o].first < hi).count().min(3);
            let head = ms[h].category.name();
            let tail = ms[a].category.name();
            let dir = if d < 0 { "before" } else { "after" };
            let db = distance_bucket(d);
            let mut f = vec![
                "bias".to_string(),
                format!("dist={db}"),
                format!("sdist={sd}"),
                format!("between={between}"),
                format!("head={head}"),
                format!("tail={tail}"),
                format!("dir={dir}"),
                format!("same_line={}", ap.line == hp.line),
                format!("rank={rank}"),
                format!("own={own}"),
                format!("sdist={sd}|own={own}"),
                format!("sdist={sd}|between={between}"),
                format!("head={head}|dir={dir}"),
                format!("head={head}|sdist={sd}"),
                format!("head={head}|tail={tail}"),
                format!("dir={dir}|between={between}"),
                format!("dist={db}|own={own}"),
            ];
            if rank == 0 {
                f.push(NEAREST_FEATURE.to_string());
            }
            out.push(CandidatePair {
                head: ms[h].clone(),
                tail: ms[a].clone(),
                token_distance: d,
                sentence_distance: sd,
                features: f,
            });
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum LinkerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported linker format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkerMeta {
    pub epochs: usize,
    pub seed: u64,
}

/// Linear pair scorer. Unseen features weigh 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkerModel {
    pub weights: BTreeMap<String, f64>,
    pub meta: LinkerMeta,
}

impl LinkerModel {
    /// Links every characteristic to its nearest anchor in scope.
    pub fn nearest_anchor() -> LinkerModel {
        LinkerModel { weights: [(NEAREST_FEATURE.to_string(), 1.0)].into(), meta: LinkerMeta::default() }
    }

    pub fn score(&self, features: &[String]) -> f64 {
        features.iter().filter_map(|f| self.weights.get(f)).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "format-version\t{FORMAT_VERSION}");
        let _ = writeln!(out, "epochs\t{}", self.meta.epochs);
        let _ = writeln!(out, "seed\t{}", self.meta.seed);
        for (f, w) in &self.weights {
            if *w != 0.0 {
                let _ = writeln!(out, "weight\t{f}\t{w}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LinkerModel, LinkerError> {
        let err = |line: usize, message: &str| LinkerError::Format { line, message: message.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, "not a linker model file")),
        }
        let mut model = LinkerModel::default();
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            match (cols[0], cols.len()) {
                ("format-version", 2) => {
                    let v: u32 = cols[1].parse().map_err(|_| err(line, "bad version"))?;
                    if v != FORMAT_VERSION {
                        return Err(LinkerError::Version(v));
                    }
                }
                ("epochs", 2) => model.meta.epochs = cols[1].parse().map_err(|_| err(line, "bad epochs"))?,
                ("seed", 2) => model.meta.seed = cols[1].parse().map_err(|_| err(line, "bad seed"))?,
                ("weight", 3) => {
                    let w: f64 = cols[2].parse().ok().filter(|w: &f64| w.is_finite()).ok_or_else(|| err(line, "bad weight"))?;
                    model.weights.insert(cols[1].to_string(), w);
                }
                _ => return Err(err(line, "unrecognized line")),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LinkerError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LinkerModel, LinkerError> {
        LinkerModel::from_text(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct LinkerTrainReport {
    pub model: LinkerModel,
    pub candidates: usize,
    pub positives: usize,
    /// Gold relations with no candidate pair under the config: (doc id, relation).
    pub unreachable: Vec<(String, Relation)>,
}

/// Averaged perceptron over candidate pairs; a pair is positive iff a gold
/// relation joins its head to its tail.
pub fn train_linker(
    corpus: &[AnnotatedDocument],
    config: &LinkerConfig,
    epochs: usize,
    seed: u64,
) -> Result<LinkerTrainReport, LinkerError> {
    if corpus.is_empty() {
        return Err(LinkerError::EmptyCorpus);
    }
    let mut names: Vec<String> = Vec::new();
    let mut ids: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut examples: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut unreachable = Vec::new();
    let mut positives = 0;
    for doc in corpus {
        let doc = doc.without_other();
        let prepared = Prepared::new(&doc.text);
        let cands = generate_candidates(&doc, &prepared, config);
        let gold: HashSet<(&str, &str)> =
            doc.relations.iter().map(|r| (r.head_id.as_str(), r.tail_id.as_str())).collect();
        let mut reached = HashSet::new();
        for c in &cands {
            let key = (c.head.id.as_str(), c.tail.id.as_str());
            let y = if gold.contains(&key) {
                reached.insert((c.head.id.clone(), c.tail.id.clone()));
                positives += 1;
                1.0
            } else {
                -1.0
            };
            let f = c
                .features
                .iter()
                .map(|f| {
                    *ids.entry(f.clone()).or_insert_with(|| {
                        names.push(f.clone());
                        names.len() - 1
                    })
                })
                .collect();
            examples.push((f, y));
        }
        for r in &doc.relations {
            if !reached.contains(&(r.head_id.clone(), r.tail_id.clone())) {
                unreachable.push((doc.id.clone(), r.clone()));
            }
        }
    }

    let n = names.len();
    let mut w = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut step = 1.0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (f, y) = &examples[i];
            let s: f64 = f.iter().map(|&j| w[j]).sum();
            if s * y <= 0.0 {
                for &j in f {
                    w[j] += y;
                    acc[j] += step * y;
                }
            }
            step += 1.0;
        }
    }
    let mut model = LinkerModel { weights: BTreeMap::new(), meta: LinkerMeta { epochs, seed } };
    if epochs > 0 {
        for (j, name) in names.into_iter().enumerate() {
            let v = w[j] - acc[j] / step;
            if v != 0.0 {
                model.weights.insert(name, v);
            }
        }
    }
    Ok(LinkerTrainReport { model, candidates: examples.len(), positives, unreachable })
}

/// At most one relation per characteristic: its best candidate if that
/// scores above the threshold. Ties go to the smaller absolute token
/// distance, then to the anchor earlier in the text.
pub fn link(text: &str, mentions: &[EntityMention], model: &LinkerModel, config: &LinkerConfig) -> Vec<Relation> {
    let prepared = Prepared::new(text);
    let cands = candidates_for(text, &prepared, mentions, config);
    let mut out: Vec<Relation> = Vec::new();
    let mut i = 0;
    while i < cands.len() {
        let head = &cands[i].head.id;
        let mut j = i;
        let mut best: Option<(f64, &CandidatePair)> = None;
        while j < cands.len() && &cands[j].head.id == head {
            let c = &cands[j];
            let s = model.score(&c.features);
            let better = match best {
                None => true,
                Some((bs, b)) => {
                    s > bs
                        || (s == bs
                            && (c.token_distance.unsigned_abs(), c.tail.span.start)
                                < (b.token_distance.unsigned_abs(), b.tail.span.start))
                }
            };
            if better {
                best = Some((s, c));
            }
            j += 1;
        }
        if let Some((s, c)) = best {
            if s > config.score_threshold {
                out.push(Relation::attribute_of(c.head.id.clone(), c.tail.id.clone()));
            }
        }
        i = j;
    }
    out
}

/// Profiles in anchor text order, plus the characteristics no relation
/// attaches to any anchor.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Profiles {
    pub profiles: Vec<NoduleProfile>,
    pub orphans: Vec<EntityMention>,
}

pub fn assemble_profiles(mentions: &[EntityMention], relations: &[Relation]) -> Profiles {
    let mut anchors: Vec<&EntityMention> = mentions.iter().filter(|m| m.category.is_anchor()).collect();
    anchors.sort_by_key(|m| (m.span.start, m.span.end));
    let mut linked = HashSet::new();
    let mut profiles: Vec<NoduleProfile> = anchors
        .iter()
        .map(|a| {
            let chars: Vec<EntityMention> = relations
                .iter()
                .filter(|r| r.tail_id == a.id)
                .filter_map(|r| mentions.iter().find(|m| m.id == r.head_id && m.category.is_characteristic()))
                .cloned()
                .collect();
            NoduleProfile { anchor: (*a).clone(), characteristics: chars }
        })
        .collect();
    for p in &mut profiles {
        p.characteristics.sort_by_key(|m| (m.category, m.span.start, m.span.end));
        p.characteristics.dedup_by(|a, b| a.id == b.id);
        for m in &p.characteristics {
            linked.insert(m.id.clone());
        }
    }
    let orphans = mentions
        .iter()
        .filter(|m| m.category.is_characteristic() && !linked.contains(&m.id))
        .cloned()
        .collect();
    Profiles { profiles, orphans }
}
