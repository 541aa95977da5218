//! Reference implementations used as oracles by the integration tests.
//! They share no code with the library beyond plain data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nodule_extract::preprocess::{segment_sentences, tokenize, BioTag};
use nodule_extract::schema::{AnnotatedDocument, Category, EntityMention, Relation, Span};

// ---- BIO decoding ----

/// BIO validity straight from its definition.
pub fn oracle_valid(tags: &[BioTag]) -> bool {
    let mut prev: Option<BioTag> = None;
    for &t in tags {
        if let BioTag::I(c) = t {
            match prev {
                Some(BioTag::B(p)) | Some(BioTag::I(p)) if p == c => {}
                _ => return false,
            }
        }
        prev = Some(t);
    }
    true
}

/// Score of one path, summed left to right.
pub fn path_score(emit: &[Vec<f64>], start: &[f64], pair: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut s = 0.0;
    for (t, &j) in path.iter().enumerate() {
        s += if t == 0 { start[j] } else { pair[path[t - 1]][j] };
        s += emit[t][j];
    }
    s
}

/// Exhaustive maximization over every legal sequence, visited in
/// lexicographic order; only a strictly better score replaces the incumbent,
/// so ties go to the lexicographically smallest sequence. Scores accumulate
/// left to right exactly as in [`path_score`].
pub fn brute_force_decode(tags: &[BioTag], emit: &[Vec<f64>], start: &[f64], pair: &[Vec<f64>]) -> (Vec<usize>, f64) {
    struct Search<'a> {
        tags: &'a [BioTag],
        emit: &'a [Vec<f64>],
        start: &'a [f64],
        pair: &'a [Vec<f64>],
        path: Vec<usize>,
        best: Option<(Vec<usize>, f64)>,
    }
    impl Search<'_> {
        fn rec(&mut self, score: f64) {
            let t = self.path.len();
            if t == self.emit.len() {
                if self.best.as_ref().is_none_or(|(_, b)| score > *b) {
                    self.best = Some((self.path.clone(), score));
                }
                return;
            }
            let prev = self.path.last().copied();
            for j in 0..self.tags.len() {
                if let BioTag::I(c) = self.tags[j] {
                    let ok = match prev.map(|p| self.tags[p]) {
                        Some(BioTag::B(p)) | Some(BioTag::I(p)) => p == c,
                        _ => false,
                    };
                    if !ok {
                        continue;
                    }
                }
                let step = match prev {
                    None => self.start[j],
                    Some(p) => self.pair[p][j],
                };
                self.path.push(j);
                self.rec(score + step + self.emit[t][j]);
                self.path.pop();
            }
        }
    }
    let mut s = Search { tags, emit, start, pair, path: Vec::new(), best: None };
    s.rec(0.0);
    s.best.unwrap_or((Vec::new(), 0.0))
}

// ---- TI-RADS ----

/// Minimal reader for the point-table file: `[section]` headers and
/// `key = value` lines, `#` comments.
pub struct OracleTable {
    pub points: BTreeMap<String, BTreeMap<String, u32>>,
    pub thresholds: Vec<(u32, u8)>,
}

impl OracleTable {
    pub fn parse(text: &str) -> OracleTable {
        let mut points: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        let mut thresholds = Vec::new();
        let mut section = String::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = line.trim_matches(|c| c == '[' || c == ']').to_string();
                continue;
            }
            let (k, v) = line.split_once('=').unwrap();
            let (k, v) = (k.trim(), v.trim());
            match section.as_str() {
                "table" => {}
                "thresholds" => thresholds.push((k.parse().unwrap(), v.trim_start_matches("TR").parse().unwrap())),
                s => {
                    points.entry(s.to_string()).or_default().insert(k.to_string(), v.parse().unwrap());
                }
            }
        }
        thresholds.sort();
        OracleTable { points, thresholds }
    }

    pub fn get(&self, section: &str, key: &str) -> u32 {
        self.points[section][key]
    }

    /// Level number for a total: the highest threshold not above it.
    pub fn level(&self, total: u32) -> u8 {
        self.thresholds.iter().filter(|(t, _)| *t <= total).map(|(_, l)| *l).next_back().unwrap()
    }
}

pub fn tirads_cfg_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/acr_tirads.cfg")
}

// ---- linking ----

/// Characteristic to anchor by brute force: among anchors whose sentence is
/// at most `scope` away, the smallest absolute token distance, then the
/// earliest anchor.
pub fn nearest_anchor_oracle(doc: &AnnotatedDocument, scope: usize) -> BTreeSet<(String, String)> {
    let tokens = tokenize(&doc.text);
    let sentences = segment_sentences(&tokens, &doc.text);
    let token_of = |m: &EntityMention| tokens.iter().position(|t| t.span.end > m.span.start).unwrap_or(tokens.len() - 1);
    let sentence_of = |tok: usize| sentences.iter().position(|s| s.contains(tok)).unwrap();
    let mut out = BTreeSet::new();
    for h in doc.mentions.iter().filter(|m| m.category.is_characteristic()) {
        let ht = token_of(h);
        let hs = sentence_of(ht);
        let best = doc
            .mentions
            .iter()
            .filter(|a| a.category.is_anchor())
            .filter(|a| sentence_of(token_of(a)).abs_diff(hs) <= scope)
            .min_by_key(|a| (token_of(a).abs_diff(ht), a.span.start));
        if let Some(a) = best {
            out.insert((h.id.clone(), a.id.clone()));
        }
    }
    out
}

pub fn relation_set(relations: &[Relation]) -> BTreeSet<(String, String)> {
    relations.iter().map(|r| (r.head_id.clone(), r.tail_id.clone())).collect()
}

// ---- random documents ----

pub const WORDS: &[&str] = &[
    "solid", "nodule", "right", "lobe", "measuring", "cm", "the", "is", "a", "with", "smooth", "margins", "hypoechoic",
    "1.2", "x", "0.8", "lymph", "node", "TR4", "of", "and", "in", "mid", "thyroid",
];

/// A text of `n` words with random separators (space, newline, `. `, `, `)
/// and its tokens.
pub fn build_text(words: &[usize], seps: &[usize]) -> String {
    let mut text = String::new();
    for (i, &w) in words.iter().enumerate() {
        if i > 0 {
            text.push_str([" ", " ", "\n", ". ", ", "][seps[i] % 5]);
        }
        text.push_str(WORDS[w % WORDS.len()]);
    }
    text
}

/// Non-overlapping mentions over whole-token ranges chosen by `cuts`:
/// consecutive pairs of sorted cut points become spans, each with a category.
pub fn token_mentions(text: &str, cuts: &[usize], cats: &[usize]) -> Vec<EntityMention> {
    let tokens = tokenize(text);
    let n = tokens.len();
    if n == 0 {
        return Vec::new();
    }
    let mut points: Vec<usize> = cuts.iter().map(|c| c % (n + 1)).collect();
    points.sort();
    points.dedup();
    let targets = Category::targets();
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    for (k, w) in points.chunks(2).enumerate() {
        if w.len() < 2 || w[0] == w[1] {
            continue;
        }
        let span = Span::new(tokens[w[0]].span.start, tokens[w[1] - 1].span.end);
        let category = targets[cats.get(k).copied().unwrap_or(k) % targets.len()];
        out.push(EntityMention::new(
            format!("T{}", out.len() + 1),
            category,
            span,
            chars[span.start..span.end].iter().collect::<String>(),
        ));
    }
    out
}

/// Attaches each characteristic, with the given odds, to some anchor.
pub fn random_relations(mentions: &[EntityMention], picks: &[usize]) -> Vec<Relation> {
    let anchors: Vec<&EntityMention> = mentions.iter().filter(|m| m.category.is_anchor()).collect();
    if anchors.is_empty() {
        return Vec::new();
    }
    mentions
        .iter()
        .filter(|m| m.category.is_characteristic())
        .enumerate()
        .filter_map(|(i, m)| {
            let p = picks.get(i).copied().unwrap_or(0);
            (p % 3 != 0).then(|| Relation::attribute_of(m.id.clone(), anchors[p % anchors.len()].id.clone()))
        })
        .collect()
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}
