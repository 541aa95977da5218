use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::features::{extract_features, FEATURE_TEMPLATE_ID};
use super::viterbi::{viterbi_decode, TokenScoreMatrix, TransitionConstraints, TransitionWeights};
use crate::preprocess::{bio_to_spans, BioTag, Prepared, TagSet, Token};
use crate::schema::EntityMention;

const MAGIC: &str = "nodule-extract tagger";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("model was built with feature templates `{0}`, this build uses `{FEATURE_TEMPLATE_ID}`")]
    Template(String),
    #[error("model tag order does not match this build")]
    TagOrder,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
}

/// Anything that produces per-token tag scores for a sentence plus tag
/// transition preferences can drive the decoder.
pub trait TokenScorer {
    fn tagset(&self) -> &TagSet;
    fn score(&self, sentence: &[Token]) -> TokenScoreMatrix;
    fn transitions(&self) -> &TransitionWeights;
}

/// Sparse linear sequence model: feature weights per tag plus tag-bigram and
/// start weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    tagset: TagSet,
    constraints: TransitionConstraints,
    pub(crate) emissions: HashMap<String, Vec<f64>>,
    pub(crate) transitions: TransitionWeights,
    pub meta: TrainingMeta,
}

impl TaggerModel {
    /// All weights zero.
    pub fn empty(meta: TrainingMeta) -> Self {
        let tagset = TagSet::full();
        let k = tagset.len();
        TaggerModel {
            constraints: TransitionConstraints::bio(&tagset),
            tagset,
            emissions: HashMap::new(),
            transitions: TransitionWeights::zeros(k),
            meta,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.emissions.len()
    }

    pub fn weight(&self, feature: &str, tag: BioTag) -> f64 {
        let Some(i) = self.tagset.index_of(tag) else { return 0.0 };
        self.emissions.get(feature).map_or(0.0, |w| w[i])
    }

    pub fn is_zero(&self) -> bool {
        self.emissions.values().all(|w| w.iter().all(|&v| v == 0.0))
            && self.transitions.start.iter().all(|&v| v == 0.0)
            && self.transitions.pairs.iter().all(|&v| v == 0.0)
    }

    pub fn constraints(&self) -> &TransitionConstraints {
        &self.constraints
    }

    /// Tag indices for one sentence.
    pub fn decode(&self, sentence: &[Token]) -> Vec<usize> {
        viterbi_decode(&self.score(sentence), &self.constraints, &self.transitions)
    }

    /// Tokenize, segment, decode each sentence, and map runs back to
    /// character spans of `text`.
    pub fn predict(&self, text: &str) -> Vec<EntityMention> {
        tag_text(self, text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        TaggerModel::from_text(&fs::read_to_string(path)?)
    }

    /// Text serialization. Weights use Rust's shortest round-trip float
    /// formatting, so parsing restores identical bits. Zero weights are
    /// omitted; entries are sorted.
    pub fn to_text(&self) -> String {
        let tags = &self.tagset;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "format-version\t{FORMAT_VERSION}");
        let _ = writeln!(out, "feature-template\t{FEATURE_TEMPLATE_ID}");
        let names: Vec<String> = tags.tags().iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "tags\t{}", names.join("\t"));
        let _ = writeln!(out, "epochs\t{}", self.meta.epochs);
        let _ = writeln!(out, "seed\t{}", self.meta.seed);
        for (i, &w) in self.transitions.start.iter().enumerate() {
            if w != 0.0 {
                let _ = writeln!(out, "start\t{}\t{w}", names[i]);
            }
        }
        let k = tags.len();
        for from in 0..k {
            for to in 0..k {
                let w = self.transitions.pair(from, to);
                if w != 0.0 {
                    let _ = writeln!(out, "trans\t{}\t{}\t{w}", names[from], names[to]);
                }
            }
        }
        let mut feats: Vec<&String> = self.emissions.keys().collect();
        feats.sort();
        for f in feats {
            for (i, &w) in self.emissions[f].iter().enumerate() {
                if w != 0.0 {
                    let _ = writeln!(out, "emit\t{f}\t{}\t{w}", names[i]);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut model = TaggerModel::empty(TrainingMeta::default());
        let k = model.tagset.len();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: &str| ModelError::Format { line, message: message.to_string() };

        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, "not a tagger model file")),
        }
        let tag_index = |line: usize, s: &str, ts: &TagSet| -> Result<usize, ModelError> {
            let tag: BioTag = s.parse().map_err(|_| err(line, "bad tag"))?;
            ts.index_of(tag).ok_or_else(|| err(line, "tag outside tag set"))
        };
        let weight = |line: usize, s: &str| -> Result<f64, ModelError> {
            s.parse::<f64>().ok().filter(|w| w.is_finite()).ok_or_else(|| err(line, "bad weight"))
        };

        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            match (cols[0], cols.len()) {
                ("format-version", 2) => {
                    let v: u32 = cols[1].parse().map_err(|_| err(line, "bad version"))?;
                    if v != FORMAT_VERSION {
                        return Err(ModelError::Version(v));
                    }
                }
                ("feature-template", 2) => {
                    if cols[1] != FEATURE_TEMPLATE_ID {
                        return Err(ModelError::Template(cols[1].to_string()));
                    }
                }
                ("tags", _) => {
                    let expected: Vec<String> = model.tagset.tags().iter().map(|t| t.to_string()).collect();
                    if cols[1..] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
                        return Err(ModelError::TagOrder);
                    }
                }
                ("epochs", 2) => model.meta.epochs = cols[1].parse().map_err(|_| err(line, "bad epochs"))?,
                ("seed", 2) => model.meta.seed = cols[1].parse().map_err(|_| err(line, "bad seed"))?,
                ("start", 3) => {
                    let t = tag_index(line, cols[1], &model.tagset)?;
                    model.transitions.start[t] = weight(line, cols[2])?;
                }
                ("trans", 4) => {
                    let a = tag_index(line, cols[1], &model.tagset)?;
                    let b = tag_index(line, cols[2], &model.tagset)?;
                    model.transitions.pairs[a * k + b] = weight(line, cols[3])?;
                }
                ("emit", 4) => {
                    let t = tag_index(line, cols[2], &model.tagset)?;
                    let w = weight(line, cols[3])?;
                    model.emissions.entry(cols[1].to_string()).or_insert_with(|| vec![0.0; k])[t] = w;
                }
                _ => return Err(err(line, "unrecognized line")),
            }
        }
        Ok(model)
    }
}

impl TokenScorer for TaggerModel {
    fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    fn score(&self, sentence: &[Token]) -> TokenScoreMatrix {
        let k = self.tagset.len();
        let mut m = TokenScoreMatrix::zeros(sentence.len(), k);
        for pos in 0..sentence.len() {
            let row = m.row_mut(pos);
            for f in extract_features(sentence, pos) {
                if let Some(w) = self.emissions.get(&f) {
                    for (r, v) in row.iter_mut().zip(w) {
                        *r += v;
                    }
                }
            }
        }
        m
    }

    fn transitions(&self) -> &TransitionWeights {
        &self.transitions
    }
}

/// Runs any scorer over `text` with BIO-constrained decoding.
pub fn tag_text<S: TokenScorer + ?Sized>(scorer: &S, text: &str) -> Vec<EntityMention> {
    let prepared = Prepared::new(text);
    let tagset = scorer.tagset();
    let constraints = TransitionConstraints::bio(tagset);
    let mut tags = Vec::with_capacity(prepared.tokens.len());
    for s in &prepared.sentences {
        let sentence = prepared.sentence_tokens(s);
        let path = viterbi_decode(&scorer.score(sentence), &constraints, scorer.transitions());
        tags.extend(path.into_iter().map(|i| tagset.tag(i)));
    }
    bio_to_spans(text, &prepared.tokens, &tags)
        .map(|d| d.mentions)
        .unwrap_or_default()
}
