use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use super::Token;
use crate::schema::{AnnotatedDocument, Category, CharIndex, EntityMention, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    O,
    B(Category),
    I(Category),
}

impl BioTag {
    pub fn category(self) -> Option<Category> {
        match self {
            BioTag::O => None,
            BioTag::B(c) | BioTag::I(c) => Some(c),
        }
    }

    /// Whether `self` may directly follow `prev` (`None` = sequence start).
    pub fn may_follow(self, prev: Option<BioTag>) -> bool {
        match self {
            BioTag::I(c) => matches!(prev, Some(BioTag::B(p)) | Some(BioTag::I(p)) if p == c),
            _ => true,
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(c) => write!(f, "B-{c}"),
            BioTag::I(c) => write!(f, "I-{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed BIO tag `{0}`")]
pub struct BadTag(pub String);

impl FromStr for BioTag {
    type Err = BadTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "O" {
            return Ok(BioTag::O);
        }
        let (prefix, rest) = s.split_at_checked(2).ok_or_else(|| BadTag(s.to_string()))?;
        let cat: Category = rest.parse().map_err(|_| BadTag(s.to_string()))?;
        if cat == Category::Other {
            return Err(BadTag(s.to_string()));
        }
        match prefix {
            "B-" => Ok(BioTag::B(cat)),
            "I-" => Ok(BioTag::I(cat)),
            _ => Err(BadTag(s.to_string())),
        }
    }
}

/// A tag vocabulary in canonical order: `O`, then `B-C`, `I-C` for each
/// category in the order given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    categories: Vec<Category>,
    tags: Vec<BioTag>,
    index: HashMap<BioTag, usize>,
}

impl TagSet {
    pub fn new(categories: &[Category]) -> Self {
        let mut tags = vec![BioTag::O];
        for &c in categories {
            tags.push(BioTag::B(c));
            tags.push(BioTag::I(c));
        }
        let index = tags.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        TagSet { categories: categories.to_vec(), tags, index }
    }

    /// The 33-tag set over all extraction targets.
    pub fn full() -> Self {
        TagSet::new(Category::targets())
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[BioTag] {
        &self.tags
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn tag(&self, index: usize) -> BioTag {
        self.tags[index]
    }

    pub fn index_of(&self, tag: BioTag) -> Option<usize> {
        self.index.get(&tag).copied()
    }
}

/// True iff every `I-C` follows `B-C` or `I-C`.
pub fn is_valid(tags: &[BioTag]) -> bool {
    let mut prev = None;
    for &t in tags {
        if !t.may_follow(prev) {
            return false;
        }
        prev = Some(t);
    }
    true
}

/// IOB2 repair: an `I-C` without a compatible predecessor becomes `B-C`.
/// Returns the number of tags changed.
pub fn repair(tags: &mut [BioTag]) -> usize {
    let mut fixed = 0;
    let mut prev = None;
    for t in tags.iter_mut() {
        if let BioTag::I(c) = *t {
            if !t.may_follow(prev) {
                *t = BioTag::B(c);
                fixed += 1;
            }
        }
        prev = Some(*t);
    }
    fixed
}

/// Token range (half-open) covering one mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionAlignment {
    pub mention_id: String,
    pub category: Category,
    pub tokens: Range<usize>,
    /// The mention boundary fell inside a token and was widened.
    pub snapped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("mention {0} covers no token")]
    NoTokens(String),
}

/// Minimal token range covering each mention, snapped outward to whole tokens.
pub fn align_mentions(doc: &AnnotatedDocument, tokens: &[Token]) -> Result<Vec<MentionAlignment>, AlignError> {
    doc.mentions.iter().map(|m| align_span(m, tokens)).collect()
}

fn align_span(m: &EntityMention, tokens: &[Token]) -> Result<MentionAlignment, AlignError> {
    let first = tokens.partition_point(|t| t.span.end <= m.span.start);
    let end = tokens.partition_point(|t| t.span.start < m.span.end);
    if first >= end {
        return Err(AlignError::NoTokens(m.id.clone()));
    }
    let snapped = tokens[first].span.start != m.span.start || tokens[end - 1].span.end != m.span.end;
    Ok(MentionAlignment {
        mention_id: m.id.clone(),
        category: m.category,
        tokens: first..end,
        snapped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapPolicy {
    /// Keep the longer of two cross-category overlapping mentions.
    #[default]
    KeepLonger,
    /// Fail on any cross-category overlap.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BioError {
    #[error("mentions {0} and {1} of different categories share a token")]
    OverlapConflict(String, String),
    #[error("{tags} tags for {tokens} tokens")]
    LengthMismatch { tokens: usize, tags: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BioEncoding {
    pub tags: Vec<BioTag>,
    /// Mentions dropped by overlap resolution.
    pub dropped: Vec<String>,
    /// Groups of same-category mentions merged into one span.
    pub merged: Vec<Vec<String>>,
}

struct Claim {
    ids: Vec<String>,
    category: Category,
    tokens: Range<usize>,
}

/// Encodes aligned mentions as one tag per token. `OTHER` mentions are
/// skipped. The output is always a valid sequence.
pub fn spans_to_bio(
    token_count: usize,
    alignment: &[MentionAlignment],
    policy: OverlapPolicy,
) -> Result<BioEncoding, BioError> {
    let mut enc = BioEncoding { tags: vec![BioTag::O; token_count], ..Default::default() };

    // merge same-category overlaps
    let mut sorted: Vec<&MentionAlignment> = alignment.iter().filter(|a| a.category != Category::Other).collect();
    sorted.sort_by_key(|a| (a.category, a.tokens.start, a.tokens.end));
    let mut claims: Vec<Claim> = Vec::new();
    for a in sorted {
        match claims.last_mut() {
            Some(c) if c.category == a.category && a.tokens.start < c.tokens.end => {
                c.tokens.end = c.tokens.end.max(a.tokens.end);
                c.ids.push(a.mention_id.clone());
            }
            _ => claims.push(Claim {
                ids: vec![a.mention_id.clone()],
                category: a.category,
                tokens: a.tokens.clone(),
            }),
        }
    }
    enc.merged = claims.iter().filter(|c| c.ids.len() > 1).map(|c| c.ids.clone()).collect();

    claims.sort_by(|a, b| {
        b.tokens
            .len()
            .cmp(&a.tokens.len())
            .then(a.tokens.start.cmp(&b.tokens.start))
            .then(a.category.cmp(&b.category))
    });
    let mut owner: Vec<Option<usize>> = vec![None; token_count];
    for (ci, c) in claims.iter().enumerate() {
        if let Some(other) = c.tokens.clone().find_map(|t| owner[t]) {
            match policy {
                OverlapPolicy::Reject => {
                    return Err(BioError::OverlapConflict(claims[other].ids[0].clone(), c.ids[0].clone()))
                }
                OverlapPolicy::KeepLonger => {
                    enc.dropped.extend(c.ids.iter().cloned());
                    continue;
                }
            }
        }
        for t in c.tokens.clone() {
            owner[t] = Some(ci);
        }
        enc.tags[c.tokens.start] = BioTag::B(c.category);
        for t in c.tokens.start + 1..c.tokens.end {
            enc.tags[t] = BioTag::I(c.category);
        }
    }
    Ok(enc)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decoded {
    pub mentions: Vec<EntityMention>,
    /// Number of tags changed by IOB2 repair before decoding.
    pub repairs: usize,
}

/// Token-range view of a decoded mention.
pub fn bio_runs(tags: &[BioTag]) -> Vec<(Category, Range<usize>)> {
    let mut out: Vec<(Category, Range<usize>)> = Vec::new();
    let mut prev = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            BioTag::O => {}
            BioTag::I(_) if t.may_follow(prev) => {
                if let Some(last) = out.last_mut() {
                    last.1.end = i + 1;
                }
            }
            BioTag::B(c) | BioTag::I(c) => out.push((c, i..i + 1)),
        }
        prev = Some(t);
    }
    out
}

/// Maximal B/I runs become mentions spanning first-token start to last-token
/// end. Invalid sequences are repaired first. Mention ids are `T1`, `T2`, …
/// in text order.
pub fn bio_to_spans(text: &str, tokens: &[Token], tags: &[BioTag]) -> Result<Decoded, BioError> {
    if tokens.len() != tags.len() {
        return Err(BioError::LengthMismatch { tokens: tokens.len(), tags: tags.len() });
    }
    let mut tags = tags.to_vec();
    let repairs = repair(&mut tags);
    let index = CharIndex::new(text);
    let mentions = bio_runs(&tags)
        .into_iter()
        .enumerate()
        .map(|(n, (cat, r))| {
            let span = Span::new(tokens[r.start].span.start, tokens[r.end - 1].span.end);
            let surface = index.slice(text, span).unwrap_or_default();
            EntityMention::new(format!("T{}", n + 1), cat, span, surface)
        })
        .collect();
    Ok(Decoded { mentions, repairs })
}
