//! Domain types shared by every stage of the pipeline.
//!
//! All offsets are counted in Unicode scalar values (chars), not bytes, so a
//! span computed here means the same thing to any consumer of the JSON or
//! standoff files regardless of its string representation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entity categories of the annotation schema. `Other` is kept in files but
/// never trained on or scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Category {
    ThyroidNodule,
    CervicalLymphNode,
    SizeNumeric,
    SizeQualitative,
    Laterality,
    Location,
    Composition,
    Echogenicity,
    Margins,
    Shape,
    EchogenicFoci,
    Vascularity,
    TiradsScore,
    TiradsRiskCategory,
    TotalNumberOfNodules,
    RiskDescription,
    Other,
}

impl Category {
    /// Every category in canonical order, `Other` last.
    pub const ALL: [Category; 17] = [
        Category::ThyroidNodule,
        Category::CervicalLymphNode,
        Category::SizeNumeric,
        Category::SizeQualitative,
        Category::Laterality,
        Category::Location,
        Category::Composition,
        Category::Echogenicity,
        Category::Margins,
        Category::Shape,
        Category::EchogenicFoci,
        Category::Vascularity,
        Category::TiradsScore,
        Category::TiradsRiskCategory,
        Category::TotalNumberOfNodules,
        Category::RiskDescription,
        Category::Other,
    ];

    /// The 16 extraction targets.
    pub fn targets() -> &'static [Category] {
        &Self::ALL[..16]
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::ThyroidNodule => "THYROID_NODULE",
            Category::CervicalLymphNode => "CERVICAL_LYMPH_NODE",
            Category::SizeNumeric => "SIZE_NUMERIC",
            Category::SizeQualitative => "SIZE_QUALITATIVE",
            Category::Laterality => "LATERALITY",
            Category::Location => "LOCATION",
            Category::Composition => "COMPOSITION",
            Category::Echogenicity => "ECHOGENICITY",
            Category::Margins => "MARGINS",
            Category::Shape => "SHAPE",
            Category::EchogenicFoci => "ECHOGENIC_FOCI",
            Category::Vascularity => "VASCULARITY",
            Category::TiradsScore => "TIRADS_SCORE",
            Category::TiradsRiskCategory => "TIRADS_RISK_CATEGORY",
            Category::TotalNumberOfNodules => "TOTAL_NUMBER_OF_NODULES",
            Category::RiskDescription => "RISK_DESCRIPTION",
            Category::Other => "OTHER",
        }
    }

    /// Position in canonical order.
    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Nodules and cervical lymph nodes: the mentions characteristics attach to.
    pub fn is_anchor(self) -> bool {
        matches!(self, Category::ThyroidNodule | Category::CervicalLymphNode)
    }

    pub fn is_characteristic(self) -> bool {
        !self.is_anchor() && self != Category::Other
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category name `{0}`")]
pub struct UnknownCategory(pub String);

/// Case-insensitive lookup of a canonical category name.
pub fn parse_category(name: &str) -> Result<Category, UnknownCategory> {
    let trimmed = name.trim();
    Category::ALL
        .iter()
        .copied()
        .find(|c| c.name().eq_ignore_ascii_case(trimmed))
        .ok_or_else(|| UnknownCategory(name.to_string()))
}

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_category(s)
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.name().to_string()
    }
}

impl TryFrom<String> for Category {
    type Error = UnknownCategory;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        parse_category(&value)
    }
}

/// Half-open char range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Number of shared char positions.
    pub fn overlap_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

/// Maps char offsets to byte offsets for one string.
#[derive(Debug, Clone)]
pub struct CharIndex {
    bytes: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { bytes }
    }

    /// Length of the text in chars.
    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn byte_offset(&self, char_offset: usize) -> usize {
        self.bytes[char_offset]
    }

    /// Char offset of a byte offset that lies on a char boundary.
    pub fn char_offset(&self, byte_offset: usize) -> usize {
        self.bytes
            .binary_search(&byte_offset)
            .expect("byte offset not on a char boundary")
    }

    pub fn slice<'a>(&self, text: &'a str, span: Span) -> Option<&'a str> {
        if span.start > span.end || span.end > self.char_len() {
            return None;
        }
        Some(&text[self.bytes[span.start]..self.bytes[span.end]])
    }
}

/// Substring of `text` by char span; `None` when out of bounds.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut iter = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = iter.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        iter.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub id: String,
    pub category: Category,
    #[serde(flatten)]
    pub span: Span,
    pub text: String,
}

impl EntityMention {
    pub fn new(id: impl Into<String>, category: Category, span: Span, text: impl Into<String>) -> Self {
        EntityMention {
            id: id.into(),
            category,
            span,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum RelationType {
    #[default]
    #[serde(rename = "ATTRIBUTE_OF")]
    AttributeOf,
}

impl RelationType {
    pub fn name(self) -> &'static str {
        match self {
            RelationType::AttributeOf => "ATTRIBUTE_OF",
        }
    }
}

impl FromStr for RelationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("ATTRIBUTE_OF") {
            Ok(RelationType::AttributeOf)
        } else {
            Err(s.to_string())
        }
    }
}

/// Characteristic (head) attached to an anchor (tail).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    #[serde(rename = "head")]
    pub head_id: String,
    #[serde(rename = "tail")]
    pub tail_id: String,
    #[serde(rename = "type", default)]
    pub kind: RelationType,
}

impl Relation {
    pub fn attribute_of(head: impl Into<String>, tail: impl Into<String>) -> Self {
        Relation {
            head_id: head.into(),
            tail_id: tail.into(),
            kind: RelationType::AttributeOf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AnnotatedDocument {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<EntityMention>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl AnnotatedDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        AnnotatedDocument {
            id: id.into(),
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn mention(&self, id: &str) -> Option<&EntityMention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    pub fn note_type(&self) -> Option<&str> {
        self.meta.get("note_type").map(String::as_str)
    }

    /// Copy with `Other` mentions and any relation touching them removed.
    pub fn without_other(&self) -> AnnotatedDocument {
        let dropped: HashSet<&str> = self
            .mentions
            .iter()
            .filter(|m| m.category == Category::Other)
            .map(|m| m.id.as_str())
            .collect();
        AnnotatedDocument {
            id: self.id.clone(),
            text: self.text.clone(),
            mentions: self
                .mentions
                .iter()
                .filter(|m| m.category != Category::Other)
                .cloned()
                .collect(),
            relations: self
                .relations
                .iter()
                .filter(|r| !dropped.contains(r.head_id.as_str()) && !dropped.contains(r.tail_id.as_str()))
                .cloned()
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

/// An anchor with the characteristics linked to it, sorted by category then
/// text position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoduleProfile {
    pub anchor: EntityMention,
    pub characteristics: Vec<EntityMention>,
}

impl NoduleProfile {
    pub fn of_category(&self, category: Category) -> impl Iterator<Item = &EntityMention> {
        self.characteristics.iter().filter(move |m| m.category == category)
    }

    pub fn grouped(&self) -> BTreeMap<Category, Vec<&EntityMention>> {
        let mut out: BTreeMap<Category, Vec<&EntityMention>> = BTreeMap::new();
        for m in &self.characteristics {
            out.entry(m.category).or_default().push(m);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    DuplicateMentionId,
    EmptySpan,
    SpanOutOfBounds,
    TextMismatch,
    DanglingHead,
    DanglingTail,
    HeadCategory,
    TailCategory,
    SelfRelation,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::DuplicateMentionId => "mention id is not unique",
            Rule::EmptySpan => "span must satisfy start < end",
            Rule::SpanOutOfBounds => "span end exceeds document length",
            Rule::TextMismatch => "mention text differs from document substring",
            Rule::DanglingHead => "relation head does not name a mention",
            Rule::DanglingTail => "relation tail does not name a mention",
            Rule::HeadCategory => "relation head must be a characteristic category",
            Rule::TailCategory => "relation tail must be THYROID_NODULE or CERVICAL_LYMPH_NODE",
            Rule::SelfRelation => "relation head and tail are the same mention",
        }
    }
}

/// One broken invariant, naming the offending mention or relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule.describe())
    }
}

fn relation_label(r: &Relation) -> String {
    format!("relation {}->{}", r.head_id, r.tail_id)
}

/// Checks every type invariant; an empty result means the document is valid.
pub fn validate_document(doc: &AnnotatedDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let index = CharIndex::new(&doc.text);
    let mut by_id: HashMap<&str, &EntityMention> = HashMap::new();

    for m in &doc.mentions {
        let subject = format!("mention {}", m.id);
        if by_id.insert(m.id.as_str(), m).is_some() {
            out.push(Violation { subject: subject.clone(), rule: Rule::DuplicateMentionId });
        }
        if m.span.start >= m.span.end {
            out.push(Violation { subject, rule: Rule::EmptySpan });
            continue;
        }
        match index.slice(&doc.text, m.span) {
            None => out.push(Violation { subject, rule: Rule::SpanOutOfBounds }),
            Some(s) if s != m.text => out.push(Violation { subject, rule: Rule::TextMismatch }),
            Some(_) => {}
        }
    }

    for r in &doc.relations {
        let subject = relation_label(r);
        let head = by_id.get(r.head_id.as_str());
        let tail = by_id.get(r.tail_id.as_str());
        match head {
            None => out.push(Violation { subject: subject.clone(), rule: Rule::DanglingHead }),
            Some(h) if !h.category.is_characteristic() => {
                out.push(Violation { subject: subject.clone(), rule: Rule::HeadCategory })
            }
            _ => {}
        }
        match tail {
            None => out.push(Violation { subject: subject.clone(), rule: Rule::DanglingTail }),
            Some(t) if !t.category.is_anchor() => {
                out.push(Violation { subject: subject.clone(), rule: Rule::TailCategory })
            }
            _ => {}
        }
        if r.head_id == r.tail_id {
            out.push(Violation { subject, rule: Rule::SelfRelation });
        }
    }
    out
}

/// Pairs of same-category mentions whose spans overlap. These are allowed in
/// files but usually indicate an annotation slip.
pub fn overlap_warnings(doc: &AnnotatedDocument) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, a) in doc.mentions.iter().enumerate() {
        for b in &doc.mentions[i + 1..] {
            if a.category == b.category && a.span.overlaps(&b.span) {
                out.push((a.id.clone(), b.id.clone()));
            }
        }
    }
    out
}
