//! Strict and lenient span scoring, relation scoring, and report rendering.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::schema::{AnnotatedDocument, Category, EntityMention};

pub const STRICT_DEFINITION: &str =
    "strict: a predicted mention is correct when a gold mention has the same category and the identical character span";
pub const LENIENT_DEFINITION: &str =
    "lenient: a predicted mention is correct when an unmatched gold mention has the same category and shares at least one character";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Strict,
    Lenient,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(MatchMode::Strict),
            "lenient" => Ok(MatchMode::Lenient),
            _ => Err(format!("unknown match mode `{s}` (expected strict or lenient)")),
        }
    }
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMode::Strict => "strict",
            MatchMode::Lenient => "lenient",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("documents `{gold}` and `{pred}` are not the same document")]
    DocumentMismatch { gold: String, pred: String },
    #[error("document `{0}`: gold and predicted texts differ")]
    TextMismatch(String),
    #[error("document id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("{side} is missing documents: {}", .ids.join(", "))]
    MissingDocuments { side: &'static str, ids: Vec<String> },
    #[error("document {doc}: relation refers to unknown mention `{id}`")]
    Dangling { doc: String, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Counts {
    /// Zero denominators give 0.
    pub fn prf(self) -> Prf {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { tp: self.tp, fp: self.fp, fn_: self.fn_, precision, recall, f1 }
    }
}

/// One-to-one pairs as (gold index, pred index), plus leftovers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gold: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Strict pairs identical (category, span). Lenient pairs same-category
/// overlapping spans, greedily: exact matches first, then larger overlap,
/// then earlier gold start. OTHER mentions are ignored on both sides.
pub fn match_mentions(gold: &[EntityMention], pred: &[EntityMention], mode: MatchMode) -> Matching {
    let mut cands: Vec<(bool, usize, usize, usize, usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        if g.category == Category::Other {
            continue;
        }
        for (pi, p) in pred.iter().enumerate() {
            if p.category != g.category {
                continue;
            }
            let exact = p.span == g.span;
            let ok = match mode {
                MatchMode::Strict => exact,
                MatchMode::Lenient => g.span.overlaps(&p.span),
            };
            if ok {
                cands.push((!exact, usize::MAX - g.span.overlap_len(&p.span), g.span.start, gi, p.span.start, pi));
            }
        }
    }
    cands.sort_unstable();
    let mut used_g = vec![false; gold.len()];
    let mut used_p = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for &(_, _, _, gi, _, pi) in &cands {
        if !used_g[gi] && !used_p[pi] {
            used_g[gi] = true;
            used_p[pi] = true;
            pairs.push((gi, pi));
        }
    }
    pairs.sort_unstable();
    let unmatched_gold = (0..gold.len()).filter(|&i| !used_g[i] && gold[i].category != Category::Other).collect();
    let unmatched_pred = (0..pred.len()).filter(|&i| !used_p[i] && pred[i].category != Category::Other).collect();
    Matching { pairs, unmatched_gold, unmatched_pred }
}

/// Matching between two versions of the same document.
pub fn match_documents(gold: &AnnotatedDocument, pred: &AnnotatedDocument, mode: MatchMode) -> Result<Matching, EvalError> {
    if gold.id != pred.id {
        return Err(EvalError::DocumentMismatch { gold: gold.id.clone(), pred: pred.id.clone() });
    }
    if gold.text != pred.text {
        return Err(EvalError::TextMismatch(gold.id.clone()));
    }
    Ok(match_mentions(&gold.mentions, &pred.mentions, mode))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeReport {
    pub per_category: BTreeMap<Category, Counts>,
    pub overall: Counts,
}

impl ModeReport {
    fn add(&mut self, other: &ModeReport) {
        for (c, n) in &other.per_category {
            *self.per_category.entry(*c).or_default() += *n;
        }
        self.overall += other.overall;
    }
}

/// Which gold mention each prediction matched, by mention id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub doc: String,
    pub mode: MatchMode,
    pub gold: String,
    pub pred: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub strict: ModeReport,
    pub lenient: ModeReport,
    pub documents: usize,
    /// Gold documents with no prediction, scored against an empty prediction.
    pub missing_pred: Vec<String>,
    /// Predicted documents with no gold, scored against empty gold.
    pub missing_gold: Vec<String>,
    pub audit: Vec<MatchRecord>,
}

impl EvalReport {
    pub fn mode(&self, mode: MatchMode) -> &ModeReport {
        match mode {
            MatchMode::Strict => &self.strict,
            MatchMode::Lenient => &self.lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    /// Fail on documents present on one side only instead of scoring them
    /// against an empty document.
    pub strict_ids: bool,
}

fn doc_mode(gold: &[EntityMention], pred: &[EntityMention], mode: MatchMode, doc: &str, audit: &mut Vec<MatchRecord>) -> ModeReport {
    let m = match_mentions(gold, pred, mode);
    let mut r = ModeReport::default();
    for &(gi, pi) in &m.pairs {
        r.per_category.entry(gold[gi].category).or_default().tp += 1;
        audit.push(MatchRecord { doc: doc.to_string(), mode, gold: gold[gi].id.clone(), pred: pred[pi].id.clone() });
    }
    for &gi in &m.unmatched_gold {
        r.per_category.entry(gold[gi].category).or_default().fn_ += 1;
    }
    for &pi in &m.unmatched_pred {
        r.per_category.entry(pred[pi].category).or_default().fp += 1;
    }
    for n in r.per_category.values() {
        r.overall += *n;
    }
    r
}

type DocPair<'a> = (String, Option<&'a AnnotatedDocument>, Option<&'a AnnotatedDocument>);

struct Aligned<'a> {
    /// Gold order, then pred-only ids.
    pairs: Vec<DocPair<'a>>,
    missing_pred: Vec<String>,
    missing_gold: Vec<String>,
}

fn align<'a>(gold: &'a [AnnotatedDocument], pred: &'a [AnnotatedDocument], options: EvalOptions) -> Result<Aligned<'a>, EvalError> {
    let index = |docs: &'a [AnnotatedDocument]| -> Result<HashMap<&'a str, &'a AnnotatedDocument>, EvalError> {
        let mut m = HashMap::new();
        for d in docs {
            if m.insert(d.id.as_str(), d).is_some() {
                return Err(EvalError::DuplicateId(d.id.clone()));
            }
        }
        Ok(m)
    };
    let gi = index(gold)?;
    let pi = index(pred)?;
    let missing_pred: Vec<String> = gold.iter().filter(|d| !pi.contains_key(d.id.as_str())).map(|d| d.id.clone()).collect();
    let missing_gold: Vec<String> = pred.iter().filter(|d| !gi.contains_key(d.id.as_str())).map(|d| d.id.clone()).collect();
    if options.strict_ids {
        if !missing_pred.is_empty() {
            return Err(EvalError::MissingDocuments { side: "prediction", ids: missing_pred });
        }
        if !missing_gold.is_empty() {
            return Err(EvalError::MissingDocuments { side: "gold", ids: missing_gold });
        }
    }
    for g in gold {
        if pi.get(g.id.as_str()).is_some_and(|p| p.text != g.text) {
            return Err(EvalError::TextMismatch(g.id.clone()));
        }
    }
    let mut pairs: Vec<_> = gold.iter().map(|g| (g.id.clone(), Some(g), pi.get(g.id.as_str()).copied())).collect();
    pairs.extend(pred.iter().filter(|p| !gi.contains_key(p.id.as_str())).map(|p| (p.id.clone(), None, Some(p))));
    Ok(Aligned { pairs, missing_pred, missing_gold })
}

/// Micro-averaged scores in both modes. Per-document results are summed,
/// so the outcome does not depend on the thread count.
pub fn score_ner(gold: &[AnnotatedDocument], pred: &[AnnotatedDocument], options: EvalOptions) -> Result<EvalReport, EvalError> {
    let Aligned { pairs, missing_pred, missing_gold } = align(gold, pred, options)?;
    let per_doc: Vec<(ModeReport, ModeReport, Vec<MatchRecord>)> = pairs
        .par_iter()
        .map(|(id, g, p)| {
            let empty = Vec::new();
            let gm = g.map_or(&empty, |d| &d.mentions);
            let pm = p.map_or(&empty, |d| &d.mentions);
            let mut audit = Vec::new();
            let s = doc_mode(gm, pm, MatchMode::Strict, id, &mut audit);
            let l = doc_mode(gm, pm, MatchMode::Lenient, id, &mut audit);
            (s, l, audit)
        })
        .collect();
    let mut report = EvalReport { documents: pairs.len(), missing_pred, missing_gold, ..Default::default() };
    for (s, l, a) in per_doc {
        report.strict.add(&s);
        report.lenient.add(&l);
        report.audit.extend(a);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub endpoint_mode: MatchMode,
    pub counts: Counts,
}

impl RelationScore {
    pub fn prf(&self) -> Prf {
        self.counts.prf()
    }
}

fn check_relations(doc: &AnnotatedDocument) -> Result<(), EvalError> {
    let ids: HashSet<&str> = doc.mentions.iter().map(|m| m.id.as_str()).collect();
    for r in &doc.relations {
        for id in [&r.head_id, &r.tail_id] {
            if !ids.contains(id.as_str()) {
                return Err(EvalError::Dangling { doc: doc.id.clone(), id: id.clone() });
            }
        }
    }
    Ok(())
}

fn doc_relations(gold: Option<&AnnotatedDocument>, pred: Option<&AnnotatedDocument>, mode: MatchMode) -> Counts {
    let empty = AnnotatedDocument::default();
    let g = gold.unwrap_or(&empty);
    let p = pred.unwrap_or(&empty);
    let m = match_mentions(&g.mentions, &p.mentions, mode);
    let to_gold: HashMap<&str, &str> =
        m.pairs.iter().map(|&(gi, pi)| (p.mentions[pi].id.as_str(), g.mentions[gi].id.as_str())).collect();
    let gold_rel: HashSet<(&str, &str)> = g.relations.iter().map(|r| (r.head_id.as_str(), r.tail_id.as_str())).collect();
    let mut credited = HashSet::new();
    let mut seen = HashSet::new();
    let mut c = Counts::default();
    for r in &p.relations {
        if !seen.insert((r.head_id.as_str(), r.tail_id.as_str())) {
            continue;
        }
        let hit = matches!(
            (to_gold.get(r.head_id.as_str()), to_gold.get(r.tail_id.as_str())),
            (Some(&h), Some(&t)) if gold_rel.contains(&(h, t)) && credited.insert((h, t))
        );
        if hit {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    c.fn_ = gold_rel.len() - credited.len();
    c
}

/// A predicted relation counts when both endpoints match gold mentions under
/// `endpoint_mode` and a gold relation joins those gold mentions in the same
/// direction. Each gold relation is credited once.
pub fn score_relations(
    gold: &[AnnotatedDocument],
    pred: &[AnnotatedDocument],
    endpoint_mode: MatchMode,
    options: EvalOptions,
) -> Result<RelationScore, EvalError> {
    for d in gold.iter().chain(pred) {
        check_relations(d)?;
    }
    let pairs = align(gold, pred, options)?.pairs;
    let counts = pairs
        .par_iter()
        .map(|(_, g, p)| doc_relations(*g, *p, endpoint_mode))
        .reduce(Counts::default, |mut a, b| {
            a += b;
            a
        });
    Ok(RelationScore { endpoint_mode, counts })
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

/// Text table: one row per category with any gold or predicted mention, in
/// canonical order, then the micro-averaged Overall row.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {STRICT_DEFINITION}");
    let _ = writeln!(out, "# {LENIENT_DEFINITION}");
    let _ = writeln!(out, "# overall: micro-averaged over categories");
    let _ = writeln!(out, "# documents: {}", report.documents);
    if !report.missing_pred.is_empty() {
        let _ = writeln!(out, "# documents without prediction: {}", report.missing_pred.len());
    }
    if !report.missing_gold.is_empty() {
        let _ = writeln!(out, "# documents without gold: {}", report.missing_gold.len());
    }
    let _ = writeln!(
        out,
        "{:<24} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "Category", "Strict P", "Strict R", "Strict F1", "Lenient P", "Lenient R", "Lenient F1"
    );
    let row = |out: &mut String, name: &str, s: Prf, l: Prf| {
        let _ = writeln!(
            out,
            "{:<24} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            name,
            f4(s.precision),
            f4(s.recall),
            f4(s.f1),
            f4(l.precision),
            f4(l.recall),
            f4(l.f1)
        );
    };
    for c in Category::targets() {
        let s = report.strict.per_category.get(c).copied().unwrap_or_default();
        let l = report.lenient.per_category.get(c).copied().unwrap_or_default();
        if s == Counts::default() && l == Counts::default() {
            continue;
        }
        row(&mut out, c.name(), s.prf(), l.prf());
    }
    row(&mut out, "Overall", report.strict.overall.prf(), report.lenient.overall.prf());
    out
}

pub fn render_relations(score: &RelationScore) -> String {
    let p = score.prf();
    format!(
        "# relations: endpoints matched {}\n{:<24} {:>9} {:>9} {:>9}\n{:<24} {:>9} {:>9} {:>9}\n",
        score.endpoint_mode,
        "Relation",
        "P",
        "R",
        "F1",
        "ATTRIBUTE_OF",
        f4(p.precision),
        f4(p.recall),
        f4(p.f1)
    )
}

fn mode_json(r: &ModeReport) -> Value {
    let mut m = serde_json::Map::new();
    for c in Category::targets() {
        if let Some(n) = r.per_category.get(c) {
            m.insert(c.name().to_string(), serde_json::to_value(n.prf()).expect("plain numbers"));
        }
    }
    m.insert("overall".into(), serde_json::to_value(r.overall.prf()).expect("plain numbers"));
    Value::Object(m)
}

/// Machine-readable twin of [`render_report`].
pub fn report_json(report: &EvalReport, relations: Option<&RelationScore>) -> Value {
    let mut v = json!({
        "averaging": "micro",
        "definitions": { "strict": STRICT_DEFINITION, "lenient": LENIENT_DEFINITION },
        "documents": report.documents,
        "missing_pred": report.missing_pred,
        "missing_gold": report.missing_gold,
        "strict": mode_json(&report.strict),
        "lenient": mode_json(&report.lenient),
    });
    if let Some(r) = relations {
        let mut rel = serde_json::to_value(r.prf()).expect("plain numbers");
        rel["endpoint_mode"] = json!(r.endpoint_mode);
        v["relations"] = rel;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Relation, Span};

    fn m(id: &str, c: Category, s: usize, e: usize) -> EntityMention {
        EntityMention::new(id, c, Span::new(s, e), "x".repeat(e - s))
    }

    fn d(id: &str, ms: Vec<EntityMention>) -> AnnotatedDocument {
        let mut doc = AnnotatedDocument::new(id, " ".repeat(60));
        doc.mentions = ms;
        doc
    }

    #[test]
    fn overlap_fixture() {
        let g = [m("g", Category::Composition, 0, 5)];
        let p = [m("p", Category::Composition, 0, 3)];
        assert!(match_mentions(&g, &p, MatchMode::Strict).pairs.is_empty());
        assert_eq!(match_mentions(&g, &p, MatchMode::Lenient).pairs, vec![(0, 0)]);
        let p = [m("p", Category::Margins, 0, 5)];
        let g = [m("g", Category::Shape, 0, 5)];
        assert!(match_mentions(&g, &p, MatchMode::Lenient).pairs.is_empty());
    }

    #[test]
    fn lenient_prefers_exact_then_overlap() {
        let g = [m("a", Category::Shape, 0, 10), m("b", Category::Shape, 4, 8)];
        let p = [m("x", Category::Shape, 4, 8), m("y", Category::Shape, 0, 3)];
        assert_eq!(match_mentions(&g, &p, MatchMode::Lenient).pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn two_thirds_fixture() {
        let gold = vec![d("a", vec![
            m("g1", Category::Composition, 0, 5),
            m("g2", Category::Composition, 10, 15),
            m("g3", Category::Composition, 20, 25),
        ])];
        let pred = vec![d("a", vec![
            m("p1", Category::Composition, 0, 5),
            m("p2", Category::Composition, 10, 15),
            m("p3", Category::Composition, 40, 45),
        ])];
        let r = score_ner(&gold, &pred, EvalOptions::default()).unwrap();
        let s = r.strict.overall.prf();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-9);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-9);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_prediction() {
        let gold = vec![d("a", vec![m("g1", Category::Shape, 0, 5), m("g2", Category::Shape, 6, 9)])];
        let r = score_ner(&gold, &[], EvalOptions::default()).unwrap();
        let p = r.strict.overall.prf();
        assert_eq!((p.precision, p.recall, p.f1, p.fn_), (0.0, 0.0, 0.0, 2));
        assert_eq!(r.missing_pred, vec!["a".to_string()]);
        assert!(score_ner(&gold, &[], EvalOptions { strict_ids: true }).is_err());
    }

    #[test]
    fn relation_fixtures() {
        let mut g = d("a", vec![m("T1", Category::Shape, 0, 4), m("T2", Category::ThyroidNodule, 5, 11)]);
        g.relations.push(Relation::attribute_of("T1", "T2"));
        let r = score_relations(std::slice::from_ref(&g), std::slice::from_ref(&g), MatchMode::Strict, EvalOptions::default()).unwrap();
        assert_eq!(r.prf().f1, 1.0);

        let mut rev = g.clone();
        rev.relations = vec![Relation::attribute_of("T2", "T1")];
        let r = score_relations(std::slice::from_ref(&g), &[rev], MatchMode::Strict, EvalOptions::default()).unwrap();
        assert_eq!(r.counts, Counts { tp: 0, fp: 1, fn_: 1 });

        let mut shifted = g.clone();
        shifted.mentions[0].span = Span::new(1, 4);
        let strict = score_relations(std::slice::from_ref(&g), std::slice::from_ref(&shifted), MatchMode::Strict, EvalOptions::default()).unwrap();
        let lenient = score_relations(std::slice::from_ref(&g), &[shifted], MatchMode::Lenient, EvalOptions::default()).unwrap();
        assert_eq!(strict.counts.tp, 0);
        assert_eq!(lenient.counts.tp, 1);

        let mut dangling = g.clone();
        dangling.relations.push(Relation::attribute_of("T1", "T9"));
        assert!(matches!(
            score_relations(&[g], &[dangling], MatchMode::Strict, EvalOptions::default()),
            Err(EvalError::Dangling { .. })
        ));
    }

    #[test]
    fn rendering() {
        let gold = vec![d("a", vec![m("g1", Category::Shape, 0, 5)])];
        let r = score_ner(&gold, &gold, EvalOptions::default()).unwrap();
        let text = render_report(&r);
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("SHAPE") && rows[0].contains("1.0000"));
        assert_eq!(f4(0.5), "0.5000");
        let v = report_json(&r, None);
        let back: Value = serde_json::from_str(&v.to_string()).unwrap();
        assert_eq!(back["strict"]["SHAPE"]["f1"].as_f64(), Some(1.0));
        assert_eq!(back["lenient"]["overall"]["tp"].as_u64(), Some(1));
    }

    #[test]
    fn mismatched_documents() {
        let a = d("a", vec![]);
        let b = d("b", vec![]);
        assert!(match_documents(&a, &b, MatchMode::Strict).is_err());
    }
}
