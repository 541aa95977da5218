//! ACR TI-RADS points and levels for assembled nodule profiles.

mod normalize;
mod table;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::schema::{Category, EntityMention, NoduleProfile};

pub use normalize::{normalize, Canonical, Normalized};
pub use table::{Composition, Dimension, Echogenicity, Focus, Level, Margin, PointTable, Shape, TableError, Vascularity};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TiradsError {
    #[error("category {} has no canonical values", .0.name())]
    UnsupportedCategory(Category),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct NoduleFeatureSet {
    pub composition: Composition,
    pub echogenicity: Echogenicity,
    pub shape: Shape,
    pub margin: Margin,
    pub foci: BTreeSet<Focus>,
}

impl Default for NoduleFeatureSet {
    fn default() -> Self {
        NoduleFeatureSet {
            composition: Composition::Absent,
            echogenicity: Echogenicity::Absent,
            shape: Shape::Absent,
            margin: Margin::Absent,
            foci: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Breakdown {
    pub composition: u32,
    pub echogenicity: u32,
    pub shape: u32,
    pub margin: u32,
    pub foci: u32,
}

impl Breakdown {
    pub fn total(&self) -> u32 {
        self.composition + self.echogenicity + self.shape + self.margin + self.foci
    }
}

/// Points for a feature set; foci points are summed over the set.
pub fn score_features(features: &NoduleFeatureSet, table: &PointTable) -> Breakdown {
    Breakdown {
        composition: table.composition(features.composition),
        echogenicity: table.echogenicity(features.echogenicity),
        shape: table.shape(features.shape),
        margin: table.margin(features.margin),
        foci: features.foci.iter().map(|f| table.focus(*f)).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TiradsResult {
    pub anchor_id: String,
    pub total_points: u32,
    pub level: Level,
    pub breakdown: Breakdown,
    pub features: NoduleFeatureSet,
    /// Dimensions no linked mention described.
    pub missing: Vec<Dimension>,
    /// Dimensions described by mentions that disagree.
    pub conflicts: Vec<Dimension>,
    pub warnings: Vec<String>,
}

/// Among differing values for one dimension the highest-point value wins;
/// equal points fall to the earlier canonical value.
fn pick<T: Copy + Ord>(values: &[T], points: impl Fn(T) -> u32) -> Option<(T, bool)> {
    let first = *values.first()?;
    let conflict = values.iter().any(|v| *v != first);
    let best = values.iter().copied().max_by(|a, b| points(*a).cmp(&points(*b)).then(b.cmp(a)))?;
    Some((best, conflict))
}

pub fn score_profile(profile: &NoduleProfile, table: &PointTable) -> TiradsResult {
    let mut comp = Vec::new();
    let mut echo = Vec::new();
    let mut shape = Vec::new();
    let mut margin = Vec::new();
    let mut foci_sets: Vec<BTreeSet<Focus>> = Vec::new();
    let mut warnings = Vec::new();
    for m in &profile.characteristics {
        let Ok(n) = normalize(m.category, &m.text) else { continue };
        if let Some(w) = n.warning {
            warnings.push(format!("{}: {w}", m.id));
        }
        match n.value {
            Canonical::Composition(v) => comp.push(v),
            Canonical::Echogenicity(v) => echo.push(v),
            Canonical::Shape(v) => shape.push(v),
            Canonical::Margin(v) => margin.push(v),
            Canonical::Foci(v) => foci_sets.push(v),
            Canonical::Vascularity(_) => {}
        }
    }
    let mut missing = Vec::new();
    let mut conflicts = Vec::new();
    let mut features = NoduleFeatureSet::default();
    let mut settle = |dim: Dimension, found: Option<bool>| match found {
        None => missing.push(dim),
        Some(true) => conflicts.push(dim),
        Some(false) => {}
    };

    let c = pick(&comp, |v| table.composition(v));
    settle(Dimension::Composition, c.map(|x| x.1));
    if let Some((v, _)) = c {
        features.composition = v;
    }
    let e = pick(&echo, |v| table.echogenicity(v));
    settle(Dimension::Echogenicity, e.map(|x| x.1));
    if let Some((v, _)) = e {
        features.echogenicity = v;
    }
    let s = pick(&shape, |v| table.shape(v));
    settle(Dimension::Shape, s.map(|x| x.1));
    if let Some((v, _)) = s {
        features.shape = v;
    }
    let g = pick(&margin, |v| table.margin(v));
    settle(Dimension::Margin, g.map(|x| x.1));
    if let Some((v, _)) = g {
        features.margin = v;
    }
    // foci form a set, so several mentions add up instead of conflicting
    settle(Dimension::Foci, (!foci_sets.is_empty()).then_some(false));
    features.foci = foci_sets.into_iter().flatten().collect();

    let breakdown = score_features(&features, table);
    let total_points = breakdown.total();
    TiradsResult {
        anchor_id: profile.anchor.id.clone(),
        total_points,
        level: table.level(total_points),
        breakdown,
        features,
        missing,
        conflicts,
        warnings,
    }
}

/// A documented TI-RADS value that disagrees with the computed one or could
/// not be read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub anchor_id: String,
    pub mention_id: String,
    pub documented_text: String,
    pub documented: Option<Level>,
    pub computed: Level,
    pub computed_points: u32,
    pub parse_failure: bool,
    pub missing: Vec<Dimension>,
}

/// Reads a documented level from a TIRADS_SCORE or TIRADS_RISK_CATEGORY
/// mention. A number followed by "point(s)" is a point total and goes
/// through the table; otherwise the last digit 1 to 5 is the level.
pub fn documented_level(mention: &EntityMention, table: &PointTable) -> Option<Level> {
    let t = mention.text.to_lowercase();
    let numbers: Vec<(u32, usize)> = {
        let mut out = Vec::new();
        let mut cur = String::new();
        let mut end = 0;
        for (i, c) in t.char_indices() {
            if c.is_ascii_digit() {
                cur.push(c);
                end = i + 1;
            } else if !cur.is_empty() {
                out.push((cur.parse().ok()?, end));
                cur.clear();
            }
        }
        if !cur.is_empty() {
            out.push((cur.parse().ok()?, end));
        }
        out
    };
    if let Some(&(n, end)) = numbers.last() {
        if t[end..].trim_start().starts_with("point") || t[end..].trim_start().starts_with("pt") {
            return Some(table.level(n));
        }
        return Level::from_number(n);
    }
    if mention.category == Category::TiradsRiskCategory {
        let words = [
            ("highly suspicious", Level::TR5),
            ("moderately suspicious", Level::TR4),
            ("mildly suspicious", Level::TR3),
            ("not suspicious", Level::TR2),
            ("benign", Level::TR1),
        ];
        return words.iter().find(|(w, _)| t.contains(w)).map(|&(_, l)| l);
    }
    None
}

pub fn audit_consistency(profiles: &[NoduleProfile], results: &[TiradsResult], table: &PointTable) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    for (p, r) in profiles.iter().zip(results) {
        for m in p
            .characteristics
            .iter()
            .filter(|m| matches!(m.category, Category::TiradsScore | Category::TiradsRiskCategory))
        {
            let documented = documented_level(m, table);
            if documented == Some(r.level) {
                continue;
            }
            out.push(Discrepancy {
                anchor_id: p.anchor.id.clone(),
                mention_id: m.id.clone(),
                documented_text: m.text.clone(),
                documented,
                computed: r.level,
                computed_points: r.total_points,
                parse_failure: documented.is_none(),
                missing: r.missing.clone(),
            });
        }
    }
    out
}
