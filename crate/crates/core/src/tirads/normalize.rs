use std::collections::BTreeSet;

use serde::Serialize;

use super::table::{Composition, Echogenicity, Focus, Margin, Shape, Vascularity};
use super::TiradsError;
use crate::schema::Category;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "dimension", content = "value", rename_all = "snake_case")]
pub enum Canonical {
    Composition(Composition),
    Echogenicity(Echogenicity),
    Shape(Shape),
    Margin(Margin),
    Foci(BTreeSet<Focus>),
    Vascularity(Vascularity),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub value: Canonical,
    /// Set when the text was not recognized and the value fell back.
    pub warning: Option<String>,
}

/// Lowercase, hyphens and runs of whitespace folded to single spaces, and
/// curly apostrophes straightened.
fn fold(text: &str) -> String {
    let t = text.to_lowercase().replace(['-', '\u{2010}', '\u{2011}', '_'], " ").replace('\u{2019}', "'");
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn has(t: &str, words: &[&str]) -> bool {
    words.iter().any(|w| t.contains(w))
}

const UNDETERMINED: &[&str] = &[
    "can't determine",
    "cannot determine",
    "cannot be determined",
    "can't be determined",
    "not determined",
    "indeterminate",
    "obscured",
];

fn composition(t: &str) -> Option<Composition> {
    Some(if has(t, UNDETERMINED) {
        Composition::Indeterminate
    } else if has(t, &["spongiform"]) {
        Composition::Spongiform
    } else if has(t, &["mixed", "complex", "mostly", "predominantly", "partially", "partly"])
        || (t.contains("cystic") && t.contains("solid"))
    {
        Composition::Mixed
    } else if has(t, &["cyst"]) {
        Composition::Cystic
    } else if has(t, &["solid"]) {
        Composition::Solid
    } else {
        return None;
    })
}

fn echogenicity(t: &str) -> Option<Echogenicity> {
    Some(if has(t, UNDETERMINED) {
        Echogenicity::Indeterminate
    } else if has(t, &["very hypo", "markedly hypo", "marked hypo", "very low"]) {
        Echogenicity::VeryHypoechoic
    } else if has(t, &["hypoecho", "hypo echo"]) {
        Echogenicity::Hypoechoic
    } else if has(t, &["isoecho", "iso echo"]) {
        Echogenicity::Isoechoic
    } else if has(t, &["hyperecho", "hyper echo"]) {
        Echogenicity::Hyperechoic
    } else if has(t, &["anechoic", "an echoic"]) {
        Echogenicity::Anechoic
    } else {
        return None;
    })
}

fn shape(t: &str) -> Option<Shape> {
    Some(if has(t, UNDETERMINED) {
        Shape::Indeterminate
    } else if has(t, &["taller than wide", "taller than wider", "taller"]) {
        Shape::TallerThanWide
    } else if has(t, &["wider than tall", "wider", "oval", "ovoid", "round", "elliptical"]) {
        Shape::WiderThanTall
    } else {
        return None;
    })
}

fn margin(t: &str) -> Option<Margin> {
    Some(if has(t, UNDETERMINED) {
        Margin::Indeterminate
    } else if has(t, &["extrathyroidal", "extra thyroidal", "extension", "invasion", "invasive"]) {
        Margin::ExtrathyroidalExtension
    } else if has(t, &["lobulated", "irregular", "spiculated", "jagged", "angular"]) {
        Margin::LobulatedIrregular
    } else if has(t, &["ill defined", "poorly defined", "indistinct", "blurred"]) {
        Margin::IllDefined
    } else if has(t, &["smooth", "well defined", "circumscribed", "regular", "sharp"]) {
        Margin::Smooth
    } else {
        return None;
    })
}

/// Every focus type the text names; `None` when nothing is recognized.
fn foci(t: &str) -> Option<BTreeSet<Focus>> {
    let mut out = BTreeSet::new();
    if has(t, &["comet"]) {
        out.insert(Focus::CometTail);
    }
    if has(t, &["macrocalc", "macro calc", "coarse", "large calc"]) {
        out.insert(Focus::Macrocalcification);
    }
    if has(t, &["rim", "peripheral", "eggshell", "egg shell"]) {
        out.insert(Focus::PeripheralRim);
    }
    if has(t, &["punctate", "microcalc", "micro calc", "stippled"]) {
        out.insert(Focus::Punctate);
    }
    if out.is_empty() && !(t == "none" || t.starts_with("no ") || t.contains("without")) {
        return None;
    }
    Some(out)
}

fn vascularity(t: &str) -> Option<Vascularity> {
    Some(if has(t, &["avascular", "no vascular", "no internal", "absent"]) {
        Vascularity::Avascular
    } else if has(t, &["increased", "high", "hypervascular", "marked", "prominent"]) {
        Vascularity::Increased
    } else if has(t, &["normal", "mild", "minimal", "low", "peripheral", "internal"]) {
        Vascularity::Normal
    } else if has(t, UNDETERMINED) {
        Vascularity::Indeterminate
    } else {
        return None;
    })
}

/// Maps a mention's text to its canonical value. Unrecognized text gives the
/// dimension's indeterminate value (an empty set for foci) and a warning.
pub fn normalize(category: Category, text: &str) -> Result<Normalized, TiradsError> {
    let t = fold(text);
    let (value, known) = match category {
        Category::Composition => {
            let v = composition(&t);
            (Canonical::Composition(v.unwrap_or(Composition::Indeterminate)), v.is_some())
        }
        Category::Echogenicity => {
            let v = echogenicity(&t);
            (Canonical::Echogenicity(v.unwrap_or(Echogenicity::Indeterminate)), v.is_some())
        }
        Category::Shape => {
            let v = shape(&t);
            (Canonical::Shape(v.unwrap_or(Shape::Indeterminate)), v.is_some())
        }
        Category::Margins => {
            let v = margin(&t);
            (Canonical::Margin(v.unwrap_or(Margin::Indeterminate)), v.is_some())
        }
        Category::EchogenicFoci => {
            let v = foci(&t);
            let known = v.is_some();
            (Canonical::Foci(v.unwrap_or_default()), known)
        }
        Category::Vascularity => {
            let v = vascularity(&t);
            (Canonical::Vascularity(v.unwrap_or(Vascularity::Indeterminate)), v.is_some())
        }
        other => return Err(TiradsError::UnsupportedCategory(other)),
    };
    let warning = (!known).then(|| format!("unrecognized {} text `{}`", category.name(), text));
    Ok(Normalized { value, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(c: Category, t: &str) -> Canonical {
        let n = normalize(c, t).unwrap();
        assert!(n.warning.is_none(), "{t}: {:?}", n.warning);
        n.value
    }

    #[test]
    fn surface_forms() {
        use Category::*;
        assert_eq!(value(Composition, "spongiform"), Canonical::Composition(super::Composition::Spongiform));
        assert_eq!(value(Composition, "purely cystic"), Canonical::Composition(super::Composition::Cystic));
        assert_eq!(value(Composition, "mostly cystic"), Canonical::Composition(super::Composition::Mixed));
        assert_eq!(value(Composition, "mixed cystic and solid"), Canonical::Composition(super::Composition::Mixed));
        assert_eq!(value(Composition, "Solid"), Canonical::Composition(super::Composition::Solid));
        assert_eq!(value(Echogenicity, "very hypoechoic"), Canonical::Echogenicity(super::Echogenicity::VeryHypoechoic));
        assert_eq!(value(Echogenicity, "hyperechoic"), Canonical::Echogenicity(super::Echogenicity::Hyperechoic));
        assert_eq!(value(Echogenicity, "can't determine"), Canonical::Echogenicity(super::Echogenicity::Indeterminate));
        assert_eq!(value(Shape, "taller than wider"), Canonical::Shape(super::Shape::TallerThanWide));
        assert_eq!(value(Shape, "taller-than-wide"), Canonical::Shape(super::Shape::TallerThanWide));
        assert_eq!(value(Margins, "irregular"), Canonical::Margin(Margin::LobulatedIrregular));
        assert_eq!(value(Margins, "ill-defined"), Canonical::Margin(Margin::IllDefined));
        assert_eq!(value(Margins, "extrathyroidal extension"), Canonical::Margin(Margin::ExtrathyroidalExtension));
        assert_eq!(value(Margins, "smooth"), Canonical::Margin(Margin::Smooth));
        assert_eq!(value(EchogenicFoci, "rim calcification"), Canonical::Foci([Focus::PeripheralRim].into()));
        assert_eq!(
            value(EchogenicFoci, "punctate echogenic foci and macrocalcifications"),
            Canonical::Foci([Focus::Macrocalcification, Focus::Punctate].into())
        );
        assert_eq!(value(EchogenicFoci, "no echogenic foci"), Canonical::Foci(BTreeSet::new()));
        assert_eq!(value(Vascularity, "high vascularity"), Canonical::Vascularity(super::Vascularity::Increased));
    }

    #[test]
    fn unknown_text_falls_back_with_warning() {
        let n = normalize(Category::Composition, "gibberish").unwrap();
        assert_eq!(n.value, Canonical::Composition(Composition::Indeterminate));
        assert!(n.warning.is_some());
    }

    #[test]
    fn unsupported_category() {
        assert!(matches!(normalize(Category::Laterality, "right"), Err(TiradsError::UnsupportedCategory(_))));
    }
}
