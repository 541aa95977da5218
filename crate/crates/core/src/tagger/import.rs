use std::path::Path;
use std::str::FromStr;

use crate::corpus::{read_conll, read_json, CorpusError, InvalidDocument};
use crate::schema::AnnotatedDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportFormat {
    Json,
    Conll,
}

impl FromStr for ImportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "jsonl" => Ok(ImportFormat::Json),
            "conll" => Ok(ImportFormat::Conll),
            _ => Err(format!("unknown prediction format `{s}` (expected json or conll)")),
        }
    }
}

/// Predicted documents from another tool.
#[derive(Debug, Clone, Default)]
pub struct Imported {
    pub documents: Vec<AnnotatedDocument>,
    pub invalid: Vec<InvalidDocument>,
    /// Tags changed by IOB2 repair (CoNLL only).
    pub repairs: usize,
    pub warnings: Vec<String>,
}

pub fn import_predictions(path: &Path, format: ImportFormat) -> Result<Imported, CorpusError> {
    match format {
        ImportFormat::Json => {
            let l = read_json(path)?;
            Ok(Imported { documents: l.documents, invalid: l.invalid, repairs: 0, warnings: l.warnings })
        }
        ImportFormat::Conll => {
            let c = read_conll(path)?;
            Ok(Imported {
                documents: c.loaded.documents,
                invalid: c.loaded.invalid,
                repairs: c.repairs,
                warnings: c.loaded.warnings,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_json;
    use crate::schema::{Category, EntityMention, Span};

    #[test]
    fn json_round_trip() {
        let mut d = AnnotatedDocument::new("a", "oval nodule");
        d.mentions.push(EntityMention::new("T1", Category::Shape, Span::new(0, 4), "oval"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.jsonl");
        write_json(&p, std::slice::from_ref(&d)).unwrap();
        let got = import_predictions(&p, ImportFormat::Json).unwrap();
        assert_eq!(got.documents, vec![d]);
    }

    #[test]
    fn conll_repair_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.conll");
        std::fs::write(&p, "#doc a\nwith\t0\t4\tO\nsmooth\t5\t11\tI-MARGINS\n").unwrap();
        let got = import_predictions(&p, ImportFormat::Conll).unwrap();
        assert_eq!(got.repairs, 1);
        assert_eq!(got.warnings.len(), 1);
        assert_eq!(got.documents[0].mentions[0].text, "smooth");
    }

    #[test]
    fn malformed_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.jsonl");
        std::fs::write(&p, "{not json\n").unwrap();
        assert!(matches!(import_predictions(&p, ImportFormat::Json), Err(CorpusError::Json { line: 1, .. })));
    }
}
