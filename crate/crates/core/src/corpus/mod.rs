//! Corpus generation, selection, and file formats.
//!
//! JSON-lines is the canonical on-disk form; CoNLL and standoff are
//! interchange formats for training tools and annotation tools.

mod conll;
mod jsonl;
mod select;
mod standoff;
mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::schema::{validate_document, AnnotatedDocument, Violation};

pub use conll::{parse_conll, read_conll, to_conll, write_conll, ConllCorpus};
pub use jsonl::{parse_json_lines, read_json, to_json_lines, write_json};
pub use select::{filter_reports, split_corpus, CorpusSplit, SplitRatios};
pub use standoff::{read_standoff, write_standoff};
pub use synth::{synth_generate, ReportStyle, SynthConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("{file}:{line}: {message}")]
    Standoff { file: String, line: usize, message: String },
    #[error("document {id} is invalid: {}", first_violation(.violations))]
    Invalid { id: String, violations: Vec<Violation> },
    #[error("document {id}: {message}")]
    Align { id: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid split ratios: {0}")]
    Ratio(String),
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

/// A document that failed validation while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidDocument {
    pub id: String,
    pub violations: Vec<Violation>,
}

/// Result of reading a corpus file: valid documents in file order, plus the
/// documents rejected by validation and any non-fatal warnings.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub documents: Vec<AnnotatedDocument>,
    pub invalid: Vec<InvalidDocument>,
    pub warnings: Vec<String>,
}

impl Loaded {
    pub(crate) fn push(&mut self, doc: AnnotatedDocument) {
        let violations = validate_document(&doc);
        if violations.is_empty() {
            self.documents.push(doc);
        } else {
            self.invalid.push(InvalidDocument { id: doc.id, violations });
        }
    }

    pub fn is_clean(&self) -> bool {
        self.invalid.is_empty()
    }
}

pub(crate) fn ensure_valid(docs: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    for d in docs {
        let violations = validate_document(d);
        if !violations.is_empty() {
            return Err(CorpusError::Invalid { id: d.id.clone(), violations });
        }
    }
    Ok(())
}
