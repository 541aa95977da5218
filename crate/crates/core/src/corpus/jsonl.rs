use std::fs;
use std::path::Path;

use super::{ensure_valid, io_err, CorpusError, Loaded};
use crate::schema::AnnotatedDocument;

/// One compact JSON object per line, newline-terminated.
pub fn to_json_lines(docs: &[AnnotatedDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("documents always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_json(path: &Path, docs: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    ensure_valid(docs)?;
    fs::write(path, to_json_lines(docs)).map_err(io_err(path))
}

/// Parses JSON-lines text. Blank lines are skipped; unknown fields (such as
/// the extraction output's profiles) are ignored.
pub fn parse_json_lines(text: &str) -> Result<Loaded, CorpusError> {
    let mut loaded = Loaded::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: AnnotatedDocument = serde_json::from_str(line).map_err(|e| CorpusError::Json {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        loaded.push(doc);
    }
    Ok(loaded)
}

pub fn read_json(path: &Path) -> Result<Loaded, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_json_lines(&text)
}
