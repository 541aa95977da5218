use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{io_err, CorpusError, Loaded};
use crate::preprocess::{align_mentions, bio_to_spans, spans_to_bio, BioTag, OverlapPolicy, Prepared, Token};
use crate::schema::{AnnotatedDocument, Span};

/// Documents read back from CoNLL, with the number of tags changed by IOB2
/// repair.
#[derive(Debug, Clone, Default)]
pub struct ConllCorpus {
    pub loaded: Loaded,
    pub repairs: usize,
    /// Sentence lengths (in tokens) per document, as delimited by blank lines.
    pub sentence_lengths: Vec<Vec<usize>>,
}

/// Renders documents as `token<TAB>start<TAB>end<TAB>tag` lines, one blank
/// line after each sentence and a `#doc <id>` line before each document.
/// Offsets are chars. Cross-category overlaps keep the longer mention.
pub fn to_conll(docs: &[AnnotatedDocument]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for doc in docs {
        let doc = doc.without_other();
        let prepared = Prepared::new(&doc.text);
        let alignment = align_mentions(&doc, &prepared.tokens)
            .map_err(|e| CorpusError::Align { id: doc.id.clone(), message: e.to_string() })?;
        let enc = spans_to_bio(prepared.tokens.len(), &alignment, OverlapPolicy::KeepLonger)
            .expect("keep-longer policy never fails");
        let _ = writeln!(out, "#doc {}", doc.id);
        for s in &prepared.sentences {
            for t in s.range() {
                let tok = &prepared.tokens[t];
                let _ = writeln!(out, "{}\t{}\t{}\t{}", tok.text, tok.span.start, tok.span.end, enc.tags[t]);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_conll(path: &Path, docs: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    let text = to_conll(docs)?;
    fs::write(path, text).map_err(io_err(path))
}

struct PendingDoc {
    id: String,
    tokens: Vec<Token>,
    tags: Vec<BioTag>,
    sentence_lengths: Vec<usize>,
    current: usize,
}

impl PendingDoc {
    fn close_sentence(&mut self) {
        if self.current > 0 {
            self.sentence_lengths.push(self.current);
            self.current = 0;
        }
    }

    /// Rebuilds text by placing each token at its offset. Gaps are filled
    /// with spaces, or a newline where a sentence boundary falls.
    fn finish(mut self, out: &mut ConllCorpus) {
        self.close_sentence();
        let mut boundaries = Vec::new();
        let mut acc = 0;
        for len in &self.sentence_lengths {
            acc += len;
            boundaries.push(acc);
        }
        let mut text = String::new();
        let mut pos = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            let filler = if boundaries.contains(&i) { '\n' } else { ' ' };
            while pos < tok.span.start {
                text.push(filler);
                pos += 1;
            }
            text.push_str(&tok.text);
            pos = tok.span.end;
        }
        let decoded = bio_to_spans(&text, &self.tokens, &self.tags).expect("one tag per token");
        if decoded.repairs > 0 {
            out.loaded
                .warnings
                .push(format!("document {}: {} tag(s) repaired", self.id, decoded.repairs));
        }
        out.repairs += decoded.repairs;
        let mut doc = AnnotatedDocument::new(self.id, text);
        doc.mentions = decoded.mentions;
        out.sentence_lengths.push(self.sentence_lengths);
        out.loaded.push(doc);
    }
}

pub fn parse_conll(text: &str) -> Result<ConllCorpus, CorpusError> {
    let mut out = ConllCorpus::default();
    let mut current: Option<PendingDoc> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| CorpusError::Conll { line, message };
        if let Some(id) = raw.strip_prefix("#doc ") {
            if let Some(doc) = current.take() {
                doc.finish(&mut out);
            }
            current = Some(PendingDoc {
                id: id.trim().to_string(),
                tokens: Vec::new(),
                tags: Vec::new(),
                sentence_lengths: Vec::new(),
                current: 0,
            });
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        if raw.trim().is_empty() {
            if let Some(doc) = current.as_mut() {
                doc.close_sentence();
            }
            continue;
        }
        let doc = current.as_mut().ok_or_else(|| err("token line before any `#doc` header".into()))?;
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let start: usize = cols[1].parse().map_err(|_| err(format!("bad start offset `{}`", cols[1])))?;
        let end: usize = cols[2].parse().map_err(|_| err(format!("bad end offset `{}`", cols[2])))?;
        if end <= start || end - start != cols[0].chars().count() {
            return Err(err(format!("offsets {start}..{end} do not fit token `{}`", cols[0])));
        }
        if doc.tokens.last().is_some_and(|t| t.span.end > start) {
            return Err(err(format!("token at {start} overlaps or precedes the previous token")));
        }
        let tag: BioTag = cols[3].parse().map_err(|e| err(format!("{e}")))?;
        let index = doc.tokens.len();
        doc.tokens.push(Token { text: cols[0].to_string(), span: Span::new(start, end), index });
        doc.tags.push(tag);
        doc.current += 1;
    }
    if let Some(doc) = current.take() {
        doc.finish(&mut out);
    }
    Ok(out)
}

pub fn read_conll(path: &Path) -> Result<ConllCorpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_conll(&text)
}
