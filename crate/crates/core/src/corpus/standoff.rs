use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ensure_valid, io_err, CorpusError, Loaded};
use crate::schema::{parse_category, AnnotatedDocument, EntityMention, Relation, RelationType, Span};

const INDEX_FILE: &str = "index.txt";

fn is_t_id(id: &str) -> bool {
    id.strip_prefix('T').is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Annotation file body for one document. Mention ids are kept when they all
/// look like `T<n>`, otherwise they are renumbered in mention order.
pub(crate) fn to_ann(doc: &AnnotatedDocument) -> String {
    let keep = doc.mentions.iter().all(|m| is_t_id(&m.id));
    let ids: HashMap<&str, String> = doc
        .mentions
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), if keep { m.id.clone() } else { format!("T{}", i + 1) }))
        .collect();
    let mut out = String::new();
    for m in &doc.mentions {
        let _ = writeln!(
            out,
            "{}\t{} {} {}\t{}",
            ids[m.id.as_str()],
            m.category.name(),
            m.span.start,
            m.span.end,
            m.text.replace('\n', " ")
        );
    }
    for (i, r) in doc.relations.iter().enumerate() {
        let head = ids.get(r.head_id.as_str()).cloned().unwrap_or_else(|| r.head_id.clone());
        let tail = ids.get(r.tail_id.as_str()).cloned().unwrap_or_else(|| r.tail_id.clone());
        let _ = writeln!(out, "R{}\t{} Arg1:{} Arg2:{}", i + 1, r.kind.name(), head, tail);
    }
    for (i, (k, v)) in doc.meta.iter().enumerate() {
        let _ = writeln!(out, "#{}\tMeta\t{}={}", i + 1, k, v);
    }
    out
}

/// Writes `<id>.txt` and `<id>.ann` per document plus an `index.txt` that
/// fixes document order.
pub fn write_standoff(dir: &Path, docs: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    ensure_valid(docs)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut index = String::new();
    for d in docs {
        if d.id.is_empty() || d.id.contains(['/', '\\', '\n']) || d.id.starts_with('.') {
            return Err(CorpusError::Config(format!("document id `{}` cannot be used as a file name", d.id)));
        }
        let txt = dir.join(format!("{}.txt", d.id));
        fs::write(&txt, &d.text).map_err(io_err(&txt))?;
        let ann = dir.join(format!("{}.ann", d.id));
        fs::write(&ann, to_ann(d)).map_err(io_err(&ann))?;
        index.push_str(&d.id);
        index.push('\n');
    }
    let path = dir.join(INDEX_FILE);
    fs::write(&path, index).map_err(io_err(&path))
}

pub(crate) fn parse_ann(id: &str, text: &str, ann: &str, file: &str) -> Result<(AnnotatedDocument, Vec<String>), CorpusError> {
    let mut doc = AnnotatedDocument::new(id, text);
    let mut warnings = Vec::new();
    let mut pending = Vec::new();
    for (i, line) in ann.lines().enumerate() {
        let lineno = i + 1;
        let err = |message: String| CorpusError::Standoff { file: file.to_string(), line: lineno, message };
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(3, '\t').collect();
        match line.as_bytes()[0] {
            b'T' => {
                if cols.len() != 3 {
                    return Err(err("entity line needs 3 tab-separated fields".into()));
                }
                let fields: Vec<&str> = cols[1].split(' ').collect();
                if fields.len() != 3 {
                    return Err(err(format!("expected `<CATEGORY> <start> <end>`, found `{}`", cols[1])));
                }
                let category = parse_category(fields[0]).map_err(|e| err(e.to_string()))?;
                let start = fields[1].parse().map_err(|_| err(format!("bad start `{}`", fields[1])))?;
                let end = fields[2].parse().map_err(|_| err(format!("bad end `{}`", fields[2])))?;
                let span = Span::new(start, end);
                // newlines inside a mention are written as spaces
                let mut mention_text = cols[2].to_string();
                if let Some(actual) = crate::schema::char_slice(text, span) {
                    if actual.replace('\n', " ") == mention_text {
                        mention_text = actual.to_string();
                    }
                }
                doc.mentions.push(EntityMention::new(cols[0], category, span, mention_text));
            }
            b'R' => {
                if cols.len() < 2 {
                    return Err(err("relation line needs 2 tab-separated fields".into()));
                }
                let fields: Vec<&str> = cols[1].split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(err(format!("expected `<TYPE> Arg1:<id> Arg2:<id>`, found `{}`", cols[1])));
                }
                let kind: RelationType = fields[0].parse().map_err(|t| err(format!("unknown relation type `{t}`")))?;
                let head = fields[1].strip_prefix("Arg1:").ok_or_else(|| err("missing Arg1".into()))?;
                let tail = fields[2].strip_prefix("Arg2:").ok_or_else(|| err("missing Arg2".into()))?;
                pending.push((lineno, Relation { head_id: head.into(), tail_id: tail.into(), kind }));
            }
            b'#' if cols.len() == 3 && cols[1] == "Meta" => {
                let (k, v) = cols[2].split_once('=').ok_or_else(|| err("meta needs key=value".into()))?;
                doc.meta.insert(k.to_string(), v.to_string());
            }
            _ => warnings.push(format!("{file}:{lineno}: ignored annotation `{}`", cols[0])),
        }
    }
    for (lineno, r) in pending {
        for id in [&r.head_id, &r.tail_id] {
            if doc.mention(id).is_none() {
                return Err(CorpusError::Standoff {
                    file: file.to_string(),
                    line: lineno,
                    message: format!("relation refers to missing entity {id}"),
                });
            }
        }
        doc.relations.push(r);
    }
    Ok((doc, warnings))
}

/// Reads a directory written by [`write_standoff`] or an annotation tool.
/// Without an index file, documents are read in sorted id order.
pub fn read_standoff(dir: &Path) -> Result<Loaded, CorpusError> {
    let index = dir.join(INDEX_FILE);
    let ids: Vec<String> = if index.exists() {
        fs::read_to_string(&index)
            .map_err(io_err(&index))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_string())
            .collect()
    } else {
        let mut ids = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.extension().is_some_and(|e| e == "txt") && path.file_name().is_some_and(|n| n != INDEX_FILE) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        ids
    };
    let mut loaded = Loaded::default();
    for id in ids {
        let txt = dir.join(format!("{id}.txt"));
        let ann = dir.join(format!("{id}.ann"));
        let text = fs::read_to_string(&txt).map_err(io_err(&txt))?;
        let body = fs::read_to_string(&ann).map_err(io_err(&ann))?;
        let (doc, warnings) = parse_ann(&id, &text, &body, &format!("{id}.ann"))?;
        loaded.warnings.extend(warnings);
        loaded.push(doc);
    }
    Ok(loaded)
}
