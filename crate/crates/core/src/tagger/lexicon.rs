use std::fs;
use std::path::Path;

use regex::Regex;
use thiserror::Error;

use crate::preprocess::{tokenize, Token};
use crate::schema::{parse_category, Category, CharIndex, EntityMention, Span};

const DEFAULT_LEXICON: &str = include_str!("../../data/default.lexicon");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: bad pattern: {source}")]
    Pattern {
        line: usize,
        #[source]
        source: regex::Error,
    },
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct Phrase {
    pub category: Category,
    pub surface: String,
    tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Pattern {
    pub category: Category,
    pub source: String,
    regex: Regex,
}

impl Pattern {
    /// Whole-string, case-insensitive match.
    pub fn matches(&self, text: &str) -> bool {
        self.regex.find(text).is_some_and(|m| m.end() == text.len())
    }
}

/// Surface phrases and patterns per category.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    phrases: Vec<Phrase>,
    patterns: Vec<Pattern>,
}

fn lower_tokens(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.text.to_lowercase()).collect()
}

impl Lexicon {
    /// The built-in lexicon.
    pub fn builtin() -> Lexicon {
        Lexicon::parse(DEFAULT_LEXICON).expect("built-in lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::parse(&text)
    }

    /// Parses `CATEGORY<TAB>phrase` and `CATEGORY<TAB>/regex/` lines; `#`
    /// starts a comment line.
    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let (cat, entry) = trimmed.split_once('\t').ok_or_else(|| LexiconError::Syntax {
                line,
                message: "expected CATEGORY<TAB>entry".into(),
            })?;
            let category = parse_category(cat).map_err(|e| LexiconError::Syntax { line, message: e.to_string() })?;
            if category == Category::Other {
                return Err(LexiconError::Syntax { line, message: "OTHER is not an extraction category".into() });
            }
            let entry = entry.trim();
            if entry.is_empty() {
                return Err(LexiconError::Syntax { line, message: "empty entry".into() });
            }
            if entry.len() >= 2 && entry.starts_with('/') && entry.ends_with('/') {
                lex.add_pattern(category, &entry[1..entry.len() - 1])
                    .map_err(|source| LexiconError::Pattern { line, source })?;
            } else {
                lex.add_phrase(category, entry);
            }
        }
        Ok(lex)
    }

    pub fn add_phrase(&mut self, category: Category, surface: &str) {
        let tokens = lower_tokens(&tokenize(surface));
        if tokens.is_empty() {
            return;
        }
        self.phrases.push(Phrase { category, surface: surface.to_string(), tokens });
    }

    pub fn add_pattern(&mut self, category: Category, source: &str) -> Result<(), regex::Error> {
        let regex = Regex::new(&format!("(?i)^(?:{source})"))?;
        self.patterns.push(Pattern { category, source: source.to_string(), regex });
        Ok(())
    }

    pub fn phrases(&self) -> &[Phrase] {
        &self.phrases
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn phrases_for(&self, category: Category) -> impl Iterator<Item = &str> {
        self.phrases.iter().filter(move |p| p.category == category).map(|p| p.surface.as_str())
    }

    /// Whether `text` is, case-insensitively, one of the phrases or a full
    /// match of one of the patterns of `category`.
    pub fn covers(&self, category: Category, text: &str) -> bool {
        let toks = lower_tokens(&tokenize(text));
        self.phrases.iter().any(|p| p.category == category && p.tokens == toks)
            || self.patterns.iter().any(|p| p.category == category && p.matches(text))
    }

    /// Longest-match-first, left-to-right tagging on token boundaries. Emitted
    /// mentions never overlap; ids are `T1`, `T2`, … in text order.
    pub fn tag(&self, text: &str, tokens: &[Token]) -> Vec<EntityMention> {
        let index = CharIndex::new(text);
        let lowered = lower_tokens(tokens);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.best_at(text, &index, tokens, &lowered, i) {
                Some((category, end)) => {
                    let span = Span::new(tokens[i].span.start, tokens[end - 1].span.end);
                    let surface = index.slice(text, span).unwrap_or_default();
                    out.push(EntityMention::new(format!("T{}", out.len() + 1), category, span, surface));
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }

    /// Longest candidate starting at token `i`: (category, exclusive end token).
    /// Ties prefer patterns, then earlier entries.
    fn best_at(
        &self,
        text: &str,
        index: &CharIndex,
        tokens: &[Token],
        lowered: &[String],
        i: usize,
    ) -> Option<(Category, usize)> {
        let mut best: Option<(Category, usize)> = None;
        let consider = |cat: Category, end: usize, best: &mut Option<(Category, usize)>| {
            if best.is_none_or(|(_, e)| end > e) {
                *best = Some((cat, end));
            }
        };

        let start_byte = index.byte_offset(tokens[i].span.start);
        let rest = &text[start_byte..];
        for p in &self.patterns {
            if let Some(m) = p.regex.find(rest) {
                if m.end() == 0 {
                    continue;
                }
                let end_char = index.char_offset(start_byte + m.end());
                // match must end exactly on a token end
                let end_tok = tokens[i..].partition_point(|t| t.span.end < end_char) + i;
                if end_tok < tokens.len() && tokens[end_tok].span.end == end_char {
                    consider(p.category, end_tok + 1, &mut best);
                }
            }
        }
        for p in &self.phrases {
            let n = p.tokens.len();
            if i + n <= lowered.len() && lowered[i..i + n] == p.tokens[..] {
                consider(p.category, i + n, &mut best);
            }
        }
        best
    }
}

/// Convenience: tokenize and tag.
pub fn lexicon_tag(text: &str, tokens: &[Token], lexicon: &Lexicon) -> Vec<EntityMention> {
    lexicon.tag(text, tokens)
}
