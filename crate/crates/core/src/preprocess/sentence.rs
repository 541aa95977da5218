use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::Token;

/// Inclusive token range `[first, last]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub first: usize,
    pub last: usize,
}

impl Sentence {
    pub fn range(&self) -> Range<usize> {
        self.first..self.last + 1
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: usize) -> bool {
        self.first <= token && token <= self.last
    }
}

fn is_terminal(token: &Token) -> bool {
    matches!(token.text.as_str(), "." | "!" | "?")
}

/// Sentence boundaries fall after `.`, `!` or `?` tokens and wherever the gap
/// between two tokens contains a newline. Decimal points never form their own
/// token, so they cannot end a sentence.
pub fn segment_sentences(tokens: &[Token], text: &str) -> Vec<Sentence> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut first = 0;
    for i in 0..tokens.len() {
        let last_token = i + 1 == tokens.len();
        let boundary = last_token
            || is_terminal(&tokens[i])
            || chars[tokens[i].span.end..tokens[i + 1].span.start].contains(&'\n');
        if boundary {
            out.push(Sentence { first, last: i });
            first = i + 1;
        }
    }
    out
}

/// Index of the sentence holding each token.
pub fn sentence_of_tokens(sentences: &[Sentence], token_count: usize) -> Vec<usize> {
    let mut out = vec![0; token_count];
    for (si, s) in sentences.iter().enumerate() {
        for t in s.range() {
            out[t] = si;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::tokenize;

    fn seg(text: &str) -> Vec<Sentence> {
        segment_sentences(&tokenize(text), text)
    }

    #[test]
    fn two_sentences() {
        let s = seg("Right lower lobe. TI-RADS 4.");
        assert_eq!(s, vec![Sentence { first: 0, last: 3 }, Sentence { first: 4, last: 6 }]);
    }

    #[test]
    fn no_terminal_punctuation() {
        assert_eq!(seg("solid hypoechoic nodule"), vec![Sentence { first: 0, last: 2 }]);
    }

    #[test]
    fn empty() {
        assert!(seg("").is_empty());
    }

    #[test]
    fn newlines_and_decimals() {
        let s = seg("FINDINGS:\nnodule 2.2 x 1.2 cm\n\nIMPRESSION: benign");
        assert_eq!(s.len(), 3);
        assert_eq!(s[1], Sentence { first: 2, last: 6 });
    }
}
