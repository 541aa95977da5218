use serde::{Deserialize, Serialize};

use crate::schema::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Span,
    pub index: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Punctuation that stays inside a word when flanked by the right characters:
/// `.` between digits, `-` between alphanumerics, apostrophes between letters.
fn joins(prev: char, c: char, next: char) -> bool {
    match c {
        '.' => prev.is_ascii_digit() && next.is_ascii_digit(),
        '-' | '\u{2010}' | '\u{2011}' => is_word_char(prev) && is_word_char(next),
        '\'' | '\u{2019}' => prev.is_alphabetic() && next.is_alphabetic(),
        _ => false,
    }
}

/// Splits on whitespace, then peels punctuation into single-char tokens except
/// where [`joins`] keeps it inside a word. Offsets are in chars.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let n = chars.len();
    let push = |start: usize, end: usize, tokens: &mut Vec<Token>| {
        let index = tokens.len();
        tokens.push(Token {
            text: chars[start..end].iter().collect(),
            span: Span::new(start, end),
            index,
        });
    };
    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !is_word_char(c) {
            push(i, i + 1, &mut tokens);
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < n {
            let c = chars[i];
            if is_word_char(c) {
                i += 1;
            } else if i + 1 < n && !c.is_whitespace() && joins(chars[i - 1], c, chars[i + 1]) {
                i += 2;
            } else {
                break;
            }
        }
        push(start, i, &mut tokens);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn measurement_triplet() {
        assert_eq!(texts("2.2 x 1.2 x 3.2 cm"), ["2.2", "x", "1.2", "x", "3.2", "cm"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    #[test]
    fn trailing_period_splits() {
        assert_eq!(texts("mixed cystic and solid."), ["mixed", "cystic", "and", "solid", "."]);
        assert_eq!(texts("3.2 cm."), ["3.2", "cm", "."]);
    }

    #[test]
    fn hyphens_and_symbols() {
        assert_eq!(texts("TI-RADS 4, (TR4)"), ["TI-RADS", "4", ",", "(", "TR4", ")"]);
        assert_eq!(texts("> 1cm"), [">", "1cm"]);
        assert_eq!(texts("between 1-2 cm"), ["between", "1-2", "cm"]);
        assert_eq!(texts("2.2 × 1.2"), ["2.2", "×", "1.2"]);
        assert_eq!(texts("can’t determine"), ["can’t", "determine"]);
        assert_eq!(texts("nodule(s)"), ["nodule", "(", "s", ")"]);
        assert_eq!(texts("-solid-"), ["-", "solid", "-"]);
    }

    #[test]
    fn offsets_are_chars() {
        let toks = tokenize("1 × 2");
        assert_eq!(toks[2].span, Span::new(4, 5));
        assert_eq!(toks[2].index, 2);
    }
}
