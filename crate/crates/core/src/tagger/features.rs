use crate::preprocess::Token;

/// Identifier of the feature templates below; stored in model files so a
/// model is never scored with templates it was not trained on.
pub const FEATURE_TEMPLATE_ID: &str = "ft-v1";

const START: &str = "<s>";
const END: &str = "</s>";

/// `X` upper, `x` lower, `d` digit, other chars kept.
fn word_shape(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

/// Shape with repeated classes collapsed: `Hypoechoic` -> `Xx`, `2.2` -> `d.d`.
fn short_shape(word: &str) -> String {
    let mut out = String::new();
    for c in word_shape(word).chars() {
        if !out.ends_with(c) {
            out.push(c);
        }
    }
    out
}

fn is_numeric(word: &str) -> bool {
    let mut digits = 0;
    for c in word.chars() {
        if c.is_ascii_digit() {
            digits += 1;
        } else if !matches!(c, '.' | '-' | ',') {
            return false;
        }
    }
    digits > 0
}

fn is_unit(lower: &str) -> bool {
    if matches!(lower, "cm" | "mm") {
        return true;
    }
    // "1cm", "2.5mm"
    lower
        .strip_suffix("cm")
        .or_else(|| lower.strip_suffix("mm"))
        .is_some_and(|num| !num.is_empty() && is_numeric(num))
}

fn context(tokens: &[Token], position: usize, offset: isize) -> String {
    let p = position as isize + offset;
    if p < 0 {
        START.to_string()
    } else if p as usize >= tokens.len() {
        END.to_string()
    } else {
        tokens[p as usize].text.to_lowercase()
    }
}

/// Feature strings for the token at `position` within a sentence.
pub fn extract_features(tokens: &[Token], position: usize) -> Vec<String> {
    let word = &tokens[position].text;
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let prefix: String = chars.iter().take(3).collect();
    let suffix: String = chars[chars.len().saturating_sub(3)..].iter().collect();
    let prev = context(tokens, position, -1);
    let next = context(tokens, position, 1);

    let mut f = vec![
        "bias".to_string(),
        format!("w={lower}"),
        format!("shape={}", word_shape(word)),
        format!("sshape={}", short_shape(word)),
        format!("p3={prefix}"),
        format!("s3={suffix}"),
        format!("w-1={prev}"),
        format!("w+1={next}"),
        format!("w-2={}", context(tokens, position, -2)),
        format!("w+2={}", context(tokens, position, 2)),
        format!("w-1|w={prev}|{lower}"),
        format!("w|w+1={lower}|{next}"),
    ];
    if is_numeric(word) {
        f.push("numeric".to_string());
    }
    if is_unit(&lower) {
        f.push("unit".to_string());
    }
    f
}
