//! Tokenization, sentence segmentation, and the BIO view of mention spans.

mod bio;
mod sentence;
mod tokenize;

pub use bio::{
    align_mentions, bio_runs, bio_to_spans, is_valid, repair, spans_to_bio, AlignError, BadTag, BioEncoding,
    BioError, BioTag, Decoded, MentionAlignment, OverlapPolicy, TagSet,
};
pub use sentence::{segment_sentences, sentence_of_tokens, Sentence};
pub use tokenize::{tokenize, Token};

/// Tokens and sentences of one text.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
}

impl Prepared {
    pub fn new(text: &str) -> Self {
        let tokens = tokenize(text);
        let sentences = segment_sentences(&tokens, text);
        Prepared { tokens, sentences }
    }

    pub fn sentence_tokens(&self, sentence: &Sentence) -> &[Token] {
        &self.tokens[sentence.range()]
    }
}
