use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::features::extract_features;
use super::model::{TaggerModel, TrainingMeta};
use super::viterbi::{viterbi_decode, TokenScoreMatrix, TransitionConstraints, TransitionWeights};
use crate::preprocess::{align_mentions, spans_to_bio, AlignError, OverlapPolicy, Prepared, TagSet};
use crate::schema::AnnotatedDocument;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("document {doc}: {source}")]
    Align {
        doc: String,
        #[source]
        source: AlignError,
    },
}

/// A sentence with interned feature ids per token and gold tag indices.
struct Example {
    features: Vec<Vec<u32>>,
    gold: Vec<usize>,
}

/// Dense weights with the running sums needed for averaging.
struct Averaged {
    w: Vec<f64>,
    acc: Vec<f64>,
}

impl Averaged {
    fn new(n: usize) -> Self {
        Averaged { w: vec![0.0; n], acc: vec![0.0; n] }
    }

    fn update(&mut self, i: usize, delta: f64, step: f64) {
        self.w[i] += delta;
        self.acc[i] += step * delta;
    }

    fn averaged(&self, step: f64) -> Vec<f64> {
        self.w.iter().zip(&self.acc).map(|(w, a)| w - a / step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: TaggerModel,
    pub sentences: usize,
    pub tokens: usize,
    /// Token accuracy of the returned model on its own training data.
    pub self_accuracy: f64,
    /// Mentions dropped by overlap resolution while encoding gold tags.
    pub dropped_mentions: usize,
}

fn build_examples(
    corpus: &[AnnotatedDocument],
    tagset: &TagSet,
    vocab: &mut HashMap<String, u32>,
    names: &mut Vec<String>,
) -> Result<(Vec<Example>, usize), TrainError> {
    let mut examples = Vec::new();
    let mut dropped = 0;
    for doc in corpus {
        let doc = doc.without_other();
        let prepared = Prepared::new(&doc.text);
        let alignment = align_mentions(&doc, &prepared.tokens).map_err(|source| TrainError::Align {
            doc: doc.id.clone(),
            source,
        })?;
        let enc = spans_to_bio(prepared.tokens.len(), &alignment, OverlapPolicy::KeepLonger)
            .expect("keep-longer policy never fails");
        dropped += enc.dropped.len();
        for s in &prepared.sentences {
            let sentence = prepared.sentence_tokens(s);
            let features = (0..sentence.len())
                .map(|pos| {
                    extract_features(sentence, pos)
                        .into_iter()
                        .map(|f| {
                            *vocab.entry(f.clone()).or_insert_with(|| {
                                names.push(f);
                                (names.len() - 1) as u32
                            })
                        })
                        .collect()
                })
                .collect();
            let gold = enc.tags[s.range()]
                .iter()
                .map(|&t| tagset.index_of(t).expect("target tag"))
                .collect();
            examples.push(Example { features, gold });
        }
    }
    Ok((examples, dropped))
}

fn emission_scores(ex: &Example, emit: &[f64], k: usize) -> TokenScoreMatrix {
    let mut m = TokenScoreMatrix::zeros(ex.features.len(), k);
    for (pos, feats) in ex.features.iter().enumerate() {
        let row = m.row_mut(pos);
        for &f in feats {
            let w = &emit[f as usize * k..(f as usize + 1) * k];
            for (r, v) in row.iter_mut().zip(w) {
                *r += v;
            }
        }
    }
    m
}

/// Averaged structured perceptron. Each epoch visits sentences in an order
/// shuffled by `seed`; a sentence whose decoded tags differ from gold adds
/// the gold features (emissions and tag bigrams) and subtracts the predicted
/// ones. The returned model holds the averaged weights.
pub fn train_tagger(corpus: &[AnnotatedDocument], epochs: usize, seed: u64) -> Result<TrainReport, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let tagset = TagSet::full();
    let k = tagset.len();
    let constraints = TransitionConstraints::bio(&tagset);
    let mut vocab = HashMap::new();
    let mut names = Vec::new();
    let (examples, dropped) = build_examples(corpus, &tagset, &mut vocab, &mut names)?;

    let mut emit = Averaged::new(names.len() * k);
    let mut trans = Averaged::new(k * k);
    let mut start = Averaged::new(k);
    let mut step = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &ei in &order {
            let ex = &examples[ei];
            let scores = emission_scores(ex, &emit.w, k);
            let weights = TransitionWeights::from_parts(start.w.clone(), trans.w.clone());
            let pred = viterbi_decode(&scores, &constraints, &weights);
            if pred != ex.gold {
                for (pos, (&g, &p)) in ex.gold.iter().zip(&pred).enumerate() {
                    if g != p {
                        for &f in &ex.features[pos] {
                            emit.update(f as usize * k + g, 1.0, step);
                            emit.update(f as usize * k + p, -1.0, step);
                        }
                    }
                    if pos == 0 {
                        if g != p {
                            start.update(g, 1.0, step);
                            start.update(p, -1.0, step);
                        }
                    } else {
                        let (gp, pp) = (ex.gold[pos - 1], pred[pos - 1]);
                        if (gp, g) != (pp, p) {
                            trans.update(gp * k + g, 1.0, step);
                            trans.update(pp * k + p, -1.0, step);
                        }
                    }
                }
            }
            step += 1.0;
        }
    }

    let mut model = TaggerModel::empty(TrainingMeta { epochs, seed });
    if epochs > 0 {
        let avg_emit = emit.averaged(step);
        for (fi, name) in names.iter().enumerate() {
            let w = &avg_emit[fi * k..(fi + 1) * k];
            if w.iter().any(|&v| v != 0.0) {
                model.emissions.insert(name.clone(), w.to_vec());
            }
        }
        model.transitions.pairs = trans.averaged(step);
        model.transitions.start = start.averaged(step);
    }

    // self-accuracy with the final weights
    let mut emit_final = vec![0.0; names.len() * k];
    for (fi, name) in names.iter().enumerate() {
        if let Some(w) = model.emissions.get(name) {
            emit_final[fi * k..(fi + 1) * k].copy_from_slice(w);
        }
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for ex in &examples {
        let pred = viterbi_decode(&emission_scores(ex, &emit_final, k), &constraints, &model.transitions);
        correct += pred.iter().zip(&ex.gold).filter(|(a, b)| a == b).count();
        total += ex.gold.len();
    }

    Ok(TrainReport {
        model,
        sentences: examples.len(),
        tokens: total,
        self_accuracy: if total == 0 { 1.0 } else { correct as f64 / total as f64 },
        dropped_mentions: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Category, EntityMention, Span};

    fn doc(id: &str, text: &str, mentions: &[(Category, &str)]) -> AnnotatedDocument {
        let mut d = AnnotatedDocument::new(id, text);
        for (i, (c, s)) in mentions.iter().enumerate() {
            let b = text.find(s).unwrap();
            let start = text[..b].chars().count();
            let end = start + s.chars().count();
            d.mentions.push(EntityMention::new(format!("T{}", i + 1), *c, Span::new(start, end), *s));
        }
        d
    }

    fn separable() -> Vec<AnnotatedDocument> {
        vec![
            doc("a", "the spongiform nodule is oval.", &[
                (Category::Composition, "spongiform"),
                (Category::ThyroidNodule, "nodule"),
                (Category::Shape, "oval"),
            ]),
            doc("b", "a hypoechoic nodule with smooth margins.", &[
                (Category::Echogenicity, "hypoechoic"),
                (Category::ThyroidNodule, "nodule"),
                (Category::Margins, "smooth"),
            ]),
            doc("c", "isthmus shows a spongiform area.", &[
                (Category::Laterality, "isthmus"),
                (Category::Composition, "spongiform"),
            ]),
        ]
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(train_tagger(&[], 5, 1), Err(TrainError::EmptyCorpus)));
    }

    #[test]
    fn zero_epochs_gives_zero_model() {
        let r = train_tagger(&separable(), 0, 1).unwrap();
        assert!(r.model.is_zero());
        assert!(r.model.predict("the spongiform nodule is oval.").is_empty());
    }

    #[test]
    fn separable_corpus_converges() {
        let corpus = separable();
        let r = train_tagger(&corpus, 5, 3).unwrap();
        assert_eq!(r.self_accuracy, 1.0);
        for d in &corpus {
            let pred = r.model.predict(&d.text);
            let got: Vec<_> = pred.iter().map(|m| (m.category, m.span)).collect();
            let want: Vec<_> = d.mentions.iter().map(|m| (m.category, m.span)).collect();
            assert_eq!(got, want, "{}", d.text);
        }
    }

    #[test]
    fn deterministic_bytes() {
        let a = train_tagger(&separable(), 4, 11).unwrap().model.to_text();
        let b = train_tagger(&separable(), 4, 11).unwrap().model.to_text();
        assert_eq!(a, b);
    }

    #[test]
    fn other_mentions_are_ignored() {
        let mut corpus = separable();
        corpus[0].mentions.push(EntityMention::new("X", Category::Other, Span::new(0, 3), "the"));
        let r = train_tagger(&corpus, 5, 3).unwrap();
        assert!(r.model.predict("the spongiform nodule is oval.").iter().all(|m| m.category != Category::Other));
    }
}
