//! Mention taggers: the lexicon baseline, the averaged perceptron with
//! constrained Viterbi decoding, and import of externally tagged files.

mod features;
mod import;
mod lexicon;
mod model;
mod train;
mod viterbi;

pub use features::{extract_features, FEATURE_TEMPLATE_ID};
pub use import::{import_predictions, ImportFormat, Imported};
pub use lexicon::{lexicon_tag, Lexicon, LexiconError, Pattern, Phrase};
pub use model::{tag_text, ModelError, TaggerModel, TokenScorer, TrainingMeta};
pub use train::{train_tagger, TrainError, TrainReport};
pub use viterbi::{decode_tags, viterbi_decode, TokenScoreMatrix, TransitionConstraints, TransitionWeights};
