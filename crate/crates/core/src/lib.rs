//! Thyroid nodule information extraction from ultrasound report text:
//! typed mention tagging, characteristic-to-nodule linking, nodule profiles,
//! ACR TI-RADS scoring, and strict/lenient evaluation.

pub mod corpus;
pub mod eval;
pub mod linker;
pub mod pipeline;
pub mod preprocess;
pub mod schema;
pub mod tagger;
pub mod tirads;
