//! Tagging, linking, profile assembly and TI-RADS scoring for one document.

use serde::{Deserialize, Serialize};

use crate::linker::{assemble_profiles, link, LinkerConfig, LinkerModel};
use crate::preprocess::tokenize;
use crate::schema::{AnnotatedDocument, EntityMention, NoduleProfile};
use crate::tagger::{Lexicon, TaggerModel};
use crate::tirads::{audit_consistency, score_profile, Discrepancy, PointTable, TiradsResult};

/// Where predicted mentions come from.
#[derive(Debug, Clone)]
pub enum MentionSource {
    Model(Box<TaggerModel>),
    Lexicon(Lexicon),
}

impl MentionSource {
    pub fn tag(&self, text: &str) -> Vec<EntityMention> {
        match self {
            MentionSource::Model(m) => m.predict(text),
            MentionSource::Lexicon(l) => l.tag(text, &tokenize(text)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub tagger: MentionSource,
    pub linker: LinkerModel,
    pub linker_config: LinkerConfig,
    /// Without a table, profiles are not scored.
    pub table: Option<PointTable>,
}

/// A document with predicted mentions and relations, and what was derived
/// from them. Reads back as a plain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    #[serde(flatten)]
    pub document: AnnotatedDocument,
    pub profiles: Vec<NoduleProfile>,
    pub orphans: Vec<EntityMention>,
    #[serde(skip_serializing_if = "Option::is_none", skip_deserializing)]
    pub tirads: Option<Vec<TiradsResult>>,
    #[serde(skip_serializing_if = "Option::is_none", skip_deserializing)]
    pub discrepancies: Option<Vec<Discrepancy>>,
}

impl Pipeline {
    pub fn new(tagger: MentionSource) -> Self {
        Pipeline { tagger, linker: LinkerModel::nearest_anchor(), linker_config: LinkerConfig::default(), table: None }
    }

    /// Replaces any mentions and relations `doc` carries with predictions.
    pub fn extract(&self, doc: &AnnotatedDocument) -> Extraction {
        let mentions = self.tagger.tag(&doc.text);
        let relations = link(&doc.text, &mentions, &self.linker, &self.linker_config);
        let assembled = assemble_profiles(&mentions, &relations);
        let (tirads, discrepancies) = match &self.table {
            Some(t) => {
                let results: Vec<TiradsResult> = assembled.profiles.iter().map(|p| score_profile(p, t)).collect();
                let d = audit_consistency(&assembled.profiles, &results, t);
                (Some(results), Some(d))
            }
            None => (None, None),
        };
        let document = AnnotatedDocument {
            id: doc.id.clone(),
            text: doc.text.clone(),
            mentions,
            relations,
            meta: doc.meta.clone(),
        };
        Extraction { document, profiles: assembled.profiles, orphans: assembled.orphans, tirads, discrepancies }
    }
}
