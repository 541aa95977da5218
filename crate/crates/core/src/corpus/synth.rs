use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::schema::{AnnotatedDocument, Category, EntityMention, NoduleProfile, Relation, Span};
use crate::tirads::{score_profile, Level, PointTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    /// No TI-RADS scores; risk is described in words.
    PreTirads,
    #[default]
    PostTirads,
    /// Each document picks one of the two at random.
    Mixed,
}

impl std::str::FromStr for ReportStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pre" | "pre-tirads" => Ok(ReportStyle::PreTirads),
            "post" | "post-tirads" => Ok(ReportStyle::PostTirads),
            "mixed" => Ok(ReportStyle::Mixed),
            _ => Err(format!("unknown report style `{s}` (expected pre, post or mixed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub doc_count: usize,
    /// Inclusive range of described nodules per document.
    pub nodules_per_doc: (usize, usize),
    /// Chance that a slot of the given category is filled. Categories not in
    /// the map use [`SynthConfig::default_presence`].
    pub presence: BTreeMap<Category, f64>,
    /// Chance that a filled slot uses an off-lexicon surface variant.
    pub noise: f64,
    pub style: ReportStyle,
    /// Chance of a "several similar-appearing nodules" sentence.
    pub multi_nodule_rate: f64,
    /// Chance of an impression sentence naming "the largest nodule" or the
    /// highest scoring one.
    pub anaphora_rate: f64,
    pub lymph_node_rate: f64,
    /// Chance that a nodule is written as a one-line list item
    /// ("Nodule 2: left lobe, upper; 1.1 x 0.8 cm; solid; ...").
    pub list_rate: f64,
    /// Chance that a documented TI-RADS level disagrees with the features.
    pub discordant_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            doc_count: 100,
            nodules_per_doc: (1, 3),
            presence: BTreeMap::new(),
            noise: 0.0,
            style: ReportStyle::PostTirads,
            multi_nodule_rate: 0.15,
            anaphora_rate: 0.3,
            lymph_node_rate: 0.2,
            list_rate: 0.2,
            discordant_rate: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn default_presence(category: Category) -> f64 {
        match category {
            Category::SizeNumeric => 0.9,
            Category::SizeQualitative => 0.3,
            Category::Laterality => 0.95,
            Category::Location => 0.7,
            Category::Composition => 0.9,
            Category::Echogenicity => 0.9,
            Category::Margins => 0.8,
            Category::Shape => 0.7,
            Category::EchogenicFoci => 0.5,
            Category::Vascularity => 0.4,
            Category::TiradsScore => 0.85,
            Category::TiradsRiskCategory => 0.7,
            Category::TotalNumberOfNodules => 0.6,
            Category::RiskDescription => 0.6,
            _ => 1.0,
        }
    }

    pub fn presence_of(&self, category: Category) -> f64 {
        self.presence.get(&category).copied().unwrap_or_else(|| SynthConfig::default_presence(category))
    }

    /// Every probability set to `p`, hard cases off, one nodule per document.
    pub fn forced(seed: u64, doc_count: usize, p: f64) -> Self {
        SynthConfig {
            seed,
            doc_count,
            nodules_per_doc: (1, 1),
            presence: Category::targets().iter().map(|&c| (c, p)).collect(),
            multi_nodule_rate: 0.0,
            anaphora_rate: 0.0,
            lymph_node_rate: 0.0,
            list_rate: 0.0,
            discordant_rate: 0.0,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |what: &str, v: f64| -> Result<(), CorpusError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CorpusError::Config(format!("{what} must be within [0, 1], got {v}")))
            }
        };
        if self.doc_count == 0 {
            return Err(CorpusError::Config("doc_count must be positive".into()));
        }
        if self.nodules_per_doc.0 > self.nodules_per_doc.1 {
            return Err(CorpusError::Config(format!(
                "nodules_per_doc range {}..={} is empty",
                self.nodules_per_doc.0, self.nodules_per_doc.1
            )));
        }
        for (c, p) in &self.presence {
            bad(&format!("presence of {}", c.name()), *p)?;
        }
        bad("noise", self.noise)?;
        bad("multi_nodule_rate", self.multi_nodule_rate)?;
        bad("anaphora_rate", self.anaphora_rate)?;
        bad("lymph_node_rate", self.lymph_node_rate)?;
        bad("list_rate", self.list_rate)?;
        bad("discordant_rate", self.discordant_rate)
    }
}

/// Surface forms found in the default lexicon, and variants that are not.
struct Slot {
    plain: &'static [&'static str],
    noisy: &'static [&'static str],
}

const COMPOSITION: Slot = Slot {
    plain: &["solid", "cystic", "purely cystic", "mostly cystic", "completely cystic", "spongiform", "mixed cystic and solid"],
    noisy: &["predominantly solid", "partially cystic", "mixed solid and cystic", "solid-appearing"],
};
const ECHOGENICITY: Slot = Slot {
    plain: &["hypoechoic", "isoechoic", "hyperechoic", "very hypoechoic", "anechoic"],
    noisy: &["markedly hypoechoic", "mildly hypoechoic", "hypoechogenic"],
};
const SHAPE: Slot = Slot {
    plain: &["wider than tall", "taller than wide", "taller than wider", "oval", "round"],
    noisy: &["ovoid", "taller-than-wide"],
};
const MARGINS: Slot = Slot {
    plain: &["smooth", "ill defined", "lobulated", "irregular", "well defined", "poorly defined"],
    noisy: &["spiculated", "indistinct", "circumscribed", "microlobulated"],
};
const FOCI: Slot = Slot {
    plain: &[
        "punctate echogenic foci",
        "macrocalcifications",
        "comet tail artifacts",
        "peripheral calcification",
        "rim calcification",
    ],
    noisy: &["microcalcifications", "coarse calcifications", "eggshell calcification"],
};
const VASCULARITY: Slot = Slot {
    plain: &["increased vascularity", "low vascularity", "normal vascularity", "decreased vascularity", "high vascularity"],
    noisy: &["internal vascularity", "minimal vascularity", "marked internal vascularity"],
};
const SIZE_QUALITATIVE: Slot = Slot { plain: &["small", "large"], noisy: &["tiny", "subcentimeter", "dominant"] };
const LATERALITY: Slot = Slot {
    plain: &["right lobe", "left lobe"],
    noisy: &["right thyroid lobe", "left thyroid lobe", "right hemithyroid"],
};
const LOCATION: Slot = Slot { plain: &["upper", "middle", "lower"], noisy: &["superior", "mid", "inferior"] };
const NODE_RISK: Slot = Slot { plain: &["suspicious", "concerning", "metastatic", "normal"], noisy: &["worrisome", "reactive"] };
const NODULE_RISK: Slot = Slot { plain: &["benign appearing", "suspicious", "concerning"], noisy: &["worrisome", "indeterminate"] };

const INDICATIONS: &[&str] = &[
    "Palpable neck mass.",
    "Abnormal thyroid function tests.",
    "Neck fullness.",
    "Follow-up imaging.",
    "Dysphagia.",
];

fn list_field(b: &mut Builder, chars: &mut Vec<EntityMention>, sep: &mut &str, c: Category, text: &str, tail: &str) {
    b.push(sep);
    chars.push(b.mention(c, text));
    b.push(tail);
    *sep = "; ";
}

/// Text under construction with mentions and relations recorded in chars.
struct Builder {
    text: String,
    len: usize,
    mentions: Vec<EntityMention>,
    relations: Vec<Relation>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.len += s.chars().count();
    }

    fn mention(&mut self, category: Category, s: &str) -> EntityMention {
        let start = self.len;
        self.push(s);
        let m = EntityMention::new(format!("T{}", self.mentions.len() + 1), category, Span::new(start, self.len), s);
        self.mentions.push(m.clone());
        m
    }

    fn link(&mut self, heads: &[EntityMention], anchor: &EntityMention) {
        for h in heads {
            self.relations.push(Relation::attribute_of(h.id.clone(), anchor.id.clone()));
        }
    }
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    table: PointTable,
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

impl Gen<'_> {
    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.random::<f64>() < p
    }

    fn has(&mut self, c: Category) -> bool {
        let p = self.cfg.presence_of(c);
        self.chance(p)
    }

    fn pick<'s>(&mut self, options: &[&'s str]) -> &'s str {
        options.choose(&mut self.rng).copied().expect("non-empty options")
    }

    fn fill(&mut self, slot: &Slot) -> String {
        let noisy = self.chance(self.cfg.noise);
        let options = if noisy { slot.noisy } else { slot.plain };
        self.pick(options).to_string()
    }

    fn size(&mut self) -> String {
        let dim = |rng: &mut ChaCha8Rng| format!("{:.1}", rng.random_range(3..=45) as f64 / 10.0);
        if self.chance(self.cfg.noise) {
            let (a, b, c) = (dim(&mut self.rng), dim(&mut self.rng), dim(&mut self.rng));
            return format!("{a} cm x {b} cm x {c} cm");
        }
        match self.rng.random_range(0..4) {
            0 | 1 => {
                let (a, b, c) = (dim(&mut self.rng), dim(&mut self.rng), dim(&mut self.rng));
                format!("{a} x {b} x {c} cm")
            }
            2 => {
                let (a, b) = (dim(&mut self.rng), dim(&mut self.rng));
                format!("{a} x {b} cm")
            }
            _ => format!("{} mm", self.rng.random_range(3..=19)),
        }
    }

    fn tirads_score_text(&mut self, level: Level) -> String {
        let n = level.number();
        if self.chance(self.cfg.noise) {
            return format!("TI RADS {n}");
        }
        let form = self.pick(&["TI-RADS", "ACR TI-RADS", "TI-RADS category"]);
        format!("{form} {n}")
    }

    fn risk_category_text(&mut self, level: Level) -> String {
        if self.chance(self.cfg.noise) {
            format!("TR-{}", level.number())
        } else {
            level.to_string()
        }
    }

    /// Level written in the report: usually the computed one.
    fn documented(&mut self, computed: Level) -> Level {
        if self.chance(self.cfg.discordant_rate) {
            let others: Vec<Level> = Level::ALL.iter().copied().filter(|l| *l != computed).collect();
            *others.choose(&mut self.rng).expect("four other levels")
        } else {
            computed
        }
    }

    /// Where-clause: " in the upper third of the right lobe" and similar.
    fn place(&mut self, b: &mut Builder, chars: &mut Vec<EntityMention>) {
        if !self.has(Category::Laterality) {
            return;
        }
        b.push(" in the ");
        if self.has(Category::Location) {
            let loc = self.fill(&LOCATION);
            chars.push(b.mention(Category::Location, &loc));
            b.push(" third of the ");
        } else if self.rng.random::<f64>() < 0.2 {
            chars.push(b.mention(Category::Laterality, "isthmus"));
            return;
        }
        let lat = self.fill(&LATERALITY);
        chars.push(b.mention(Category::Laterality, &lat));
    }

    fn nodule(&mut self, b: &mut Builder, post: bool) {
        let mut chars = Vec::new();
        let mut pre = Vec::new();
        if self.has(Category::SizeQualitative) {
            pre.push((Category::SizeQualitative, self.fill(&SIZE_QUALITATIVE)));
        }
        if self.has(Category::Composition) {
            pre.push((Category::Composition, self.fill(&COMPOSITION)));
        }
        if self.has(Category::Echogenicity) {
            pre.push((Category::Echogenicity, self.fill(&ECHOGENICITY)));
        }
        let head = self.pick(&["nodule", "thyroid nodule"]);
        let first = pre.first().map_or(head, |(_, s)| s.as_str());
        b.push(&format!("There is {} ", article(first)));
        for (c, s) in &pre {
            chars.push(b.mention(*c, s));
            b.push(" ");
        }
        let anchor = b.mention(Category::ThyroidNodule, head);
        self.place(b, &mut chars);
        if self.has(Category::SizeNumeric) {
            b.push(", measuring ");
            let s = self.size();
            chars.push(b.mention(Category::SizeNumeric, &s));
        }
        if self.has(Category::Vascularity) {
            b.push(" with ");
            let v = self.fill(&VASCULARITY);
            chars.push(b.mention(Category::Vascularity, &v));
        }
        b.push(".");

        // second sentence, with the pronoun referring back to the anchor
        let shape = self.has(Category::Shape).then(|| self.fill(&SHAPE));
        let margin = self.has(Category::Margins).then(|| self.fill(&MARGINS));
        let ete = margin.is_none() && self.chance(0.03);
        let foci = self.has(Category::EchogenicFoci).then(|| self.fill(&FOCI));
        let score = post && self.has(Category::TiradsScore);
        let risk_cat = post && self.has(Category::TiradsRiskCategory);
        let risk_desc = !post && self.has(Category::RiskDescription);

        let mut clauses: Vec<(&str, Category, String, &str)> = Vec::new();
        if let Some(s) = shape {
            clauses.push(("is ", Category::Shape, s, ""));
        }
        if let Some(m) = margin {
            clauses.push(("has ", Category::Margins, m, " margins"));
        }
        if ete {
            clauses.push(("shows ", Category::Margins, "extra thyroidal extension".into(), ""));
        }
        if let Some(f) = foci {
            clauses.push(("contains ", Category::EchogenicFoci, f, ""));
        }
        let mut second = Vec::new();
        if !clauses.is_empty() || score || risk_cat || risk_desc {
            b.push(" It ");
            for (i, (verb, c, s, tail)) in clauses.iter().enumerate() {
                if i > 0 {
                    b.push(if i + 1 == clauses.len() { " and " } else { ", " });
                }
                b.push(verb);
                second.push(b.mention(*c, s));
                b.push(tail);
            }
        }

        // TI-RADS level from the features described so far
        let profile = NoduleProfile {
            anchor: anchor.clone(),
            characteristics: chars.iter().chain(&second).cloned().collect(),
        };
        let computed = score_profile(&profile, &self.table).level;
        let level = self.documented(computed);
        if score || risk_cat {
            b.push(if clauses.is_empty() { "is " } else { "; " });
            if score {
                let t = self.tirads_score_text(level);
                second.push(b.mention(Category::TiradsScore, &t));
            }
            if risk_cat {
                b.push(if score { " (" } else { "" });
                let t = self.risk_category_text(level);
                second.push(b.mention(Category::TiradsRiskCategory, &t));
                b.push(if score { ")" } else { "" });
            }
        }
        if risk_desc {
            b.push(if clauses.is_empty() { "is " } else { ", and is " });
            let r = self.fill(&NODULE_RISK);
            second.push(b.mention(Category::RiskDescription, &r));
        }
        if !second.is_empty() || score || risk_cat || risk_desc {
            b.push(".");
        }
        b.link(&chars, &anchor);
        b.link(&second, &anchor);
        b.push("\n");
    }

    fn list_nodule(&mut self, b: &mut Builder, post: bool, number: usize) {
        let mut chars = Vec::new();
        let anchor = b.mention(Category::ThyroidNodule, "Nodule");
        b.push(&format!(" {number}:"));
        let mut sep = " ";
        if self.has(Category::Laterality) {
            b.push(sep);
            let lat = self.fill(&LATERALITY);
            chars.push(b.mention(Category::Laterality, &lat));
            if self.has(Category::Location) {
                b.push(", ");
                let loc = self.fill(&LOCATION);
                chars.push(b.mention(Category::Location, &loc));
            }
            sep = "; ";
        }
        if self.has(Category::SizeNumeric) {
            let s = self.size();
            list_field(b, &mut chars, &mut sep, Category::SizeNumeric, &s, "");
        }
        for (c, slot, tail) in [
            (Category::Composition, &COMPOSITION, ""),
            (Category::Echogenicity, &ECHOGENICITY, ""),
            (Category::Shape, &SHAPE, ""),
            (Category::Margins, &MARGINS, " margins"),
            (Category::EchogenicFoci, &FOCI, ""),
            (Category::Vascularity, &VASCULARITY, ""),
        ] {
            if self.has(c) {
                let t = self.fill(slot);
                list_field(b, &mut chars, &mut sep, c, &t, tail);
            }
        }
        let profile = NoduleProfile { anchor: anchor.clone(), characteristics: chars.clone() };
        let computed = score_profile(&profile, &self.table).level;
        let level = self.documented(computed);
        if post && self.has(Category::TiradsScore) {
            let t = self.tirads_score_text(level);
            list_field(b, &mut chars, &mut sep, Category::TiradsScore, &t, "");
        }
        if post && self.has(Category::TiradsRiskCategory) {
            let t = self.risk_category_text(level);
            list_field(b, &mut chars, &mut sep, Category::TiradsRiskCategory, &t, "");
        }
        if !post && self.has(Category::RiskDescription) {
            let t = self.fill(&NODULE_RISK);
            list_field(b, &mut chars, &mut sep, Category::RiskDescription, &t, "");
        }
        b.push(".\n");
        b.link(&chars, &anchor);
    }

    fn several_similar(&mut self, b: &mut Builder) {
        let mut chars = Vec::new();
        b.push("There are several similar-appearing ");
        let echo = self.fill(&ECHOGENICITY);
        chars.push(b.mention(Category::Echogenicity, &echo));
        b.push(" ");
        let anchor = b.mention(Category::ThyroidNodule, "nodules");
        b.push(" in the ");
        let lat = self.fill(&LATERALITY);
        chars.push(b.mention(Category::Laterality, &lat));
        b.push(".\n");
        b.link(&chars, &anchor);
    }

    fn lymph_node(&mut self, b: &mut Builder) {
        let mut chars = Vec::new();
        let mut pre = Vec::new();
        if self.has(Category::SizeQualitative) {
            pre.push(self.fill(&SIZE_QUALITATIVE));
        }
        let head = self.pick(&["lymph node", "cervical lymph node"]);
        let first = pre.first().map_or(head, |s| s.as_str());
        b.push(&format!("{} ", if article(first) == "an" { "An" } else { "A" }));
        for s in &pre {
            chars.push(b.mention(Category::SizeQualitative, s));
            b.push(" ");
        }
        let anchor = b.mention(Category::CervicalLymphNode, head);
        if self.has(Category::Margins) {
            b.push(" with ");
            let m = self.fill(&MARGINS);
            chars.push(b.mention(Category::Margins, &m));
            b.push(" margins");
        }
        b.push(" is seen");
        if self.has(Category::RiskDescription) {
            b.push(", which is ");
            let r = self.fill(&NODE_RISK);
            chars.push(b.mention(Category::RiskDescription, &r));
        }
        b.push(".\n");
        b.link(&chars, &anchor);
    }

    fn impression(&mut self, b: &mut Builder, post: bool) {
        b.push("\nIMPRESSION:\n");
        if !self.chance(self.cfg.anaphora_rate) {
            b.push("Findings as described above.\n");
            return;
        }
        let mut chars = Vec::new();
        let highest = post && self.rng.random::<f64>() < 0.4;
        let phrase = if highest { "highest scoring TI-RADS nodule" } else { "largest nodule" };
        b.push("The ");
        let anchor = b.mention(Category::ThyroidNodule, phrase);
        b.push(" is in the ");
        let lat = self.fill(&LATERALITY);
        chars.push(b.mention(Category::Laterality, &lat));
        b.push(" and is ");
        if highest {
            let level = Level::ALL[self.rng.random_range(2..5)];
            let t = self.risk_category_text(level);
            chars.push(b.mention(Category::TiradsRiskCategory, &t));
        } else {
            let r = self.fill(&NODULE_RISK);
            chars.push(b.mention(Category::RiskDescription, &r));
        }
        b.push(".\n");
        b.link(&chars, &anchor);
    }

    fn total(&mut self, b: &mut Builder, count: usize) {
        let phrase = match count {
            1 => "solitary nodule",
            2 => "two nodules",
            3 => "three nodules",
            _ => self.pick(&["multiple nodules", "multiple thyroid nodules"]),
        };
        if count == 1 {
            b.push("There is a ");
            b.mention(Category::TotalNumberOfNodules, phrase);
            b.push(".\n");
        } else {
            b.push("There are ");
            b.mention(Category::TotalNumberOfNodules, phrase);
            b.push(".\n");
        }
    }

    fn document(&mut self, index: usize) -> AnnotatedDocument {
        let post = match self.cfg.style {
            ReportStyle::PreTirads => false,
            ReportStyle::PostTirads => true,
            ReportStyle::Mixed => self.rng.random::<bool>(),
        };
        let mut b = Builder { text: String::new(), len: 0, mentions: Vec::new(), relations: Vec::new() };
        b.push(if post { "EXAM: US THYROID\n" } else { "ULTRASOUND OF THE THYROID (US THYROID)\n" });
        let indication = self.pick(INDICATIONS);
        b.push(&format!("INDICATION: {indication}\n"));
        b.push("TECHNIQUE: Grayscale and color Doppler ultrasound of the neck.\n\nFINDINGS:\n");
        b.push("The thyroid gland is of unremarkable size and echotexture.\n");

        let (lo, hi) = self.cfg.nodules_per_doc;
        let count = self.rng.random_range(lo..=hi);
        if count > 0 && self.has(Category::TotalNumberOfNodules) {
            self.total(&mut b, count);
        }
        for k in 0..count {
            if self.chance(self.cfg.list_rate) {
                self.list_nodule(&mut b, post, k + 1);
            } else {
                self.nodule(&mut b, post);
            }
        }
        if count > 1 && self.chance(self.cfg.multi_nodule_rate) {
            self.several_similar(&mut b);
        }
        if self.chance(self.cfg.lymph_node_rate) {
            self.lymph_node(&mut b);
        }
        if count == 0 {
            b.push("No thyroid lesions are seen.\n");
        } else {
            self.impression(&mut b, post);
        }

        let mut doc = AnnotatedDocument::new(format!("synth-{}-{index:05}", self.cfg.seed), b.text);
        doc.mentions = b.mentions;
        doc.relations = b.relations;
        doc.meta.insert("note_type".into(), "IMAGING".into());
        doc.meta.insert("style".into(), if post { "post-tirads" } else { "pre-tirads" }.into());
        doc
    }
}

/// Report-style documents with exact gold mentions and relations. The same
/// config always yields the same corpus.
pub fn synth_generate(config: &SynthConfig) -> Result<Vec<AnnotatedDocument>, CorpusError> {
    config.validate()?;
    let mut g = Gen { cfg: config, rng: ChaCha8Rng::seed_from_u64(config.seed), table: PointTable::acr_default() };
    Ok((0..config.doc_count).map(|i| g.document(i)).collect())
}
