use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::schema::AnnotatedDocument;

/// Keeps documents whose text contains at least one keyword (ignoring case)
/// and whose `note_type` meta equals `note_type`. An empty keyword list
/// applies the note type filter only.
pub fn filter_reports(docs: &[AnnotatedDocument], keywords: &[String], note_type: &str) -> Vec<AnnotatedDocument> {
    let keys: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    docs.iter()
        .filter(|d| d.note_type() == Some(note_type))
        .filter(|d| {
            if keys.is_empty() {
                return true;
            }
            let text = d.text.to_lowercase();
            keys.iter().any(|k| text.contains(k.as_str()))
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatios { train, dev, test };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), CorpusError> {
        let all = [self.train, self.dev, self.test];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CorpusError::Ratio(format!("{all:?} must be finite and non-negative")));
        }
        if self.train <= 0.0 {
            return Err(CorpusError::Ratio("train ratio must be positive".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Ratio(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = CorpusError;

    /// Parses `train/dev/test`, e.g. `0.8/0.1/0.1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(CorpusError::Ratio(format!("`{s}` is not train/dev/test")));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.trim().parse().map_err(|_| CorpusError::Ratio(format!("`{p}` is not a number")))?;
        }
        SplitRatios::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl CorpusSplit {
    /// Documents of `docs` whose ids are in `ids`, in the order of `ids`.
    pub fn select<'a>(docs: &'a [AnnotatedDocument], ids: &[String]) -> Vec<&'a AnnotatedDocument> {
        let by_id: std::collections::HashMap<&str, &AnnotatedDocument> =
            docs.iter().map(|d| (d.id.as_str(), d)).collect();
        ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect()
    }
}

/// Shuffles document ids with `seed`, then cuts train, dev and test in that
/// order. Dev and test sizes are `floor(n * ratio)`; train takes the rest.
pub fn split_corpus(docs: &[AnnotatedDocument], ratios: SplitRatios, seed: u64) -> Result<CorpusSplit, CorpusError> {
    ratios.check()?;
    let mut ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let dev = (n as f64 * ratios.dev).floor() as usize;
    let test = (n as f64 * ratios.test).floor() as usize;
    let train = n - dev - test;
    let test_ids = ids.split_off(train + dev);
    let dev_ids = ids.split_off(train);
    Ok(CorpusSplit { train: ids, dev: dev_ids, test: test_ids, ratios, seed })
}
