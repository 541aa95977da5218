use crate::preprocess::{BioTag, TagSet};

/// Per-token, per-tag scores for one sentence. Column order is the tag set's
/// canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TokenScoreMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TokenScoreMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds from row vectors; every row must have the same length and all
    /// entries must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols || r.iter().any(|v| !v.is_finite())) {
            return None;
        }
        Some(TokenScoreMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] += value;
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// Legal tag bigrams and start tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionConstraints {
    size: usize,
    allowed: Vec<bool>,
    start: Vec<bool>,
}

impl TransitionConstraints {
    /// Forbids exactly the transitions that make a BIO sequence invalid.
    pub fn bio(tagset: &TagSet) -> Self {
        let k = tagset.len();
        let mut allowed = vec![false; k * k];
        let mut start = vec![false; k];
        for (to, &t) in tagset.tags().iter().enumerate() {
            start[to] = t.may_follow(None);
            for (from, &f) in tagset.tags().iter().enumerate() {
                allowed[from * k + to] = t.may_follow(Some(f));
            }
        }
        TransitionConstraints { size: k, allowed, start }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.allowed[from * self.size + to]
    }

    pub fn allows_start(&self, tag: usize) -> bool {
        self.start[tag]
    }
}

/// Learned preferences over tag bigrams, added on top of emission scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionWeights {
    size: usize,
    pub start: Vec<f64>,
    pub pairs: Vec<f64>,
}

impl TransitionWeights {
    pub fn zeros(size: usize) -> Self {
        TransitionWeights { size, start: vec![0.0; size], pairs: vec![0.0; size * size] }
    }

    pub fn from_parts(start: Vec<f64>, pairs: Vec<f64>) -> Self {
        let size = start.len();
        assert_eq!(pairs.len(), size * size, "pair table must be size x size");
        TransitionWeights { size, start, pairs }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pair(&self, from: usize, to: usize) -> f64 {
        self.pairs[from * self.size + to]
    }
}

/// Highest-scoring legal tag sequence (indices into the tag set).
///
/// Among equally scoring sequences the lexicographically smallest one wins,
/// comparing tag indices from the first position on, so lower canonical tag
/// order takes precedence at earlier positions. Suffix scores are computed
/// right to left, then the path is chosen left to right taking the smallest
/// index that attains the optimum.
pub fn viterbi_decode(
    scores: &TokenScoreMatrix,
    constraints: &TransitionConstraints,
    transitions: &TransitionWeights,
) -> Vec<usize> {
    let n = scores.rows();
    let k = scores.cols();
    assert_eq!(constraints.size(), k, "constraint size does not match score columns");
    assert_eq!(transitions.size(), k, "transition size does not match score columns");
    if n == 0 {
        return Vec::new();
    }

    // suffix[t][j]: best score of positions t.. given tag j at t
    let mut suffix = vec![f64::NEG_INFINITY; n * k];
    for j in 0..k {
        suffix[(n - 1) * k + j] = scores.get(n - 1, j);
    }
    for t in (0..n - 1).rev() {
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            for next in 0..k {
                if constraints.allows(j, next) {
                    let v = transitions.pair(j, next) + suffix[(t + 1) * k + next];
                    if v > best {
                        best = v;
                    }
                }
            }
            suffix[t * k + j] = scores.get(t, j) + best;
        }
    }

    let mut path = Vec::with_capacity(n);
    let pick = |candidates: &mut dyn Iterator<Item = (usize, f64)>| -> usize {
        let mut best_tag = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (tag, v) in candidates {
            if v > best {
                best = v;
                best_tag = tag;
            }
        }
        best_tag
    };
    let first = pick(
        &mut (0..k)
            .filter(|&j| constraints.allows_start(j))
            .map(|j| (j, transitions.start[j] + suffix[j])),
    );
    path.push(first);
    for t in 1..n {
        let prev = path[t - 1];
        let tag = pick(
            &mut (0..k)
                .filter(|&j| constraints.allows(prev, j))
                .map(|j| (j, transitions.pair(prev, j) + suffix[t * k + j])),
        );
        path.push(tag);
    }
    path
}

/// [`viterbi_decode`] mapped back to tags.
pub fn decode_tags(
    tagset: &TagSet,
    scores: &TokenScoreMatrix,
    constraints: &TransitionConstraints,
    transitions: &TransitionWeights,
) -> Vec<BioTag> {
    viterbi_decode(scores, constraints, transitions)
        .into_iter()
        .map(|i| tagset.tag(i))
        .collect()
}
