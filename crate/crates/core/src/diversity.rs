//! Dissimilarity terms added to selection scores of later groups.
//!
//! Hamming, n-gram and embedding terms are penalties (entries <= 0). The
//! cumulative term is a reward in (0, 1] per previous group. Both kinds are
//! added to the selection score scaled by a non-negative strength.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scorers::EmbeddingTable;
use crate::vocab::TokenId;

/// One entry per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyVector(Vec<f64>);

impl PenaltyVector {
    pub fn zeros(vocab_size: usize) -> Self {
        PenaltyVector(vec![0.0; vocab_size])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for PenaltyVector {
    fn from(v: Vec<f64>) -> Self {
        PenaltyVector(v)
    }
}

impl Deref for PenaltyVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The hypotheses a previous group extended at the current step.
///
/// Every prefix has length `step`; the slice at `step` is what the group
/// selected just now.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTrace<'a> {
    pub step: usize,
    pub prefixes: &'a [&'a [TokenId]],
}

impl<'a> GroupTrace<'a> {
    pub fn new(step: usize, prefixes: &'a [&'a [TokenId]]) -> Self {
        GroupTrace { step, prefixes }
    }

    /// Tokens chosen at `step`.
    pub fn current_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        let idx = self.step.checked_sub(1);
        self.prefixes
            .iter()
            .filter_map(move |p| idx.and_then(|i| p.get(i)).copied())
    }
}

/// Negative count of each token among `prev`.
pub fn hamming_penalty(prev: &[TokenId], vocab_size: usize) -> PenaltyVector {
    let mut out = vec![0.0; vocab_size];
    for &t in prev {
        if let Some(slot) = out.get_mut(t.index()) {
            *slot -= 1.0;
        }
    }
    PenaltyVector(out)
}

/// `exp(-M(v) / temperature)` where `M(v)` counts position-wise matches
/// between every beam of one previous group and the candidate
/// `current_prefix + [v]`.
pub fn cumulative_penalty(
    trace: &GroupTrace<'_>,
    current_prefix: &[TokenId],
    temperature: f64,
    vocab_size: usize,
) -> Result<PenaltyVector> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::BadTemperature(temperature));
    }
    let mut matches = vec![0.0f64; vocab_size];
    let t = current_prefix.len();
    let mut shared = 0usize;
    for beam in trace.prefixes {
        shared += beam
            .iter()
            .zip(current_prefix)
            .filter(|(a, b)| a == b)
            .count();
        if let Some(&tok) = beam.get(t) {
            if let Some(m) = matches.get_mut(tok.index()) {
                *m += 1.0;
            }
        }
    }
    let shared = shared as f64;
    Ok(PenaltyVector(
        matches
            .into_iter()
            .map(|m| (-(m + shared) / temperature).exp())
            .collect(),
    ))
}

/// Negative number of occurrences, over all previous prefixes and all
/// positions, of the n-gram `last n-1 tokens of current_prefix + [v]`.
pub fn ngram_penalty(
    traces: &[GroupTrace<'_>],
    current_prefix: &[TokenId],
    n: usize,
    vocab_size: usize,
) -> Result<PenaltyVector> {
    if n == 0 {
        return Err(Error::BadN(n));
    }
    let mut out = vec![0.0; vocab_size];
    if current_prefix.len() < n - 1 {
        return Ok(PenaltyVector(out));
    }
    let head = &current_prefix[current_prefix.len() - (n - 1)..];
    for trace in traces {
        for prefix in trace.prefixes {
            if prefix.len() < n {
                continue;
            }
            for window in prefix.windows(n) {
                if &window[..n - 1] == head {
                    if let Some(slot) = out.get_mut(window[n - 1].index()) {
                        *slot -= 1.0;
                    }
                }
            }
        }
    }
    Ok(PenaltyVector(out))
}

/// Soft Hamming: `-sum over u in prev of cos(e(u), e(v))`. Pairs missing a
/// vector, or with a zero vector, contribute nothing.
pub fn embedding_penalty(
    prev: &[TokenId],
    table: &EmbeddingTable,
    vocab_size: usize,
) -> PenaltyVector {
    let unit = table.normalized(vocab_size);
    soft_hamming(prev, &unit)
}

fn soft_hamming(prev: &[TokenId], unit: &[Option<Vec<f64>>]) -> PenaltyVector {
    let mut out = vec![0.0; unit.len()];
    soft_hamming_into(prev, unit, &mut out);
    PenaltyVector(out)
}

fn soft_hamming_into(prev: &[TokenId], unit: &[Option<Vec<f64>>], out: &mut [f64]) {
    let mut counts: Vec<(TokenId, f64)> = Vec::new();
    for &t in prev {
        match counts.iter_mut().find(|(id, _)| *id == t) {
            Some((_, c)) => *c += 1.0,
            None => counts.push((t, 1.0)),
        }
    }
    for (u, mult) in counts {
        let Some(Some(eu)) = unit.get(u.index()) else {
            continue;
        };
        for (slot, ev) in out.iter_mut().zip(unit) {
            if let Some(ev) = ev {
                let cos: f64 = eu.iter().zip(ev).map(|(a, b)| a * b).sum();
                *slot -= mult * cos;
            }
        }
    }
}

/// Element-wise sum of per-group terms. An empty list gives zeros.
pub fn aggregate_penalty(per_group: &[PenaltyVector], vocab_size: usize) -> Result<PenaltyVector> {
    let mut out = vec![0.0; vocab_size];
    for v in per_group {
        if v.len() != vocab_size {
            return Err(Error::LengthMismatch {
                expected: vocab_size,
                found: v.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    Ok(PenaltyVector(out))
}

/// Diversity function used by diverse beam search.
#[derive(Debug, Clone, Copy)]
pub enum Diversity<'a> {
    Hamming,
    Cumulative { temperature: f64 },
    NGram { n: usize },
    Embedding(&'a EmbeddingTable),
}

impl Diversity<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Diversity::Hamming => "hamming",
            Diversity::Cumulative { .. } => "cumulative",
            Diversity::NGram { .. } => "ngram",
            Diversity::Embedding(_) => "embedding",
        }
    }
}

/// Aggregated terms for the live hypotheses of one group.
#[derive(Debug, Clone)]
pub(crate) enum GroupPenalties {
    Shared(PenaltyVector),
    PerHypothesis(Vec<PenaltyVector>),
}

impl GroupPenalties {
    pub(crate) fn for_hypothesis(&self, i: usize) -> &[f64] {
        match self {
            GroupPenalties::Shared(v) => v,
            GroupPenalties::PerHypothesis(vs) => &vs[i],
        }
    }
}

/// A [`Diversity`] with per-decode precomputation done.
pub(crate) struct PreparedDiversity {
    kind: PreparedKind,
    vocab_size: usize,
}

enum PreparedKind {
    Hamming,
    Cumulative(f64),
    NGram(usize),
    Embedding(Vec<Option<Vec<f64>>>),
}

impl PreparedDiversity {
    pub(crate) fn new(diversity: &Diversity<'_>, vocab_size: usize) -> Result<Self> {
        let kind = match *diversity {
            Diversity::Hamming => PreparedKind::Hamming,
            Diversity::Cumulative { temperature } => {
                if !(temperature.is_finite() && temperature > 0.0) {
                    return Err(Error::BadTemperature(temperature));
                }
                PreparedKind::Cumulative(temperature)
            }
            Diversity::NGram { n } => {
                if n == 0 {
                    return Err(Error::BadN(n));
                }
                PreparedKind::NGram(n)
            }
            Diversity::Embedding(table) => PreparedKind::Embedding(table.normalized(vocab_size)),
        };
        Ok(PreparedDiversity { kind, vocab_size })
    }

    /// True when the term is a plain count over the current step's
    /// selections, so callers may maintain it incrementally.
    pub(crate) fn is_count(&self) -> bool {
        matches!(self.kind, PreparedKind::Hamming)
    }

    /// For terms that depend only on the tokens selected at the current
    /// step, writes the term for the selections in `slice` into `out` and
    /// returns true. Returns false for other kinds.
    pub(crate) fn slice_term(&self, slice: &[TokenId], out: &mut [f64]) -> bool {
        match &self.kind {
            PreparedKind::Hamming => {
                out.fill(0.0);
                for &t in slice {
                    if let Some(slot) = out.get_mut(t.index()) {
                        *slot -= 1.0;
                    }
                }
                true
            }
            PreparedKind::Embedding(unit) => {
                out.fill(0.0);
                soft_hamming_into(slice, unit, out);
                true
            }
            PreparedKind::NGram(_) | PreparedKind::Cumulative(_) => false,
        }
    }

    /// Terms summed over `previous` groups for each of `current` prefixes.
    pub(crate) fn penalties(
        &self,
        previous: &[GroupTrace<'_>],
        current: &[&[TokenId]],
    ) -> Result<GroupPenalties> {
        let size = self.vocab_size;
        Ok(match &self.kind {
            PreparedKind::Hamming => {
                let prev: Vec<TokenId> = previous.iter().flat_map(|g| g.current_tokens()).collect();
                GroupPenalties::Shared(hamming_penalty(&prev, size))
            }
            PreparedKind::Embedding(unit) => {
                let prev: Vec<TokenId> = previous.iter().flat_map(|g| g.current_tokens()).collect();
                GroupPenalties::Shared(soft_hamming(&prev, unit))
            }
            PreparedKind::NGram(n) => GroupPenalties::PerHypothesis(
                current
                    .iter()
                    .map(|prefix| ngram_penalty(previous, prefix, *n, size))
                    .collect::<Result<_>>()?,
            ),
            PreparedKind::Cumulative(temperature) => GroupPenalties::PerHypothesis(
                current
                    .iter()
                    .map(|prefix| {
                        let per_group = previous
                            .iter()
                            .map(|g| cumulative_penalty(g, prefix, *temperature, size))
                            .collect::<Result<Vec<_>>>()?;
                        aggregate_penalty(&per_group, size)
                    })
                    .collect::<Result<_>>()?,
            ),
        })
    }
}
