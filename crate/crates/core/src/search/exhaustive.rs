use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::hypothesis::{final_order, DecodeContext, Hypothesis};
use crate::scorers::Scorer;
use crate::vocab::TokenId;

/// Largest `|V|^T` the exhaustive decoder will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// The `k` most probable sequences that end in EOS or reach `max_len`,
/// found by enumerating every sequence. Ties go to the lexicographically
/// smaller token-id sequence.
pub fn exhaustive_topk<S: Scorer + ?Sized>(
    model: &S,
    ctx: &DecodeContext,
    max_len: usize,
    k: usize,
) -> Result<Vec<Hypothesis>> {
    if max_len == 0 {
        return Err(Error::ZeroLength);
    }
    let vocab_size = model.vocab_size();
    let space = u32::try_from(max_len)
        .ok()
        .and_then(|t| (vocab_size as u64).checked_pow(t));
    if !space.is_some_and(|s| s <= EXHAUSTIVE_LIMIT) {
        return Err(Error::SearchSpaceTooLarge {
            vocab: vocab_size,
            max_len,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let mut search = Enumeration {
        model,
        ctx,
        max_len,
        k,
        best: BinaryHeap::new(),
        prefix: Vec::with_capacity(max_len),
    };
    search.visit(0.0)?;
    let mut out: Vec<Hypothesis> = search.best.into_iter().map(|r| r.0).collect();
    out.sort_by(|a, b| final_order(a, b, false));
    Ok(out)
}

/// Max-heap entry whose greatest element is the worst hypothesis.
struct Ranked(Hypothesis);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        final_order(&self.0, &other.0, false)
    }
}

struct Enumeration<'a, S: ?Sized> {
    model: &'a S,
    ctx: &'a DecodeContext,
    max_len: usize,
    k: usize,
    best: BinaryHeap<Ranked>,
    prefix: Vec<TokenId>,
}

impl<S: Scorer + ?Sized> Enumeration<'_, S> {
    fn visit(&mut self, logprob: f64) -> Result<()> {
        let row = self.model.score_next(self.ctx, &self.prefix)?;
        for (v, &theta) in row.iter().enumerate() {
            if theta == f64::NEG_INFINITY {
                continue;
            }
            let token = TokenId(v as u32);
            let score = logprob + theta;
            self.prefix.push(token);
            if token == TokenId::EOS || self.prefix.len() == self.max_len {
                self.offer(score);
            } else {
                self.visit(score)?;
            }
            self.prefix.pop();
        }
        Ok(())
    }

    fn offer(&mut self, logprob: f64) {
        if self.k == 0 {
            return;
        }
        let hyp = Hypothesis {
            tokens: self.prefix.clone(),
            logprob,
            objective: logprob,
            finished: self.prefix.last() == Some(&TokenId::EOS),
        };
        if self.best.len() < self.k {
            self.best.push(Ranked(hyp));
        } else if let Some(worst) = self.best.peek() {
            if final_order(&hyp, &worst.0, false) == Ordering::Less {
                self.best.pop();
                self.best.push(Ranked(hyp));
            }
        }
    }
}
