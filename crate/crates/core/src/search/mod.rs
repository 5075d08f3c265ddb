//! Decoders.
//!
//! Every decoder keeps the pure model log-probability in
//! [`Hypothesis::logprob`]; diversity, rank and MMI terms only influence
//! which candidates survive a step. Candidate ties are broken by
//! (selection score desc, parent index asc, token id asc).

mod baselines;
mod dbs;
mod exhaustive;

pub use baselines::{decode_li2016, decode_mmi};
pub use dbs::diverse_beam_search;
pub use exhaustive::{exhaustive_topk, EXHAUSTIVE_LIMIT};

use std::cmp::Ordering;

use crate::config::{Method, ValidConfig};
use crate::diversity::{Diversity, PenaltyVector};
use crate::error::{Error, Result};
use crate::hypothesis::{final_order, DecodeContext, GroupedRankedList, Hypothesis};
use crate::scorers::{EmbeddingTable, Scorer};
use crate::vocab::TokenId;

/// Hypotheses held at one time step, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub step: usize,
    pub hypotheses: Vec<Hypothesis>,
}

impl BeamState {
    /// A single empty hypothesis at step 0.
    pub fn initial() -> Self {
        BeamState {
            step: 0,
            hypotheses: vec![Hypothesis::empty()],
        }
    }

    pub fn live(&self) -> impl Iterator<Item = &Hypothesis> + '_ {
        self.hypotheses.iter().filter(|h| !h.finished)
    }

    pub fn live_count(&self) -> usize {
        self.live().count()
    }

    pub fn all_finished(&self) -> bool {
        self.hypotheses.iter().all(|h| h.finished)
    }

    /// Hypotheses ranked by the final-list order.
    pub fn into_ranked(self, length_norm: bool) -> Vec<Hypothesis> {
        let mut hyps = self.hypotheses;
        hyps.sort_by(|a, b| final_order(a, b, length_norm));
        hyps
    }
}

/// Extra inputs some methods need.
#[derive(Clone, Copy, Default)]
pub struct Resources<'a> {
    /// Word vectors for embedding diversity.
    pub embeddings: Option<&'a EmbeddingTable>,
    /// Unconditioned model for MMI decoding. When absent, MMI decoding uses
    /// the main model with an empty context.
    pub unconditioned: Option<&'a dyn Scorer>,
}

/// Runs the method selected in `cfg`.
pub fn decode<S: Scorer + ?Sized>(
    model: &S,
    ctx: &DecodeContext,
    cfg: &ValidConfig,
    resources: &Resources<'_>,
) -> Result<GroupedRankedList> {
    let single = |hyps| Ok(GroupedRankedList::single(hyps, cfg.length_norm));
    match cfg.method {
        Method::Bs => single(beam_search(model, ctx, cfg)?),
        Method::Dbs => {
            let diversity = diversity_for(cfg, resources)?;
            diverse_beam_search(model, ctx, cfg, &diversity)
        }
        Method::Li2016 => single(decode_li2016(model, ctx, cfg, cfg.gamma_li)?),
        Method::Mmi => match resources.unconditioned {
            Some(u) => single(decode_mmi(model, u, ctx, cfg, cfg.lambda_mmi)?),
            None => single(decode_mmi(model, model, ctx, cfg, cfg.lambda_mmi)?),
        },
        Method::Exhaustive => single(exhaustive_topk(model, ctx, cfg.max_len, cfg.beam_width)?),
    }
}

pub(crate) fn diversity_for<'a>(
    cfg: &ValidConfig,
    resources: &Resources<'a>,
) -> Result<Diversity<'a>> {
    use crate::config::DiversityKind;
    Ok(match cfg.diversity {
        DiversityKind::Hamming => Diversity::Hamming,
        DiversityKind::Cumulative => Diversity::Cumulative {
            temperature: cfg.temperature,
        },
        DiversityKind::NGram => Diversity::NGram { n: cfg.div_ngram_n },
        DiversityKind::Embedding => Diversity::Embedding(
            resources
                .embeddings
                .ok_or(Error::MissingResource("dbs", "an embedding table"))?,
        ),
    })
}

/// Classical beam search of width `cfg.beam_width`.
pub fn beam_search<S: Scorer + ?Sized>(
    model: &S,
    ctx: &DecodeContext,
    cfg: &ValidConfig,
) -> Result<Vec<Hypothesis>> {
    let state = run_beam(model, ctx, cfg.beam_width, cfg.max_len, |_, _| Ok(None))?;
    Ok(state.into_ranked(cfg.length_norm))
}

/// Plain beam loop. `bonus_rows` may return one selection-only row per live
/// hypothesis for the step.
pub(crate) fn run_beam<S, F>(
    model: &S,
    ctx: &DecodeContext,
    width: usize,
    max_len: usize,
    mut bonus_rows: F,
) -> Result<BeamState>
where
    S: Scorer + ?Sized,
    F: FnMut(&BeamState, &[Vec<f64>]) -> Result<Option<(Vec<Vec<f64>>, bool)>>,
{
    let mut state = BeamState::initial();
    let mut rows = RowBuffer::new(model.vocab_size());
    for _ in 0..max_len {
        if state.all_finished() {
            break;
        }
        rows.fill(model, ctx, &state)?;
        state = match bonus_rows(&state, rows.rows())? {
            None => expand(&state, rows.rows(), width, |_, _| 0.0, false)?,
            Some((bonus, carry)) => expand(&state, rows.rows(), width, |i, v| bonus[i][v], carry)?,
        };
    }
    Ok(state)
}

/// Reusable per-step storage for scorer rows.
pub(crate) struct RowBuffer {
    vocab_size: usize,
    rows: Vec<Vec<f64>>,
    used: usize,
}

impl RowBuffer {
    pub(crate) fn new(vocab_size: usize) -> Self {
        RowBuffer {
            vocab_size,
            rows: Vec::new(),
            used: 0,
        }
    }

    pub(crate) fn fill<S: Scorer + ?Sized>(
        &mut self,
        model: &S,
        ctx: &DecodeContext,
        state: &BeamState,
    ) -> Result<()> {
        self.used = 0;
        for hyp in state.live() {
            if self.rows.len() == self.used {
                self.rows.push(vec![0.0; self.vocab_size]);
            }
            model.score_into(ctx, &hyp.tokens, &mut self.rows[self.used])?;
            self.used += 1;
        }
        Ok(())
    }

    pub(crate) fn rows(&self) -> &[Vec<f64>] {
        &self.rows[..self.used]
    }
}

/// Rows scored during one step, shared by every group that extends the
/// same prefix.
pub(crate) struct StepRows {
    vocab_size: usize,
    prefixes: Vec<Vec<TokenId>>,
    rows: Vec<Vec<f64>>,
    used: usize,
}

impl StepRows {
    pub(crate) fn new(vocab_size: usize) -> Self {
        StepRows {
            vocab_size,
            prefixes: Vec::new(),
            rows: Vec::new(),
            used: 0,
        }
    }

    pub(crate) fn clear(&mut self) {
        self.used = 0;
    }

    /// Appends to `out` the index of the row of every live hypothesis of
    /// `state`, scoring prefixes not seen earlier in the step.
    pub(crate) fn lookup<S: Scorer + ?Sized>(
        &mut self,
        model: &S,
        ctx: &DecodeContext,
        state: &BeamState,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        out.clear();
        for hyp in state.live() {
            // beams are small, a linear scan beats hashing here
            let found = self.prefixes[..self.used]
                .iter()
                .position(|p| *p == hyp.tokens);
            let idx = match found {
                Some(i) => i,
                None => {
                    if self.rows.len() == self.used {
                        self.rows.push(vec![0.0; self.vocab_size]);
                        self.prefixes.push(Vec::new());
                    }
                    let i = self.used;
                    model.score_into(ctx, &hyp.tokens, &mut self.rows[i])?;
                    self.prefixes[i].clear();
                    self.prefixes[i].extend_from_slice(&hyp.tokens);
                    self.used += 1;
                    i
                }
            };
            out.push(idx);
        }
        Ok(())
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Rows of one beam, given the indices filled by [`StepRows::lookup`].
    pub(crate) fn select<'a>(&'a self, idx: &'a [usize]) -> SelectedRows<'a> {
        SelectedRows { rows: self, idx }
    }
}

pub(crate) struct SelectedRows<'a> {
    rows: &'a StepRows,
    idx: &'a [usize],
}

impl Rows for SelectedRows<'_> {
    fn row(&self, i: usize) -> &[f64] {
        self.rows.row(self.idx[i])
    }
}

/// One step of beam search.
///
/// `rows[i]` is the log-probability row of the i-th live hypothesis of
/// `state`; `aug`, when given, holds one diversity term per live hypothesis,
/// added to the selection score scaled by `lambda`. Finished hypotheses
/// compete at their frozen score.
pub fn beam_step(
    state: &BeamState,
    rows: &[Vec<f64>],
    width: usize,
    aug: Option<&[PenaltyVector]>,
    lambda: f64,
) -> Result<BeamState> {
    if state.hypotheses.is_empty() {
        return Err(Error::EmptyState);
    }
    let live = state.live_count();
    if rows.len() != live {
        return Err(Error::RowLengthMismatch {
            expected: live,
            found: rows.len(),
        });
    }
    let vocab_size = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != vocab_size) {
        return Err(Error::RowLengthMismatch {
            expected: vocab_size,
            found: bad.len(),
        });
    }
    match aug {
        None => expand(state, rows, width, |_, _| 0.0, false),
        Some(aug) => {
            if aug.len() != live {
                return Err(Error::LengthMismatch {
                    expected: live,
                    found: aug.len(),
                });
            }
            if let Some(bad) = aug.iter().find(|a| a.len() != vocab_size) {
                return Err(Error::LengthMismatch {
                    expected: vocab_size,
                    found: bad.len(),
                });
            }
            expand(state, rows, width, |i, v| lambda * aug[i][v], false)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    /// Index into `state.hypotheses`.
    parent: usize,
    /// `None` for a finished hypothesis carried over unchanged.
    token: Option<TokenId>,
    theta: f64,
}

/// Score descending, then parent index, then token id. Scores are never NaN.
#[inline]
fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    if a.score > b.score {
        Ordering::Less
    } else if a.score < b.score {
        Ordering::Greater
    } else {
        a.parent.cmp(&b.parent).then(a.token.cmp(&b.token))
    }
}

/// Scorer rows of the live hypotheses of a beam, by live index.
pub(crate) trait Rows {
    fn row(&self, i: usize) -> &[f64];
}

impl<R: AsRef<[f64]>> Rows for [R] {
    fn row(&self, i: usize) -> &[f64] {
        self[i].as_ref()
    }
}

/// The best `width` candidates seen so far, sorted by [`candidate_order`].
struct TopK {
    width: usize,
    items: Vec<Candidate>,
    /// Score of the worst kept candidate once full; lower scores cannot
    /// enter.
    threshold: f64,
}

impl TopK {
    fn new(width: usize) -> Self {
        TopK {
            width,
            items: Vec::with_capacity(width + 1),
            threshold: if width == 0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
        }
    }

    #[inline(always)]
    fn offer(&mut self, c: Candidate) {
        if c.score < self.threshold {
            return;
        }
        self.insert(c);
    }

    fn insert(&mut self, c: Candidate) {
        if self.items.len() == self.width {
            match self.items.last() {
                Some(worst) if candidate_order(&c, worst) == Ordering::Less => {}
                _ => return,
            }
        }
        let at = self
            .items
            .partition_point(|x| candidate_order(x, &c) == Ordering::Less);
        self.items.insert(at, c);
        self.items.truncate(self.width);
        if self.items.len() == self.width {
            self.threshold = self.items[self.width - 1].score;
        }
    }
}

/// Selects the best `width` candidates. `bonus(i, v)` is the selection-only
/// term for token `v` after the i-th live hypothesis; with `carry_bonus`
/// it also accumulates into [`Hypothesis::objective`].
pub(crate) fn expand<R, F>(
    state: &BeamState,
    rows: &R,
    width: usize,
    mut bonus: F,
    carry_bonus: bool,
) -> Result<BeamState>
where
    R: Rows + ?Sized,
    F: FnMut(usize, usize) -> f64,
{
    if state.hypotheses.is_empty() {
        return Err(Error::EmptyState);
    }
    let mut best = TopK::new(width);
    let mut live_idx = 0;
    for (parent, hyp) in state.hypotheses.iter().enumerate() {
        if hyp.finished {
            best.offer(Candidate {
                score: hyp.objective,
                parent,
                token: None,
                theta: 0.0,
            });
            continue;
        }
        let row = rows.row(live_idx);
        for (v, &theta) in row.iter().enumerate() {
            if theta == f64::NEG_INFINITY {
                continue;
            }
            let b = bonus(live_idx, v);
            let score = if b == 0.0 {
                hyp.objective + theta
            } else {
                hyp.objective + theta + b
            };
            if score.is_nan() {
                continue;
            }
            best.offer(Candidate {
                score,
                parent,
                token: Some(TokenId(v as u32)),
                theta,
            });
        }
        live_idx += 1;
    }
    let candidates = best.items;

    let hypotheses = candidates
        .into_iter()
        .map(|c| {
            let parent = &state.hypotheses[c.parent];
            match c.token {
                None => parent.clone(),
                Some(token) => {
                    let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                    tokens.extend_from_slice(&parent.tokens);
                    tokens.push(token);
                    let logprob = parent.logprob + c.theta;
                    Hypothesis {
                        tokens,
                        logprob,
                        objective: if carry_bonus { c.score } else { logprob },
                        finished: token == TokenId::EOS,
                    }
                }
            }
        })
        .collect();
    Ok(BeamState {
        step: state.step + 1,
        hypotheses,
    })
}
