use super::{expand, BeamState, StepRows};
use crate::config::ValidConfig;
use crate::diversity::{Diversity, GroupTrace, PreparedDiversity};
use crate::error::Result;
use crate::hypothesis::{DecodeContext, GroupedRankedList};
use crate::scorers::Scorer;
use crate::vocab::TokenId;

/// Diverse beam search.
///
/// The beam budget is split into `cfg.groups` groups of width
/// `cfg.group_width()`. At every step the first group takes a plain beam
/// search step; each later group then steps with its candidates' selection
/// scores shifted by `cfg.lambda` times the diversity term computed against
/// the groups already extended at this step. A hypothesis contributes to
/// the term only at steps where it emitted a token, so finished hypotheses
/// stop influencing later groups.
///
/// With one group this is exactly [`super::beam_search`]; with
/// `lambda == 0` every group is an independent beam search of width
/// `B / G`.
pub fn diverse_beam_search<S: Scorer + ?Sized>(
    model: &S,
    ctx: &DecodeContext,
    cfg: &ValidConfig,
    diversity: &Diversity<'_>,
) -> Result<GroupedRankedList> {
    let vocab_size = model.vocab_size();
    let prepared = PreparedDiversity::new(diversity, vocab_size)?;
    let width = cfg.group_width();
    let lambda = cfg.lambda;

    let mut groups: Vec<BeamState> = (0..cfg.groups).map(|_| BeamState::initial()).collect();
    let mut step_rows = StepRows::new(vocab_size);
    let mut row_idx: Vec<usize> = Vec::new();
    // tokens selected at the current step by the groups already extended
    let mut slice: Vec<TokenId> = Vec::new();
    let mut term = vec![0.0; vocab_size];
    let counting = prepared.is_count();
    for t in 1..=cfg.max_len {
        if groups.iter().all(BeamState::all_finished) {
            break;
        }
        slice.clear();
        step_rows.clear();
        if counting {
            term.fill(0.0);
        }
        for g in 0..groups.len() {
            if groups[g].all_finished() {
                continue;
            }
            step_rows.lookup(model, ctx, &groups[g], &mut row_idx)?;
            let rows = step_rows.select(&row_idx);
            let next = if g == 0 {
                expand(&groups[g], &rows, width, |_, _| 0.0, false)?
            } else if counting || prepared.slice_term(&slice, &mut term) {
                expand(&groups[g], &rows, width, |_, v| lambda * term[v], false)?
            } else {
                let contributors: Vec<Vec<&[TokenId]>> = groups[..g]
                    .iter()
                    .map(|state| {
                        state
                            .hypotheses
                            .iter()
                            .filter(|h| h.tokens.len() == t)
                            .map(|h| h.tokens.as_slice())
                            .collect()
                    })
                    .collect();
                let traces: Vec<GroupTrace<'_>> = contributors
                    .iter()
                    .map(|prefixes| GroupTrace::new(t, prefixes))
                    .collect();
                let current: Vec<&[TokenId]> =
                    groups[g].live().map(|h| h.tokens.as_slice()).collect();
                let penalties = prepared.penalties(&traces, &current)?;
                expand(
                    &groups[g],
                    &rows,
                    width,
                    |i, v| lambda * penalties.for_hypothesis(i)[v],
                    false,
                )?
            };
            let start = slice.len();
            slice.extend(
                next.hypotheses
                    .iter()
                    .filter(|h| h.tokens.len() == t)
                    .map(|h| h.tokens[t - 1]),
            );
            if counting {
                for tok in &slice[start..] {
                    term[tok.index()] -= 1.0;
                }
            }
            groups[g] = next;
        }
    }

    let lists = groups
        .into_iter()
        .map(|state| state.into_ranked(cfg.length_norm))
        .collect();
    Ok(GroupedRankedList::new(lists, cfg.length_norm))
}
