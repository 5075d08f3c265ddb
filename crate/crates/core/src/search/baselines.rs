use super::run_beam;
use crate::config::ValidConfig;
use crate::error::{Error, Result};
use crate::hypothesis::{DecodeContext, Hypothesis};
use crate::scorers::Scorer;
use crate::vocab::TokenId;

/// Beam search with an intra-sibling rank penalty.
///
/// The continuations of each hypothesis are ranked 1, 2, .. by decreasing
/// log-probability (ties by token id) and selected on
/// `logprob + theta - gamma * rank`. Stored scores stay pure.
pub fn decode_li2016<S: Scorer + ?Sized>(
    model: &S,
    ctx: &DecodeContext,
    cfg: &ValidConfig,
    gamma: f64,
) -> Result<Vec<Hypothesis>> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::NegativeStrength {
            name: "gamma_li",
            value: gamma,
        });
    }
    let state = run_beam(model, ctx, cfg.beam_width, cfg.max_len, |_, rows| {
        let bonus = rows.iter().map(|row| rank_penalty(row, gamma)).collect();
        Ok(Some((bonus, false)))
    })?;
    Ok(state.into_ranked(cfg.length_norm))
}

/// `-gamma * rank` for every token with a finite log-probability.
pub(crate) fn rank_penalty(row: &[f64], gamma: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).filter(|&v| row[v].is_finite()).collect();
    order.sort_by(|&x, &y| row[y].total_cmp(&row[x]).then(x.cmp(&y)));
    let mut out = vec![0.0; row.len()];
    for (rank, v) in order.into_iter().enumerate() {
        out[v] = -gamma * (rank + 1) as f64;
    }
    out
}

/// Beam search on `log P(y|x) - lambda * log U(y)`.
///
/// `unconditioned` is scored with an empty context. The modified objective
/// accumulates in [`Hypothesis::objective`] and ranks the final list;
/// [`Hypothesis::logprob`] stays the pure model score.
pub fn decode_mmi<S, U>(
    model: &S,
    unconditioned: &U,
    ctx: &DecodeContext,
    cfg: &ValidConfig,
    lambda: f64,
) -> Result<Vec<Hypothesis>>
where
    S: Scorer + ?Sized,
    U: Scorer + ?Sized,
{
    if unconditioned.vocab_size() != model.vocab_size() {
        return Err(Error::VocabMismatch(format!(
            "unconditioned model has {} tokens, decoding model has {}",
            unconditioned.vocab_size(),
            model.vocab_size()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::NegativeStrength {
            name: "lambda_mmi",
            value: lambda,
        });
    }
    let empty = DecodeContext::empty();
    let state = run_beam(model, ctx, cfg.beam_width, cfg.max_len, |state, rows| {
        let mut bonus = Vec::with_capacity(rows.len());
        for (hyp, row) in state.live().zip(rows) {
            let u_row = unconditioned.score_next(&empty, &hyp.tokens)?;
            let mut b = vec![0.0; row.len()];
            if lambda > 0.0 {
                for (v, (&theta, &u)) in row.iter().zip(&u_row).enumerate() {
                    if theta == f64::NEG_INFINITY {
                        continue;
                    }
                    if u == f64::NEG_INFINITY {
                        return Err(Error::ZeroUnconditionedProbability(TokenId(v as u32)));
                    }
                    b[v] = -lambda * u;
                }
            }
            bonus.push(b);
        }
        Ok(Some((bonus, true)))
    })?;
    Ok(state.into_ranked(cfg.length_norm))
}
