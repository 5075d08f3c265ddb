//! Token-level log-probability models.
//!
//! Every scorer returns a row of `|V|` natural-log probabilities whose
//! exponentials sum to one. BOS always has probability zero.

mod codec;
mod embedding;
mod ngram;
mod table;

pub use codec::{FORMAT_VERSION, MAGIC};
pub use embedding::{load_embeddings, EmbeddingTable, LoadedEmbeddings};
pub use ngram::{train_ngram_lm, NGramLm};
pub use table::TableScorer;

use crate::error::{Error, Result};
use crate::hypothesis::DecodeContext;
use crate::vocab::TokenId;

/// Tolerance on `|1 - sum(exp(row))|`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Writes `log P(. | prefix, ctx)` into `out` (length `vocab_size`).
    fn score_into(&self, ctx: &DecodeContext, prefix: &[TokenId], out: &mut [f64]) -> Result<()>;

    fn score_next(&self, ctx: &DecodeContext, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let mut row = vec![f64::NEG_INFINITY; self.vocab_size()];
        self.score_into(ctx, prefix, &mut row)?;
        Ok(row)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn score_into(&self, ctx: &DecodeContext, prefix: &[TokenId], out: &mut [f64]) -> Result<()> {
        (**self).score_into(ctx, prefix, out)
    }
}

/// Checks the preconditions shared by every scorer.
pub fn check_prefix(prefix: &[TokenId], vocab_size: usize) -> Result<()> {
    for &id in prefix {
        if id.index() >= vocab_size {
            return Err(Error::InvalidTokenId {
                id: id.0,
                size: vocab_size,
            });
        }
        if id == TokenId::EOS {
            return Err(Error::PrefixAfterEos);
        }
    }
    Ok(())
}

pub(crate) fn check_row_len(out: &[f64], vocab_size: usize) -> Result<()> {
    if out.len() != vocab_size {
        return Err(Error::RowLengthMismatch {
            expected: vocab_size,
            found: out.len(),
        });
    }
    Ok(())
}

/// `sum(exp(row))`.
pub fn probability_mass(row: &[f64]) -> f64 {
    row.iter().map(|&lp| lp.exp()).sum()
}
