use std::collections::HashMap;

use super::{check_prefix, check_row_len, probability_mass, Scorer};
use crate::error::{Error, Result};
use crate::hypothesis::DecodeContext;
use crate::vocab::TokenId;

/// Rows stored per (context text, prefix) must sum to one within this.
const ROW_TOLERANCE: f64 = 1e-9;

/// Scorer backed by an explicit table of rows.
///
/// Lookups that miss the table get a uniform row over every token but BOS.
#[derive(Debug, Clone)]
pub struct TableScorer {
    vocab_size: usize,
    rows: HashMap<String, HashMap<Vec<TokenId>, Vec<f64>>>,
    uniform: Vec<f64>,
}

impl TableScorer {
    pub fn new(vocab_size: usize) -> Self {
        let generable = vocab_size.saturating_sub(1).max(1) as f64;
        let mut uniform = vec![-generable.ln(); vocab_size];
        if let Some(bos) = uniform.get_mut(TokenId::BOS.index()) {
            *bos = f64::NEG_INFINITY;
        }
        TableScorer {
            vocab_size,
            rows: HashMap::new(),
            uniform,
        }
    }

    /// Stores a log-probability row. The row must have BOS at -inf and be
    /// normalized within 1e-9.
    pub fn insert_logprobs(
        &mut self,
        context: &str,
        prefix: &[TokenId],
        row: Vec<f64>,
    ) -> Result<()> {
        check_prefix(prefix, self.vocab_size)?;
        check_row_len(&row, self.vocab_size)?;
        let mass = probability_mass(&row);
        let bos_ok = row[TokenId::BOS.index()] == f64::NEG_INFINITY;
        if !bos_ok || (mass - 1.0).abs() > ROW_TOLERANCE || row.iter().any(|v| v.is_nan()) {
            return Err(Error::UnnormalizedRow {
                prefix: prefix.to_vec(),
                mass,
            });
        }
        self.rows
            .entry(context.to_owned())
            .or_default()
            .insert(prefix.to_vec(), row);
        Ok(())
    }

    /// Stores a probability row (converted with `ln`).
    pub fn insert_probs(&mut self, context: &str, prefix: &[TokenId], probs: &[f64]) -> Result<()> {
        self.insert_logprobs(context, prefix, probs.iter().map(|p| p.ln()).collect())
    }

    /// Number of stored rows.
    pub fn len(&self) -> usize {
        self.rows.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Scorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_into(&self, ctx: &DecodeContext, prefix: &[TokenId], out: &mut [f64]) -> Result<()> {
        check_prefix(prefix, self.vocab_size)?;
        check_row_len(out, self.vocab_size)?;
        let row = self
            .rows
            .get(ctx.text.as_str())
            .and_then(|by_prefix| by_prefix.get(prefix))
            .unwrap_or(&self.uniform);
        out.copy_from_slice(row);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<TokenId> {
        v.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn returns_stored_row() {
        let mut s = TableScorer::new(5);
        let probs = [0.0, 0.1, 0.0, 0.6, 0.3];
        s.insert_probs("", &[], &probs).unwrap();
        let row = s.score_next(&DecodeContext::empty(), &[]).unwrap();
        let expected: Vec<f64> = probs.iter().map(|p: &f64| p.ln()).collect();
        assert_eq!(row, expected);
    }

    #[test]
    fn falls_back_to_uniform() {
        let s = TableScorer::new(5);
        let row = s
            .score_next(&DecodeContext::empty(), &ids(&[3, 4]))
            .unwrap();
        assert_eq!(row[0], f64::NEG_INFINITY);
        for &lp in &row[1..] {
            assert!((lp - 0.25f64.ln()).abs() < 1e-15);
        }
        assert!((probability_mass(&row) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rows_and_prefixes() {
        let mut s = TableScorer::new(4);
        assert!(matches!(
            s.insert_probs("", &[], &[0.0, 0.5, 0.0, 0.4]),
            Err(Error::UnnormalizedRow { .. })
        ));
        assert!(matches!(
            s.insert_probs("", &[], &[0.1, 0.5, 0.0, 0.4]),
            Err(Error::UnnormalizedRow { .. })
        ));
        assert!(matches!(
            s.insert_probs("", &[], &[0.0, 1.0]),
            Err(Error::RowLengthMismatch { .. })
        ));
        let ctx = DecodeContext::empty();
        assert!(matches!(
            s.score_next(&ctx, &ids(&[3, 1])),
            Err(Error::PrefixAfterEos)
        ));
        assert!(matches!(
            s.score_next(&ctx, &ids(&[9])),
            Err(Error::InvalidTokenId { id: 9, size: 4 })
        ));
    }
}
