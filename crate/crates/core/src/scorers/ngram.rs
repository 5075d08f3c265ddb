use std::collections::{BTreeMap, HashMap};

use super::{check_row_len, Scorer};
use crate::error::{Error, Result};
use crate::hypothesis::DecodeContext;
use crate::vocab::{TokenId, Vocab};

/// Continuation counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct ContextCounts {
    pub(crate) total: u64,
    pub(crate) next: BTreeMap<TokenId, u64>,
}

/// Add-k smoothed n-gram language model with backoff to shorter contexts.
///
/// `P(w | c) = (count(c, w) + k) / (count(c) + k * |V'|)` where `|V'|` is
/// the vocabulary without BOS. A context that was never observed backs off
/// to its longest observed suffix, ending at the unigram distribution.
/// Lines are wrapped as `BOS w1 .. wn EOS`; histories shorter than
/// `order - 1` use whatever tokens exist, BOS included.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    pub(crate) vocab: Vocab,
    pub(crate) order: usize,
    pub(crate) add_k: f64,
    pub(crate) contexts: BTreeMap<Vec<TokenId>, ContextCounts>,
    /// Log-probability rows derived from `contexts`, for observed contexts.
    scored: HashMap<Vec<TokenId>, ScoredContext>,
}

#[derive(Debug, Clone, PartialEq)]
struct ScoredContext {
    /// Log-probability of every token not seen after the context.
    unseen: f64,
    seen: Vec<(usize, f64)>,
}

pub fn train_ngram_lm<S: AsRef<str>>(
    corpus: &[S],
    order: usize,
    add_k: f64,
    vocab: Vocab,
) -> Result<NGramLm> {
    if order == 0 {
        return Err(Error::BadOrder(order));
    }
    if !(add_k.is_finite() && add_k >= 0.0) {
        return Err(Error::BadSmoothing(add_k));
    }
    let mut contexts: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
    let mut lines = 0usize;
    let mut seq = Vec::new();
    for line in corpus {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        seq.clear();
        seq.push(TokenId::BOS);
        seq.extend(line.split_whitespace().map(|w| vocab.id_or_unk(w)));
        seq.push(TokenId::EOS);
        for i in 1..seq.len() {
            let longest = (order - 1).min(i);
            for m in 0..=longest {
                let entry = contexts.entry(seq[i - m..i].to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(seq[i]).or_insert(0) += 1;
            }
        }
    }
    if lines == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(NGramLm::from_parts(vocab, order, add_k, contexts))
}

impl NGramLm {
    pub(crate) fn from_parts(
        vocab: Vocab,
        order: usize,
        add_k: f64,
        contexts: BTreeMap<Vec<TokenId>, ContextCounts>,
    ) -> NGramLm {
        let generable = (vocab.len() - 1) as f64;
        let scored = contexts
            .iter()
            .filter(|(_, c)| c.total > 0)
            .map(|(ctx, c)| {
                let denom = c.total as f64 + add_k * generable;
                let seen = c
                    .next
                    .iter()
                    .map(|(&w, &n)| (w.index(), ((n as f64 + add_k) / denom).ln()))
                    .collect();
                let unseen = (add_k / denom).ln();
                (ctx.clone(), ScoredContext { unseen, seen })
            })
            .collect();
        NGramLm {
            vocab,
            order,
            add_k,
            contexts,
            scored,
        }
    }

    /// Trains with a vocabulary made of the corpus words in order of first
    /// appearance.
    pub fn train<S: AsRef<str>>(corpus: &[S], order: usize, add_k: f64) -> Result<NGramLm> {
        let mut seen = std::collections::HashSet::new();
        let mut words = Vec::new();
        for line in corpus {
            for w in line.as_ref().split_whitespace() {
                if crate::vocab::RESERVED.contains(&w) {
                    continue;
                }
                if seen.insert(w.to_owned()) {
                    words.push(w.to_owned());
                }
            }
        }
        if words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let vocab = Vocab::build(&words)?;
        train_ngram_lm(corpus, order, add_k, vocab)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// Number of distinct n-grams seen for n = 1..=order.
    pub fn ngram_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.order];
        for (ctx, c) in &self.contexts {
            counts[ctx.len()] += c.next.len();
        }
        counts
    }

    /// Count of `next` after exactly `context` (no backoff).
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.contexts
            .get(context)
            .and_then(|c| c.next.get(&next))
            .copied()
            .unwrap_or(0)
    }

    /// Longest observed suffix of `history` no longer than `order - 1`.
    fn find_context(&self, history: &[TokenId]) -> &ScoredContext {
        let take = (self.order - 1).min(history.len());
        let mut ctx = &history[history.len() - take..];
        loop {
            if let Some(scored) = self.scored.get(ctx) {
                return scored;
            }
            if ctx.is_empty() {
                unreachable!("training always records the empty context");
            }
            ctx = &ctx[1..];
        }
    }

    fn fill_row(&self, scored: &ScoredContext, out: &mut [f64]) {
        out.fill(scored.unseen);
        for &(w, lp) in &scored.seen {
            out[w] = lp;
        }
        out[TokenId::BOS.index()] = f64::NEG_INFINITY;
    }
}

impl Scorer for NGramLm {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn score_into(&self, ctx: &DecodeContext, prefix: &[TokenId], out: &mut [f64]) -> Result<()> {
        let size = self.vocab.len();
        super::check_prefix(prefix, size)?;
        check_row_len(out, size)?;
        if let Some(&bad) = ctx.tokens.iter().find(|id| id.index() >= size) {
            return Err(Error::InvalidTokenId { id: bad.0, size });
        }
        let keep = self.order - 1;
        let counts = if prefix.len() >= keep {
            self.find_context(&prefix[prefix.len() - keep..])
        } else {
            let mut history = Vec::with_capacity(keep + 1);
            let from_ctx = (keep - prefix.len()).min(ctx.tokens.len() + 1);
            if from_ctx > ctx.tokens.len() {
                history.push(TokenId::BOS);
            }
            let ctx_take = from_ctx.min(ctx.tokens.len());
            history.extend_from_slice(&ctx.tokens[ctx.tokens.len() - ctx_take..]);
            history.extend_from_slice(prefix);
            self.find_context(&history)
        };
        self.fill_row(counts, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::probability_mass;
    use proptest::prelude::*;

    fn vocab_ab() -> Vocab {
        Vocab::build(&["a", "b"]).unwrap()
    }

    fn p(lm: &NGramLm, prefix: &[&str], next: &str) -> f64 {
        let v = lm.vocab();
        let ids: Vec<TokenId> = prefix.iter().map(|w| v.id(w).unwrap()).collect();
        let row = lm.score_next(&DecodeContext::empty(), &ids).unwrap();
        row[v.id(next).unwrap().index()].exp()
    }

    #[test]
    fn single_observation_mle() {
        let lm = train_ngram_lm(&["a b"], 2, 0.0, vocab_ab()).unwrap();
        assert_eq!(p(&lm, &["a"], "b"), 1.0);
    }

    #[test]
    fn add_one_smoothing() {
        let lm = train_ngram_lm(&["a b"], 2, 1.0, vocab_ab()).unwrap();
        // (1 + 1) / (1 + 4), |V'| = {a, b, EOS, UNK}
        assert!((p(&lm, &["a"], "b") - 0.4).abs() < 1e-12);
        assert!((p(&lm, &["a"], "a") - 0.2).abs() < 1e-12);
        assert!((p(&lm, &["a"], "<unk>") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn hand_counted_bigrams() {
        let lm = train_ngram_lm(&["a b", "a a"], 2, 0.0, vocab_ab()).unwrap();
        // a-contexts: a->b, a->a, a->EOS(from "a a"), so 3 observations
        assert_eq!(lm.count(&[TokenId(3)], TokenId(3)), 1);
        assert_eq!(lm.count(&[TokenId(3)], TokenId(4)), 1);
        assert_eq!(lm.count(&[TokenId(3)], TokenId::EOS), 1);
        assert!((p(&lm, &["a"], "a") - 1.0 / 3.0).abs() < 1e-12);
        assert!((p(&lm, &["a"], "b") - 1.0 / 3.0).abs() < 1e-12);
        // first token always a
        assert_eq!(p(&lm, &[], "a"), 1.0);
    }

    #[test]
    fn bos_is_never_generated() {
        let lm = train_ngram_lm(&["a b"], 3, 0.5, vocab_ab()).unwrap();
        let row = lm.score_next(&DecodeContext::empty(), &[]).unwrap();
        assert_eq!(row[TokenId::BOS.index()], f64::NEG_INFINITY);
    }

    #[test]
    fn unseen_context_backs_off() {
        let lm = train_ngram_lm(&["a b"], 2, 0.0, vocab_ab()).unwrap();
        // context `b` only ever precedes EOS; UNK was never seen and backs off to unigrams
        let row = lm
            .score_next(&DecodeContext::empty(), &[TokenId::UNK])
            .unwrap();
        // unigram counts over predicted tokens: a, b, EOS
        for (w, expected) in [(3usize, 1.0 / 3.0), (4, 1.0 / 3.0), (1, 1.0 / 3.0)] {
            assert!((row[w].exp() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn context_tokens_extend_history() {
        let lm = train_ngram_lm(&["a b", "b a"], 2, 0.0, vocab_ab()).unwrap();
        let v = lm.vocab();
        let ctx = DecodeContext::from_text("a", v);
        let row = lm.score_next(&ctx, &[]).unwrap();
        let direct = lm
            .score_next(&DecodeContext::empty(), &[TokenId(3)])
            .unwrap();
        assert_eq!(row, direct);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_ngram_lm::<&str>(&[], 2, 0.0, vocab_ab()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            train_ngram_lm(&["  "], 2, 0.0, vocab_ab()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            train_ngram_lm(&["a"], 0, 0.0, vocab_ab()),
            Err(Error::BadOrder(0))
        ));
        assert!(matches!(
            train_ngram_lm(&["a"], 2, -1.0, vocab_ab()),
            Err(Error::BadSmoothing(_))
        ));
    }

    #[test]
    fn ngram_counts_per_order() {
        let lm = train_ngram_lm(&["a b", "a a"], 2, 0.0, vocab_ab()).unwrap();
        // unigrams {a, b, EOS}; bigrams BOS-a, a-b, b-EOS, a-a, a-EOS
        assert_eq!(lm.ngram_counts(), vec![3, 5]);
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..7)
                .prop_map(|ws| ws.join(" ")),
            1..8,
        )
        .prop_filter("needs one non-blank line", |lines| {
            lines.iter().any(|l| !l.trim().is_empty())
        })
    }

    proptest! {
        #[test]
        fn rows_are_normalized(
            corpus in corpus_strategy(),
            order in 1usize..5,
            k in prop::sample::select(vec![0.0, 0.1, 1.0]),
            prefix in proptest::collection::vec(2u32..7, 0..6),
        ) {
            let vocab = Vocab::build(&["a", "b", "c", "d"]).unwrap();
            let lm = train_ngram_lm(&corpus, order, k, vocab).unwrap();
            let prefix: Vec<TokenId> = prefix.into_iter().map(TokenId).collect();
            let row = lm.score_next(&DecodeContext::empty(), &prefix).unwrap();
            prop_assert!((probability_mass(&row) - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn rows_depend_only_on_recent_tokens(
            corpus in corpus_strategy(),
            order in 1usize..4,
            head_a in proptest::collection::vec(2u32..7, 0..4),
            head_b in proptest::collection::vec(2u32..7, 0..4),
            tail in proptest::collection::vec(2u32..7, 3..5),
        ) {
            let vocab = Vocab::build(&["a", "b", "c", "d"]).unwrap();
            let lm = train_ngram_lm(&corpus, order, 0.5, vocab).unwrap();
            let mk = |head: &[u32]| -> Vec<TokenId> {
                head.iter().chain(tail.iter()).map(|&i| TokenId(i)).collect()
            };
            let ctx = DecodeContext::empty();
            prop_assert_eq!(
                lm.score_next(&ctx, &mk(&head_a)).unwrap(),
                lm.score_next(&ctx, &mk(&head_b)).unwrap()
            );
        }
    }
}
