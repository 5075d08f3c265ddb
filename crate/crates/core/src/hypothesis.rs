use std::cmp::Ordering;

use crate::vocab::{TokenId, Vocab};

/// Conditioning input for one decode. Immutable while decoding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DecodeContext {
    /// Raw input text, used as the lookup key by table scorers.
    pub text: String,
    /// Input tokens, used as history by n-gram models.
    pub tokens: Vec<TokenId>,
}

impl DecodeContext {
    /// The empty context of an unconditioned model.
    pub fn empty() -> Self {
        DecodeContext::default()
    }

    pub fn from_text(text: &str, vocab: &Vocab) -> Self {
        DecodeContext {
            text: text.to_owned(),
            tokens: vocab.encode(text),
        }
    }
}

/// A decoded (partial) sequence.
///
/// `logprob` is always the pure model log-probability. `objective` is the
/// quantity the decoder ranks by; it equals `logprob` for every method
/// except MMI decoding, where it carries the modified objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub objective: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn empty() -> Self {
        Hypothesis {
            tokens: Vec::new(),
            logprob: 0.0,
            objective: 0.0,
            finished: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens without the trailing EOS.
    pub fn words(&self) -> &[TokenId] {
        match self.tokens.split_last() {
            Some((&TokenId::EOS, rest)) => rest,
            _ => &self.tokens,
        }
    }

    pub(crate) fn ranking_key(&self, length_norm: bool) -> f64 {
        if length_norm && !self.tokens.is_empty() {
            self.objective / self.tokens.len() as f64
        } else {
            self.objective
        }
    }
}

/// Final-list order: key descending, then token ids lexicographically.
pub(crate) fn final_order(a: &Hypothesis, b: &Hypothesis, length_norm: bool) -> Ordering {
    b.ranking_key(length_norm)
        .partial_cmp(&a.ranking_key(length_norm))
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Position of a hypothesis inside a [`GroupedRankedList`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub group: usize,
    pub rank_in_group: usize,
}

/// Decoder output: one ranked list per group plus a flattened ranking.
///
/// Methods without groups produce a single group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedRankedList {
    groups: Vec<Vec<Hypothesis>>,
    ranking: Vec<Slot>,
}

impl GroupedRankedList {
    pub(crate) fn new(mut groups: Vec<Vec<Hypothesis>>, length_norm: bool) -> Self {
        for group in &mut groups {
            group.sort_by(|a, b| final_order(a, b, length_norm));
        }
        let mut ranking: Vec<Slot> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, hyps)| {
                (0..hyps.len()).map(move |r| Slot {
                    group: g,
                    rank_in_group: r,
                })
            })
            .collect();
        // stable: equal keys keep (group, rank) order
        ranking.sort_by(|x, y| {
            let a = &groups[x.group][x.rank_in_group];
            let b = &groups[y.group][y.rank_in_group];
            b.ranking_key(length_norm)
                .partial_cmp(&a.ranking_key(length_norm))
                .unwrap_or(Ordering::Equal)
        });
        GroupedRankedList { groups, ranking }
    }

    pub fn single(hyps: Vec<Hypothesis>, length_norm: bool) -> Self {
        GroupedRankedList::new(vec![hyps], length_norm)
    }

    pub fn groups(&self) -> &[Vec<Hypothesis>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn ranking(&self) -> &[Slot] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    pub fn get(&self, slot: Slot) -> &Hypothesis {
        &self.groups[slot.group][slot.rank_in_group]
    }

    /// Hypotheses in flattened rank order.
    pub fn iter(&self) -> impl Iterator<Item = (Slot, &Hypothesis)> + '_ {
        self.ranking.iter().map(|&s| (s, self.get(s)))
    }

    pub fn flattened(&self) -> Vec<Hypothesis> {
        self.iter().map(|(_, h)| h.clone()).collect()
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.ranking.first().map(|&s| self.get(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyp(tokens: &[u32], logprob: f64) -> Hypothesis {
        Hypothesis {
            tokens: tokens.iter().map(|&t| TokenId(t)).collect(),
            logprob,
            objective: logprob,
            finished: tokens.last() == Some(&1),
        }
    }

    #[test]
    fn words_strip_trailing_eos() {
        assert_eq!(hyp(&[3, 4, 1], -1.0).words(), &[TokenId(3), TokenId(4)]);
        assert_eq!(hyp(&[3], -1.0).words(), &[TokenId(3)]);
    }

    #[test]
    fn flattened_ranking_interleaves_groups() {
        let list = GroupedRankedList::new(
            vec![
                vec![hyp(&[3], -2.0), hyp(&[4], -0.5)],
                vec![hyp(&[5], -1.0), hyp(&[6], -3.0)],
            ],
            false,
        );
        let order: Vec<f64> = list.iter().map(|(_, h)| h.logprob).collect();
        assert_eq!(order, vec![-0.5, -1.0, -2.0, -3.0]);
        assert_eq!(list.groups()[0][0].logprob, -0.5);
        assert_eq!(
            list.ranking()[1],
            Slot {
                group: 1,
                rank_in_group: 0
            }
        );
    }

    #[test]
    fn equal_scores_order_by_tokens_then_group() {
        let list = GroupedRankedList::new(
            vec![
                vec![hyp(&[4], -1.0), hyp(&[3], -1.0)],
                vec![hyp(&[3], -1.0)],
            ],
            false,
        );
        let slots: Vec<(usize, usize)> = list
            .ranking()
            .iter()
            .map(|s| (s.group, s.rank_in_group))
            .collect();
        assert_eq!(slots, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(list.groups()[0][0].tokens, vec![TokenId(3)]);
    }
}
