//! Seeded generators for test scorers and corpora.
//!
//! Decoding itself never uses randomness; seeds only pick which synthetic
//! model gets built.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scorers::TableScorer;
use crate::vocab::{TokenId, Vocab};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random [`TableScorer`].
#[derive(Debug, Clone, Copy)]
pub struct TableShape {
    /// Non-reserved tokens, named `w0`, `w1`, ..
    pub user_tokens: usize,
    /// Rows are stored for every prefix shorter than this.
    pub max_len: usize,
    /// Whether EOS gets probability mass.
    pub allow_eos: bool,
}

/// A table scorer with a random row for every prefix of user tokens shorter
/// than `shape.max_len`. UNK and BOS get probability zero.
pub fn random_table_scorer<R: Rng>(rng: &mut R, shape: TableShape) -> Result<(Vocab, TableScorer)> {
    let words: Vec<String> = (0..shape.user_tokens).map(|i| format!("w{i}")).collect();
    let vocab = Vocab::build(&words)?;
    let mut scorer = TableScorer::new(vocab.len());
    let user: Vec<TokenId> = (3..vocab.len() as u32).map(TokenId).collect();

    let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..shape.max_len {
        let mut next = Vec::with_capacity(frontier.len() * user.len());
        for prefix in &frontier {
            let mut weights = vec![0.0; vocab.len()];
            if shape.allow_eos {
                weights[TokenId::EOS.index()] = rng.gen_range(0.05..1.0);
            }
            for t in &user {
                // squaring spreads the weights out
                let w: f64 = rng.gen_range(0.05..1.0);
                weights[t.index()] = w * w;
            }
            let total: f64 = weights.iter().sum();
            let row: Vec<f64> = weights.iter().map(|w| (w / total).ln()).collect();
            scorer.insert_logprobs("", prefix, row)?;
            for &t in &user {
                let mut p = prefix.clone();
                p.push(t);
                next.push(p);
            }
        }
        frontier = next;
    }
    Ok((vocab, scorer))
}

/// Lines sampled from a random first-order Markov chain over `words`
/// tokens (`t0`, `t1`, ..). Each state favors a few successors, so the
/// resulting language model has clear modes.
pub fn random_corpus<R: Rng>(
    rng: &mut R,
    words: usize,
    lines: usize,
    max_line_len: usize,
) -> Vec<String> {
    let names: Vec<String> = (0..words).map(|i| format!("t{i}")).collect();
    // transition weights; index `words` is the start state
    let table: Vec<Vec<f64>> = (0..=words)
        .map(|_| {
            (0..words)
                .map(|_| {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    u.powi(4)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(lines);
    for _ in 0..lines {
        let len = rng.gen_range(1..=max_line_len);
        let mut state = words;
        let mut line = Vec::with_capacity(len);
        for _ in 0..len {
            let next = sample(rng, &table[state]);
            line.push(names[next].as_str());
            state = next;
        }
        out.push(line.join(" "));
    }
    out
}

fn sample<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Prefix of every mode-A token.
pub const MODE_A: &str = "A";
/// Prefix of every mode-B token.
pub const MODE_B: &str = "B";

/// Shape of a two-mode corpus.
#[derive(Debug, Clone, Copy)]
pub struct BimodalShape {
    /// Choices per sentence position.
    pub branching: usize,
    /// Words per sentence.
    pub len: usize,
    /// Random sentences added on top of the full set of combinations.
    pub extra: usize,
    /// Copies of each mode-A and mode-B sentence.
    pub copies_a: usize,
    pub copies_b: usize,
}

impl Default for BimodalShape {
    fn default() -> Self {
        BimodalShape {
            branching: 3,
            len: 5,
            extra: 24,
            copies_a: 11,
            copies_b: 10,
        }
    }
}

/// A corpus with two disjoint vocabularies.
///
/// Base sentences are every combination of position-specific words
/// (`p{i}c{j}`) plus `extra` random ones. Each is written once with prefix
/// `A` and once with prefix `B`, with `copies_a` and `copies_b` copies. A
/// bigram model without smoothing trained on it gives every mode-A sequence
/// exactly `copies_a / copies_b` times the probability of its mode-B twin.
pub fn bimodal_corpus<R: Rng>(rng: &mut R, shape: BimodalShape) -> Vec<String> {
    let word = |pos: usize, choice: usize| format!("p{pos}c{choice}");
    let mut base: Vec<Vec<String>> = vec![Vec::new()];
    for pos in 0..shape.len {
        base = base
            .into_iter()
            .flat_map(|prefix| {
                (0..shape.branching).map(move |c| {
                    let mut s = prefix.clone();
                    s.push(word(pos, c));
                    s
                })
            })
            .collect();
    }
    for _ in 0..shape.extra {
        base.push(
            (0..shape.len)
                .map(|pos| word(pos, rng.gen_range(0..shape.branching)))
                .collect(),
        );
    }
    let mut out = Vec::with_capacity(base.len() * (shape.copies_a + shape.copies_b));
    for (mode, copies) in [(MODE_A, shape.copies_a), (MODE_B, shape.copies_b)] {
        for words in &base {
            let line = words
                .iter()
                .map(|w| format!("{mode}{w}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.extend(std::iter::repeat_n(line, copies));
        }
    }
    out.shuffle(rng);
    out
}

/// Mode of a decoded sequence: the prefix shared by all its words, if any.
pub fn mode_of(vocab: &Vocab, tokens: &[TokenId]) -> Option<&'static str> {
    let words: Vec<&str> = tokens
        .iter()
        .filter(|t| !t.is_reserved())
        .filter_map(|&t| vocab.token(t))
        .collect();
    if words.is_empty() {
        return None;
    }
    [MODE_A, MODE_B]
        .into_iter()
        .find(|m| words.iter().all(|w| w.starts_with(m)))
}
