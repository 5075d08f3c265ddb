//! List-quality metrics: sentence BLEU, oracle@k and distinct-n.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Sentence-level BLEU with uniform weights over orders `1..=max_n`.
///
/// Clipped precisions are combined geometrically and multiplied by the
/// brevity penalty `exp(1 - r/c)` when the candidate is shorter than the
/// closest reference length `r` (ties pick the shorter reference). Orders
/// with no candidate n-grams are dropped and the weights renormalized.
/// Orders above 1 with zero matches use `(0 + 1) / (total + 1)`; a zero
/// unigram precision makes the score 0.
pub fn sentence_bleu<T, R>(candidate: &[T], references: &[R], max_n: usize) -> Result<f64>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    if candidate.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    let refs: Vec<&[T]> = references
        .iter()
        .map(AsRef::as_ref)
        .filter(|r| !r.is_empty())
        .collect();
    if refs.is_empty() {
        return Err(Error::NoReferences);
    }
    if max_n == 0 {
        return Err(Error::BadN(max_n));
    }

    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        if candidate.len() < n {
            continue;
        }
        let cand_counts = ngram_counts(candidate, n);
        let total = candidate.len() - n + 1;
        let mut max_ref: HashMap<&[T], usize> = HashMap::new();
        for r in &refs {
            for (gram, c) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        let matches: usize = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return Ok(0.0);
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += precision.ln();
        orders += 1;
    }

    let c = candidate.len();
    let r = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("at least one reference");
    let brevity = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(brevity * (log_sum / orders as f64).exp())
}

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Best metric value among the first `k` entries of a ranked list.
pub fn oracle_at_k<C, R, M>(ranked: &[C], refs: &R, metric: M, k: usize) -> Result<f64>
where
    R: ?Sized,
    M: Fn(&C, &R) -> f64,
{
    if ranked.is_empty() {
        return Err(Error::EmptyList);
    }
    if k == 0 {
        return Err(Error::BadN(k));
    }
    Ok(ranked
        .iter()
        .take(k)
        .map(|c| metric(c, refs))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Distinct n-grams across the list divided by the total number of words.
/// Callers strip BOS/EOS first.
pub fn distinct_n<T, S>(list: &[S], n: usize) -> Result<f64>
where
    T: Eq + Hash,
    S: AsRef<[T]>,
{
    if list.is_empty() {
        return Err(Error::EmptyList);
    }
    if n == 0 {
        return Err(Error::BadN(n));
    }
    let mut seen: HashSet<&[T]> = HashSet::new();
    let mut words = 0usize;
    for seq in list {
        let seq = seq.as_ref();
        words += seq.len();
        if seq.len() >= n {
            seen.extend(seq.windows(n));
        }
    }
    if words == 0 {
        return Ok(0.0);
    }
    Ok(seen.len() as f64 / words as f64)
}

/// One hypothesis as seen by the evaluator: words without BOS/EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWords {
    pub words: Vec<String>,
    pub logprob: f64,
}

/// The ranked list decoded for one input and its references, if any.
#[derive(Debug, Clone, Copy)]
pub struct InputLists<'a> {
    pub hypotheses: &'a [ScoredWords],
    pub references: Option<&'a [Vec<String>]>,
}

/// Identifies the decoding run a report describes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub method: String,
    pub beam_width: usize,
    pub groups: usize,
    pub lambda: f64,
    pub diversity: String,
}

/// Averages over inputs of oracle@k (BLEU), distinct-1..4, length and top-1
/// log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub run: RunInfo,
    /// `(k, mean oracle BLEU@k)`; `None` when no references were given.
    pub oracle: Vec<(usize, Option<f64>)>,
    pub distinct: [f64; 4],
    pub mean_len: f64,
    pub top1_logprob: f64,
}

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 20];
const BLEU_ORDER: usize = 4;

/// BLEU that scores empty candidates as 0.
pub fn bleu_or_zero(candidate: &[String], references: &[Vec<String>]) -> f64 {
    sentence_bleu(candidate, references, BLEU_ORDER).unwrap_or(0.0)
}

impl MetricReport {
    pub fn compute(run: RunInfo, inputs: &[InputLists<'_>], ks: &[usize]) -> Result<MetricReport> {
        if inputs.is_empty() || inputs.iter().any(|i| i.hypotheses.is_empty()) {
            return Err(Error::EmptyList);
        }
        let count = inputs.len() as f64;
        let with_refs = inputs.iter().all(|i| i.references.is_some());
        let mut oracle = Vec::with_capacity(ks.len());
        for &k in ks {
            if !with_refs {
                oracle.push((k, None));
                continue;
            }
            let mut sum = 0.0;
            for input in inputs {
                let refs = input.references.expect("checked above");
                sum += oracle_at_k(input.hypotheses, refs, |h, r| bleu_or_zero(&h.words, r), k)?;
            }
            oracle.push((k, Some(sum / count)));
        }
        let mut distinct = [0.0; 4];
        for (n, slot) in distinct.iter_mut().enumerate() {
            let mut sum = 0.0;
            for input in inputs {
                let words: Vec<&[String]> = input
                    .hypotheses
                    .iter()
                    .map(|h| h.words.as_slice())
                    .collect();
                sum += distinct_n(&words, n + 1)?;
            }
            *slot = sum / count;
        }
        let total_hyps: usize = inputs.iter().map(|i| i.hypotheses.len()).sum();
        let total_words: usize = inputs
            .iter()
            .flat_map(|i| i.hypotheses.iter())
            .map(|h| h.words.len())
            .sum();
        let top1 = inputs.iter().map(|i| i.hypotheses[0].logprob).sum::<f64>() / count;
        Ok(MetricReport {
            run,
            oracle,
            distinct,
            mean_len: total_words as f64 / total_hyps as f64,
            top1_logprob: top1,
        })
    }

    pub fn tsv_header(ks: &[usize]) -> String {
        let mut h = String::from("method\tB\tG\tlambda\tdiversity");
        for k in ks {
            let _ = write!(h, "\toracle@{k}");
        }
        h.push_str("\tdistinct-1\tdistinct-2\tdistinct-3\tdistinct-4\tmean_len\ttop1_logprob");
        h
    }

    pub fn tsv_row(&self) -> String {
        let r = &self.run;
        let mut row = format!(
            "{}\t{}\t{}\t{}\t{}",
            r.method, r.beam_width, r.groups, r.lambda, r.diversity
        );
        for (_, value) in &self.oracle {
            match value {
                Some(v) => {
                    let _ = write!(row, "\t{v:.6}");
                }
                None => row.push_str("\tNA"),
            }
        }
        for d in self.distinct {
            let _ = write!(row, "\t{d:.6}");
        }
        let _ = write!(row, "\t{:.6}\t{:.6}", self.mean_len, self.top1_logprob);
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn bleu_worked_examples() {
        assert_eq!(
            sentence_bleu(&w("a b c d e"), &[w("a b c d e")], 4).unwrap(),
            1.0
        );
        assert_eq!(sentence_bleu(&w("a b"), &[w("c d")], 4).unwrap(), 0.0);
        let expected = (1.0f64 / 3.0 * 1.0 / 3.0 * 1.0 / 2.0).powf(1.0 / 3.0);
        let got = sentence_bleu(&w("a a a"), &[w("a b")], 4).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.381).abs() < 1e-3);
    }

    #[test]
    fn bleu_brevity_penalty_and_closest_reference() {
        // c = 2, closest reference length 3 (tie between 1 and 3 goes shorter: 1)
        let got = sentence_bleu(&w("a b"), &[w("a b c"), w("x")], 4).unwrap();
        assert_eq!(got, 1.0);
        let got = sentence_bleu(&w("a b"), &[w("a b c")], 4).unwrap();
        assert!((got - (1.0f64 - 1.5).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_errors() {
        assert!(matches!(
            sentence_bleu::<&str, Vec<&str>>(&[], &[w("a")], 4),
            Err(Error::EmptyCandidate)
        ));
        assert!(matches!(
            sentence_bleu::<&str, Vec<&str>>(&w("a"), &[], 4),
            Err(Error::NoReferences)
        ));
        assert!(matches!(
            sentence_bleu(&w("a"), &[Vec::<&str>::new()], 4),
            Err(Error::NoReferences)
        ));
    }

    #[test]
    fn oracle_examples() {
        let values = [0.2, 0.5, 0.3];
        let metric = |v: &f64, _: &()| *v;
        assert_eq!(oracle_at_k(&values, &(), metric, 1).unwrap(), 0.2);
        assert_eq!(oracle_at_k(&values, &(), metric, 2).unwrap(), 0.5);
        assert_eq!(oracle_at_k(&values, &(), metric, 10).unwrap(), 0.5);
        assert!(matches!(
            oracle_at_k::<f64, (), _>(&[], &(), metric, 1),
            Err(Error::EmptyList)
        ));
    }

    #[test]
    fn distinct_examples() {
        let list = [w("a b"), w("a c")];
        assert_eq!(distinct_n(&list, 1).unwrap(), 0.75);
        assert_eq!(distinct_n(&list, 2).unwrap(), 0.5);
        assert_eq!(distinct_n(&[w("a b"), w("a b")], 1).unwrap(), 0.5);
        assert!(matches!(
            distinct_n::<&str, Vec<&str>>(&[], 1),
            Err(Error::EmptyList)
        ));
        assert!(matches!(distinct_n(&list, 0), Err(Error::BadN(0))));
    }

    #[test]
    fn report_tsv() {
        let hyps = vec![
            ScoredWords {
                words: vec!["a".into(), "b".into()],
                logprob: -1.0,
            },
            ScoredWords {
                words: vec!["a".into(), "c".into()],
                logprob: -2.0,
            },
        ];
        let refs = vec![vec!["a".to_string(), "c".to_string()]];
        let run = RunInfo {
            method: "dbs".into(),
            beam_width: 2,
            groups: 2,
            lambda: 0.5,
            diversity: "hamming".into(),
        };
        let report = MetricReport::compute(
            run,
            &[InputLists {
                hypotheses: &hyps,
                references: Some(&refs),
            }],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(report.distinct[0], 0.75);
        assert_eq!(report.oracle[1], (2, Some(1.0)));
        assert_eq!(report.mean_len, 2.0);
        assert_eq!(report.top1_logprob, -1.0);
        assert_eq!(
            MetricReport::tsv_header(&[1, 2]),
            "method\tB\tG\tlambda\tdiversity\toracle@1\toracle@2\tdistinct-1\tdistinct-2\tdistinct-3\tdistinct-4\tmean_len\ttop1_logprob"
        );
        assert!(report.tsv_row().starts_with("dbs\t2\t2\t0.5\thamming\t"));
        assert!(report.tsv_row().contains("\t1.000000\t0.750000\t"));
    }

    fn seq_strategy() -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0u32..6, 1..10)
    }

    proptest! {
        #[test]
        fn bleu_of_self_is_one(x in seq_strategy()) {
            prop_assert_eq!(sentence_bleu(&x, std::slice::from_ref(&x), 4).unwrap(), 1.0);
        }

        #[test]
        fn bleu_invariant_to_relabeling(c in seq_strategy(), r in seq_strategy(), shift in 1u32..50) {
            let relabel = |s: &Vec<u32>| s.iter().map(|&t| (t * 7 + shift) % 101).collect::<Vec<_>>();
            let a = sentence_bleu(&c, std::slice::from_ref(&r), 4).unwrap();
            let b = sentence_bleu(&relabel(&c), &[relabel(&r)], 4).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn oracle_monotone_in_k(values in proptest::collection::vec(0.0f64..1.0, 1..30)) {
            let metric = |v: &f64, _: &()| *v;
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=values.len() + 2 {
                let o = oracle_at_k(&values, &(), metric, k).unwrap();
                prop_assert!(o >= prev);
                prev = o;
            }
        }

        #[test]
        fn oracle_ignores_order_within_prefix(values in proptest::collection::vec(0.0f64..1.0, 2..30), k in 1usize..30) {
            let metric = |v: &f64, _: &()| *v;
            let k = k.min(values.len());
            let mut shuffled = values.clone();
            shuffled[..k].reverse();
            prop_assert_eq!(
                oracle_at_k(&values, &(), metric, k).unwrap(),
                oracle_at_k(&shuffled, &(), metric, k).unwrap()
            );
        }

        #[test]
        fn distinct_scales_with_copies(x in seq_strategy(), copies in 1usize..6, n in 1usize..4) {
            let single = distinct_n(std::slice::from_ref(&x), n).unwrap();
            let many = distinct_n(&vec![x; copies], n).unwrap();
            prop_assert!((many - single / copies as f64).abs() < 1e-12);
        }
    }
}
