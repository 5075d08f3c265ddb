//! The `divseq` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or data failure, 2 usage or configuration
//! error. Settings are validated before any file is read or written, and
//! output files are written only once all work has succeeded.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DecodeConfig, DiversityKind, Method, ValidConfig};
use crate::error::Error;
use crate::eval::{InputLists, MetricReport, RunInfo, ScoredWords};
use crate::hypothesis::{DecodeContext, GroupedRankedList};
use crate::scorers::{load_embeddings, EmbeddingTable, NGramLm, Scorer};
use crate::search::{decode, Resources};
use crate::synth;

/// Version of the JSONL hypothesis schema.
pub const JSONL_VERSION: u32 = 1;

/// Environment variable capping batch parallelism.
pub const THREADS_ENV: &str = "DIVSEQ_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "divseq",
    version,
    about = "Beam and diverse beam search decoding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an n-gram language model on a whitespace-tokenized corpus.
    TrainLm(TrainArgs),
    /// Decode every line of an input file.
    Decode(DecodeArgs),
    /// Score decoded lists against references.
    Eval(EvalArgs),
    /// Decode and evaluate over a grid of lambda and group counts.
    Sweep(SweepArgs),
    /// Write a synthetic training corpus.
    GenCorpus(GenArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus file, one sentence per line.
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 1.0)]
    pub add_k: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeFlags {
    /// Model file written by `train-lm`.
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long, default_value = "bs")]
    pub method: Method,
    /// Total beam width.
    #[arg(short = 'B', default_value_t = 4)]
    pub beam_width: usize,
    /// Number of groups.
    #[arg(short = 'G', default_value_t = 1)]
    pub groups: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value = "hamming")]
    pub diversity: DiversityKind,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_li: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_mmi: f64,
    /// Temperature of cumulative diversity.
    #[arg(long = "Gamma", default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2)]
    pub div_n: usize,
    /// Maximum output length.
    #[arg(short = 'T', default_value_t = 10)]
    pub max_len: usize,
    /// Rank final lists by per-token log-probability.
    #[arg(long)]
    pub length_norm: bool,
    /// Word vectors for embedding diversity.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Unconditioned model for mmi; defaults to the main model.
    #[arg(long)]
    pub u_lm: Option<PathBuf>,
    /// Input file, one prompt per line.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub flags: DecodeFlags,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Bleu,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL written by `decode`.
    #[arg(long)]
    pub hyp: PathBuf,
    /// References, one `input_id<TAB>sentence` per line.
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long, value_enum, default_value = "bleu")]
    pub metric: Metric,
    /// Comma-separated oracle cutoffs.
    #[arg(short = 'k', default_value = "1,5,10,20")]
    pub ks: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub flags: DecodeFlags,
    /// Comma-separated lambda values.
    #[arg(long)]
    pub lambda_grid: String,
    /// Comma-separated group counts.
    #[arg(long = "G-grid")]
    pub g_grid: String,
    /// References for oracle columns.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    #[arg(short = 'k', default_value = "1,5,10,20")]
    pub ks: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusKind {
    /// Sentences from a random Markov chain.
    Random,
    /// Two disjoint-vocabulary modes, mode A 1.1 times as likely.
    Bimodal,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "random")]
    pub kind: CorpusKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vocabulary size of random corpora.
    #[arg(long, default_value_t = 20)]
    pub words: usize,
    /// Line count of random corpora.
    #[arg(long, default_value_t = 500)]
    pub lines: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("divseq: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::TrainLm(a) => cmd_train_lm(&a),
        Command::Decode(a) => cmd_decode(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::GenCorpus(a) => cmd_gen_corpus(&a),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e).into()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Failure(format!("stdout: {e}")))
        }
    }
}

pub fn cmd_train_lm(a: &TrainArgs) -> CliResult<()> {
    if a.order == 0 {
        return Err(Error::BadOrder(a.order).into());
    }
    if !(a.add_k.is_finite() && a.add_k >= 0.0) {
        return Err(Error::BadSmoothing(a.add_k).into());
    }
    let text = read_text(&a.corpus)?;
    let lines: Vec<&str> = text.lines().collect();
    let lm = NGramLm::train(&lines, a.order, a.add_k)?;
    lm.save(&a.out)?;
    println!("vocab size: {}", lm.vocab().len());
    for (n, count) in lm.ngram_counts().iter().enumerate() {
        println!("{}-grams: {count}", n + 1);
    }
    Ok(())
}

impl DecodeFlags {
    fn config(&self, lambda: f64, groups: usize) -> DecodeConfig {
        DecodeConfig {
            beam_width: self.beam_width,
            groups,
            lambda,
            gamma_li: self.gamma_li,
            lambda_mmi: self.lambda_mmi,
            temperature: self.temperature,
            div_ngram_n: self.div_n,
            max_len: self.max_len,
            method: self.method,
            diversity: self.diversity,
            length_norm: self.length_norm,
        }
    }

    fn check_resources(&self, cfg: &ValidConfig) -> CliResult<()> {
        if cfg.method == Method::Dbs
            && cfg.groups > 1
            && cfg.diversity == DiversityKind::Embedding
            && self.embeddings.is_none()
        {
            return Err(Error::MissingResource("dbs", "--embeddings").into());
        }
        Ok(())
    }
}

/// Everything a decode needs, loaded from disk.
struct Loaded {
    lm: NGramLm,
    unconditioned: Option<NGramLm>,
    embeddings: Option<EmbeddingTable>,
    inputs: Vec<String>,
}

impl Loaded {
    fn load(flags: &DecodeFlags) -> CliResult<Loaded> {
        let lm = NGramLm::load(&flags.lm)?;
        let unconditioned = match &flags.u_lm {
            Some(p) => {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                Some(NGramLm::from_bytes_with_vocab(&bytes, lm.vocab())?)
            }
            None => None,
        };
        let embeddings = match &flags.embeddings {
            Some(p) => {
                let loaded = load_embeddings(&read_text(p)?, lm.vocab())?;
                if loaded.skipped > 0 {
                    eprintln!(
                        "divseq: {}: skipped {} out-of-vocabulary vectors",
                        p.display(),
                        loaded.skipped
                    );
                }
                Some(loaded.table)
            }
            None => None,
        };
        let inputs = read_text(&flags.input)?
            .lines()
            .map(str::to_owned)
            .collect();
        Ok(Loaded {
            lm,
            unconditioned,
            embeddings,
            inputs,
        })
    }

    fn resources(&self) -> Resources<'_> {
        Resources {
            embeddings: self.embeddings.as_ref(),
            unconditioned: self.unconditioned.as_ref().map(|u| u as &dyn Scorer),
        }
    }

    /// Decodes every input, in parallel, returning lists in input order.
    fn decode_all(&self, cfg: &ValidConfig) -> CliResult<Vec<GroupedRankedList>> {
        let resources = self.resources();
        let pool = thread_pool()?;
        let results: Vec<_> = pool.install(|| {
            self.inputs
                .par_iter()
                .map(|line| {
                    let ctx = DecodeContext::from_text(line, self.lm.vocab());
                    decode(&self.lm, &ctx, cfg, &resources)
                })
                .collect()
        });
        results
            .into_iter()
            .map(|r| r.map_err(CliError::from))
            .collect()
    }
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got `{value}`"
                ))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}

/// The run description written to output. Settings that cannot affect the
/// result are normalized away, so a one-group DBS run is reported as the
/// beam search it is.
fn run_info(cfg: &ValidConfig) -> RunInfo {
    let diverse = cfg.method == Method::Dbs && cfg.groups > 1;
    RunInfo {
        method: if cfg.method == Method::Dbs && !diverse {
            Method::Bs.name().to_owned()
        } else {
            cfg.method.name().to_owned()
        },
        beam_width: cfg.beam_width,
        groups: if diverse { cfg.groups } else { 1 },
        lambda: if diverse { cfg.lambda } else { 0.0 },
        diversity: if diverse {
            cfg.diversity.name().to_owned()
        } else {
            "none".to_owned()
        },
    }
}

/// One line of decoder output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub v: u32,
    pub input_id: usize,
    pub method: String,
    #[serde(rename = "B")]
    pub beam_width: usize,
    #[serde(rename = "G")]
    pub groups: usize,
    pub lambda: f64,
    pub diversity: String,
    /// 1-based position in the flattened list.
    pub rank: usize,
    /// 1-based group index.
    pub group: usize,
    /// 1-based rank inside the group.
    pub rank_in_group: usize,
    /// Space-joined words, without the end-of-sequence marker.
    pub tokens: String,
    pub logprob: f64,
    pub finished: bool,
    /// Modified objective of mmi decoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

fn records(
    run: &RunInfo,
    method: Method,
    lists: &[GroupedRankedList],
    vocab: &crate::vocab::Vocab,
) -> Vec<HypothesisRecord> {
    let mut out = Vec::new();
    for (input_id, list) in lists.iter().enumerate() {
        for (rank, (slot, h)) in list.iter().enumerate() {
            out.push(HypothesisRecord {
                v: JSONL_VERSION,
                input_id,
                method: run.method.clone(),
                beam_width: run.beam_width,
                groups: run.groups,
                lambda: run.lambda,
                diversity: run.diversity.clone(),
                rank: rank + 1,
                group: slot.group + 1,
                rank_in_group: slot.rank_in_group + 1,
                tokens: vocab.decode(h.words()),
                logprob: h.logprob,
                finished: h.finished,
                objective: (method == Method::Mmi).then_some(h.objective),
            });
        }
    }
    out
}

fn to_jsonl(records: &[HypothesisRecord]) -> CliResult<String> {
    let mut text = String::new();
    for r in records {
        let line =
            serde_json::to_string(r).map_err(|e| CliError::Failure(format!("serialize: {e}")))?;
        text.push_str(&line);
        text.push('\n');
    }
    Ok(text)
}

pub fn cmd_decode(a: &DecodeArgs) -> CliResult<()> {
    let flags = &a.flags;
    let cfg = flags.config(flags.lambda, flags.groups).validate()?;
    flags.check_resources(&cfg)?;
    let loaded = Loaded::load(flags)?;
    let lists = loaded.decode_all(&cfg)?;
    let recs = records(&run_info(&cfg), cfg.method, &lists, loaded.lm.vocab());
    write_output(a.out.as_deref(), &to_jsonl(&recs)?)
}

fn parse_list<T: std::str::FromStr>(name: &str, text: &str) -> CliResult<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{name}: cannot parse `{text}`")))?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("{name} is empty")));
    }
    Ok(items)
}

fn parse_ks(text: &str) -> CliResult<Vec<usize>> {
    let ks: Vec<usize> = parse_list("-k", text)?;
    if ks.contains(&0) {
        return Err(CliError::Usage("-k values must be at least 1".into()));
    }
    Ok(ks)
}

/// References keyed by input id, in file order per id.
fn load_refs(path: &Path) -> CliResult<BTreeMap<usize, Vec<Vec<String>>>> {
    let mut refs: BTreeMap<usize, Vec<Vec<String>>> = BTreeMap::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, sentence) = line.split_once('\t').ok_or_else(|| {
            CliError::Failure(format!(
                "{}:{}: expected `input_id<TAB>sentence`",
                path.display(),
                n + 1
            ))
        })?;
        let id: usize = id.trim().parse().map_err(|_| {
            CliError::Failure(format!("{}:{}: bad input id `{id}`", path.display(), n + 1))
        })?;
        refs.entry(id)
            .or_default()
            .push(sentence.split_whitespace().map(str::to_owned).collect());
    }
    Ok(refs)
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let ks = parse_ks(&a.ks)?;
    let text = read_text(&a.hyp)?;
    let mut run = None;
    let mut lists: BTreeMap<usize, Vec<ScoredWords>> = BTreeMap::new();
    let mut order = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: HypothesisRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Failure(format!("{}:{}: {e}", a.hyp.display(), n + 1)))?;
        if rec.v != JSONL_VERSION {
            return Err(CliError::Failure(format!(
                "{}:{}: unsupported schema version {}",
                a.hyp.display(),
                n + 1,
                rec.v
            )));
        }
        run.get_or_insert_with(|| RunInfo {
            method: rec.method.clone(),
            beam_width: rec.beam_width,
            groups: rec.groups,
            lambda: rec.lambda,
            diversity: rec.diversity.clone(),
        });
        let list = lists.entry(rec.input_id).or_insert_with(|| {
            order.push(rec.input_id);
            Vec::new()
        });
        list.push(ScoredWords {
            words: words(&rec.tokens),
            logprob: rec.logprob,
        });
    }
    let run =
        run.ok_or_else(|| CliError::Failure(format!("{}: no hypotheses", a.hyp.display())))?;
    let refs = load_refs(&a.refs)?;
    if let Some(id) = order.iter().find(|id| !refs.contains_key(id)) {
        return Err(CliError::Failure(format!(
            "input id {id} has hypotheses but no references"
        )));
    }
    if let Some(id) = refs.keys().find(|id| !lists.contains_key(id)) {
        return Err(CliError::Failure(format!(
            "input id {id} has references but no hypotheses"
        )));
    }
    let inputs: Vec<InputLists<'_>> = order
        .iter()
        .map(|id| InputLists {
            hypotheses: &lists[id],
            references: Some(refs[id].as_slice()),
        })
        .collect();
    let report = MetricReport::compute(run, &inputs, &ks)?;
    let text = format!("{}\n{}\n", MetricReport::tsv_header(&ks), report.tsv_row());
    write_output(a.out.as_deref(), &text)
}

fn scored(list: &GroupedRankedList, vocab: &crate::vocab::Vocab) -> Vec<ScoredWords> {
    list.iter()
        .map(|(_, h)| ScoredWords {
            words: h
                .words()
                .iter()
                .filter_map(|&t| vocab.token(t))
                .map(str::to_owned)
                .collect(),
            logprob: h.logprob,
        })
        .collect()
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let flags = &a.flags;
    let ks = parse_ks(&a.ks)?;
    let lambdas: Vec<f64> = parse_list("--lambda-grid", &a.lambda_grid)?;
    let groups: Vec<usize> = parse_list("--G-grid", &a.g_grid)?;
    let mut cells = Vec::with_capacity(lambdas.len() * groups.len());
    for &lambda in &lambdas {
        for &g in &groups {
            let cfg = flags.config(lambda, g).validate()?;
            flags.check_resources(&cfg)?;
            cells.push(cfg);
        }
    }
    let loaded = Loaded::load(flags)?;
    let refs = match &a.refs {
        Some(p) => {
            let refs = load_refs(p)?;
            if let Some(id) = (0..loaded.inputs.len()).find(|id| !refs.contains_key(id)) {
                return Err(CliError::Failure(format!(
                    "input id {id} has no references"
                )));
            }
            if let Some(id) = refs.keys().find(|&&id| id >= loaded.inputs.len()) {
                return Err(CliError::Failure(format!(
                    "input id {id} has references but no input line"
                )));
            }
            Some(refs)
        }
        None => None,
    };
    let mut text = MetricReport::tsv_header(&ks);
    text.push('\n');
    for cfg in &cells {
        let lists = loaded.decode_all(cfg)?;
        let scored: Vec<Vec<ScoredWords>> =
            lists.iter().map(|l| scored(l, loaded.lm.vocab())).collect();
        let inputs: Vec<InputLists<'_>> = scored
            .iter()
            .enumerate()
            .map(|(id, hyps)| InputLists {
                hypotheses: hyps,
                references: refs.as_ref().map(|r| r[&id].as_slice()),
            })
            .collect();
        let report = MetricReport::compute(run_info(cfg), &inputs, &ks)?;
        text.push_str(&report.tsv_row());
        text.push('\n');
    }
    write_output(a.out.as_deref(), &text)
}

pub fn cmd_gen_corpus(a: &GenArgs) -> CliResult<()> {
    if a.words == 0 || a.lines == 0 {
        return Err(CliError::Usage(
            "--words and --lines must be at least 1".into(),
        ));
    }
    let mut rng = synth::rng(a.seed);
    let lines = match a.kind {
        CorpusKind::Random => synth::random_corpus(&mut rng, a.words, a.lines, 8),
        CorpusKind::Bimodal => synth::bimodal_corpus(&mut rng, synth::BimodalShape::default()),
    };
    let mut text = lines.join("\n");
    text.push('\n');
    write_output(Some(&a.out), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "divseq",
            "decode",
            "--lm",
            "m.bin",
            "--method",
            "dbs",
            "-B",
            "6",
            "-G",
            "3",
            "--lambda",
            "0.4",
            "--diversity",
            "ngram",
            "--Gamma",
            "2",
            "--input",
            "p.txt",
        ])
        .unwrap();
        let Command::Decode(a) = cli.command else {
            panic!("expected decode");
        };
        assert_eq!(a.flags.method, Method::Dbs);
        assert_eq!((a.flags.beam_width, a.flags.groups), (6, 3));
        assert_eq!(a.flags.diversity, DiversityKind::NGram);
        assert_eq!(a.flags.temperature, 2.0);
    }

    #[test]
    fn one_group_dbs_reports_as_beam_search() {
        let mut c = DecodeConfig {
            method: Method::Dbs,
            lambda: 0.7,
            ..DecodeConfig::default()
        };
        let bs = run_info(&DecodeConfig::default().validate().unwrap());
        assert_eq!(run_info(&c.clone().validate().unwrap()), bs);
        c.groups = 2;
        let dbs = run_info(&c.validate().unwrap());
        assert_eq!(
            (dbs.method.as_str(), dbs.groups, dbs.lambda),
            ("dbs", 2, 0.7)
        );
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_ks("1, 5,10").unwrap(), vec![1, 5, 10]);
        assert!(parse_ks("0").is_err());
        assert!(parse_list::<f64>("--lambda-grid", "0.1,x").is_err());
    }
}
