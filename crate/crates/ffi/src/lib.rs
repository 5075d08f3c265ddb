//! C interface to the divseq decoders.
//!
//! Every function returns a [`DivseqStatus`]; on failure a message is
//! available from [`divseq_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings are
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use divseq::scorers::load_embeddings;
use divseq::search::Resources;
use divseq::{
    DecodeConfig, DecodeContext, DiversityKind, EmbeddingTable, Error, GroupedRankedList, Method,
    NGramLm,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivseqStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Decoding settings or model parameters were rejected.
    InvalidConfig = 3,
    /// A file could not be read or written.
    Io = 4,
    /// Input data was malformed or inconsistent.
    Data = 5,
    /// An index was past the end of a result.
    OutOfRange = 6,
    /// An internal error; the library caught a panic.
    Panic = 7,
}

pub const DIVSEQ_METHOD_BS: u32 = 0;
pub const DIVSEQ_METHOD_DBS: u32 = 1;
pub const DIVSEQ_METHOD_LI2016: u32 = 2;
pub const DIVSEQ_METHOD_MMI: u32 = 3;
pub const DIVSEQ_METHOD_EXHAUSTIVE: u32 = 4;

pub const DIVSEQ_DIVERSITY_HAMMING: u32 = 0;
pub const DIVSEQ_DIVERSITY_CUMULATIVE: u32 = 1;
pub const DIVSEQ_DIVERSITY_NGRAM: u32 = 2;
pub const DIVSEQ_DIVERSITY_EMBEDDING: u32 = 3;

/// Decoding settings. Fill with [`divseq_config_default`] and override.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DivseqConfig {
    /// One of the `DIVSEQ_METHOD_*` constants.
    pub method: u32,
    /// One of the `DIVSEQ_DIVERSITY_*` constants.
    pub diversity: u32,
    pub beam_width: usize,
    pub groups: usize,
    pub lambda: f64,
    pub gamma_li: f64,
    pub lambda_mmi: f64,
    /// Temperature of the cumulative diversity function.
    pub temperature: f64,
    /// n for n-gram diversity.
    pub div_ngram_n: usize,
    pub max_len: usize,
    /// Nonzero ranks final lists by per-token log-probability.
    pub length_norm: u8,
}

/// A trained n-gram language model.
pub struct DivseqModel {
    lm: NGramLm,
}

/// Word vectors bound to one model's vocabulary.
pub struct DivseqEmbeddings {
    table: EmbeddingTable,
}

/// A decoded list in flattened rank order.
pub struct DivseqResult {
    texts: Vec<CString>,
    logprobs: Vec<f64>,
    groups: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DivseqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_config() {
            DivseqStatus::InvalidConfig
        } else if matches!(e, Error::Io { .. }) {
            DivseqStatus::Io
        } else {
            DivseqStatus::Data
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DivseqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DivseqStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal error");
            DivseqStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(DivseqStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            DivseqStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn str_array<'a>(
    p: *const *const c_char,
    len: usize,
    name: &str,
) -> Result<Vec<&'a str>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(name));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .map(|&s| str_arg(s, name))
        .collect()
}

fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn divseq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes the default settings: beam search, B = 4, one group, T = 10.
///
/// # Safety
/// `out` must be null or point to writable memory for a `DivseqConfig`.
#[no_mangle]
pub unsafe extern "C" fn divseq_config_default(out: *mut DivseqConfig) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let d = DecodeConfig::default();
        *out = DivseqConfig {
            method: DIVSEQ_METHOD_BS,
            diversity: DIVSEQ_DIVERSITY_HAMMING,
            beam_width: d.beam_width,
            groups: d.groups,
            lambda: d.lambda,
            gamma_li: d.gamma_li,
            lambda_mmi: d.lambda_mmi,
            temperature: d.temperature,
            div_ngram_n: d.div_ngram_n,
            max_len: d.max_len,
            length_norm: d.length_norm as u8,
        };
        Ok(())
    })
}

fn to_config(c: &DivseqConfig) -> Result<DecodeConfig, Failure> {
    let method = match c.method {
        DIVSEQ_METHOD_BS => Method::Bs,
        DIVSEQ_METHOD_DBS => Method::Dbs,
        DIVSEQ_METHOD_LI2016 => Method::Li2016,
        DIVSEQ_METHOD_MMI => Method::Mmi,
        DIVSEQ_METHOD_EXHAUSTIVE => Method::Exhaustive,
        m => {
            return Err(Failure(
                DivseqStatus::InvalidConfig,
                format!("unknown method {m}"),
            ))
        }
    };
    let diversity = match c.diversity {
        DIVSEQ_DIVERSITY_HAMMING => DiversityKind::Hamming,
        DIVSEQ_DIVERSITY_CUMULATIVE => DiversityKind::Cumulative,
        DIVSEQ_DIVERSITY_NGRAM => DiversityKind::NGram,
        DIVSEQ_DIVERSITY_EMBEDDING => DiversityKind::Embedding,
        d => {
            return Err(Failure(
                DivseqStatus::InvalidConfig,
                format!("unknown diversity function {d}"),
            ))
        }
    };
    Ok(DecodeConfig {
        beam_width: c.beam_width,
        groups: c.groups,
        lambda: c.lambda,
        gamma_li: c.gamma_li,
        lambda_mmi: c.lambda_mmi,
        temperature: c.temperature,
        div_ngram_n: c.div_ngram_n,
        max_len: c.max_len,
        method,
        diversity,
        length_norm: c.length_norm != 0,
    })
}

/// Trains a model on `corpus`, one whitespace-tokenized sentence per line.
///
/// # Safety
/// `corpus` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_model_train(
    corpus: *const c_char,
    order: usize,
    add_k: f64,
    out: *mut *mut DivseqModel,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let corpus = str_arg(corpus, "corpus")?;
        let lines: Vec<&str> = corpus.lines().collect();
        let lm = NGramLm::train(&lines, order, add_k)?;
        *out = boxed(DivseqModel { lm });
        Ok(())
    })
}

/// Loads a model file written by [`divseq_model_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_model_load(
    path: *const c_char,
    out: *mut *mut DivseqModel,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let lm = NGramLm::load(str_arg(path, "path")?)?;
        *out = boxed(DivseqModel { lm });
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn divseq_model_save(
    model: *const DivseqModel,
    path: *const c_char,
) -> DivseqStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        model.lm.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of tokens including the reserved ones.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_model_vocab_size(
    model: *const DivseqModel,
    out: *mut usize,
) -> DivseqStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        *out_arg(out, "out")? = model.lm.vocab().len();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn divseq_model_free(model: *mut DivseqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses word vectors (`token v1 .. vd` per line) for `model`'s
/// vocabulary. Vectors for unknown tokens are skipped.
///
/// # Safety
/// `model` must come from this library, `text` be a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_embeddings_parse(
    model: *const DivseqModel,
    text: *const c_char,
    out: *mut *mut DivseqEmbeddings,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = ref_arg(model, "model")?;
        let loaded = load_embeddings(str_arg(text, "text")?, model.lm.vocab())?;
        *out = boxed(DivseqEmbeddings {
            table: loaded.table,
        });
        Ok(())
    })
}

/// # Safety
/// `embeddings` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn divseq_embeddings_free(embeddings: *mut DivseqEmbeddings) {
    if !embeddings.is_null() {
        drop(Box::from_raw(embeddings));
    }
}

/// Decodes one input. `embeddings` may be null unless embedding diversity
/// is selected.
///
/// # Safety
/// Handles must come from this library, `input` be a NUL-terminated
/// string, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_decode(
    model: *const DivseqModel,
    input: *const c_char,
    config: *const DivseqConfig,
    embeddings: *const DivseqEmbeddings,
    out: *mut *mut DivseqResult,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = ref_arg(model, "model")?;
        let input = str_arg(input, "input")?;
        let cfg = to_config(ref_arg(config, "config")?)?.validate()?;
        let resources = Resources {
            embeddings: embeddings.as_ref().map(|e| &e.table),
            unconditioned: None,
        };
        let vocab = model.lm.vocab();
        let ctx = DecodeContext::from_text(input, vocab);
        let list: GroupedRankedList = divseq::decode(&model.lm, &ctx, &cfg, &resources)?;
        let mut result = DivseqResult {
            texts: Vec::with_capacity(list.len()),
            logprobs: Vec::with_capacity(list.len()),
            groups: Vec::with_capacity(list.len()),
        };
        for (slot, h) in list.iter() {
            let text = h
                .words()
                .iter()
                .filter_map(|&t| vocab.token(t))
                .collect::<Vec<_>>()
                .join(" ");
            result.texts.push(
                CString::new(text)
                    .map_err(|_| Failure(DivseqStatus::Data, "token contains NUL".into()))?,
            );
            result.logprobs.push(h.logprob);
            result.groups.push(slot.group);
        }
        *out = boxed(result);
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_result_len(
    result: *const DivseqResult,
    out: *mut usize,
) -> DivseqStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(result, "result")?.texts.len();
        Ok(())
    })
}

fn at<T: Copy>(items: &[T], i: usize) -> Result<T, Failure> {
    items.get(i).copied().ok_or_else(|| {
        Failure(
            DivseqStatus::OutOfRange,
            format!("index {i} is out of range for a result of {}", items.len()),
        )
    })
}

/// Words of the hypothesis at flattened rank `index` (0-based), without
/// EOS. The string is owned by `result`.
///
/// # Safety
/// `result` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_result_text(
    result: *const DivseqResult,
    index: usize,
    out: *mut *const c_char,
) -> DivseqStatus {
    guard(|| {
        let result = ref_arg(result, "result")?;
        let out = out_arg(out, "out")?;
        at(&result.logprobs, index)?;
        *out = result.texts[index].as_ptr();
        Ok(())
    })
}

/// Model log-probability of the hypothesis at `index`.
///
/// # Safety
/// `result` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_result_logprob(
    result: *const DivseqResult,
    index: usize,
    out: *mut f64,
) -> DivseqStatus {
    guard(|| {
        *out_arg(out, "out")? = at(&ref_arg(result, "result")?.logprobs, index)?;
        Ok(())
    })
}

/// 0-based group of the hypothesis at `index`.
///
/// # Safety
/// `result` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_result_group(
    result: *const DivseqResult,
    index: usize,
    out: *mut usize,
) -> DivseqStatus {
    guard(|| {
        *out_arg(out, "out")? = at(&ref_arg(result, "result")?.groups, index)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn divseq_result_free(result: *mut DivseqResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Smoothed sentence BLEU of `candidate` against `n_refs` references,
/// all whitespace-tokenized.
///
/// # Safety
/// `candidate` and each of the `n_refs` entries of `refs` must be
/// NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_sentence_bleu(
    candidate: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
    max_n: usize,
    out: *mut f64,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cand = words(str_arg(candidate, "candidate")?);
        let refs: Vec<Vec<&str>> = str_array(refs, n_refs, "refs")?
            .into_iter()
            .map(words)
            .collect();
        *out = divseq::eval::sentence_bleu(&cand, &refs, max_n)?;
        Ok(())
    })
}

/// distinct-n over `len` whitespace-tokenized sentences.
///
/// # Safety
/// Each of the `len` entries of `sentences` must be a NUL-terminated
/// string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn divseq_distinct_n(
    sentences: *const *const c_char,
    len: usize,
    n: usize,
    out: *mut f64,
) -> DivseqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let list: Vec<Vec<&str>> = str_array(sentences, len, "sentences")?
            .into_iter()
            .map(words)
            .collect();
        *out = divseq::eval::distinct_n(&list, n)?;
        Ok(())
    })
}
