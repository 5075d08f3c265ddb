//! Binary LM file.
//!
//! All integers little-endian:
//!
//! ```text
//! magic        8 bytes  "DIVSEQLM"
//! version      u16
//! vocab        u32 token count, then per token: u32 byte length + UTF-8 bytes (id order,
//!              reserved symbols included)
//! order        u32
//! add_k        f64 (IEEE-754)
//! contexts     u64 count, then per context in ascending id-sequence order:
//!              u32 length, u32 ids, u32 continuation count,
//!              then (u32 token id, u64 count) pairs in ascending id order
//! crc32        u32 over every preceding byte
//! ```
//!
//! Log-probabilities derived from the file are natural logarithms.

use std::collections::BTreeMap;
use std::path::Path;

use super::ngram::{ContextCounts, NGramLm};
use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocab};

pub const MAGIC: &[u8; 8] = b"DIVSEQLM";
pub const FORMAT_VERSION: u16 = 1;

impl NGramLm {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_u32(&mut out, self.vocab.len());
        for token in self.vocab.tokens() {
            put_u32(&mut out, token.len());
            out.extend_from_slice(token.as_bytes());
        }
        put_u32(&mut out, self.order);
        out.extend_from_slice(&self.add_k.to_le_bytes());
        out.extend_from_slice(&(self.contexts.len() as u64).to_le_bytes());
        for (ctx, counts) in &self.contexts {
            put_u32(&mut out, ctx.len());
            for id in ctx {
                out.extend_from_slice(&id.0.to_le_bytes());
            }
            put_u32(&mut out, counts.next.len());
            for (id, c) in &counts.next {
                out.extend_from_slice(&id.0.to_le_bytes());
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NGramLm> {
        if bytes.len() < MAGIC.len() + 2 + 4 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Reader {
            buf: body,
            pos: MAGIC.len() + 2,
        };
        let n_tokens = r.u32()? as usize;
        let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
        for _ in 0..n_tokens {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let s = std::str::from_utf8(raw).map_err(|_| corrupt("token is not UTF-8"))?;
            tokens.push(s.to_owned());
        }
        let vocab = Vocab::from_full_list(tokens)?;
        let order = r.u32()? as usize;
        if order == 0 {
            return Err(corrupt("order 0"));
        }
        let add_k = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        if !(add_k.is_finite() && add_k >= 0.0) {
            return Err(corrupt("invalid add-k constant"));
        }
        let n_contexts = r.u64()?;
        let mut contexts = BTreeMap::new();
        let size = vocab.len();
        for _ in 0..n_contexts {
            let len = r.u32()? as usize;
            if len >= order {
                return Err(corrupt("context longer than order - 1"));
            }
            let mut ctx = Vec::with_capacity(len);
            for _ in 0..len {
                ctx.push(r.token(size)?);
            }
            let n_next = r.u32()? as usize;
            let mut counts = ContextCounts::default();
            for _ in 0..n_next {
                let id = r.token(size)?;
                let c = r.u64()?;
                counts.total += c;
                counts.next.insert(id, c);
            }
            if contexts.insert(ctx, counts).is_some() {
                return Err(corrupt("duplicate context"));
            }
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        if !contexts.get(&Vec::new()).is_some_and(|c| c.total > 0) {
            return Err(corrupt("missing unigram counts"));
        }
        Ok(NGramLm::from_parts(vocab, order, add_k, contexts))
    }

    /// Loads a model and checks that it was built over `vocab`.
    pub fn from_bytes_with_vocab(bytes: &[u8], vocab: &Vocab) -> Result<NGramLm> {
        let lm = NGramLm::from_bytes(bytes)?;
        if lm.vocab != *vocab {
            return Err(Error::VocabMismatch(format!(
                "model has {} tokens, expected vocabulary has {}",
                lm.vocab.len(),
                vocab.len()
            )));
        }
        Ok(lm)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NGramLm> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        NGramLm::from_bytes(&bytes)
    }
}

fn corrupt(msg: &str) -> Error {
    Error::CorruptPayload(msg.to_owned())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("value fits in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("unexpected end of data"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn token(&mut self, size: usize) -> Result<TokenId> {
        let id = self.u32()?;
        if id as usize >= size {
            return Err(corrupt("token id outside vocabulary"));
        }
        Ok(TokenId(id))
    }
}
