use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocab};

/// Word vectors for a subset of a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<TokenId, Vec<f64>>,
}

/// Result of [`load_embeddings`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Lines whose token is not in the vocabulary.
    pub skipped: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: TokenId, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InconsistentDimension {
                line: 0,
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: TokenId) -> Option<&[f64]> {
        self.vectors.get(&id).map(Vec::as_slice)
    }

    /// Unit-length copies indexed by token id; `None` for tokens without a
    /// vector or with a zero vector.
    pub(crate) fn normalized(&self, vocab_size: usize) -> Vec<Option<Vec<f64>>> {
        let mut out = vec![None; vocab_size];
        for (&id, v) in &self.vectors {
            if id.index() >= vocab_size {
                continue;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                out[id.index()] = Some(v.iter().map(|x| x / norm).collect());
            }
        }
        out
    }
}

/// Parses word2vec-style text: one `token v1 .. vd` per line. A leading
/// `count dim` header line is accepted and ignored.
pub fn load_embeddings(text: &str, vocab: &Vocab) -> Result<LoadedEmbeddings> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    if let Some(&(_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            lines.next();
        }
    }

    let mut dim = None;
    let mut table = EmbeddingTable::new(0);
    let mut skipped = 0;
    let mut any = false;
    for (line_no, line) in lines {
        any = true;
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line");
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::NonNumericComponent {
                        line: line_no,
                        text: f.to_owned(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *dim.get_or_insert(vector.len());
        if vector.len() != expected || vector.is_empty() {
            return Err(Error::InconsistentDimension {
                line: line_no,
                expected: expected.max(1),
                found: vector.len(),
            });
        }
        match vocab.id(token) {
            Some(id) => {
                table.vectors.insert(id, vector);
            }
            None => skipped += 1,
        }
    }
    if !any {
        return Err(Error::EmptyFile);
    }
    table.dim = dim.unwrap_or(0);
    Ok(LoadedEmbeddings { table, skipped })
}
