use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Index of a token in a [`Vocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const BOS: TokenId = TokenId(0);
    pub const EOS: TokenId = TokenId(1);
    pub const UNK: TokenId = TokenId(2);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// BOS/EOS/UNK.
    #[inline]
    pub fn is_reserved(self) -> bool {
        self.0 < RESERVED.len() as u32
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";
pub(crate) const RESERVED: [&str; 3] = [BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

/// Bidirectional token/id map. Ids 0, 1, 2 are always BOS, EOS and UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary with the reserved symbols prepended; user tokens
    /// get ids from 3 upwards in input order.
    pub fn build<S: AsRef<str>>(tokens: &[S]) -> Result<Vocab> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokenList);
        }
        let mut vocab = Vocab::reserved_only();
        for token in tokens {
            vocab.push(token.as_ref())?;
        }
        Ok(vocab)
    }

    pub(crate) fn reserved_only() -> Vocab {
        let mut vocab = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for token in RESERVED {
            vocab.push(token).expect("reserved tokens are distinct");
        }
        vocab
    }

    /// Rebuilds a vocabulary from the full id-ordered token list, reserved
    /// symbols included.
    pub(crate) fn from_full_list(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::CorruptPayload(
                "vocabulary does not start with the reserved symbols".into(),
            ));
        }
        let mut vocab = Vocab::reserved_only();
        for token in &tokens[RESERVED.len()..] {
            vocab.push(token)?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: &str) -> Result<TokenId> {
        if self.index.contains_key(token) {
            return Err(Error::DuplicateToken(token.to_owned()));
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        Ok(id)
    }

    /// Number of ids, reserved symbols included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(TokenId::UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    /// Tokens in id order, reserved symbols included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Whitespace-split `text` mapped to ids, unknown words become UNK.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().map(|w| self.id_or_unk(w)).collect()
    }

    /// Space-joined token strings. A trailing EOS is kept as `</s>`.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
