//! Sequence decoding: beam search, diverse beam search over groups, two
//! published diverse-decoding baselines and an exhaustive oracle, together
//! with list-quality metrics.
//!
//! Log-probabilities are natural logarithms throughout.
//!
//! ```
//! use divseq::{decode, DecodeConfig, DecodeContext, Method, NGramLm, Resources};
//!
//! let corpus = ["the cat sat", "the dog ran", "a cat ran"];
//! let lm = NGramLm::train(&corpus, 2, 0.1)?;
//! let cfg = DecodeConfig {
//!     method: Method::Dbs,
//!     beam_width: 6,
//!     groups: 3,
//!     lambda: 0.5,
//!     max_len: 8,
//!     ..Default::default()
//! }
//! .validate()?;
//! let ctx = DecodeContext::from_text("the", lm.vocab());
//! let list = decode(&lm, &ctx, &cfg, &Resources::default())?;
//! assert_eq!(list.len(), 6);
//! assert_eq!(list.group_count(), 3);
//! # Ok::<(), divseq::Error>(())
//! ```

pub mod cli;
pub mod config;
pub mod diversity;
mod error;
pub mod eval;
pub mod hypothesis;
pub mod scorers;
pub mod search;
pub mod synth;
pub mod vocab;

pub use config::{validate_config, DecodeConfig, DiversityKind, Method, ValidConfig};
pub use diversity::{Diversity, GroupTrace, PenaltyVector};
pub use error::{Error, Result};
pub use hypothesis::{DecodeContext, GroupedRankedList, Hypothesis, Slot};
pub use scorers::{EmbeddingTable, NGramLm, Scorer, TableScorer};
pub use search::{
    beam_search, beam_step, decode, decode_li2016, decode_mmi, diverse_beam_search,
    exhaustive_topk, BeamState, Resources,
};
pub use vocab::{TokenId, Vocab};
