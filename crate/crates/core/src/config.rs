use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical beam search.
    Bs,
    /// Diverse beam search over groups.
    Dbs,
    /// Beam search with an intra-sibling rank penalty.
    Li2016,
    /// Beam search on `log P(y|x) - lambda * log U(y)`.
    Mmi,
    /// Brute-force enumeration; `beam_width` is the list size.
    Exhaustive,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Bs,
        Method::Dbs,
        Method::Li2016,
        Method::Mmi,
        Method::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bs => "bs",
            Method::Dbs => "dbs",
            Method::Li2016 => "li2016",
            Method::Mmi => "mmi",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiversityKind {
    Hamming,
    Cumulative,
    #[serde(rename = "ngram")]
    NGram,
    Embedding,
}

impl DiversityKind {
    pub const ALL: [DiversityKind; 4] = [
        DiversityKind::Hamming,
        DiversityKind::Cumulative,
        DiversityKind::NGram,
        DiversityKind::Embedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DiversityKind::Hamming => "hamming",
            DiversityKind::Cumulative => "cumulative",
            DiversityKind::NGram => "ngram",
            DiversityKind::Embedding => "embedding",
        }
    }
}

impl fmt::Display for DiversityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiversityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DiversityKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown diversity function `{s}`"))
    }
}

/// Decoding settings. Build one, then call [`DecodeConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub groups: usize,
    /// Diversity strength shared by every group after the first.
    pub lambda: f64,
    /// Rank-penalty strength for [`Method::Li2016`].
    pub gamma_li: f64,
    /// Weight of the unconditioned model for [`Method::Mmi`].
    pub lambda_mmi: f64,
    /// Temperature of the cumulative diversity function.
    pub temperature: f64,
    /// n used by n-gram diversity.
    pub div_ngram_n: usize,
    pub max_len: usize,
    pub method: Method,
    pub diversity: DiversityKind,
    /// Rank final lists by log-probability divided by length.
    pub length_norm: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 4,
            groups: 1,
            lambda: 0.0,
            gamma_li: 0.0,
            lambda_mmi: 0.0,
            temperature: 1.0,
            div_ngram_n: 2,
            max_len: 10,
            method: Method::Bs,
            diversity: DiversityKind::Hamming,
            length_norm: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(self) -> Result<ValidConfig> {
        validate_config(self)
    }
}

/// A [`DecodeConfig`] that passed validation, with the per-group width.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    config: DecodeConfig,
    group_width: usize,
}

impl ValidConfig {
    /// B / G.
    pub fn group_width(&self) -> usize {
        self.group_width
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.config
    }

    pub fn into_inner(self) -> DecodeConfig {
        self.config
    }
}

impl Deref for ValidConfig {
    type Target = DecodeConfig;

    fn deref(&self) -> &DecodeConfig {
        &self.config
    }
}

fn check_strength(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeStrength { name, value })
    }
}

pub fn validate_config(config: DecodeConfig) -> Result<ValidConfig> {
    if config.beam_width == 0 || config.groups == 0 {
        return Err(Error::EmptyBeam);
    }
    if !config.beam_width.is_multiple_of(config.groups) {
        return Err(Error::NonDivisibleBeam {
            beam_width: config.beam_width,
            groups: config.groups,
        });
    }
    check_strength("lambda", config.lambda)?;
    check_strength("gamma_li", config.gamma_li)?;
    check_strength("lambda_mmi", config.lambda_mmi)?;
    if !(config.temperature.is_finite() && config.temperature > 0.0) {
        return Err(Error::BadTemperature(config.temperature));
    }
    if config.max_len == 0 {
        return Err(Error::ZeroLength);
    }
    if config.div_ngram_n == 0 {
        return Err(Error::BadN(config.div_ngram_n));
    }
    let group_width = config.beam_width / config.groups;
    Ok(ValidConfig {
        config,
        group_width,
    })
}
