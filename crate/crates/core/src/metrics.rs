//! Per-stimulus segmentation metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::vocab::Tokenization;

/// 1 - k/n: tokens over characters, inverted. Zero for a full character
/// split, approaching one for long unsplit sequences.
pub fn chunkability(t: &Tokenization) -> f64 {
    let n = t.n();
    if n == 0 {
        return 0.0;
    }
    1.0 - t.k() as f64 / n as f64
}

pub fn num_tokens(t: &Tokenization) -> usize {
    t.k()
}

/// Unicode scalar values, no grapheme clustering.
pub fn char_length(sequence: &str) -> usize {
    sequence.chars().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Chunkability,
    NumTokens,
    CharLength,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Chunkability, Metric::NumTokens, Metric::CharLength];

    /// Whether the value depends on the tokenizer at all.
    pub fn is_baseline(self) -> bool {
        self == Metric::CharLength
    }

    pub fn value(self, t: &Tokenization) -> f64 {
        match self {
            Metric::Chunkability => chunkability(t),
            Metric::NumTokens => num_tokens(t) as f64,
            Metric::CharLength => char_length(&t.source) as f64,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Chunkability => "chunkability",
            Metric::NumTokens => "num_tokens",
            Metric::CharLength => "char_length",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "chunkability" | "chunk" => Ok(Metric::Chunkability),
            "num_tokens" | "tokens" | "splits" => Ok(Metric::NumTokens),
            "char_length" | "length" | "len" => Ok(Metric::CharLength),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}
