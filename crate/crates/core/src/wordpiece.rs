//! WordPiece: likelihood-gain merging with `##` continuation markers,
//! encoded greedily left to right by longest match.

use std::collections::{BTreeSet, HashSet};

use crate::bpe::corpus_metadata;
use crate::error::{Error, Result};
use crate::merges::{self, MergeConfig, Objective};
use crate::par::Exec;
use crate::pretok;
use crate::textio::Corpus;
use crate::vocab::{
    Algorithm, ModelState, Tokenization, TokenizerModel, TrainFlags, Vocabulary, DEFAULT_CONTINUATION_MARKER,
};

/// Longest sequence the greedy encoder accepts.
pub const MAX_INPUT_CHARS: usize = 256;

#[derive(Debug, Clone)]
pub struct LongestMatch {
    tokens: HashSet<String>,
    marker: String,
    max_chars: usize,
}

impl LongestMatch {
    pub fn new(vocabulary: &Vocabulary) -> Self {
        let marker = vocabulary.continuation_marker().to_owned();
        let tokens: HashSet<String> = vocabulary
            .tokens()
            .iter()
            .filter(|t| !vocabulary.special_tokens().contains(*t))
            .cloned()
            .collect();
        let max_chars = tokens
            .iter()
            .map(|t| t.strip_prefix(marker.as_str()).unwrap_or(t).chars().count())
            .max()
            .unwrap_or(1)
            .max(1);
        LongestMatch {
            tokens,
            marker,
            max_chars,
        }
    }

    /// At each position take the longest vocabulary entry (marker-prefixed
    /// after the first position); with no match, emit the single character.
    pub fn encode(&self, sequence: &str) -> Result<Tokenization> {
        let offsets: Vec<usize> = sequence
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(sequence.len()))
            .collect();
        let n = offsets.len() - 1;
        if n > MAX_INPUT_CHARS {
            return Err(Error::SequenceTooLong {
                len: n,
                max: MAX_INPUT_CHARS,
            });
        }
        let mut tokens = Vec::new();
        let mut pos = 0;
        let mut candidate = String::new();
        while pos < n {
            let prefix = if pos == 0 { "" } else { self.marker.as_str() };
            let longest = (pos + 1..=n.min(pos + self.max_chars)).rev().find(|&end| {
                candidate.clear();
                candidate.push_str(prefix);
                candidate.push_str(&sequence[offsets[pos]..offsets[end]]);
                self.tokens.contains(&candidate)
            });
            let end = longest.unwrap_or(pos + 1);
            tokens.push(format!("{prefix}{}", &sequence[offsets[pos]..offsets[end]]));
            pos = end;
        }
        Ok(Tokenization {
            source: sequence.to_owned(),
            tokens,
            marker: Some(self.marker.clone()),
        })
    }
}

/// Train a WordPiece model: repeatedly merge the pair maximizing
/// count(ab) / (count(a) * count(b)).
pub fn train_wpc(corpora: &[Corpus], target_size: usize, flags: &TrainFlags) -> Result<TokenizerModel> {
    train_wpc_with(corpora, target_size, flags, Exec::default())
}

pub fn train_wpc_with(corpora: &[Corpus], target_size: usize, flags: &TrainFlags, exec: Exec) -> Result<TokenizerModel> {
    let words = pretok::count_words(corpora, flags.lowercase, exec);
    let outcome = merges::train_merges(
        &words,
        &MergeConfig {
            objective: Objective::Likelihood,
            marker: Some(DEFAULT_CONTINUATION_MARKER),
            target_size,
            max_token_len: flags.max_token_len,
            exec,
        },
    )?;
    let vocabulary = Vocabulary::new(outcome.tokens, DEFAULT_CONTINUATION_MARKER, BTreeSet::new())?;
    let metadata = corpus_metadata(corpora, target_size, outcome.base_size, flags);
    TokenizerModel::new(Algorithm::Wpc, vocabulary, ModelState::Merges(outcome.merges), metadata)
}
