//! Byte-pair encoding: frequency-ranked pair merging, encoded by ordered
//! merge application.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::merges::{self, MergeConfig, Objective};
use crate::par::Exec;
use crate::pretok;
use crate::textio::Corpus;
use crate::vocab::{
    Algorithm, MergeRule, ModelState, Tokenization, TokenizerModel, TrainFlags, TrainingMetadata, Vocabulary,
    DEFAULT_CONTINUATION_MARKER,
};

/// Merge ranks keyed by left then right piece.
#[derive(Debug, Clone, Default)]
pub struct MergeTable {
    ranks: HashMap<String, HashMap<String, u32>>,
}

impl MergeTable {
    pub fn new(merges: &[MergeRule]) -> Self {
        let mut ranks: HashMap<String, HashMap<String, u32>> = HashMap::new();
        for (rank, rule) in merges.iter().enumerate() {
            // A repeated pair keeps its first (lowest) rank.
            ranks
                .entry(rule.left.clone())
                .or_default()
                .entry(rule.right.clone())
                .or_insert(rank as u32);
        }
        MergeTable { ranks }
    }

    fn rank(&self, left: &str, right: &str) -> Option<u32> {
        self.ranks.get(left)?.get(right).copied()
    }

    /// Start from single characters and repeatedly apply the lowest-ranked
    /// applicable merge (leftmost on ties) until none applies.
    pub fn encode(&self, sequence: &str) -> Tokenization {
        let mut pieces: Vec<String> = sequence.chars().map(String::from).collect();
        loop {
            let best = pieces
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.rank(&w[0], &w[1]).map(|r| (r, i)))
                .min();
            let Some((_, i)) = best else { break };
            let right = pieces.remove(i + 1);
            pieces[i].push_str(&right);
        }
        Tokenization {
            source: sequence.to_owned(),
            tokens: pieces,
            marker: None,
        }
    }
}

pub(crate) fn corpus_metadata(corpora: &[Corpus], target_size: usize, base_size: usize, flags: &TrainFlags) -> TrainingMetadata {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for c in corpora {
        hasher.update(c.content_hash().as_bytes());
    }
    TrainingMetadata {
        corpus_ids: corpora.iter().map(|c| c.source_id.clone()).collect(),
        corpus_hash: hex::encode(hasher.finalize()),
        target_size,
        base_size,
        flags: flags.clone(),
    }
}

/// Train a BPE model on one or more corpora (several corpora are pooled
/// into one word-frequency table).
pub fn train_bpe(corpora: &[Corpus], target_size: usize, flags: &TrainFlags) -> Result<TokenizerModel> {
    train_bpe_with(corpora, target_size, flags, Exec::default())
}

pub fn train_bpe_with(corpora: &[Corpus], target_size: usize, flags: &TrainFlags, exec: Exec) -> Result<TokenizerModel> {
    let words = pretok::count_words(corpora, flags.lowercase, exec);
    let outcome = merges::train_merges(
        &words,
        &MergeConfig {
            objective: Objective::Frequency,
            marker: None,
            target_size,
            max_token_len: flags.max_token_len,
            exec,
        },
    )?;
    let vocabulary = Vocabulary::new(outcome.tokens, DEFAULT_CONTINUATION_MARKER, BTreeSet::new())?;
    let metadata = corpus_metadata(corpora, target_size, outcome.base_size, flags);
    TokenizerModel::new(Algorithm::Bpe, vocabulary, ModelState::Merges(outcome.merges), metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(pairs: &[(&str, &str)]) -> Vec<MergeRule> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, (l, r))| MergeRule {
                left: (*l).into(),
                right: (*r).into(),
                rank: i as u32,
            })
            .collect()
    }

    #[test]
    fn ordered_merge_application() {
        let table = MergeTable::new(&rules(&[("s", "e"), ("se", "a")]));
        assert_eq!(table.encode("sea").tokens, vec!["sea"]);
        assert_eq!(table.encode("x").tokens, vec!["x"]);
    }

    #[test]
    fn lower_rank_preempts() {
        let table = MergeTable::new(&rules(&[("a", "b"), ("b", "c")]));
        assert_eq!(table.encode("abc").tokens, vec!["ab", "c"]);
    }

    #[test]
    fn leftmost_on_equal_rank() {
        let table = MergeTable::new(&rules(&[("a", "a")]));
        assert_eq!(table.encode("aaa").tokens, vec!["aa", "a"]);
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let corpus = Corpus::from_lines("toy", ["ab ab ab", "ac"]).unwrap();
        let model = train_bpe(&[corpus], 4, &TrainFlags::default()).unwrap();
        let merges = model.merges().unwrap();
        assert_eq!(merges.len(), 1);
        assert_eq!((merges[0].left.as_str(), merges[0].right.as_str()), ("a", "b"));
        assert_eq!(model.vocabulary().tokens(), &["a", "b", "c", "ab"]);
    }

    #[test]
    fn alphabet_only_model_splits_into_characters() {
        let corpus = Corpus::from_lines("toy", ["ab ab ab", "ac"]).unwrap();
        let model = train_bpe(&[corpus], 3, &TrainFlags::default()).unwrap();
        assert!(model.merges().unwrap().is_empty());
        let t = model.encode("abca").unwrap();
        assert_eq!(t.k(), t.n());
        assert!(train_bpe(&[Corpus::from_lines("t", ["abc"]).unwrap()], 2, &TrainFlags::default()).is_err());
    }

    #[test]
    fn equal_counts_break_lexicographically() {
        let corpus = Corpus::from_lines("toy", ["xy ab"]).unwrap();
        let model = train_bpe(&[corpus], 5, &TrainFlags::default()).unwrap();
        assert_eq!(model.merges().unwrap()[0].left, "a");
    }

    #[test]
    fn long_merges_are_skipped() {
        let corpus = Corpus::from_lines("toy", ["abcd abcd"]).unwrap();
        let flags = TrainFlags {
            max_token_len: 2,
            ..TrainFlags::default()
        };
        let model = train_bpe(&[corpus], 100, &flags).unwrap();
        assert!(model.vocabulary().tokens().iter().all(|t| t.chars().count() <= 2));
    }
}
