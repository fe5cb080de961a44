//! Word-level pre-tokenization of training sentences.

use std::collections::HashMap;

use crate::par::Exec;
use crate::textio::{self, Corpus};

/// Split a sentence on whitespace, then split each chunk into runs of
/// alphanumeric characters and single non-alphanumeric characters.
pub fn words(sentence: &str) -> impl Iterator<Item = &str> {
    sentence.split_whitespace().flat_map(split_chunk)
}

fn split_chunk(chunk: &str) -> impl Iterator<Item = &str> {
    let mut rest = chunk;
    std::iter::from_fn(move || {
        let first = rest.chars().next()?;
        let end = if first.is_alphanumeric() {
            rest.char_indices()
                .find(|(_, c)| !c.is_alphanumeric())
                .map_or(rest.len(), |(i, _)| i)
        } else {
            first.len_utf8()
        };
        let (word, tail) = rest.split_at(end);
        rest = tail;
        Some(word)
    })
}

/// Word types with their corpus frequencies, sorted by word.
pub fn count_words(corpora: &[Corpus], lowercase: bool, exec: Exec) -> Vec<(String, u64)> {
    let sentences: Vec<&str> = corpora
        .iter()
        .flat_map(|c| c.sentences.iter().map(String::as_str))
        .collect();
    let counts = exec.fold_reduce(
        &sentences,
        HashMap::<String, u64>::new,
        |mut acc, sentence| {
            let sentence = if lowercase {
                textio::normalize(sentence, true)
            } else {
                (*sentence).to_owned()
            };
            for w in words(&sentence) {
                match acc.get_mut(w) {
                    Some(c) => *c += 1,
                    None => {
                        acc.insert(w.to_owned(), 1);
                    }
                }
            }
            acc
        },
        |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (w, c) in b {
                *a.entry(w).or_default() += c;
            }
            a
        },
    );
    let mut counts: Vec<(String, u64)> = counts.into_iter().collect();
    counts.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    counts
}

fn merge_counts(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    for (w, c) in b {
        *a.entry(w).or_default() += c;
    }
    a
}
