//! UnigramLM: a token-unigram language model trained top-down from an
//! oversized seed lexicon by hard-EM and likelihood-loss pruning, encoded by
//! Viterbi segmentation.
//!
//! Training outline:
//!
//! 1. Seed lexicon: every character of the corpus plus the most valuable
//!    word-internal substrings (count >= `min_piece_count`, at most
//!    `max_piece_len` characters, ranked by count x length, keeping
//!    `seed_factor x target_size` of them).
//! 2. `em_iters` rounds of hard EM: Viterbi-segment every word type and
//!    re-estimate probabilities from the frequency-weighted token counts.
//!    Multi-character tokens that end a round unused are dropped;
//!    characters that end a round unused keep a pseudo-count of one so the
//!    alphabet stays encodable.
//! 3. For every multi-character token, the loss is the drop in corpus
//!    Viterbi log-likelihood when that token alone is masked. The
//!    `prune_fraction` of tokens with the smallest loss is removed.
//! 4. Repeat 2-3 until the lexicon fits `target_size`, then run a final
//!    EM round.

use std::collections::HashMap;

use crate::bpe::corpus_metadata;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::pretok;
use crate::textio::Corpus;
use crate::vocab::{Algorithm, ModelState, Tokenization, TokenizerModel, TrainFlags, Vocabulary, DEFAULT_CONTINUATION_MARKER};

/// Penalty below the least likely token for characters outside the lexicon.
pub const UNKNOWN_CHAR_PENALTY: f64 = 10.0;

/// Token log-probabilities. Probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLexicon {
    entries: Vec<(String, f64)>,
}

impl ScoredLexicon {
    pub fn from_entries(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Invariant("empty lexicon".into()));
        }
        if let Some((t, s)) = entries.iter().find(|(_, s)| !s.is_finite() || *s > 0.0) {
            return Err(Error::Invariant(format!("token `{t}` has log-probability {s}")));
        }
        let lex = ScoredLexicon { entries };
        let mass = lex.probability_mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!("lexicon probabilities sum to {mass}")));
        }
        Ok(lex)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn log_prob(&self, token: &str) -> Option<f64> {
        self.entries.iter().find(|(t, _)| t == token).map(|(_, s)| *s)
    }

    /// Sum of exp(log-probability) over all tokens.
    pub fn probability_mass(&self) -> f64 {
        self.entries.iter().map(|(_, s)| s.exp()).sum()
    }
}

/// A segmentation and its total log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Character boundaries, starting at 0 and ending at n.
    pub cuts: Vec<usize>,
    pub log_prob: f64,
}

/// Best segmentation of `n` characters. `score(i, j)` gives the
/// log-probability of characters `i..j` as one token, or `None`. A single
/// character without a score gets `fallback`.
///
/// Ties on total log-probability go to fewer tokens, then to the
/// segmentation whose token lengths are lexicographically longest from the
/// left.
pub fn viterbi<F>(n: usize, max_len: usize, fallback: f64, mut score: F) -> Segmentation
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    // best[i]: (log-prob, token count, first token length) of the suffix from i.
    let mut best: Vec<(f64, usize, usize)> = vec![(f64::NEG_INFINITY, usize::MAX, 0); n + 1];
    best[n] = (0.0, 0, 0);
    for i in (0..n).rev() {
        let longest = max_len.min(n - i).max(1);
        for len in (1..=longest).rev() {
            let token = match score(i, i + len) {
                Some(s) => s,
                None if len == 1 => fallback,
                None => continue,
            };
            let (rest, rest_count, _) = best[i + len];
            if rest == f64::NEG_INFINITY {
                continue;
            }
            let total = token + rest;
            let count = rest_count + 1;
            let (cur, cur_count, _) = best[i];
            if total > cur || (total == cur && count < cur_count) {
                best[i] = (total, count, len);
            }
        }
    }
    let mut cuts = vec![0];
    let mut i = 0;
    while i < n {
        i += best[i].2;
        cuts.push(i);
    }
    Segmentation {
        cuts,
        log_prob: best[0].0,
    }
}

fn char_offsets(s: &str) -> Vec<usize> {
    s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len())).collect()
}

/// Viterbi encoder over a fixed lexicon.
#[derive(Debug, Clone)]
pub struct ViterbiLexicon {
    log_probs: HashMap<String, f64>,
    max_chars: usize,
    fallback: f64,
}

impl ViterbiLexicon {
    pub fn new(lexicon: &ScoredLexicon) -> Self {
        Self::from_log_probs(lexicon.entries().iter().cloned())
    }

    /// Build from arbitrary (possibly unnormalized) log-probabilities.
    pub fn from_log_probs(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        let log_probs: HashMap<String, f64> = entries.into_iter().collect();
        let max_chars = log_probs.keys().map(|t| t.chars().count()).max().unwrap_or(1);
        let min = log_probs.values().copied().fold(f64::INFINITY, f64::min);
        let fallback = if min.is_finite() { min - UNKNOWN_CHAR_PENALTY } else { -UNKNOWN_CHAR_PENALTY };
        ViterbiLexicon {
            log_probs,
            max_chars,
            fallback,
        }
    }

    pub fn segment(&self, sequence: &str) -> (Tokenization, f64) {
        let offsets = char_offsets(sequence);
        let n = offsets.len() - 1;
        let seg = viterbi(n, self.max_chars, self.fallback, |i, j| {
            self.log_probs.get(&sequence[offsets[i]..offsets[j]]).copied()
        });
        let tokens = seg
            .cuts
            .windows(2)
            .map(|w| sequence[offsets[w[0]]..offsets[w[1]]].to_owned())
            .collect();
        (
            Tokenization {
                source: sequence.to_owned(),
                tokens,
                marker: None,
            },
            seg.log_prob,
        )
    }

    pub fn encode(&self, sequence: &str) -> Tokenization {
        self.segment(sequence).0
    }
}

/// Per-round diagnostics from [`train_uni_traced`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneRound {
    pub size_before: usize,
    pub size_after: usize,
    /// Corpus Viterbi log-likelihood before pruning.
    pub log_likelihood_before: f64,
    /// Same probabilities, pruned tokens masked, no renormalization.
    pub log_likelihood_after: f64,
    /// Sum of the computed losses of the pruned tokens.
    pub pruned_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnigramTrace {
    pub seed_size: usize,
    pub rounds: Vec<PruneRound>,
    /// Probability mass after every EM round.
    pub em_mass: Vec<f64>,
}

struct Trainer<'a> {
    words: &'a [(String, u64)],
    offsets: Vec<Vec<usize>>,
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    is_char: Vec<bool>,
    alive: Vec<bool>,
    log_probs: Vec<f64>,
    max_chars: usize,
    exec: Exec,
}

impl Trainer<'_> {
    fn size(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    fn segment(&self, wi: usize, masked: Option<u32>) -> (Vec<u32>, f64) {
        let word = &self.words[wi].0;
        let offsets = &self.offsets[wi];
        let n = offsets.len() - 1;
        let lookup = |i: usize, j: usize| -> Option<u32> {
            let id = *self.ids.get(&word[offsets[i]..offsets[j]])?;
            (self.alive[id as usize] && Some(id) != masked).then_some(id)
        };
        let seg = viterbi(n, self.max_chars, f64::NEG_INFINITY, |i, j| {
            lookup(i, j).map(|id| self.log_probs[id as usize])
        });
        let ids = seg
            .cuts
            .windows(2)
            .map(|w| lookup(w[0], w[1]).expect("alphabet covers every character"))
            .collect();
        (ids, seg.log_prob)
    }

    fn log_likelihood(&self, masked: &[bool]) -> f64 {
        let per_word = self.exec.map_range(self.words.len(), |wi| {
            let word = &self.words[wi].0;
            let offsets = &self.offsets[wi];
            let n = offsets.len() - 1;
            let seg = viterbi(n, self.max_chars, f64::NEG_INFINITY, |i, j| {
                let id = *self.ids.get(&word[offsets[i]..offsets[j]])? as usize;
                (self.alive[id] && !masked[id]).then(|| self.log_probs[id])
            });
            self.words[wi].1 as f64 * seg.log_prob
        });
        per_word.iter().sum()
    }

    /// One hard-EM round. Returns the resulting probability mass.
    fn em_step(&mut self) -> f64 {
        let n_tokens = self.tokens.len();
        let this = &*self;
        let counts = this.exec.fold_reduce(
            &(0..this.words.len()).collect::<Vec<_>>(),
            || vec![0u64; n_tokens],
            |mut acc, &wi| {
                let (ids, _) = this.segment(wi, None);
                for id in ids {
                    acc[id as usize] += this.words[wi].1;
                }
                acc
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
        let mut total = 0u64;
        let mut kept = vec![0u64; n_tokens];
        for id in 0..n_tokens {
            if !self.alive[id] {
                continue;
            }
            let c = match (counts[id], self.is_char[id]) {
                (0, true) => 1,
                (0, false) => {
                    self.alive[id] = false;
                    continue;
                }
                (c, _) => c,
            };
            kept[id] = c;
            total += c;
        }
        let log_total = (total as f64).ln();
        let mut mass = 0.0;
        for id in 0..n_tokens {
            if self.alive[id] {
                self.log_probs[id] = (kept[id] as f64).ln() - log_total;
                mass += self.log_probs[id].exp();
            }
        }
        mass
    }

    /// Leave-one-out likelihood loss of every live multi-character token.
    fn losses(&self) -> Vec<f64> {
        let per_word: Vec<Vec<(u32, f64)>> = self.exec.map_range(self.words.len(), |wi| {
            let (ids, best) = self.segment(wi, None);
            let freq = self.words[wi].1 as f64;
            let mut seen: Vec<u32> = ids.into_iter().filter(|&id| !self.is_char[id as usize]).collect();
            seen.sort_unstable();
            seen.dedup();
            seen.into_iter()
                .map(|id| {
                    let (_, without) = self.segment(wi, Some(id));
                    (id, freq * (best - without))
                })
                .collect()
        });
        let mut loss = vec![0.0; self.tokens.len()];
        for contributions in per_word {
            for (id, delta) in contributions {
                loss[id as usize] += delta;
            }
        }
        loss
    }
}

/// Train a UnigramLM model.
pub fn train_uni(corpora: &[Corpus], target_size: usize, flags: &TrainFlags) -> Result<TokenizerModel> {
    train_uni_traced(corpora, target_size, flags, Exec::default()).map(|(m, _)| m)
}

pub fn train_uni_with(corpora: &[Corpus], target_size: usize, flags: &TrainFlags, exec: Exec) -> Result<TokenizerModel> {
    train_uni_traced(corpora, target_size, flags, exec).map(|(m, _)| m)
}

/// [`train_uni`] that also reports per-round diagnostics.
pub fn train_uni_traced(
    corpora: &[Corpus],
    target_size: usize,
    flags: &TrainFlags,
    exec: Exec,
) -> Result<(TokenizerModel, UnigramTrace)> {
    if !(flags.prune_fraction > 0.0 && flags.prune_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prune fraction {} outside (0, 1)",
            flags.prune_fraction
        )));
    }
    let words = pretok::count_words(corpora, flags.lowercase, exec);
    let offsets: Vec<Vec<usize>> = words.iter().map(|(w, _)| char_offsets(w)).collect();

    let mut char_counts: HashMap<char, u64> = HashMap::new();
    for (w, c) in &words {
        for ch in w.chars() {
            *char_counts.entry(ch).or_default() += c;
        }
    }
    if char_counts.is_empty() {
        return Err(Error::DegenerateCorpus("no characters in corpus".into()));
    }
    if target_size < char_counts.len() {
        return Err(Error::TargetBelowAlphabet {
            target: target_size,
            alphabet: char_counts.len(),
        });
    }

    let max_piece = flags.max_piece_len.max(2);
    let piece_counts = exec.fold_reduce(
        &(0..words.len()).collect::<Vec<_>>(),
        HashMap::<&str, u64>::new,
        |mut acc, &wi| {
            let (word, freq) = (&words[wi].0, words[wi].1);
            let off = &offsets[wi];
            let n = off.len() - 1;
            for i in 0..n {
                for j in (i + 2)..=n.min(i + max_piece) {
                    *acc.entry(&word[off[i]..off[j]]).or_default() += freq;
                }
            }
            acc
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        },
    );
    let mut seeds: Vec<(&str, u64)> = piece_counts
        .into_iter()
        .filter(|(_, c)| *c >= flags.min_piece_count)
        .collect();
    seeds.sort_unstable_by(|a, b| {
        let va = a.1 as u128 * a.0.chars().count() as u128;
        let vb = b.1 as u128 * b.0.chars().count() as u128;
        vb.cmp(&va).then_with(|| a.0.cmp(b.0))
    });
    seeds.truncate(flags.seed_factor.saturating_mul(target_size));
    if seeds.is_empty() && target_size > char_counts.len() {
        return Err(Error::DegenerateCorpus(
            "no substring occurs often enough to seed the lexicon".into(),
        ));
    }

    let mut chars: Vec<(char, u64)> = char_counts.into_iter().collect();
    chars.sort_unstable();
    let mut tokens = Vec::with_capacity(chars.len() + seeds.len());
    let mut initial = Vec::with_capacity(tokens.capacity());
    let mut is_char = Vec::with_capacity(tokens.capacity());
    for (c, n) in &chars {
        tokens.push(c.to_string());
        initial.push(*n);
        is_char.push(true);
    }
    for (s, n) in &seeds {
        tokens.push((*s).to_owned());
        initial.push(*n);
        is_char.push(false);
    }
    let total: u64 = initial.iter().sum();
    let log_probs = initial.iter().map(|&c| (c as f64 / total as f64).ln()).collect();
    let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    let max_chars = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(1);
    let mut trainer = Trainer {
        words: &words,
        offsets,
        alive: vec![true; tokens.len()],
        tokens,
        ids,
        is_char,
        log_probs,
        max_chars,
        exec,
    };
    let mut trace = UnigramTrace {
        seed_size: trainer.tokens.len(),
        ..UnigramTrace::default()
    };

    loop {
        for _ in 0..flags.em_iters.max(1) {
            trace.em_mass.push(trainer.em_step());
        }
        let size = trainer.size();
        if size <= target_size {
            break;
        }
        let loss = trainer.losses();
        let mut prunable: Vec<u32> = (0..trainer.tokens.len() as u32)
            .filter(|&id| trainer.alive[id as usize] && !trainer.is_char[id as usize])
            .collect();
        let quota = ((prunable.len() as f64 * flags.prune_fraction).floor() as usize)
            .max(1)
            .min(size - target_size);
        prunable.sort_by(|&a, &b| {
            loss[a as usize]
                .total_cmp(&loss[b as usize])
                .then_with(|| trainer.tokens[a as usize].cmp(&trainer.tokens[b as usize]))
        });
        let no_mask = vec![false; trainer.tokens.len()];
        let before = trainer.log_likelihood(&no_mask);
        let mut mask = no_mask;
        let mut pruned_loss = 0.0;
        for &id in &prunable[..quota] {
            mask[id as usize] = true;
            pruned_loss += loss[id as usize];
        }
        let after = trainer.log_likelihood(&mask);
        for &id in &prunable[..quota] {
            trainer.alive[id as usize] = false;
        }
        trace.rounds.push(PruneRound {
            size_before: size,
            size_after: trainer.size(),
            log_likelihood_before: before,
            log_likelihood_after: after,
            pruned_loss,
        });
        log::debug!("unigram: pruned {quota} tokens, {} remain", trainer.size());
    }
    trace.em_mass.push(trainer.em_step());

    let mut entries: Vec<(String, f64)> = (0..trainer.tokens.len())
        .filter(|&id| trainer.alive[id])
        .map(|id| (trainer.tokens[id].clone(), trainer.log_probs[id]))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if entries.len() < target_size {
        log::warn!("unigram lexicon has {} tokens (target {target_size})", entries.len());
    }
    let lexicon = ScoredLexicon::from_entries(entries)?;
    let vocabulary = Vocabulary::new(
        lexicon.entries().iter().map(|(t, _)| t.clone()).collect(),
        DEFAULT_CONTINUATION_MARKER,
        Default::default(),
    )?;
    let metadata = corpus_metadata(corpora, target_size, chars.len(), flags);
    let model = TokenizerModel::new(Algorithm::Uni, vocabulary, ModelState::Lexicon(lexicon), metadata)?;
    Ok((model, trace))
}
