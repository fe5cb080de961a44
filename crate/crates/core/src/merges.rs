//! Bottom-up merge training shared by BPE and WordPiece.
//!
//! Words are held as symbol-id sequences with their corpus counts. Candidate
//! pairs live in a lazy max-heap: a popped entry is only acted on if its
//! recorded counts still match the live counts, otherwise it is re-queued
//! with fresh counts. Any event that can raise a pair's score pushes a fresh
//! entry, so the first valid pop is always the true maximum.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::vocab::MergeRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    /// Most frequent pair (BPE).
    Frequency,
    /// Largest count(ab) / (count(a) * count(b)) (WordPiece).
    Likelihood,
}

pub(crate) struct MergeConfig<'a> {
    pub objective: Objective,
    /// Prefix carried by non-initial symbols, if any.
    pub marker: Option<&'a str>,
    pub target_size: usize,
    pub max_token_len: usize,
    pub exec: Exec,
}

#[derive(Debug)]
pub(crate) struct MergeOutcome {
    pub tokens: Vec<String>,
    pub merges: Vec<MergeRule>,
    pub base_size: usize,
}

type Pair = (u32, u32);

struct Candidate {
    pair_count: u64,
    left_count: u64,
    right_count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: Pair,
    objective: Objective,
}

impl Candidate {
    fn score_cmp(&self, other: &Self) -> Ordering {
        match self.objective {
            Objective::Frequency => self.pair_count.cmp(&other.pair_count),
            Objective::Likelihood => {
                // a/(b*c) vs d/(e*f)  <=>  a*e*f vs d*b*c
                let lhs = self.pair_count as u128 * other.left_count as u128 * other.right_count as u128;
                let rhs = other.pair_count as u128 * self.left_count as u128 * self.right_count as u128;
                lhs.cmp(&rhs)
            }
        }
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Equal scores: the lexicographically smaller (left, right) wins.
        self.score_cmp(other)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

struct State<'a> {
    cfg: &'a MergeConfig<'a>,
    symbols: Vec<Rc<str>>,
    symbol_len: Vec<usize>,
    symbol_id: HashMap<Rc<str>, u32>,
    words: Vec<Vec<u32>>,
    counts: Vec<u64>,
    unit_counts: Vec<u64>,
    pair_counts: HashMap<Pair, u64>,
    pair_words: HashMap<Pair, Vec<u32>>,
    /// Pairs each symbol takes part in; only maintained for `Likelihood`.
    symbol_pairs: Vec<HashSet<Pair>>,
    heap: BinaryHeap<Candidate>,
}

impl State<'_> {
    fn intern(&mut self, s: String) -> (u32, bool) {
        if let Some(&id) = self.symbol_id.get(s.as_str()) {
            return (id, false);
        }
        let len = match self.cfg.marker {
            Some(m) => s.strip_prefix(m).unwrap_or(&s).chars().count(),
            None => s.chars().count(),
        };
        let rc: Rc<str> = Rc::from(s);
        let id = self.symbols.len() as u32;
        self.symbols.push(rc.clone());
        self.symbol_len.push(len);
        self.symbol_id.insert(rc, id);
        self.unit_counts.push(0);
        if self.cfg.objective == Objective::Likelihood {
            self.symbol_pairs.push(HashSet::new());
        }
        (id, true)
    }

    fn unit_counts_of(&self, pair: Pair) -> (u64, u64) {
        match self.cfg.objective {
            Objective::Frequency => (1, 1),
            Objective::Likelihood => (self.unit_counts[pair.0 as usize], self.unit_counts[pair.1 as usize]),
        }
    }

    fn push(&mut self, pair: Pair) {
        let pair_count = self.pair_counts.get(&pair).copied().unwrap_or(0);
        if pair_count == 0 {
            return;
        }
        let (left_count, right_count) = self.unit_counts_of(pair);
        self.heap.push(Candidate {
            pair_count,
            left_count,
            right_count,
            left: self.symbols[pair.0 as usize].clone(),
            right: self.symbols[pair.1 as usize].clone(),
            pair,
            objective: self.cfg.objective,
        });
    }

    fn merged(&self, pair: Pair) -> String {
        let left = &self.symbols[pair.0 as usize];
        let right = &self.symbols[pair.1 as usize];
        let right = match self.cfg.marker {
            Some(m) => right.strip_prefix(m).unwrap_or(right),
            None => right,
        };
        format!("{left}{right}")
    }

    /// Replace every occurrence of `pair` with `new_id`, keeping all counts
    /// current. Returns the pairs whose score may have gone up.
    fn apply(&mut self, pair: Pair, new_id: u32, stamp: &mut [u32], round: u32) -> BTreeSet<Pair> {
        let (a, b) = pair;
        let mut raised = BTreeSet::new();
        let word_ids = self.pair_words.remove(&pair).unwrap_or_default();
        for wi in word_ids {
            if stamp[wi as usize] == round {
                continue;
            }
            stamp[wi as usize] = round;
            let word = &self.words[wi as usize];
            if !word.windows(2).any(|w| w[0] == a && w[1] == b) {
                continue;
            }
            let count = self.counts[wi as usize];
            let mut merged = Vec::with_capacity(word.len());
            let mut i = 0;
            let mut occurrences = 0u64;
            while i < word.len() {
                if i + 1 < word.len() && word[i] == a && word[i + 1] == b {
                    merged.push(new_id);
                    occurrences += 1;
                    i += 2;
                } else {
                    merged.push(word[i]);
                    i += 1;
                }
            }
            for w in word.windows(2) {
                let c = self.pair_counts.get_mut(&(w[0], w[1])).expect("pair of a live word");
                *c -= count;
            }
            for w in merged.windows(2) {
                let p = (w[0], w[1]);
                *self.pair_counts.entry(p).or_default() += count;
                if p.0 == new_id || p.1 == new_id {
                    raised.insert(p);
                    self.pair_words.entry(p).or_default().push(wi);
                    if self.cfg.objective == Objective::Likelihood {
                        self.symbol_pairs[p.0 as usize].insert(p);
                        self.symbol_pairs[p.1 as usize].insert(p);
                    }
                }
            }
            self.unit_counts[a as usize] -= occurrences * count;
            self.unit_counts[b as usize] -= occurrences * count;
            self.unit_counts[new_id as usize] += occurrences * count;
            self.words[wi as usize] = merged;
        }
        if self.cfg.objective == Objective::Likelihood {
            for s in [a, b] {
                let live: Vec<Pair> = self.symbol_pairs[s as usize]
                    .iter()
                    .copied()
                    .filter(|p| self.pair_counts.get(p).is_some_and(|&c| c > 0))
                    .collect();
                self.symbol_pairs[s as usize] = live.iter().copied().collect();
                raised.extend(live);
            }
        }
        raised
    }
}

/// Learn merges over `word_counts` until the vocabulary reaches
/// `cfg.target_size` or no pair is left.
pub(crate) fn train_merges(word_counts: &[(String, u64)], cfg: &MergeConfig<'_>) -> Result<MergeOutcome> {
    let alphabet: BTreeSet<char> = word_counts.iter().flat_map(|(w, _)| w.chars()).collect();
    if alphabet.is_empty() {
        return Err(Error::DegenerateCorpus("no characters to build an alphabet from".into()));
    }
    let mut state = State {
        cfg,
        symbols: Vec::new(),
        symbol_len: Vec::new(),
        symbol_id: HashMap::new(),
        words: Vec::with_capacity(word_counts.len()),
        counts: Vec::with_capacity(word_counts.len()),
        unit_counts: Vec::new(),
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
        symbol_pairs: Vec::new(),
        heap: BinaryHeap::new(),
    };
    for c in &alphabet {
        state.intern(c.to_string());
    }
    if let Some(m) = cfg.marker {
        for c in &alphabet {
            state.intern(format!("{m}{c}"));
        }
    }
    let base_size = state.symbols.len();
    if cfg.target_size < base_size {
        return Err(Error::TargetBelowAlphabet {
            target: cfg.target_size,
            alphabet: base_size,
        });
    }

    for (word, count) in word_counts {
        let ids: Vec<u32> = word
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let key = match (i, cfg.marker) {
                    (0, _) | (_, None) => c.to_string(),
                    (_, Some(m)) => format!("{m}{c}"),
                };
                state.symbol_id[key.as_str()]
            })
            .collect();
        for &id in &ids {
            state.unit_counts[id as usize] += count;
        }
        state.words.push(ids);
        state.counts.push(*count);
    }

    let indices: Vec<usize> = (0..state.words.len()).collect();
    let words = &state.words;
    let counts = &state.counts;
    state.pair_counts = cfg.exec.fold_reduce(
        &indices,
        HashMap::<Pair, u64>::new,
        |mut acc, &wi| {
            for w in words[wi].windows(2) {
                *acc.entry((w[0], w[1])).or_default() += counts[wi];
            }
            acc
        },
        |mut a, b| {
            for (p, c) in b {
                *a.entry(p).or_default() += c;
            }
            a
        },
    );
    for (wi, word) in state.words.iter().enumerate() {
        for w in word.windows(2) {
            let p = (w[0], w[1]);
            let list = state.pair_words.entry(p).or_default();
            if list.last() != Some(&(wi as u32)) {
                list.push(wi as u32);
            }
            if cfg.objective == Objective::Likelihood {
                state.symbol_pairs[p.0 as usize].insert(p);
                state.symbol_pairs[p.1 as usize].insert(p);
            }
        }
    }
    let mut initial: Vec<Pair> = state.pair_counts.keys().copied().collect();
    initial.sort_unstable();
    for p in initial {
        state.push(p);
    }

    let mut merges = Vec::new();
    let mut too_long: HashSet<Pair> = HashSet::new();
    let mut stamp = vec![0u32; state.words.len()];
    while state.symbols.len() < cfg.target_size {
        let Some(top) = state.heap.pop() else {
            log::warn!(
                "pair counts exhausted at {} tokens (target {})",
                state.symbols.len(),
                cfg.target_size
            );
            break;
        };
        let pair = top.pair;
        let live = state.pair_counts.get(&pair).copied().unwrap_or(0);
        if live == 0 || too_long.contains(&pair) {
            continue;
        }
        let (lc, rc) = state.unit_counts_of(pair);
        if (live, lc, rc) != (top.pair_count, top.left_count, top.right_count) {
            state.push(pair);
            continue;
        }
        if state.symbol_len[pair.0 as usize] + state.symbol_len[pair.1 as usize] > cfg.max_token_len {
            too_long.insert(pair);
            continue;
        }
        let text = state.merged(pair);
        let (new_id, _) = state.intern(text);
        merges.push(MergeRule {
            left: state.symbols[pair.0 as usize].to_string(),
            right: state.symbols[pair.1 as usize].to_string(),
            rank: merges.len() as u32,
        });
        let round = merges.len() as u32;
        for p in state.apply(pair, new_id, &mut stamp, round) {
            state.push(p);
        }
    }

    Ok(MergeOutcome {
        tokens: state.symbols.iter().map(|s| s.to_string()).collect(),
        merges,
        base_size,
    })
}
