//! Seeded synthetic data: an artificial derivational language, a Zipfian
//! corpus drawn from it, frequency norms, a morpheme annotation file, and
//! lexical-decision stimuli whose responses follow a tokenizer's
//! chunkability by construction.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::chunkability;
use crate::pretok;
use crate::textio::{Corpus, FrequencyTable, Stimulus};
use crate::vocab::TokenizerModel;
use crate::Exec;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "br", "st", "tr", "pl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "t", "ck", "ld"];
const PREFIXES: &[&str] = &["un", "re", "dis", "pre", "mis", "over"];
const SUFFIXES: &[&str] = &["er", "ness", "ly", "able", "ment", "ful", "less", "ish", "ist"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthWord {
    pub surface: String,
    pub prefix: Option<&'static str>,
    pub stem: String,
    pub suffix: Option<&'static str>,
}

impl SynthWord {
    /// `word<TAB>m1|m2<TAB>t1|t2` annotation row.
    pub fn annotation(&self) -> String {
        let mut morphs = Vec::new();
        let mut tags = Vec::new();
        if let Some(p) = self.prefix {
            morphs.push(p.to_owned());
            tags.push("prefix");
        }
        morphs.push(self.stem.clone());
        tags.push("root");
        if let Some(s) = self.suffix {
            morphs.push(s.to_owned());
            tags.push("suffix");
        }
        format!("{}\t{}\t{}", self.surface, morphs.join("|"), tags.join("|"))
    }
}

/// An artificial lexicon of stems with optional derivational affixes,
/// ordered by (Zipfian) frequency rank.
#[derive(Debug, Clone)]
pub struct SynthLanguage {
    pub words: Vec<SynthWord>,
    stems: Vec<String>,
    seed: u64,
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    s.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
    s.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    s.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    s
}

impl SynthLanguage {
    pub fn new(n_stems: usize, seed: u64) -> SynthLanguage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        let mut stems = Vec::with_capacity(n_stems);
        let mut attempts = 0;
        while stems.len() < n_stems && attempts < n_stems * 50 {
            attempts += 1;
            let syllables = rng.random_range(1..=3);
            let stem: String = (0..syllables).map(|_| syllable(&mut rng)).collect();
            if seen.insert(stem.clone()) {
                stems.push(stem);
            }
        }
        let mut words = Vec::new();
        let mut surfaces = BTreeSet::new();
        for stem in &stems {
            let mut forms = vec![(None, None)];
            for _ in 0..rng.random_range(0..4) {
                let prefix = rng
                    .random_bool(0.35)
                    .then(|| PREFIXES[rng.random_range(0..PREFIXES.len())]);
                let suffix = rng
                    .random_bool(0.8)
                    .then(|| SUFFIXES[rng.random_range(0..SUFFIXES.len())]);
                forms.push((prefix, suffix));
            }
            for (prefix, suffix) in forms {
                let surface = format!("{}{stem}{}", prefix.unwrap_or(""), suffix.unwrap_or(""));
                if surfaces.insert(surface.clone()) {
                    words.push(SynthWord {
                        surface,
                        prefix,
                        stem: stem.clone(),
                        suffix,
                    });
                }
            }
        }
        // Frequency rank order: a seeded shuffle so affixed forms are spread
        // across the rank range.
        for i in (1..words.len()).rev() {
            let j = rng.random_range(0..=i);
            words.swap(i, j);
        }
        SynthLanguage { words, stems, seed }
    }

    fn zipf(&self) -> WeightedIndex<f64> {
        WeightedIndex::new((0..self.words.len()).map(|r| 1.0 / (r as f64 + 2.7)))
            .expect("non-empty lexicon with positive weights")
    }

    /// `n_sentences` lines of 4-12 words drawn by Zipfian rank.
    pub fn corpus(&self, n_sentences: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.seed.rotate_left(17));
        let zipf = self.zipf();
        let lines: Vec<String> = (0..n_sentences)
            .map(|_| {
                let len = rng.random_range(4..=12);
                let mut line = String::new();
                for i in 0..len {
                    if i > 0 {
                        line.push(' ');
                    }
                    line.push_str(&self.words[zipf.sample(&mut rng)].surface);
                }
                if rng.random_bool(0.3) {
                    line.push_str(" .");
                }
                line
            })
            .collect();
        Corpus::from_lines(format!("synth-{}-{seed}", self.seed), lines).expect("generated corpus is non-empty")
    }

    /// Strings that look like the language but are not in the lexicon:
    /// two-stem compounds, illegal affix stacks, and fresh syllable strings.
    pub fn nonwords(&self, n: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
        let lexicon: BTreeSet<&str> = self.words.iter().map(|w| w.surface.as_str()).collect();
        let mut out = BTreeSet::new();
        let mut ordered = Vec::with_capacity(n);
        let mut attempts = 0;
        while ordered.len() < n && attempts < n * 100 {
            attempts += 1;
            let pick = |rng: &mut ChaCha8Rng| self.stems[rng.random_range(0..self.stems.len())].clone();
            let s = match rng.random_range(0..3) {
                0 => format!("{}{}", pick(&mut rng), pick(&mut rng)),
                1 => format!(
                    "{}{}{}",
                    pick(&mut rng),
                    SUFFIXES[rng.random_range(0..SUFFIXES.len())],
                    PREFIXES[rng.random_range(0..PREFIXES.len())]
                ),
                _ => (0..rng.random_range(2..=4)).map(|_| syllable(&mut rng)).collect(),
            };
            if !lexicon.contains(s.as_str()) && out.insert(s.clone()) {
                ordered.push(s);
            }
        }
        ordered
    }

    /// Annotation rows for every affixed word.
    pub fn morpheme_annotations(&self) -> String {
        let mut out = String::from("# word\tmorphemes\ttypes\n");
        for w in self.words.iter().filter(|w| w.prefix.is_some() || w.suffix.is_some()) {
            let _ = writeln!(out, "{}", w.annotation());
        }
        out
    }
}

/// Zipf-scale frequencies (log10 occurrences per billion) from corpus counts.
pub fn frequency_table(corpus: &Corpus) -> FrequencyTable {
    let counts = pretok::count_words(std::slice::from_ref(corpus), true, Exec::Sequential);
    let total: u64 = counts.iter().map(|(_, c)| c).sum();
    let mut table = FrequencyTable::default();
    for (w, c) in counts {
        if w.chars().all(char::is_alphanumeric) {
            table.insert(&w, (c as f64 / total as f64 * 1e9).log10());
        }
    }
    table
}

/// Stimuli whose responses are linear in `model`'s chunkability plus
/// uniform noise: for words, response time falls and accuracy rises as
/// chunkability grows; for non-words both relations are reversed.
pub fn constructed_stimuli(model: &TokenizerModel, words: &[String], nonwords: &[String], seed: u64) -> Result<Vec<Stimulus>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(words.len() + nonwords.len());
    for (is_word, list) in [(true, words), (false, nonwords)] {
        for seq in list {
            let c = chunkability(&model.encode(&model.normalize(seq))?);
            let rt_noise = rng.random_range(-40.0..40.0);
            let acc_noise = rng.random_range(-0.04..0.04);
            let (rt, acc) = if is_word {
                (1000.0 - 500.0 * c + rt_noise, 0.55 + 0.4 * c + acc_noise)
            } else {
                (600.0 + 500.0 * c + rt_noise, 0.95 - 0.4 * c + acc_noise)
            };
            out.push(Stimulus::new(seq.clone(), is_word, rt, f64::clamp(acc, 0.0, 1.0)));
        }
    }
    Ok(out)
}

/// Every file of a desk-scale experiment, under `dir`.
#[derive(Debug, Clone)]
pub struct DeskFiles {
    pub corpus: std::path::PathBuf,
    pub stimuli: std::path::PathBuf,
    pub frequencies: std::path::PathBuf,
    pub morphemes: std::path::PathBuf,
}

/// Write corpus, stimuli, frequency norms and morpheme annotations.
/// Stimulus responses follow `reference`'s chunkability.
pub fn write_desk_files(
    dir: &Path,
    language: &SynthLanguage,
    corpus: &Corpus,
    reference: &TokenizerModel,
    n_stimuli: usize,
    seed: u64,
) -> Result<DeskFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = DeskFiles {
        corpus: dir.join("corpus.txt"),
        stimuli: dir.join("stimuli.csv"),
        frequencies: dir.join("frequencies.tsv"),
        morphemes: dir.join("synth.tsv"),
    };
    corpus.write(&files.corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<String> = language.words.iter().map(|w| w.surface.clone()).collect();
    // Partial shuffle; the first n_stimuli become the word items.
    let take = n_stimuli.min(pool.len());
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(take);
    let nonwords = language.nonwords(n_stimuli, seed);
    let stimuli = constructed_stimuli(reference, &pool, &nonwords, seed)?;
    crate::textio::write_lexical_decision(&files.stimuli, &stimuli)?;
    frequency_table(corpus).write_tsv(&files.frequencies)?;
    fs::write(&files.morphemes, language.morpheme_annotations()).map_err(|e| Error::io(&files.morphemes, e))?;
    Ok(files)
}

/// Distinct words of a corpus with their counts, most frequent first.
pub fn word_counts(corpus: &Corpus) -> Vec<(String, u64)> {
    let mut counts = pretok::count_words(std::slice::from_ref(corpus), true, Exec::Sequential);
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts
}

/// Up to `n` distinct alphabetic corpus words sampled by occurrence.
pub fn sample_words(corpus: &Corpus, n: usize, seed: u64) -> Vec<String> {
    let counts: HashMap<String, u64> = word_counts(corpus)
        .into_iter()
        .filter(|(w, _)| w.chars().all(char::is_alphabetic))
        .collect();
    let mut words: Vec<(String, u64)> = counts.into_iter().collect();
    words.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if words.is_empty() {
            break;
        }
        let w = &words[rng.random_range(0..words.len())];
        out.push(w.0.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::load_morpheme_inventory;

    #[test]
    fn generation_is_deterministic() {
        let a = SynthLanguage::new(200, 7);
        let b = SynthLanguage::new(200, 7);
        assert_eq!(a.words, b.words);
        assert_eq!(a.corpus(50, 1).sentences, b.corpus(50, 1).sentences);
        assert_ne!(a.corpus(50, 1).sentences, a.corpus(50, 2).sentences);
        assert_eq!(a.nonwords(30, 3), b.nonwords(30, 3));
    }

    #[test]
    fn nonwords_are_outside_the_lexicon() {
        let lang = SynthLanguage::new(300, 1);
        let nonwords = lang.nonwords(200, 5);
        assert_eq!(nonwords.len(), 200);
        let lexicon: BTreeSet<&str> = lang.words.iter().map(|w| w.surface.as_str()).collect();
        assert!(nonwords.iter().all(|n| !lexicon.contains(n.as_str())));
    }

    #[test]
    fn annotations_load_as_inventory() {
        let lang = SynthLanguage::new(300, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.tsv");
        fs::write(&path, lang.morpheme_annotations()).unwrap();
        let inv = load_morpheme_inventory(&path, 0.01).unwrap();
        assert!(!inv.is_empty());
        assert!(inv
            .morphemes
            .iter()
            .all(|m| PREFIXES.contains(&m.as_str()) || SUFFIXES.contains(&m.as_str())));
    }

    #[test]
    fn frequency_scores_rank_like_counts() {
        let lang = SynthLanguage::new(100, 3);
        let corpus = lang.corpus(500, 0);
        let table = frequency_table(&corpus);
        let counts = word_counts(&corpus);
        let top = table.lookup(&counts[0].0).unwrap();
        let bottom = table.lookup(&counts.last().unwrap().0).unwrap();
        assert!(top > bottom);
        assert!(table.lookup(".").is_none());
    }
}
