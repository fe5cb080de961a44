//! Ingestion of training corpora, lexical decision data, word-frequency lists
//! and derivational morpheme annotations.
//!
//! Text is NFC-normalized on the way in. Rows that break an invariant are
//! dropped and counted; nothing is repaired.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-normalize a string.
pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// NFC-normalize and optionally lowercase.
pub fn normalize(s: &str, lowercase: bool) -> String {
    let s = nfc(s);
    if lowercase {
        // Lowercasing can produce decomposed sequences (e.g. U+0130).
        nfc(&s.to_lowercase())
    } else {
        s
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok(s),
        Err(e) => {
            let valid = e.utf8_error().valid_up_to();
            let line = e.as_bytes()[..valid].iter().filter(|&&b| b == b'\n').count() + 1;
            Err(Error::InvalidUtf8 {
                path: path.to_path_buf(),
                line,
            })
        }
    }
}

/// Training text, one sentence per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<String>,
    pub source_id: String,
    /// ISO 639-3 code, `und` when unknown.
    pub language: String,
}

impl Corpus {
    /// Read at most `limit` non-empty lines from `path`, in file order.
    pub fn load(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        let limit = limit.unwrap_or(usize::MAX);
        let sentences: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .take(limit)
            .map(nfc)
            .collect();
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus(path.to_path_buf()));
        }
        let source_id = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Corpus {
            sentences,
            source_id,
            language: "und".to_owned(),
        })
    }

    /// Build a corpus from in-memory lines; blank lines are skipped.
    pub fn from_lines<I, S>(source_id: impl Into<String>, lines: I) -> Result<Corpus>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let source_id = source_id.into();
        let sentences: Vec<String> = lines
            .into_iter()
            .map(|l| l.as_ref().trim().to_owned())
            .filter(|l| !l.is_empty())
            .map(|l| nfc(&l))
            .collect();
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus(PathBuf::from(source_id)));
        }
        Ok(Corpus {
            sentences,
            source_id,
            language: "und".to_owned(),
        })
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// SHA-256 over the sentences, used as a cache key component.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.sentences {
            hasher.update(s.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.sentences.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One lexical decision item, aggregated over participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub sequence: String,
    pub is_word: bool,
    pub rt_ms: f64,
    pub accuracy: f64,
}

impl Stimulus {
    pub fn new(sequence: impl Into<String>, is_word: bool, rt_ms: f64, accuracy: f64) -> Self {
        Stimulus {
            sequence: sequence.into(),
            is_word,
            rt_ms,
            accuracy,
        }
    }

    fn is_valid(&self) -> bool {
        !self.sequence.is_empty()
            && !self.sequence.chars().any(char::is_whitespace)
            && self.rt_ms.is_finite()
            && self.rt_ms > 0.0
            && (0.0..=1.0).contains(&self.accuracy)
    }
}

/// Which header names hold the four stimulus fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub sequence: String,
    pub is_word: String,
    pub rt: String,
    pub accuracy: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            sequence: "sequence".into(),
            is_word: "is_word".into(),
            rt: "rt".into(),
            accuracy: "accuracy".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalDecisionData {
    pub stimuli: Vec<Stimulus>,
    /// Rows discarded for missing, non-numeric or out-of-range fields.
    pub dropped: usize,
}

fn parse_lexicality(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" | "y" | "w" | "word" => Some(true),
        "0" | "false" | "f" | "no" | "n" | "nw" | "nonword" | "non-word" => Some(false),
        _ => None,
    }
}

/// Load per-stimulus lexical decision aggregates from a CSV or TSV file with
/// a header row. The delimiter is a tab if the header contains one.
pub fn load_lexical_decision(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<LexicalDecisionData> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_owned(),
            })
    };
    let seq_col = column(&schema.sequence)?;
    let word_col = column(&schema.is_word)?;
    let rt_col = column(&schema.rt)?;
    let acc_col = column(&schema.accuracy)?;

    let mut stimuli = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let parsed = (|| {
            let sequence = nfc(record.get(seq_col)?);
            let is_word = parse_lexicality(record.get(word_col)?)?;
            let rt_ms = record.get(rt_col)?.parse::<f64>().ok()?;
            let accuracy = record.get(acc_col)?.parse::<f64>().ok()?;
            Some(Stimulus {
                sequence,
                is_word,
                rt_ms,
                accuracy,
            })
        })();
        match parsed {
            Some(s) if s.is_valid() => stimuli.push(s),
            _ => dropped += 1,
        }
    }
    if stimuli.is_empty() {
        return Err(Error::NoSurvivingRows {
            path: path.to_path_buf(),
            dropped,
        });
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} invalid rows", path.display());
    }
    Ok(LexicalDecisionData { stimuli, dropped })
}

/// Write stimuli as CSV using the default [`ColumnSchema`] header.
pub fn write_lexical_decision(path: impl AsRef<Path>, stimuli: &[Stimulus]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["sequence", "is_word", "rt", "accuracy"])?;
    for s in stimuli {
        writer.write_record([
            s.sequence.clone(),
            if s.is_word { "1" } else { "0" }.to_owned(),
            s.rt_ms.to_string(),
            s.accuracy.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Nearest-rank percentile of an ascending slice: the value at 1-based rank
/// `ceil(p / 100 * n)`, clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Response-time cut-offs. `None` means the side is not trimmed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl RtBounds {
    pub fn admits(&self, rt: f64) -> bool {
        self.lower.is_none_or(|lo| rt > lo) && self.upper.is_none_or(|hi| rt < hi)
    }
}

/// Nearest-rank bounds at the `low` and `high` percentiles of the stimuli's
/// response times. A `low` of 0 or `high` of 100 leaves that side open.
pub fn rt_percentile_bounds(stimuli: &[Stimulus], low: f64, high: f64) -> Result<RtBounds> {
    if stimuli.is_empty() {
        return Err(Error::InvalidArgument("percentile filter on empty input".into()));
    }
    if !(0.0..100.0).contains(&low) || !(low < high && high <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "percentiles must satisfy 0 <= low < high <= 100, got {low} and {high}"
        )));
    }
    let mut rts: Vec<f64> = stimuli.iter().map(|s| s.rt_ms).collect();
    rts.sort_by(f64::total_cmp);
    Ok(RtBounds {
        lower: (low > 0.0).then(|| nearest_rank(&rts, low)),
        upper: (high < 100.0).then(|| nearest_rank(&rts, high)),
    })
}

/// Keep stimuli strictly inside `bounds`, preserving order.
pub fn filter_rt_bounds(stimuli: &[Stimulus], bounds: RtBounds) -> Vec<Stimulus> {
    stimuli.iter().filter(|s| bounds.admits(s.rt_ms)).cloned().collect()
}

/// Drop stimuli whose response time falls at or beyond the nearest-rank
/// `low` / `high` percentile values.
pub fn filter_rt_percentiles(stimuli: &[Stimulus], low: f64, high: f64) -> Result<Vec<Stimulus>> {
    let bounds = rt_percentile_bounds(stimuli, low, high)?;
    Ok(filter_rt_bounds(stimuli, bounds))
}

/// Word to Zipf-scale frequency. Keys are NFC-normalized and lowercased.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    scores: HashMap<String, f64>,
}

impl FrequencyTable {
    pub fn insert(&mut self, word: &str, score: f64) -> Option<f64> {
        self.scores.insert(normalize(word, true), score)
    }

    /// `None` for words absent from the table.
    pub fn lookup(&self, word: &str) -> Option<f64> {
        self.scores.get(&normalize(word, true)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Write as a sorted two-column TSV.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut rows: Vec<_> = self.scores.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = Vec::new();
        for (w, s) in rows {
            writeln!(out, "{w}\t{s}").expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Load a `word<TAB>zipf` file. Duplicate words keep the last score.
pub fn load_frequency_table(path: impl AsRef<Path>) -> Result<FrequencyTable> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    let mut table = FrequencyTable::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(word), Some(score), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::malformed(path, i + 1, "expected two tab-separated columns"));
        };
        let score: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::malformed(path, i + 1, format!("malformed score `{score}`")))?;
        if table.insert(word.trim(), score).is_some() {
            log::warn!("{}:{}: duplicate entry for `{}`, keeping the later score", path.display(), i + 1, word.trim());
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphType {
    Prefix,
    Root,
    Suffix,
}

impl std::str::FromStr for MorphType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "prefix" => Ok(MorphType::Prefix),
            "root" => Ok(MorphType::Root),
            "suffix" => Ok(MorphType::Suffix),
            other => Err(format!("unknown morpheme type `{other}`")),
        }
    }
}

/// Derivational affixes that are frequent enough in an annotation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphemeInventory {
    pub language: String,
    pub morphemes: BTreeSet<String>,
    pub source_row_count: usize,
    pub min_share: f64,
}

impl MorphemeInventory {
    pub fn len(&self) -> usize {
        self.morphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphemes.is_empty()
    }
}

/// Load `word<TAB>m1|m2|..<TAB>t1|t2|..` rows and keep prefixes and suffixes
/// that occur in at least `min_share` of the rows. Lines starting with `#`
/// are comments. The language is taken from the file stem.
pub fn load_morpheme_inventory(path: impl AsRef<Path>, min_share: f64) -> Result<MorphemeInventory> {
    let path = path.as_ref();
    if !(0.0..=1.0).contains(&min_share) {
        return Err(Error::InvalidArgument(format!("min_share {min_share} outside [0, 1]")));
    }
    let text = read_utf8(path)?;
    let mut rows = 0usize;
    let mut occurrences: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(path, i + 1, "expected three tab-separated columns"));
        }
        let morphs: Vec<&str> = fields[1].split('|').collect();
        let tags: Vec<&str> = fields[2].split('|').collect();
        if morphs.len() != tags.len() {
            return Err(Error::malformed(
                path,
                i + 1,
                format!("{} morphemes but {} type tags", morphs.len(), tags.len()),
            ));
        }
        rows += 1;
        let mut seen = HashSet::new();
        for (m, t) in morphs.iter().zip(&tags) {
            let kind: MorphType = t.parse().map_err(|e: String| Error::malformed(path, i + 1, e))?;
            let m = normalize(m.trim(), true);
            if kind != MorphType::Root && !m.is_empty() && seen.insert(m.clone()) {
                *occurrences.entry(m).or_default() += 1;
            }
        }
    }
    let morphemes = occurrences
        .into_iter()
        .filter(|(_, count)| rows > 0 && *count as f64 / rows as f64 >= min_share)
        .map(|(m, _)| m)
        .collect();
    let language = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "und".into());
    Ok(MorphemeInventory {
        language,
        morphemes,
        source_row_count: rows,
        min_share,
    })
}
