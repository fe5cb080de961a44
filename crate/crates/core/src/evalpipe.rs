//! Experiment orchestration: per-stimulus metric tables, correlation
//! reports against human responses, vocabulary-size sweeps, morpheme
//! coverage curves and the hold-out regression comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::par::Exec;
use crate::stats::{self, RegressionResult, SignificanceResult, MIN_OBSERVATIONS};
use crate::textio::{Corpus, FrequencyTable, MorphemeInventory, Stimulus};
use crate::vocab::{Algorithm, TokenizerModel, TrainFlags, Vocabulary};

/// Default vocabulary-size grid for sweeps.
pub const DEFAULT_SIZE_GRID: [usize; 9] = [1000, 2000, 5000, 10000, 20000, 30000, 40000, 50000, 70000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Rt,
    Accuracy,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::Rt, Signal::Accuracy];

    pub fn of(self, s: &Stimulus) -> f64 {
        match self {
            Signal::Rt => s.rt_ms,
            Signal::Accuracy => s.accuracy,
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Rt => "rt",
            Signal::Accuracy => "accuracy",
        })
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rt" | "time" => Ok(Signal::Rt),
            "acc" | "accuracy" => Ok(Signal::Accuracy),
            other => Err(Error::InvalidArgument(format!("unknown signal `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordClass {
    Words,
    Nonwords,
}

impl WordClass {
    pub const ALL: [WordClass; 2] = [WordClass::Words, WordClass::Nonwords];

    fn admits(self, s: &Stimulus) -> bool {
        s.is_word == (self == WordClass::Words)
    }
}

impl fmt::Display for WordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WordClass::Words => "words",
            WordClass::Nonwords => "nonwords",
        })
    }
}

/// A model with the name it is reported under.
#[derive(Debug, Clone)]
pub struct NamedModel {
    pub id: String,
    pub model: TokenizerModel,
}

impl NamedModel {
    pub fn new(id: impl Into<String>, model: TokenizerModel) -> Self {
        NamedModel { id: id.into(), model }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerInfo {
    pub id: String,
    pub algorithm: Algorithm,
    pub vocab_size: usize,
}

/// Token and character counts of every stimulus under every tokenizer.
/// Correlation reports are computed from this table alone.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub tokenizers: Vec<TokenizerInfo>,
    pub stimuli: Vec<Stimulus>,
    /// `k[t][s]`: token count of stimulus `s` under tokenizer `t`.
    pub k: Vec<Vec<usize>>,
    /// Character count of each stimulus after normalization.
    pub n: Vec<usize>,
}

const TABLE_HEADER: [&str; 12] = [
    "tokenizer",
    "algorithm",
    "vocab_size",
    "sequence",
    "is_word",
    "rt",
    "accuracy",
    "k",
    "n",
    "chunkability",
    "num_tokens",
    "char_length",
];

impl MetricsTable {
    /// Encode every stimulus with every model.
    pub fn compute(models: &[NamedModel], stimuli: &[Stimulus], exec: Exec) -> Result<MetricsTable> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("no tokenizer to evaluate".into()));
        }
        let lowercase = models[0].model.metadata().flags.lowercase;
        if let Some(m) = models.iter().find(|m| m.model.metadata().flags.lowercase != lowercase) {
            return Err(Error::InvalidArgument(format!(
                "tokenizer `{}` normalizes case differently from `{}`",
                m.id, models[0].id
            )));
        }
        let normalized: Vec<String> = stimuli.iter().map(|s| models[0].model.normalize(&s.sequence)).collect();
        let n = normalized.iter().map(|s| s.chars().count()).collect();
        let mut k = Vec::with_capacity(models.len());
        for m in models {
            let encoded = m.model.encode_batch(&normalized, exec)?;
            k.push(encoded.iter().map(|t| t.k()).collect());
        }
        Ok(MetricsTable {
            tokenizers: models
                .iter()
                .map(|m| TokenizerInfo {
                    id: m.id.clone(),
                    algorithm: m.model.algorithm(),
                    vocab_size: m.model.vocabulary().len(),
                })
                .collect(),
            stimuli: stimuli.to_vec(),
            k,
            n,
        })
    }

    pub fn value(&self, tokenizer: usize, stimulus: usize, metric: Metric) -> f64 {
        let k = self.k[tokenizer][stimulus];
        let n = self.n[stimulus];
        match metric {
            Metric::Chunkability => 1.0 - k as f64 / n as f64,
            Metric::NumTokens => k as f64,
            Metric::CharLength => n as f64,
        }
    }

    /// Long-format CSV: one row per (tokenizer, stimulus).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(TABLE_HEADER)?;
        for (t, info) in self.tokenizers.iter().enumerate() {
            for (s, stim) in self.stimuli.iter().enumerate() {
                w.write_record([
                    info.id.clone(),
                    info.algorithm.to_string(),
                    info.vocab_size.to_string(),
                    stim.sequence.clone(),
                    u8::from(stim.is_word).to_string(),
                    stim.rt_ms.to_string(),
                    stim.accuracy.to_string(),
                    self.k[t][s].to_string(),
                    self.n[s].to_string(),
                    self.value(t, s, Metric::Chunkability).to_string(),
                    self.k[t][s].to_string(),
                    self.n[s].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<MetricsTable> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        for col in TABLE_HEADER {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: col.into(),
                });
            }
        }
        let idx = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
        let [c_tok, c_alg, c_size, c_seq, c_word, c_rt, c_acc, c_k, c_n] =
            ["tokenizer", "algorithm", "vocab_size", "sequence", "is_word", "rt", "accuracy", "k", "n"].map(idx);
        let mut table = MetricsTable {
            tokenizers: Vec::new(),
            stimuli: Vec::new(),
            k: Vec::new(),
            n: Vec::new(),
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = line + 2;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let num = |c: usize| -> Result<f64> {
                field(c)
                    .parse()
                    .map_err(|_| Error::malformed(path, line, format!("bad number `{}`", field(c))))
            };
            let int = |c: usize| -> Result<usize> {
                field(c)
                    .parse()
                    .map_err(|_| Error::malformed(path, line, format!("bad count `{}`", field(c))))
            };
            let id = field(c_tok);
            if table.tokenizers.last().map(|t| t.id.as_str()) != Some(id) {
                if table.tokenizers.iter().any(|t| t.id == id) {
                    return Err(Error::malformed(path, line, format!("rows of tokenizer `{id}` are not contiguous")));
                }
                table.tokenizers.push(TokenizerInfo {
                    id: id.to_owned(),
                    algorithm: field(c_alg).parse().map_err(|e: Error| Error::malformed(path, line, e.to_string()))?,
                    vocab_size: int(c_size)?,
                });
                table.k.push(Vec::new());
            }
            let t = table.tokenizers.len() - 1;
            let s = table.k[t].len();
            let stim = Stimulus::new(field(c_seq), field(c_word) == "1", num(c_rt)?, num(c_acc)?);
            if t == 0 {
                table.stimuli.push(stim);
                table.n.push(int(c_n)?);
            } else if table.stimuli.get(s) != Some(&stim) || table.n[s] != int(c_n)? {
                return Err(Error::malformed(path, line, "stimulus rows differ between tokenizers"));
            }
            table.k[t].push(int(c_k)?);
        }
        if table.tokenizers.is_empty() {
            return Err(Error::NoSurvivingRows {
                path: path.to_path_buf(),
                dropped: 0,
            });
        }
        if table.k.iter().any(|k| k.len() != table.stimuli.len()) {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 0,
                message: "tokenizers cover different numbers of stimuli".into(),
            });
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub other: String,
    pub result: SignificanceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub tokenizer_id: String,
    pub algorithm: Algorithm,
    pub vocab_size: usize,
    pub metric: Metric,
    pub signal: Signal,
    pub word_class: WordClass,
    pub n_obs: usize,
    /// `None` when the cell was skipped.
    pub r: Option<f64>,
    /// Too few observations for a significance test.
    pub low_n: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    /// Dependent test against the character-length baseline.
    pub vs_baseline: Option<SignificanceResult>,
    pub pairwise: Vec<PairwiseComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub dataset: String,
    pub rows: Vec<ReportRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CorrelationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Flat CSV mirror of the rows; pairwise comparisons are JSON-only.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record([
            "dataset",
            "tokenizer",
            "algorithm",
            "vocab_size",
            "metric",
            "signal",
            "word_class",
            "n_obs",
            "r",
            "low_n",
            "skipped",
            "baseline_test",
            "baseline_z",
            "baseline_p",
        ])?;
        for row in &self.rows {
            let b = row.vs_baseline.as_ref();
            w.write_record([
                row.dataset.clone(),
                row.tokenizer_id.clone(),
                row.algorithm.to_string(),
                row.vocab_size.to_string(),
                row.metric.to_string(),
                row.signal.to_string(),
                row.word_class.to_string(),
                row.n_obs.to_string(),
                fmt_opt(row.r),
                row.low_n.to_string(),
                row.skipped.clone().unwrap_or_default(),
                b.map(|b| b.test.name().to_owned()).unwrap_or_default(),
                fmt_opt(b.map(|b| b.statistic)),
                fmt_opt(b.map(|b| b.p_value)),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn row(&self, tokenizer: &str, metric: Metric, signal: Signal, class: WordClass) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.tokenizer_id == tokenizer && r.metric == metric && r.signal == signal && r.word_class == class
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    tokenizer: usize,
    metric: Metric,
    signal: Signal,
    class: WordClass,
}

fn column(table: &MetricsTable, t: usize, metric: Metric, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&s| table.value(t, s, metric)).collect()
}

/// Correlate every requested metric with every signal, per tokenizer and
/// word class, never pooling words with non-words.
pub fn report_from_table(
    table: &MetricsTable,
    metrics: &[Metric],
    signals: &[Signal],
    dataset: &str,
    exec: Exec,
) -> Result<CorrelationReport> {
    let mut partitions = BTreeMap::new();
    for class in WordClass::ALL {
        let idx: Vec<usize> = (0..table.stimuli.len()).filter(|&s| class.admits(&table.stimuli[s])).collect();
        if idx.is_empty() {
            return Err(Error::EmptyPartition(format!("no {class} among the stimuli")));
        }
        partitions.insert(class, idx);
    }
    let mut cells = Vec::new();
    for t in 0..table.tokenizers.len() {
        for &metric in metrics {
            for &signal in signals {
                for class in WordClass::ALL {
                    cells.push(Cell {
                        tokenizer: t,
                        metric,
                        signal,
                        class,
                    });
                }
            }
        }
    }
    let rows = exec.map(&cells, |cell| {
        let idx = &partitions[&cell.class];
        let info = &table.tokenizers[cell.tokenizer];
        let y: Vec<f64> = idx.iter().map(|&s| cell.signal.of(&table.stimuli[s])).collect();
        let x = column(table, cell.tokenizer, cell.metric, idx);
        let n_obs = idx.len();
        let low_n = n_obs < MIN_OBSERVATIONS;
        let mut row = ReportRow {
            dataset: dataset.to_owned(),
            tokenizer_id: info.id.clone(),
            algorithm: info.algorithm,
            vocab_size: info.vocab_size,
            metric: cell.metric,
            signal: cell.signal,
            word_class: cell.class,
            n_obs,
            r: None,
            low_n,
            skipped: None,
            vs_baseline: None,
            pairwise: Vec::new(),
        };
        let r = match stats::pearson(&x, &y) {
            Ok(r) => r,
            Err(e) => {
                row.skipped = Some(e.to_string());
                return row;
            }
        };
        row.r = Some(r);
        if low_n {
            return row;
        }
        if !cell.metric.is_baseline() {
            let len = column(table, cell.tokenizer, Metric::CharLength, idx);
            let test = stats::pearson(&len, &y).and_then(|r_len| {
                let r12 = stats::pearson(&x, &len)?;
                stats::compare_dependent_correlations(r, r_len, r12, n_obs)
            });
            match test {
                Ok(t) => row.vs_baseline = Some(t),
                Err(e) => row.skipped = Some(format!("baseline comparison: {e}")),
            }
        }
        for (other, other_info) in table.tokenizers.iter().enumerate() {
            if other == cell.tokenizer {
                continue;
            }
            let x2 = column(table, other, cell.metric, idx);
            let test = stats::pearson(&x2, &y).and_then(|r2| {
                let r12 = stats::pearson(&x, &x2)?;
                stats::compare_dependent_correlations(r, r2, r12, n_obs)
            });
            if let Ok(result) = test {
                row.pairwise.push(PairwiseComparison {
                    other: other_info.id.clone(),
                    result,
                });
            }
        }
        row
    });
    Ok(CorrelationReport {
        dataset: dataset.to_owned(),
        rows,
    })
}

/// Encode, tabulate and correlate in one step.
pub fn run_cognitive_eval(
    models: &[NamedModel],
    stimuli: &[Stimulus],
    metrics: &[Metric],
    signals: &[Signal],
    dataset: &str,
    exec: Exec,
) -> Result<(MetricsTable, CorrelationReport)> {
    let table = MetricsTable::compute(models, stimuli, exec)?;
    let report = report_from_table(&table, metrics, signals, dataset, exec)?;
    Ok((table, report))
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    pub sizes: Vec<usize>,
    pub flags: TrainFlags,
    pub cache_dir: Option<PathBuf>,
    pub metrics: Vec<Metric>,
    pub signals: Vec<Signal>,
    pub dataset: String,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub vocab_size: usize,
    pub report: CorrelationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: Algorithm,
    pub points: Vec<SweepPoint>,
    /// Set when a size failed; earlier points are kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SweepResult {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    /// All points' rows in one CSV, with the swept size in front.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["sweep_size", "tokenizer", "metric", "signal", "word_class", "n_obs", "r", "baseline_p"])?;
        for p in &self.points {
            for row in &p.report.rows {
                w.write_record([
                    p.vocab_size.to_string(),
                    row.tokenizer_id.clone(),
                    row.metric.to_string(),
                    row.signal.to_string(),
                    row.word_class.to_string(),
                    row.n_obs.to_string(),
                    fmt_opt(row.r),
                    fmt_opt(row.vs_baseline.as_ref().map(|b| b.p_value)),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Cache key of a trained model.
pub fn cache_key(corpora: &[Corpus], algorithm: Algorithm, size: usize, flags: &TrainFlags) -> String {
    let mut h = Sha256::new();
    for c in corpora {
        h.update(c.content_hash().as_bytes());
    }
    h.update(algorithm.to_string().as_bytes());
    h.update(size.to_le_bytes());
    h.update(serde_json::to_vec(flags).expect("flags serialize"));
    hex::encode(h.finalize())
}

fn cached_or_train(
    corpora: &[Corpus],
    cfg: &SweepConfig,
    size: usize,
    train: impl FnOnce() -> Result<TokenizerModel>,
) -> Result<TokenizerModel> {
    let Some(dir) = &cfg.cache_dir else {
        return train();
    };
    let key = cache_key(corpora, cfg.algorithm, size, &cfg.flags);
    let path = dir.join(format!("{}-{size}-{}.json", cfg.algorithm, &key[..16]));
    if path.exists() {
        match TokenizerModel::load(&path) {
            Ok(m) => {
                log::info!("cache hit {}", path.display());
                return Ok(m);
            }
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
        }
    }
    let model = train()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    model.save(&path)?;
    Ok(model)
}

/// Train (or load) one model per size and evaluate each. Merge-based
/// algorithms train once at the largest size and truncate, which yields
/// the same models as training per size.
pub fn run_sweep(corpora: &[Corpus], cfg: &SweepConfig, stimuli: &[Stimulus]) -> Result<SweepResult> {
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("empty size grid".into()));
    }
    let mut result = SweepResult {
        algorithm: cfg.algorithm,
        points: Vec::new(),
        failure: None,
    };
    let largest = *sizes.last().expect("non-empty");
    let full = match cfg.algorithm {
        Algorithm::Bpe | Algorithm::Wpc => {
            match cached_or_train(corpora, cfg, largest, || {
                crate::train_model(cfg.algorithm, corpora, largest, &cfg.flags, cfg.exec)
            }) {
                Ok(m) => Some(m),
                Err(e) => {
                    result.failure = Some(format!("size {largest}: {e}"));
                    return Ok(result);
                }
            }
        }
        Algorithm::Uni => None,
    };
    for &size in &sizes {
        let model = match &full {
            Some(m) => m.truncate(size),
            None => cached_or_train(corpora, cfg, size, || {
                crate::train_model(cfg.algorithm, corpora, size, &cfg.flags, cfg.exec)
            }),
        };
        let step = model.and_then(|m| {
            let named = [NamedModel::new(format!("{}-{size}", cfg.algorithm), m)];
            run_cognitive_eval(&named, stimuli, &cfg.metrics, &cfg.signals, &cfg.dataset, cfg.exec)
        });
        match step {
            Ok((_, report)) => result.points.push(SweepPoint { vocab_size: size, report }),
            Err(e) => {
                result.failure = Some(format!("size {size}: {e}"));
                break;
            }
        }
    }
    Ok(result)
}

/// Share of the inventory present in the vocabulary, bare or
/// marker-prefixed.
pub fn morph_coverage(vocabulary: &Vocabulary, inventory: &MorphemeInventory) -> Result<f64> {
    if inventory.is_empty() {
        return Err(Error::EmptyPartition(format!("morpheme inventory `{}` is empty", inventory.language)));
    }
    let marker = vocabulary.continuation_marker();
    let covered = inventory
        .morphemes
        .iter()
        .filter(|m| vocabulary.contains(m) || vocabulary.contains(&format!("{marker}{m}")))
        .count();
    Ok(covered as f64 / inventory.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub vocab_size: usize,
    pub covered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub language: String,
    pub algorithm: Algorithm,
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["language", "algorithm", "vocab_size", "covered_fraction"])?;
        for p in &self.points {
            w.write_record([
                self.language.clone(),
                self.algorithm.to_string(),
                p.vocab_size.to_string(),
                p.covered_fraction.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Coverage at each model's vocabulary size, in increasing size order.
pub fn coverage_curve(models: &[TokenizerModel], inventory: &MorphemeInventory) -> Result<CoverageCurve> {
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidArgument("no model for coverage curve".into()))?;
    let mut points = models
        .iter()
        .map(|m| {
            Ok(CoveragePoint {
                vocab_size: m.vocabulary().len(),
                covered_fraction: morph_coverage(m.vocabulary(), inventory)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by_key(|p| p.vocab_size);
    Ok(CoverageCurve {
        language: inventory.language.clone(),
        algorithm: first.algorithm(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Chunkability,
    Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub signal: Signal,
    pub feature: Feature,
    pub result: RegressionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n_words: usize,
    /// Words without a frequency entry.
    pub dropped_without_frequency: usize,
    pub rows: Vec<RegressionRow>,
}

impl RegressionReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

pub const MIN_REGRESSION_WORDS: usize = 10;

/// Compare chunkability and frequency as single predictors of each
/// min-max scaled signal, over words only, on one shared hold-out split.
pub fn run_regression(
    stimuli: &[Stimulus],
    model: &TokenizerModel,
    frequency: &FrequencyTable,
    seed: u64,
    train_fraction: f64,
) -> Result<RegressionReport> {
    let mut covered = Vec::new();
    let mut dropped = 0;
    for s in stimuli.iter().filter(|s| s.is_word) {
        match frequency.lookup(&s.sequence) {
            Some(f) => covered.push((s, f)),
            None => dropped += 1,
        }
    }
    if covered.len() < MIN_REGRESSION_WORDS {
        return Err(Error::TooFewObservations {
            needed: MIN_REGRESSION_WORDS,
            got: covered.len(),
        });
    }
    let mut chunk = Vec::with_capacity(covered.len());
    for (s, _) in &covered {
        chunk.push(crate::metrics::chunkability(&model.encode(&model.normalize(&s.sequence))?));
    }
    let freq: Vec<f64> = covered.iter().map(|(_, f)| *f).collect();
    let split = stats::HoldoutSplit::new(covered.len(), train_fraction, seed)?;
    let mut rows = Vec::new();
    for signal in Signal::ALL {
        let raw: Vec<f64> = covered.iter().map(|(s, _)| signal.of(s)).collect();
        let y = stats::minmax_scale(&raw)?;
        for (feature, x) in [(Feature::Chunkability, &chunk), (Feature::Frequency, &freq)] {
            rows.push(RegressionRow {
                signal,
                feature,
                result: stats::linreg_split(x, &y, &split)?,
            });
        }
    }
    Ok(RegressionReport {
        n_words: covered.len(),
        dropped_without_frequency: dropped,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{constructed_stimuli, SynthLanguage};
    use crate::vocab::{ModelState, TrainingMetadata};
    use std::collections::BTreeSet;

    fn wpc(extra: &[&str]) -> TokenizerModel {
        let mut tokens: Vec<String> = ('a'..='z').map(String::from).collect();
        tokens.extend(('a'..='z').map(|c| format!("##{c}")));
        tokens.extend(extra.iter().map(|s| s.to_string()));
        let size = tokens.len();
        TokenizerModel::new(
            Algorithm::Wpc,
            Vocabulary::new(tokens, "##", BTreeSet::new()).unwrap(),
            ModelState::Merges(vec![]),
            TrainingMetadata::imported("test", size, 52, true),
        )
        .unwrap()
    }

    fn table_one() -> Vec<Stimulus> {
        vec![
            Stimulus::new("seafood", true, 578.0, 0.97),
            Stimulus::new("outfoxed", true, 734.0, 0.62),
            Stimulus::new("brithbloom", false, 693.0, 0.97),
            Stimulus::new("catchwind", false, 788.0, 0.82),
        ]
    }

    #[test]
    fn tiny_sets_are_computed_but_flagged() {
        let model = NamedModel::new("wpc", wpc(&["seafood", "out", "##fo", "##ed", "br", "##ith", "##blo", "##om", "catch", "##wind"]));
        let (table, report) =
            run_cognitive_eval(&[model], &table_one(), &Metric::ALL, &Signal::ALL, "table", Exec::Sequential).unwrap();
        assert_eq!(table.k[0], vec![1, 4, 4, 2]);
        assert_eq!(report.rows.len(), 3 * 2 * 2);
        for row in &report.rows {
            assert_eq!(row.n_obs, 2);
            assert!(row.low_n);
            assert!(row.vs_baseline.is_none());
        }
        let r = report.row("wpc", Metric::Chunkability, Signal::Accuracy, WordClass::Words).unwrap();
        assert!((r.r.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_partition_is_an_error() {
        let words: Vec<Stimulus> = table_one().into_iter().filter(|s| s.is_word).collect();
        let model = NamedModel::new("wpc", wpc(&[]));
        assert!(matches!(
            run_cognitive_eval(&[model], &words, &Metric::ALL, &Signal::ALL, "d", Exec::Sequential),
            Err(Error::EmptyPartition(_))
        ));
    }

    fn fixture() -> (Vec<NamedModel>, Vec<Stimulus>) {
        let lang = SynthLanguage::new(400, 4);
        let corpus = lang.corpus(3000, 1);
        let flags = TrainFlags::default();
        let bpe = crate::bpe::train_bpe(std::slice::from_ref(&corpus), 300, &flags).unwrap();
        let wpc = crate::wordpiece::train_wpc(&[corpus], 300, &flags).unwrap();
        let words: Vec<String> = lang.words.iter().take(200).map(|w| w.surface.clone()).collect();
        let stimuli = constructed_stimuli(&bpe, &words, &lang.nonwords(200, 2), 9).unwrap();
        (vec![NamedModel::new("bpe", bpe), NamedModel::new("wpc", wpc)], stimuli)
    }

    #[test]
    fn constructed_direction_is_recovered() {
        let (models, stimuli) = fixture();
        let (_, report) =
            run_cognitive_eval(&models, &stimuli, &Metric::ALL, &Signal::ALL, "synth", Exec::Sequential).unwrap();
        let get = |s, c| report.row("bpe", Metric::Chunkability, s, c).unwrap().r.unwrap();
        assert!(get(Signal::Accuracy, WordClass::Words) > 0.5);
        assert!(get(Signal::Rt, WordClass::Words) < -0.5);
        assert!(get(Signal::Accuracy, WordClass::Nonwords) < -0.5);
        assert!(get(Signal::Rt, WordClass::Nonwords) > 0.5);
        let row = report.row("bpe", Metric::Chunkability, Signal::Rt, WordClass::Words).unwrap();
        assert_eq!(row.pairwise.len(), 1);
        assert!(row.vs_baseline.is_some());
        // complete cross product
        assert_eq!(report.rows.len(), 2 * 3 * 2 * 2);
    }

    #[test]
    fn report_is_a_function_of_the_metrics_file() {
        let (models, stimuli) = fixture();
        let (table, report) =
            run_cognitive_eval(&models, &stimuli, &Metric::ALL, &Signal::ALL, "synth", Exec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        table.write_csv(&path).unwrap();
        let back = MetricsTable::read_csv(&path).unwrap();
        assert_eq!(back, table);
        let again = report_from_table(&back, &Metric::ALL, &Signal::ALL, "synth", Exec::Sequential).unwrap();
        assert_eq!(again.to_json().unwrap(), report.to_json().unwrap());
    }

    #[test]
    fn coverage_definition() {
        let inv = MorphemeInventory {
            language: "x".into(),
            morphemes: ["er", "ness"].iter().map(|s| s.to_string()).collect(),
            source_row_count: 2,
            min_share: 0.0,
        };
        let m = wpc(&["##er"]);
        assert_eq!(morph_coverage(m.vocabulary(), &inv).unwrap(), 0.5);
        let m = wpc(&["er", "ness"]);
        assert_eq!(morph_coverage(m.vocabulary(), &inv).unwrap(), 1.0);
        let empty = MorphemeInventory {
            morphemes: BTreeSet::new(),
            ..inv
        };
        assert!(morph_coverage(m.vocabulary(), &empty).is_err());
    }

    #[test]
    fn sweep_cache_gives_identical_reports() {
        let lang = SynthLanguage::new(150, 6);
        let corpus = lang.corpus(800, 0);
        let bpe = crate::bpe::train_bpe(std::slice::from_ref(&corpus), 200, &TrainFlags::default()).unwrap();
        let words: Vec<String> = lang.words.iter().take(60).map(|w| w.surface.clone()).collect();
        let stimuli = constructed_stimuli(&bpe, &words, &lang.nonwords(60, 1), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for algorithm in [Algorithm::Wpc, Algorithm::Uni] {
            let cfg = SweepConfig {
                algorithm,
                sizes: vec![150, 100],
                flags: TrainFlags::default(),
                cache_dir: Some(dir.path().to_path_buf()),
                metrics: vec![Metric::Chunkability],
                signals: Signal::ALL.to_vec(),
                dataset: "synth".into(),
                exec: Exec::default(),
            };
            let fresh = run_sweep(std::slice::from_ref(&corpus), &cfg, &stimuli).unwrap();
            assert!(fresh.failure.is_none());
            assert_eq!(fresh.points.iter().map(|p| p.vocab_size).collect::<Vec<_>>(), vec![100, 150]);
            let cached = run_sweep(std::slice::from_ref(&corpus), &cfg, &stimuli).unwrap();
            assert_eq!(
                serde_json::to_string(&fresh).unwrap(),
                serde_json::to_string(&cached).unwrap()
            );
            let uncached = run_sweep(std::slice::from_ref(&corpus), &SweepConfig { cache_dir: None, ..cfg }, &stimuli).unwrap();
            assert_eq!(fresh, uncached);
        }
    }

    #[test]
    fn sweep_keeps_points_before_a_failure() {
        let corpus = Corpus::from_lines("t", ["abc abd abc", "bcd abc"]).unwrap();
        let stimuli = vec![
            Stimulus::new("abc", true, 500.0, 0.9),
            Stimulus::new("bcd", false, 600.0, 0.8),
        ];
        let cfg = SweepConfig {
            algorithm: Algorithm::Uni,
            sizes: vec![2, 10],
            flags: TrainFlags::default(),
            cache_dir: None,
            metrics: vec![Metric::Chunkability],
            signals: vec![Signal::Rt],
            dataset: "t".into(),
            exec: Exec::Sequential,
        };
        let r = run_sweep(&[corpus], &cfg, &stimuli).unwrap();
        assert!(r.points.is_empty());
        assert!(r.failure.unwrap().contains("size 2"));
    }

    #[test]
    fn regression_on_constructed_words() {
        let words: Vec<String> = (0..40).map(|i| "ab".repeat(1 + i % 7) + &"c".repeat(i % 3)).collect();
        let model = wpc(&["ab", "##ab", "abab", "##abab"]);
        let mut freq = FrequencyTable::default();
        let mut stimuli = Vec::new();
        for (i, w) in words.iter().enumerate() {
            let c = crate::metrics::chunkability(&model.encode(w).unwrap());
            stimuli.push(Stimulus::new(w.clone(), true, 900.0 - 300.0 * c, 0.5 + 0.4 * c));
            // words repeat with period 21; index 20 has no twin
            if i != 20 {
                freq.insert(w, 3.0 + (i % 5) as f64);
            }
        }
        stimuli.push(Stimulus::new("zzz", false, 700.0, 0.5));
        let report = run_regression(&stimuli, &model, &freq, 13, 0.8).unwrap();
        assert_eq!(report.dropped_without_frequency, 1);
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            if row.feature == Feature::Chunkability {
                assert!(row.result.mse <= 1e-20, "{row:?}");
                assert!(row.result.explained_variance >= 1.0 - 1e-12);
            } else {
                assert!(row.result.explained_variance < 0.99);
            }
        }
        assert_eq!(run_regression(&stimuli, &model, &freq, 13, 0.8).unwrap(), report);
        assert!(run_regression(&stimuli[..5], &model, &freq, 13, 0.8).is_err());
    }
}
