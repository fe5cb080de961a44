//! Vocabulary, tokenization results and the trained-model container shared by
//! the three algorithms, plus the native model file format and import of
//! externally produced vocabulary files.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bpe::MergeTable;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::textio;
use crate::unigram::{ScoredLexicon, ViterbiLexicon};
use crate::wordpiece::LongestMatch;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CONTINUATION_MARKER: &str = "##";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bpe,
    Wpc,
    Uni,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bpe => "bpe",
            Algorithm::Wpc => "wpc",
            Algorithm::Uni => "uni",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpe" => Ok(Algorithm::Bpe),
            "wpc" | "wordpiece" => Ok(Algorithm::Wpc),
            "uni" | "unigram" => Ok(Algorithm::Uni),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Ordered, duplicate-free token inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    continuation_marker: String,
    special_tokens: BTreeSet<String>,
    alphabet: BTreeSet<char>,
}

impl Vocabulary {
    /// Tokens in construction order. Single-character tokens form the
    /// alphabet.
    pub fn new(
        tokens: Vec<String>,
        continuation_marker: impl Into<String>,
        special_tokens: BTreeSet<String>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        let mut alphabet = BTreeSet::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Invariant(format!("empty token at position {i}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Invariant(format!("duplicate token `{t}`")));
            }
            let mut chars = t.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                alphabet.insert(c);
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            continuation_marker: continuation_marker.into(),
            special_tokens,
            alphabet,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The vocabulary size m.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn continuation_marker(&self) -> &str {
        &self.continuation_marker
    }

    pub fn special_tokens(&self) -> &BTreeSet<String> {
        &self.special_tokens
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }
}

/// The result of encoding one character sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenization {
    pub source: String,
    pub tokens: Vec<String>,
    /// Set when non-initial tokens carry a continuation marker.
    pub marker: Option<String>,
}

impl Tokenization {
    /// Character count of the source, markers excluded.
    pub fn n(&self) -> usize {
        self.source.chars().count()
    }

    /// Token count.
    pub fn k(&self) -> usize {
        self.tokens.len()
    }

    /// Tokens with continuation markers removed from non-initial positions.
    pub fn pieces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().enumerate().map(move |(i, t)| match (&self.marker, i) {
            (Some(m), i) if i > 0 => t.strip_prefix(m.as_str()).unwrap_or(t),
            _ => t.as_str(),
        })
    }

    pub fn reconstruct(&self) -> String {
        self.pieces().collect()
    }

    pub fn round_trips(&self) -> bool {
        self.reconstruct() == self.source
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub rank: u32,
}

/// Knobs recorded with every trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainFlags {
    pub lowercase: bool,
    pub seed: u64,
    /// Merges producing longer tokens (in characters) are skipped.
    pub max_token_len: usize,
    /// UnigramLM seed lexicon size as a multiple of the target size.
    pub seed_factor: usize,
    pub em_iters: usize,
    pub prune_fraction: f64,
    /// Longest seed substring, in characters.
    pub max_piece_len: usize,
    /// Seed substrings must occur at least this often.
    pub min_piece_count: u64,
}

impl Default for TrainFlags {
    fn default() -> Self {
        TrainFlags {
            lowercase: true,
            seed: 0,
            max_token_len: 32,
            seed_factor: 10,
            em_iters: 2,
            prune_fraction: 0.25,
            max_piece_len: 20,
            min_piece_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub corpus_ids: Vec<String>,
    pub corpus_hash: String,
    pub target_size: usize,
    /// Tokens present before the first merge (merge-based models only).
    pub base_size: usize,
    pub flags: TrainFlags,
}

impl TrainingMetadata {
    pub fn imported(source: &str, size: usize, base_size: usize, lowercase: bool) -> Self {
        TrainingMetadata {
            corpus_ids: vec![source.to_owned()],
            corpus_hash: String::new(),
            target_size: size,
            base_size,
            flags: TrainFlags {
                lowercase,
                ..TrainFlags::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    Merges(Vec<MergeRule>),
    Lexicon(ScoredLexicon),
}

#[derive(Debug, Clone)]
enum Encoder {
    Bpe(MergeTable),
    Wpc(LongestMatch),
    Uni(ViterbiLexicon),
}

/// A trained (or imported) tokenizer. Immutable once built.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    algorithm: Algorithm,
    vocabulary: Vocabulary,
    state: ModelState,
    metadata: TrainingMetadata,
    encoder: Encoder,
}

impl PartialEq for TokenizerModel {
    fn eq(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.vocabulary == other.vocabulary
            && self.state == other.state
            && self.metadata == other.metadata
    }
}

impl TokenizerModel {
    pub fn new(
        algorithm: Algorithm,
        vocabulary: Vocabulary,
        state: ModelState,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let encoder = match (&algorithm, &state) {
            (Algorithm::Bpe, ModelState::Merges(merges)) => Encoder::Bpe(MergeTable::new(merges)),
            (Algorithm::Wpc, ModelState::Merges(_)) => Encoder::Wpc(LongestMatch::new(&vocabulary)),
            (Algorithm::Uni, ModelState::Lexicon(lex)) => {
                if lex.len() != vocabulary.len() {
                    return Err(Error::Invariant("lexicon and vocabulary sizes differ".into()));
                }
                Encoder::Uni(ViterbiLexicon::new(lex))
            }
            _ => {
                return Err(Error::Invariant(format!(
                    "algorithm {algorithm} does not match the model state"
                )))
            }
        };
        Ok(TokenizerModel {
            algorithm,
            vocabulary,
            state,
            metadata,
            encoder,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn merges(&self) -> Option<&[MergeRule]> {
        match &self.state {
            ModelState::Merges(m) => Some(m),
            ModelState::Lexicon(_) => None,
        }
    }

    pub fn lexicon(&self) -> Option<&ScoredLexicon> {
        match &self.state {
            ModelState::Lexicon(l) => Some(l),
            ModelState::Merges(_) => None,
        }
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    /// Apply the model's text normalization (NFC, optional lowercasing).
    pub fn normalize(&self, s: &str) -> String {
        textio::normalize(s, self.metadata.flags.lowercase)
    }

    /// Split a single whitespace-free sequence into tokens.
    pub fn encode(&self, sequence: &str) -> Result<Tokenization> {
        if sequence.is_empty() {
            return Err(Error::EmptySequence);
        }
        match &self.encoder {
            Encoder::Bpe(table) => Ok(table.encode(sequence)),
            Encoder::Wpc(matcher) => matcher.encode(sequence),
            Encoder::Uni(lex) => Ok(lex.encode(sequence)),
        }
    }

    pub fn encode_batch<S: AsRef<str> + Sync>(&self, sequences: &[S], exec: Exec) -> Result<Vec<Tokenization>> {
        exec.map(sequences, |s| self.encode(s.as_ref())).into_iter().collect()
    }

    /// The model a merge-based trainer would have produced with a smaller
    /// target size on the same corpus.
    pub fn truncate(&self, size: usize) -> Result<TokenizerModel> {
        let ModelState::Merges(merges) = &self.state else {
            return Err(Error::InvalidArgument("only merge-based models can be truncated".into()));
        };
        let base = self.metadata.base_size;
        if size < base {
            return Err(Error::TargetBelowAlphabet {
                target: size,
                alphabet: base,
            });
        }
        if size >= self.vocabulary.len() {
            let mut m = self.clone();
            m.metadata.target_size = size;
            return Ok(m);
        }
        let mut seen: HashSet<&str> = self.vocabulary.tokens()[..base].iter().map(String::as_str).collect();
        let mut kept = Vec::new();
        let marker = self.vocabulary.continuation_marker();
        let mut results = Vec::new();
        for rule in merges {
            if seen.len() == size {
                break;
            }
            kept.push(rule.clone());
            results.push(merged_token(&rule.left, &rule.right, self.algorithm, marker));
            let last = results.last().unwrap().clone();
            if !seen.contains(last.as_str()) {
                // The token order is the order results first appear.
                let id = self.vocabulary.id(&last).ok_or_else(|| {
                    Error::Invariant(format!("merge result `{last}` missing from vocabulary"))
                })?;
                if id as usize != seen.len() {
                    return Err(Error::Invariant("vocabulary order differs from merge order".into()));
                }
                seen.insert(&self.vocabulary.tokens()[id as usize]);
            }
        }
        let tokens = self.vocabulary.tokens()[..size].to_vec();
        let vocabulary = Vocabulary::new(tokens, marker, self.vocabulary.special_tokens().clone())?;
        let mut metadata = self.metadata.clone();
        metadata.target_size = size;
        TokenizerModel::new(self.algorithm, vocabulary, ModelState::Merges(kept), metadata)
    }

    fn payload(&self) -> ModelPayload {
        let (merges, scores) = match &self.state {
            ModelState::Merges(m) => (Some(m.iter().map(|r| [r.left.clone(), r.right.clone()]).collect()), None),
            ModelState::Lexicon(l) => (None, Some(l.entries().iter().map(|(_, s)| *s).collect())),
        };
        ModelPayload {
            version: MODEL_FORMAT_VERSION,
            algorithm: self.algorithm,
            tokens: self.vocabulary.tokens().to_vec(),
            continuation_marker: self.vocabulary.continuation_marker().to_owned(),
            special_tokens: self.vocabulary.special_tokens().iter().cloned().collect(),
            merges,
            scores,
            flags: self.metadata.flags.clone(),
            metadata: PayloadMetadata {
                corpus_ids: self.metadata.corpus_ids.clone(),
                corpus_hash: self.metadata.corpus_hash.clone(),
                target_size: self.metadata.target_size,
                base_size: self.metadata.base_size,
            },
        }
    }

    /// Serialize to the native JSON format.
    pub fn to_json(&self) -> Result<String> {
        let payload = self.payload();
        let checksum = payload.checksum()?;
        let file = ModelFile { payload, checksum };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<TokenizerModel> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Checksum(format!("document is truncated or corrupt ({e})")))?;
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::VersionMismatch {
                found: version.unwrap_or(0) as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        let actual = file.payload.checksum()?;
        if actual != file.checksum {
            return Err(Error::Checksum(format!("expected {}, computed {actual}", file.checksum)));
        }
        file.payload.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TokenizerModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// The string a merge of `left` and `right` produces.
pub(crate) fn merged_token(left: &str, right: &str, algorithm: Algorithm, marker: &str) -> String {
    let right = match algorithm {
        Algorithm::Wpc => right.strip_prefix(marker).unwrap_or(right),
        _ => right,
    };
    format!("{left}{right}")
}

#[derive(Debug, Serialize, Deserialize)]
struct PayloadMetadata {
    corpus_ids: Vec<String>,
    corpus_hash: String,
    target_size: usize,
    base_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelPayload {
    version: u32,
    algorithm: Algorithm,
    tokens: Vec<String>,
    continuation_marker: String,
    special_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merges: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
    flags: TrainFlags,
    metadata: PayloadMetadata,
}

impl ModelPayload {
    fn checksum(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    fn into_model(self) -> Result<TokenizerModel> {
        let vocabulary = Vocabulary::new(
            self.tokens.clone(),
            self.continuation_marker,
            self.special_tokens.into_iter().collect(),
        )?;
        let state = match (self.merges, self.scores) {
            (Some(merges), None) => ModelState::Merges(
                merges
                    .into_iter()
                    .enumerate()
                    .map(|(rank, [left, right])| MergeRule {
                        left,
                        right,
                        rank: rank as u32,
                    })
                    .collect(),
            ),
            (None, Some(scores)) => {
                if scores.len() != self.tokens.len() {
                    return Err(Error::Invariant("score count differs from token count".into()));
                }
                ModelState::Lexicon(ScoredLexicon::from_entries(self.tokens.into_iter().zip(scores).collect())?)
            }
            _ => return Err(Error::Invariant("model needs exactly one of merges or scores".into())),
        };
        let metadata = TrainingMetadata {
            corpus_ids: self.metadata.corpus_ids,
            corpus_hash: self.metadata.corpus_hash,
            target_size: self.metadata.target_size,
            base_size: self.metadata.base_size,
            flags: self.flags,
        };
        TokenizerModel::new(self.algorithm, vocabulary, state, metadata)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    payload: ModelPayload,
    checksum: String,
}

/// Formats produced by external tokenizer libraries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalFormat {
    /// One token per line, `##` continuation marker (BERT-style).
    WordpieceList,
    /// One `left right` merge per line, rank = line order.
    BpeMerges,
}

impl FromStr for ExternalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wordpiece-list" => Ok(ExternalFormat::WordpieceList),
            "bpe-merges" => Ok(ExternalFormat::BpeMerges),
            other => Err(Error::InvalidArgument(format!("unknown vocabulary format `{other}`"))),
        }
    }
}

fn is_special(token: &str) -> bool {
    token.len() > 2
        && ((token.starts_with('[') && token.ends_with(']')) || (token.starts_with('<') && token.ends_with('>')))
}

/// Build a model from an exported vocabulary file. Encoding follows the
/// format's usual inference rule: greedy longest match for WordPiece lists,
/// ordered merge application for BPE merges.
pub fn import_external_vocab(path: impl AsRef<Path>, format: ExternalFormat, lowercase: bool) -> Result<TokenizerModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    match format {
        ExternalFormat::WordpieceList => {
            let mut tokens = Vec::new();
            let mut seen = HashSet::new();
            let mut special = BTreeSet::new();
            for (i, line) in text.lines().enumerate() {
                let token = line.trim_end_matches('\r');
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(Error::malformed(path, i + 1, "token is empty or contains whitespace"));
                }
                if !seen.insert(token.to_owned()) {
                    return Err(Error::malformed(path, i + 1, format!("duplicate token `{token}`")));
                }
                if is_special(token) {
                    special.insert(token.to_owned());
                }
                tokens.push(token.to_owned());
            }
            let size = tokens.len();
            let vocabulary = Vocabulary::new(tokens, DEFAULT_CONTINUATION_MARKER, special)?;
            let metadata = TrainingMetadata::imported(&source, size, size, lowercase);
            TokenizerModel::new(Algorithm::Wpc, vocabulary, ModelState::Merges(Vec::new()), metadata)
        }
        ExternalFormat::BpeMerges => {
            let mut merges = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if i == 0 && line.starts_with("#version") {
                    continue;
                }
                let parts: Vec<&str> = line.split(' ').collect();
                if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
                    return Err(Error::malformed(path, i + 1, "expected `left right`"));
                }
                merges.push(MergeRule {
                    left: parts[0].to_owned(),
                    right: parts[1].to_owned(),
                    rank: merges.len() as u32,
                });
            }
            let alphabet: BTreeSet<char> = merges
                .iter()
                .flat_map(|r| r.left.chars().chain(r.right.chars()))
                .collect();
            let mut tokens: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
            let base = tokens.len();
            let mut seen: HashSet<String> = tokens.iter().cloned().collect();
            for r in &merges {
                let t = format!("{}{}", r.left, r.right);
                if seen.insert(t.clone()) {
                    tokens.push(t);
                }
            }
            let size = tokens.len();
            let vocabulary = Vocabulary::new(tokens, DEFAULT_CONTINUATION_MARKER, BTreeSet::new())?;
            let metadata = TrainingMetadata::imported(&source, size, base, lowercase);
            TokenizerModel::new(Algorithm::Bpe, vocabulary, ModelState::Merges(merges), metadata)
        }
    }
}

/// Write a vocabulary as one token per line (the WordPiece list format).
pub fn export_token_list(vocabulary: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = vocabulary.tokens().join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn letters() -> impl Iterator<Item = String> {
        ('a'..='z').map(|c| c.to_string())
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        let err = Vocabulary::new(vec!["a".into(), "a".into()], "##", BTreeSet::new());
        assert!(err.is_err());
    }

    #[test]
    fn alphabet_is_single_characters() {
        let v = Vocabulary::new(vec!["a".into(), "##b".into(), "ab".into(), "é".into()], "##", BTreeSet::new()).unwrap();
        assert_eq!(v.alphabet().iter().collect::<String>(), "aé");
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn wordpiece_list_longest_match() {
        let mut lines: Vec<String> = vec!["[UNK]".into(), "sea".into(), "##food".into(), "seafood".into()];
        lines.extend(letters());
        lines.extend(letters().map(|c| format!("##{c}")));
        let f = write_tmp(&lines.join("\n"));
        let m = import_external_vocab(f.path(), ExternalFormat::WordpieceList, true).unwrap();
        assert_eq!(m.encode("seafood").unwrap().tokens, vec!["seafood"]);
        assert!(m.vocabulary().special_tokens().contains("[UNK]"));
        let q = import_external_vocab(write_tmp("a\nb\n").path(), ExternalFormat::WordpieceList, true).unwrap();
        let t = q.encode("q").unwrap();
        assert_eq!(t.tokens, vec!["q"]);
        assert!(t.round_trips());
    }

    #[test]
    fn wordpiece_list_malformed_line() {
        let f = write_tmp("a\n\nb\n");
        match import_external_vocab(f.path(), ExternalFormat::WordpieceList, true) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bpe_merges_import() {
        let f = write_tmp("#version: 0.2\ns e\nse a\n");
        let m = import_external_vocab(f.path(), ExternalFormat::BpeMerges, true).unwrap();
        assert_eq!(m.encode("sea").unwrap().tokens, vec!["sea"]);
        assert_eq!(m.vocabulary().tokens(), &["a", "e", "s", "se", "sea"]);
        let bad = write_tmp("s e\nsea\n");
        assert!(matches!(
            import_external_vocab(bad.path(), ExternalFormat::BpeMerges, true),
            Err(Error::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let f = write_tmp("s e\n");
        let m = import_external_vocab(f.path(), ExternalFormat::BpeMerges, true).unwrap();
        assert!(matches!(m.encode(""), Err(Error::EmptySequence)));
    }

    #[test]
    fn tokenization_strips_markers_only_after_first() {
        let t = Tokenization {
            source: "##ab".into(),
            tokens: vec!["##".into(), "##a".into(), "##b".into()],
            marker: Some("##".into()),
        };
        assert!(t.round_trips());
        assert_eq!((t.n(), t.k()), (4, 3));
    }

    #[test]
    fn save_load_round_trip_and_integrity() {
        let f = write_tmp("o u\nou t\nf o\nx e\n");
        let m = import_external_vocab(f.path(), ExternalFormat::BpeMerges, true).unwrap();
        let json = m.to_json().unwrap();
        let back = TokenizerModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.encode("outfoxed").unwrap(), m.encode("outfoxed").unwrap());

        let truncated = &json[..json.len() / 2];
        assert!(matches!(TokenizerModel::from_json(truncated), Err(Error::Checksum(_))));

        let tampered = json.replacen("\"ou\"", "\"uo\"", 1);
        assert!(matches!(TokenizerModel::from_json(&tampered), Err(Error::Checksum(_))));

        let other_version = json.replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(matches!(
            TokenizerModel::from_json(&other_version),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }
}
