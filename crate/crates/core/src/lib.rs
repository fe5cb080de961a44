//! Tokenizer laboratory: train BPE, WordPiece and UnigramLM vocabularies,
//! segment lexical-decision stimuli, and relate segmentation metrics to
//! human response times and accuracies.

pub mod bpe;
pub mod error;
pub mod evalpipe;
mod merges;
pub mod metrics;
pub mod par;
pub mod pretok;
pub mod stats;
pub mod synth;
pub mod textio;
pub mod unigram;
pub mod vocab;
pub mod wordpiece;

pub use error::{Error, Result};
pub use par::Exec;
pub use textio::Corpus;
pub use vocab::{Algorithm, TokenizerModel, Tokenization, TrainFlags, Vocabulary};

/// Train a model of any algorithm.
pub fn train_model(
    algorithm: Algorithm,
    corpora: &[Corpus],
    target_size: usize,
    flags: &TrainFlags,
    exec: Exec,
) -> Result<TokenizerModel> {
    match algorithm {
        Algorithm::Bpe => bpe::train_bpe_with(corpora, target_size, flags, exec),
        Algorithm::Wpc => wordpiece::train_wpc_with(corpora, target_size, flags, exec),
        Algorithm::Uni => unigram::train_uni_with(corpora, target_size, flags, exec),
    }
}
