//! Byte-pair-encoding tokenizer: character-coverage alphabets, greedy merge
//! training, lossless encoding with byte fallback, corpus cleaning and
//! evaluation metrics.

mod alphabet;
mod clean;
mod eval;
mod model;
mod train;

pub use alphabet::{alphabet_from_counts, build_alphabet, char_counts};
pub use clean::{ban_pieces, clean_corpus, clean_text, clean_train, CharFilter, CleanTrainOutcome, DEFAULT_ALLOWED};
pub use eval::{
    compare_tokenizers, evaluate, exact_score, format_comparison, parse_external_counts, token_to_word_ratio,
    CompareRow, EvalCounts,
};
pub use model::{
    Merge, TokenizerModel, BOS_ID, BYTE_TOKENS, EOS_ID, FORMAT_VERSION, MAGIC, MARKER_ID, PAD_ID, SPECIAL_TOKENS,
    UNK_ID,
};
pub use train::{sample_corpus, train_bpe, word_counts, TrainConfig, DEFAULT_COVERAGE};

/// Word-boundary marker, U+2581.
pub const MARKER: char = '\u{2581}';

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary size {requested} is below the {required} base tokens")]
    VocabTooSmall { requested: usize, required: usize },
    #[error("every alphabet character is banned")]
    EmptyAlphabet,
    #[error("token id {0} is not in the vocabulary")]
    UnknownId(u32),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("{0}")]
    Config(String),
}
