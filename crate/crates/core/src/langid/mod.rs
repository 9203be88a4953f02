//! Script detection and a trainable character n-gram language classifier.

mod model;
mod script;

use std::io::BufRead;

use serde::Deserialize;

pub use model::{
    for_each_ngram, train_langid, Classification, LangModel, LanguageTable, OrderTable,
    FORMAT_VERSION, MAGIC, MAX_ORDER, SMOOTHING,
};
pub use script::{detect_script, ScriptProfile};

use crate::lang::Lang;

#[derive(Debug, thiserror::Error)]
pub enum LangIdError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("language `{0}` has no text to train on")]
    EmptyLanguage(Lang),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training examples must not be labelled `und`")]
    UndeterminedLabel,
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("line {line}: {message}")]
    BadExample { line: usize, message: String },
}

#[derive(Deserialize)]
struct LabeledLine {
    lang: Lang,
    text: String,
}

/// Reads `{"lang": "hi", "text": "..."}` lines.
pub fn read_labeled<R: BufRead>(reader: R) -> Result<Vec<(Lang, String)>, LangIdError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LabeledLine = serde_json::from_str(&line).map_err(|e| LangIdError::BadExample {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((l.lang, l.text));
    }
    Ok(out)
}
