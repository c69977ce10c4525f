//! Keyword-restricted multinomial Naive Bayes, used as the comparison
//! classifier for both the relevance and the direction task.

mod naive_bayes;
mod tokenizer;

use std::path::PathBuf;

use thiserror::Error;

pub use naive_bayes::{nb_predict, nb_train, pick_label, NbModel, NbPrediction, NbTrainer, TermCounting};
pub use tokenizer::{load_vocabulary, ExternalTokens, LexiconTokenizer, Tokenizer};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pre-tokenized file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no pre-tokenized entry for text id {0:?}")]
    MissingTokens(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {0:?} has no training documents")]
    LabelWithoutDocuments(String),
    #[error("smoothing constant must be > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
}
