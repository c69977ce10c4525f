use std::collections::HashMap;
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::Deserialize;

use super::BaselineError;

/// Reads a newline-delimited vocabulary, dropping blanks and duplicates.
pub fn load_vocabulary(path: &Path) -> Result<Vec<String>, BaselineError> {
    let data = std::fs::read_to_string(path).map_err(|source| BaselineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut seen = std::collections::HashSet::new();
    Ok(data
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .filter(|w| seen.insert(w.to_string()))
        .map(str::to_string)
        .collect())
}

/// Emits every lexicon word found in the text, scanning leftmost-longest and
/// without overlaps. Text outside the lexicon is skipped, so no word
/// boundaries are assumed (the survey text is unsegmented Japanese).
#[derive(Debug, Clone)]
pub struct LexiconTokenizer {
    lexicon: Vec<String>,
    matcher: AhoCorasick,
}

impl LexiconTokenizer {
    pub fn new(lexicon: Vec<String>) -> Self {
        let matcher = AhoCorasickBuilder::new()
            .match_kind(MatchKind::LeftmostLongest)
            .ascii_case_insensitive(true)
            .build(&lexicon)
            .expect("lexicon automaton builds");
        Self { lexicon, matcher }
    }

    pub fn lexicon(&self) -> &[String] {
        &self.lexicon
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.matcher
            .find_iter(text)
            .map(|m| self.lexicon[m.pattern().as_usize()].clone())
            .collect()
    }
}

/// Token lists produced by an outside morphological analyzer, keyed by text id.
#[derive(Debug, Clone, Default)]
pub struct ExternalTokens {
    by_id: HashMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct ExternalRow {
    id: String,
    tokens: Vec<String>,
}

impl ExternalTokens {
    pub fn from_jsonl_str(data: &str) -> Result<Self, BaselineError> {
        let mut by_id = HashMap::new();
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: ExternalRow = serde_json::from_str(line).map_err(|e| BaselineError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            by_id.insert(row.id, row.tokens);
        }
        Ok(Self { by_id })
    }

    pub fn from_path(path: &Path) -> Result<Self, BaselineError> {
        let data = std::fs::read_to_string(path).map_err(|source| BaselineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl_str(&data)
    }

    pub fn get(&self, id: &str) -> Option<&[String]> {
        self.by_id.get(id).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone)]
pub enum Tokenizer {
    LexiconMatch(LexiconTokenizer),
    External(ExternalTokens),
}

impl Tokenizer {
    pub fn lexicon(words: Vec<String>) -> Self {
        Tokenizer::LexiconMatch(LexiconTokenizer::new(words))
    }

    /// Tokens for one text. `id` is only consulted in external mode.
    pub fn tokenize(&self, id: &str, text: &str) -> Result<Vec<String>, BaselineError> {
        match self {
            Tokenizer::LexiconMatch(t) => Ok(t.tokenize(text)),
            Tokenizer::External(ext) => ext
                .get(id)
                .map(<[String]>::to_vec)
                .ok_or_else(|| BaselineError::MissingTokens(id.to_string())),
        }
    }
}
