use std::collections::HashMap;
use std::path::Path;

use super::{CorpusError, Domain, SurveyKind};
use crate::text::normalize_key;

const DEFAULT_ALIASES: &str = include_str!("../../data/aliases.csv");

/// Maps free-text domain and survey-kind values onto their enums.
///
/// Keys are compared after width folding, lowercasing and whitespace collapsing.
#[derive(Debug, Clone)]
pub struct AliasTable {
    domain: HashMap<String, Domain>,
    kind: HashMap<String, SurveyKind>,
}

impl Default for AliasTable {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_ALIASES).expect("bundled alias table is valid")
    }
}

impl AliasTable {
    /// Parses a `field,alias,value` CSV with a header row.
    pub fn from_csv_str(data: &str) -> Result<Self, CorpusError> {
        let mut table = AliasTable {
            domain: HashMap::new(),
            kind: HashMap::new(),
        };
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data.as_bytes());
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| CorpusError::Alias {
                line,
                message: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(CorpusError::Alias {
                    line,
                    message: format!("expected 3 columns, found {}", record.len()),
                });
            }
            let (field, alias, value) = (&record[0], normalize_key(&record[1]), record[2].trim());
            match field.trim() {
                "domain" => {
                    let d = match value {
                        "household" => Domain::Household,
                        "corporate" => Domain::Corporate,
                        other => {
                            return Err(CorpusError::Alias {
                                line,
                                message: format!("unknown domain {other:?}"),
                            })
                        }
                    };
                    table.domain.insert(alias, d);
                }
                "kind" => {
                    let k = match value {
                        "current" => SurveyKind::Current,
                        "future" => SurveyKind::Future,
                        other => {
                            return Err(CorpusError::Alias {
                                line,
                                message: format!("unknown kind {other:?}"),
                            })
                        }
                    };
                    table.kind.insert(alias, k);
                }
                other => {
                    return Err(CorpusError::Alias {
                        line,
                        message: format!("unknown field {other:?}"),
                    })
                }
            }
        }
        Ok(table)
    }

    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        let data = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&data)
    }

    pub fn domain(&self, raw: &str) -> Option<Domain> {
        self.domain.get(&normalize_key(raw)).copied()
    }

    pub fn kind(&self, raw: &str) -> Option<SurveyKind> {
        self.kind.get(&normalize_key(raw)).copied()
    }
}
