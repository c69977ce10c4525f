use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndustryClass {
    Manufacturing,
    NonManufacturing,
    /// Only produced by a lenient mapping.
    Unmapped,
}

/// Manual industry-to-class table plus the strictness policy for unknown keys.
#[derive(Debug, Clone, Default)]
pub struct IndustryMapping {
    entries: HashMap<String, IndustryClass>,
    strict: bool,
}

fn paren_group() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // innermost group: no parentheses of either width inside
    RE.get_or_init(|| Regex::new(r"[(（][^()（）]*[)）]").unwrap())
}

/// Removes every parenthesized group (ASCII or full-width), innermost first,
/// until none remain, then trims surrounding whitespace.
pub fn strip_parentheses(raw: &str) -> String {
    let mut current = raw.to_string();
    loop {
        let next = paren_group().replace_all(&current, "").into_owned();
        if next == current {
            break;
        }
        current = next;
    }
    current.trim().to_string()
}

impl IndustryMapping {
    pub fn new(strict: bool) -> Self {
        Self {
            entries: HashMap::new(),
            strict,
        }
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a mapping entry; the key is normalized the same way lookups are.
    pub fn insert(&mut self, industry: &str, class: IndustryClass) {
        self.entries.insert(strip_parentheses(industry), class);
    }

    pub fn with(mut self, industry: &str, class: IndustryClass) -> Self {
        self.insert(industry, class);
        self
    }

    /// Parses the two-column `industry,class` CSV.
    pub fn from_csv_str(data: &str, strict: bool) -> Result<Self, CorpusError> {
        let mut mapping = Self::new(strict);
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data.as_bytes());
        let headers = reader.headers().map_err(|e| CorpusError::Mapping {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 2 || &headers[0] != "industry" || &headers[1] != "class" {
            return Err(CorpusError::Mapping {
                line: 1,
                message: "expected header `industry,class`".into(),
            });
        }
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| CorpusError::Mapping {
                line,
                message: e.to_string(),
            })?;
            let class = match record[1].trim() {
                "manufacturing" => IndustryClass::Manufacturing,
                "non_manufacturing" => IndustryClass::NonManufacturing,
                other => {
                    return Err(CorpusError::Mapping {
                        line,
                        message: format!("unknown class {other:?}"),
                    })
                }
            };
            let key = strip_parentheses(&record[0]);
            if let Some(prev) = mapping.entries.get(&key) {
                if *prev != class {
                    return Err(CorpusError::Mapping {
                        line,
                        message: format!("conflicting class for {key:?}"),
                    });
                }
            }
            mapping.entries.insert(key, class);
        }
        Ok(mapping)
    }

    pub fn from_path(path: &Path, strict: bool) -> Result<Self, CorpusError> {
        let data = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&data, strict)
    }

    /// Lookup that never fails: unknown keys come back as `Unmapped`.
    pub fn classify_lenient(&self, industry_raw: &str) -> IndustryClass {
        self.entries
            .get(&strip_parentheses(industry_raw))
            .copied()
            .unwrap_or(IndustryClass::Unmapped)
    }
}

/// Strips parentheses, then looks the remainder up in `mapping`.
pub fn normalize_industry(industry_raw: &str, mapping: &IndustryMapping) -> Result<IndustryClass, CorpusError> {
    let key = strip_parentheses(industry_raw);
    match mapping.entries.get(&key) {
        Some(class) => Ok(*class),
        None if mapping.strict => Err(CorpusError::UnknownIndustry(key)),
        None => Ok(IndustryClass::Unmapped),
    }
}
