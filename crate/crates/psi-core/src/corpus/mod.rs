//! Survey comment records: ingestion, validation, industry normalization,
//! segmentation and train/dev/test splitting.

mod aliases;
mod industry;
mod io;
mod segment;
mod split;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{Direction, Relevance};
use crate::month::YearMonth;

pub use aliases::AliasTable;
pub use industry::{normalize_industry, strip_parentheses, IndustryClass, IndustryMapping};
pub use io::{load_comments, load_labeled, write_comments, write_labeled, CommentFormat, CorpusWindow, LoadOptions};
pub use segment::{filter_by_segment, Segment};
pub use split::{split_dataset, SplitSpec, Splits};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: invalid {field} value {value:?}")]
    InvalidEnum {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: text is empty")]
    EmptyText { line: usize },
    #[error("line {line}: labeled record carries neither relevance nor direction")]
    Unlabeled { line: usize },
    #[error("unknown industry {0:?} (strict mode)")]
    UnknownIndustry(String),
    #[error("industry mapping line {line}: {message}")]
    Mapping { line: usize, message: String },
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("alias table line {line}: {message}")]
    Alias { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Household,
    Corporate,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Household => "household",
            Domain::Corporate => "corporate",
        }
    }
}

/// Which survey question a comment answers: current conditions or outlook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKind {
    Current,
    Future,
}

impl SurveyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurveyKind::Current => "current",
            SurveyKind::Future => "future",
        }
    }
}

/// One validated survey response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyComment {
    pub id: String,
    pub month: YearMonth,
    pub domain: Domain,
    #[serde(rename = "industry")]
    pub industry_raw: String,
    pub text: String,
    #[serde(rename = "kind")]
    pub survey_kind: SurveyKind,
}

/// A comment with manual labels for either or both classification tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComment {
    pub comment: SurveyComment,
    pub relevance: Option<Relevance>,
    pub direction: Option<Direction>,
}
