//! Closed label vocabularies shared across stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} label {value:?}")]
pub struct LabelParseError {
    pub kind: &'static str,
    pub value: String,
}

/// Direction of price movement a comment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rise,
    Stable,
    Fall,
    NotRelated,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Rise,
        Direction::Stable,
        Direction::Fall,
        Direction::NotRelated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Rise => "rise",
            Direction::Stable => "stable",
            Direction::Fall => "fall",
            Direction::NotRelated => "not_related",
        }
    }

    /// Wording used inside prompts and expected back from models.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Direction::Rise => "Rise",
            Direction::Stable => "Stable",
            Direction::Fall => "Fall",
            Direction::NotRelated => "Not related",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match key.as_str() {
            "rise" => Ok(Direction::Rise),
            "stable" => Ok(Direction::Stable),
            "fall" => Ok(Direction::Fall),
            "not_related" | "notrelated" => Ok(Direction::NotRelated),
            _ => Err(LabelParseError {
                kind: "direction",
                value: s.to_string(),
            }),
        }
    }
}

/// Whether a comment talks about prices at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    PriceRelated,
    NotPriceRelated,
}

impl Relevance {
    pub fn as_str(self) -> &'static str {
        match self {
            Relevance::PriceRelated => "price_related",
            Relevance::NotPriceRelated => "not_price_related",
        }
    }

    /// The Yes/No answer a filtration prompt expects.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Relevance::PriceRelated => "Yes",
            Relevance::NotPriceRelated => "No",
        }
    }

    pub fn from_bool(price_related: bool) -> Self {
        if price_related {
            Relevance::PriceRelated
        } else {
            Relevance::NotPriceRelated
        }
    }

    pub fn is_price_related(self) -> bool {
        self == Relevance::PriceRelated
    }
}

impl fmt::Display for Relevance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relevance {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match key.as_str() {
            "price_related" | "yes" | "true" | "1" => Ok(Relevance::PriceRelated),
            "not_price_related" | "no" | "false" | "0" => Ok(Relevance::NotPriceRelated),
            _ => Err(LabelParseError {
                kind: "relevance",
                value: s.to_string(),
            }),
        }
    }
}
