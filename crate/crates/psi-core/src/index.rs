//! Monthly price sentiment indices.
//!
//! For each month, `psi = (rise - fall) / (rise + fall + stable)`. Comments
//! judged not related to price changes are counted but left out of the ratio.
//! A month without any directional comment has no value rather than zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Domain, IndustryClass, IndustryMapping, Segment, SurveyComment};
use crate::ensemble::DecisionRecord;
use crate::fsutil::write_atomic;
use crate::labels::Direction;
use crate::month::YearMonth;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{month}: no rise, stable or fall comments")]
    EmptyDenominator { month: YearMonth },
    #[error("decision refers to unknown comment {0:?}")]
    UnknownComment(String),
    #[error("unknown index variant {0:?}")]
    UnknownVariant(String),
    #[error("index file {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyCounts {
    pub month: YearMonth,
    pub rise: u64,
    pub stable: u64,
    pub fall: u64,
    pub not_related: u64,
}

impl MonthlyCounts {
    pub fn empty(month: YearMonth) -> Self {
        MonthlyCounts {
            month,
            rise: 0,
            stable: 0,
            fall: 0,
            not_related: 0,
        }
    }

    pub fn add(&mut self, label: Direction) {
        match label {
            Direction::Rise => self.rise += 1,
            Direction::Stable => self.stable += 1,
            Direction::Fall => self.fall += 1,
            Direction::NotRelated => self.not_related += 1,
        }
    }

    pub fn directional(&self) -> u64 {
        self.rise + self.stable + self.fall
    }

    pub fn total(&self) -> u64 {
        self.directional() + self.not_related
    }
}

pub fn compute_psi(counts: &MonthlyCounts) -> Result<f64, IndexError> {
    let denom = counts.directional();
    if denom == 0 {
        return Err(IndexError::EmptyDenominator { month: counts.month });
    }
    Ok((counts.rise as f64 - counts.fall as f64) / denom as f64)
}

/// Counts labels per month; output is sorted by month and only holds months
/// that occur in the input.
pub fn aggregate_monthly<I>(decisions: I) -> Vec<MonthlyCounts>
where
    I: IntoIterator<Item = (YearMonth, Direction)>,
{
    let mut by_month: BTreeMap<YearMonth, MonthlyCounts> = BTreeMap::new();
    for (month, label) in decisions {
        by_month
            .entry(month)
            .or_insert_with(|| MonthlyCounts::empty(month))
            .add(label);
    }
    by_month.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PsiVariant {
    #[default]
    General,
    ConsumerGeneral,
    ConsumerGoods,
    ConsumerServices,
    CorporateGoods,
    CorporateServices,
}

impl PsiVariant {
    pub const ALL: [PsiVariant; 6] = [
        PsiVariant::General,
        PsiVariant::ConsumerGeneral,
        PsiVariant::ConsumerGoods,
        PsiVariant::ConsumerServices,
        PsiVariant::CorporateGoods,
        PsiVariant::CorporateServices,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PsiVariant::General => "general",
            PsiVariant::ConsumerGeneral => "consumer_general",
            PsiVariant::ConsumerGoods => "consumer_goods",
            PsiVariant::ConsumerServices => "consumer_services",
            PsiVariant::CorporateGoods => "corporate_goods",
            PsiVariant::CorporateServices => "corporate_services",
        }
    }

    pub fn segment(self) -> Segment {
        use IndustryClass::*;
        let (domain, industry) = match self {
            PsiVariant::General => (None, None),
            PsiVariant::ConsumerGeneral => (Some(Domain::Household), None),
            PsiVariant::ConsumerGoods => (Some(Domain::Household), Some(Manufacturing)),
            PsiVariant::ConsumerServices => (Some(Domain::Household), Some(NonManufacturing)),
            PsiVariant::CorporateGoods => (Some(Domain::Corporate), Some(Manufacturing)),
            PsiVariant::CorporateServices => (Some(Domain::Corporate), Some(NonManufacturing)),
        };
        Segment { domain, industry }
    }

    /// Official index this variant is meant to track, if any. Metadata only.
    pub fn target_index(self) -> Option<&'static str> {
        match self {
            PsiVariant::General => None,
            PsiVariant::ConsumerGeneral => Some("Core Core CPI"),
            PsiVariant::ConsumerGoods => Some("CPI (Goods)"),
            PsiVariant::ConsumerServices => Some("CPI (Services)"),
            PsiVariant::CorporateGoods => Some("CGPI"),
            PsiVariant::CorporateServices => Some("SPPI"),
        }
    }
}

impl fmt::Display for PsiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PsiVariant {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        PsiVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == key)
            .ok_or_else(|| IndexError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiPoint {
    pub month: YearMonth,
    /// `None` when the month has no directional comments.
    pub psi: Option<f64>,
    pub counts: MonthlyCounts,
}

impl PsiPoint {
    pub fn empty_denominator(&self) -> bool {
        self.psi.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSeries {
    pub variant: PsiVariant,
    pub points: Vec<PsiPoint>,
}

impl PsiSeries {
    pub fn flagged_months(&self) -> Vec<YearMonth> {
        self.points
            .iter()
            .filter(|p| p.empty_denominator())
            .map(|p| p.month)
            .collect()
    }

    /// `(month, psi)` for months with a value.
    pub fn values(&self) -> Vec<(YearMonth, f64)> {
        self.points.iter().filter_map(|p| p.psi.map(|v| (p.month, v))).collect()
    }
}

/// Pairs each decision with its comment.
pub fn join_decisions(
    comments: &[SurveyComment],
    decisions: &[DecisionRecord],
) -> Result<Vec<(SurveyComment, Direction)>, IndexError> {
    let by_id: HashMap<&str, &SurveyComment> = comments.iter().map(|c| (c.id.as_str(), c)).collect();
    decisions
        .iter()
        .map(|d| {
            by_id
                .get(d.comment_id.as_str())
                .map(|c| ((*c).clone(), d.label))
                .ok_or_else(|| IndexError::UnknownComment(d.comment_id.clone()))
        })
        .collect()
}

/// Filters decided comments to the variant's segment and computes one point
/// per month present.
pub fn build_index(
    decided: &[(SurveyComment, Direction)],
    variant: PsiVariant,
    mapping: &IndustryMapping,
) -> PsiSeries {
    let segment = variant.segment();
    let counts = aggregate_monthly(
        decided
            .iter()
            .filter(|(c, _)| segment.matches(c, mapping))
            .map(|(c, label)| (c.month, *label)),
    );
    PsiSeries {
        variant,
        points: counts
            .into_iter()
            .map(|counts| PsiPoint {
                month: counts.month,
                psi: compute_psi(&counts).ok(),
                counts,
            })
            .collect(),
    }
}

pub const INDEX_HEADER: [&str; 7] = ["month", "variant", "psi", "rise", "stable", "fall", "not_related"];

/// Renders `month,variant,psi,rise,stable,fall,not_related` rows; a missing
/// value is an empty field.
pub fn index_csv(series: &[PsiSeries]) -> String {
    let mut out = INDEX_HEADER.join(",");
    out.push('\n');
    for s in series {
        for p in &s.points {
            let psi = p.psi.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.month, s.variant, psi, p.counts.rise, p.counts.stable, p.counts.fall, p.counts.not_related
            ));
        }
    }
    out
}

pub fn write_index_csv(path: &Path, series: &[PsiSeries]) -> Result<(), IndexError> {
    write_atomic(path, index_csv(series).as_bytes()).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an index file back into one series per variant, in first-seen order.
pub fn read_index_csv(path: &Path) -> Result<Vec<PsiSeries>, IndexError> {
    let text = std::fs::read_to_string(path).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_index_csv(&text)
}

pub fn parse_index_csv(text: &str) -> Result<Vec<PsiSeries>, IndexError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == INDEX_HEADER.join(",") => {}
        _ => {
            return Err(IndexError::Format {
                line: 1,
                message: format!("header must be {}", INDEX_HEADER.join(",")),
            })
        }
    }
    let mut out: Vec<PsiSeries> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fmt_err = |message: String| IndexError::Format { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != INDEX_HEADER.len() {
            return Err(fmt_err(format!(
                "expected {} fields, found {}",
                INDEX_HEADER.len(),
                fields.len()
            )));
        }
        let month: YearMonth = fields[0].parse().map_err(|e| fmt_err(format!("{e}")))?;
        let variant: PsiVariant = fields[1].parse().map_err(|e| fmt_err(format!("{e}")))?;
        let psi = if fields[2].is_empty() {
            None
        } else {
            Some(fields[2].parse::<f64>().map_err(|e| fmt_err(format!("psi: {e}")))?)
        };
        let count = |s: &str| s.parse::<u64>().map_err(|e| fmt_err(format!("count {s:?}: {e}")));
        let counts = MonthlyCounts {
            month,
            rise: count(fields[3])?,
            stable: count(fields[4])?,
            fall: count(fields[5])?,
            not_related: count(fields[6])?,
        };
        let point = PsiPoint { month, psi, counts };
        match out.iter_mut().find(|s| s.variant == variant) {
            Some(s) => s.points.push(point),
            None => out.push(PsiSeries {
                variant,
                points: vec![point],
            }),
        }
    }
    Ok(out)
}
