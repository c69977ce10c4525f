use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::month::YearMonth;

/// Monthly observations with strictly increasing months. Gaps are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    points: Vec<(YearMonth, f64)>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, points: Vec<(YearMonth, f64)>) -> Result<Self, AnalyticsError> {
        let name = name.into();
        for (i, &(month, value)) in points.iter().enumerate() {
            if !value.is_finite() {
                return Err(AnalyticsError::NonFinite { series: name, month });
            }
            if i > 0 {
                let prev = points[i - 1].0;
                if prev == month {
                    return Err(AnalyticsError::DuplicateMonth { series: name, month });
                }
                if prev > month {
                    return Err(AnalyticsError::UnorderedMonth { series: name, month });
                }
            }
        }
        Ok(TimeSeries { name, points })
    }

    /// Consecutive months starting at `start`.
    pub fn from_values(name: impl Into<String>, start: YearMonth, values: &[f64]) -> Result<Self, AnalyticsError> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (start.offset(i as i64), v))
            .collect();
        Self::new(name, points)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[(YearMonth, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn get(&self, month: YearMonth) -> Option<f64> {
        self.points
            .binary_search_by_key(&month, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    pub fn to_map(&self) -> HashMap<YearMonth, f64> {
        self.points.iter().copied().collect()
    }

    pub fn rename(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Parses `month,value` CSV text. Rows may come in any order; a repeated
    /// month is an error naming that month.
    pub fn from_csv_str(name: impl Into<String>, text: &str) -> Result<Self, AnalyticsError> {
        let name = name.into();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| AnalyticsError::Format {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |want: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(want));
        let (Some(mcol), Some(vcol)) = (col("month"), col("value")) else {
            return Err(AnalyticsError::Format {
                line: 1,
                message: "header needs month and value columns".into(),
            });
        };
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| AnalyticsError::Format {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let bad = |message: String| AnalyticsError::Format { line, message };
            let month: YearMonth = record
                .get(mcol)
                .unwrap_or("")
                .parse()
                .map_err(|e| bad(format!("{e}")))?;
            let raw = record.get(vcol).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| bad(format!("value {raw:?} is not a number")))?;
            points.push((month, value));
        }
        points.sort_by_key(|p| p.0);
        Self::new(name, points)
    }

    pub fn from_csv_path(name: impl Into<String>, path: &Path) -> Result<Self, AnalyticsError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnalyticsError::Format {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_csv_str(name, &text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("month,value\n");
        for (m, v) in &self.points {
            out.push_str(&format!("{m},{v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Level,
    #[default]
    YoyPct,
    MomPct,
}

impl Transform {
    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Level => "level",
            Transform::YoyPct => "yoy_pct",
            Transform::MomPct => "mom_pct",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "level" => Ok(Transform::Level),
            "yoy_pct" | "yoy" => Ok(Transform::YoyPct),
            "mom_pct" | "mom" => Ok(Transform::MomPct),
            other => Err(format!("unknown transform {other:?} (level, yoy_pct, mom_pct)")),
        }
    }
}

/// Percent change against the value 12 months (yoy) or 1 month (mom) earlier.
/// Points without a base month are dropped; a zero base is an error.
pub fn transform_series(s: &TimeSeries, mode: Transform) -> Result<TimeSeries, AnalyticsError> {
    let back = match mode {
        Transform::Level => return Ok(s.clone()),
        Transform::YoyPct => 12,
        Transform::MomPct => 1,
    };
    let mut points = Vec::new();
    for &(month, value) in &s.points {
        let Some(base) = s.get(month.offset(-back)) else {
            continue;
        };
        if base == 0.0 {
            return Err(AnalyticsError::ZeroBase {
                series: s.name.clone(),
                month: month.offset(-back),
            });
        }
        points.push((month, 100.0 * (value / base - 1.0)));
    }
    TimeSeries::new(format!("{}:{}", s.name, mode), points)
}
