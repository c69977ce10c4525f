use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AliasTable, CorpusError, LabeledComment, SurveyComment};
use crate::fsutil::write_atomic;
use crate::labels::{Direction, Relevance};
use crate::month::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentFormat {
    Csv,
    Jsonl,
}

impl CommentFormat {
    /// Guesses the format from a file extension (`.csv`, otherwise JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CommentFormat::Csv,
            _ => CommentFormat::Jsonl,
        }
    }
}

impl FromStr for CommentFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CommentFormat::Csv),
            "jsonl" => Ok(CommentFormat::Jsonl),
            other => Err(format!("unknown comment format {other:?}")),
        }
    }
}

/// Inclusive month range; records outside it are dropped on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWindow {
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
}

impl Default for CorpusWindow {
    fn default() -> Self {
        Self {
            start: YearMonth::new(2001, 1),
            end: None,
        }
    }
}

impl CorpusWindow {
    pub fn unbounded() -> Self {
        Self { start: None, end: None }
    }

    pub fn contains(&self, month: YearMonth) -> bool {
        self.start.is_none_or(|s| month >= s) && self.end.is_none_or(|e| month <= e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub window: CorpusWindow,
    pub aliases: AliasTable,
}

const REQUIRED: [&str; 6] = ["id", "month", "domain", "industry", "text", "kind"];

/// Field values of one record before validation, keyed by column name.
struct RawRecord {
    line: usize,
    fields: HashMap<String, String>,
}

impl RawRecord {
    fn get(&self, field: &'static str) -> Result<&str, CorpusError> {
        self.fields
            .get(field)
            .map(String::as_str)
            .ok_or(CorpusError::MissingField { line: self.line, field })
    }

    fn optional(&self, field: &str) -> Option<&str> {
        self.fields.get(field).map(|s| s.trim()).filter(|s| !s.is_empty())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_raw(path: &Path, format: CommentFormat) -> Result<Vec<RawRecord>, CorpusError> {
    let data = std::fs::read(path).map_err(io_err(path))?;
    let data = String::from_utf8(data).map_err(|e| {
        let prefix = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        CorpusError::Parse {
            line: prefix.iter().filter(|&&b| b == b'\n').count() + 1,
            message: "file is not valid UTF-8".into(),
        }
    })?;
    match format {
        CommentFormat::Jsonl => read_jsonl(&data),
        CommentFormat::Csv => read_csv(&data),
    }
}

fn read_jsonl(data: &str) -> Result<Vec<RawRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, text) in data.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let Value::Object(map) = value else {
            return Err(CorpusError::Parse {
                line,
                message: "expected a JSON object".into(),
            });
        };
        let mut fields = HashMap::new();
        for (key, v) in map {
            let s = match v {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                Value::Null => continue,
                other => {
                    return Err(CorpusError::Parse {
                        line,
                        message: format!("key {key:?} must be a string, found {other}"),
                    })
                }
            };
            fields.insert(key, s);
        }
        out.push(RawRecord { line, fields });
    }
    Ok(out)
}

fn read_csv(data: &str) -> Result<Vec<RawRecord>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for field in REQUIRED {
        if !headers.iter().any(|h| h == field) {
            return Err(CorpusError::MissingField { line: 1, field });
        }
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CorpusError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields = headers.iter().cloned().zip(record.iter().map(str::to_string)).collect();
        out.push(RawRecord { line, fields });
    }
    Ok(out)
}

/// Validates one record; `Ok(None)` means it fell outside the window.
fn to_comment(raw: &RawRecord, options: &LoadOptions) -> Result<Option<SurveyComment>, CorpusError> {
    let line = raw.line;
    let id = raw.get("id")?.trim();
    if id.is_empty() {
        return Err(CorpusError::MissingField { line, field: "id" });
    }
    let month_raw = raw.get("month")?;
    let month: YearMonth = month_raw.parse().map_err(|_| CorpusError::InvalidEnum {
        line,
        field: "month",
        value: month_raw.to_string(),
    })?;
    let domain_raw = raw.get("domain")?;
    let domain = options
        .aliases
        .domain(domain_raw)
        .ok_or_else(|| CorpusError::InvalidEnum {
            line,
            field: "domain",
            value: domain_raw.to_string(),
        })?;
    let kind_raw = raw.get("kind")?;
    let survey_kind = options.aliases.kind(kind_raw).ok_or_else(|| CorpusError::InvalidEnum {
        line,
        field: "kind",
        value: kind_raw.to_string(),
    })?;
    let industry_raw = raw.get("industry")?.to_string();
    let text = raw.get("text")?;
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText { line });
    }
    if !options.window.contains(month) {
        return Ok(None);
    }
    Ok(Some(SurveyComment {
        id: id.to_string(),
        month,
        domain,
        industry_raw,
        text: text.to_string(),
        survey_kind,
    }))
}

fn check_unique<'a>(ids: impl Iterator<Item = (&'a str, usize)>) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (id, line) in ids {
        if !seen.insert(id) {
            return Err(CorpusError::Parse {
                line,
                message: format!("duplicate id {id:?}"),
            });
        }
    }
    Ok(())
}

/// Loads and validates survey comments, preserving file order.
///
/// Records dated outside `options.window` are dropped silently; every other
/// invalid record aborts the load with its line number.
pub fn load_comments(
    path: &Path,
    format: CommentFormat,
    options: &LoadOptions,
) -> Result<Vec<SurveyComment>, CorpusError> {
    let raws = read_raw(path, format)?;
    let mut out = Vec::with_capacity(raws.len());
    let mut lines = Vec::with_capacity(raws.len());
    for raw in &raws {
        if let Some(c) = to_comment(raw, options)? {
            out.push(c);
            lines.push(raw.line);
        }
    }
    check_unique(out.iter().map(|c| c.id.as_str()).zip(lines))?;
    Ok(out)
}

/// Loads comments carrying `relevance` and/or `direction` labels.
pub fn load_labeled(
    path: &Path,
    format: CommentFormat,
    options: &LoadOptions,
) -> Result<Vec<LabeledComment>, CorpusError> {
    let raws = read_raw(path, format)?;
    let mut out = Vec::with_capacity(raws.len());
    let mut lines = Vec::with_capacity(raws.len());
    for raw in &raws {
        let Some(comment) = to_comment(raw, options)? else {
            continue;
        };
        let relevance = raw
            .optional("relevance")
            .map(|v| {
                v.parse::<Relevance>().map_err(|_| CorpusError::InvalidEnum {
                    line: raw.line,
                    field: "relevance",
                    value: v.to_string(),
                })
            })
            .transpose()?;
        let direction = raw
            .optional("direction")
            .map(|v| {
                v.parse::<Direction>().map_err(|_| CorpusError::InvalidEnum {
                    line: raw.line,
                    field: "direction",
                    value: v.to_string(),
                })
            })
            .transpose()?;
        if relevance.is_none() && direction.is_none() {
            return Err(CorpusError::Unlabeled { line: raw.line });
        }
        out.push(LabeledComment {
            comment,
            relevance,
            direction,
        });
        lines.push(raw.line);
    }
    check_unique(out.iter().map(|l| l.comment.id.as_str()).zip(lines))?;
    Ok(out)
}

#[derive(Serialize)]
struct LabeledRow<'a> {
    #[serde(flatten)]
    comment: &'a SurveyComment,
    relevance: Option<Relevance>,
    direction: Option<Direction>,
}

/// Serialized comment rows; CSV always carries the header, even when empty.
fn render<T: Serialize>(rows: &[T], format: CommentFormat) -> Result<Vec<u8>, CorpusError> {
    let ser_err = |e: String| CorpusError::Parse { line: 0, message: e };
    match format {
        CommentFormat::Jsonl => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| ser_err(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
        CommentFormat::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            writer.write_record(REQUIRED).map_err(|e| ser_err(e.to_string()))?;
            for row in rows {
                writer.serialize(row).map_err(|e| ser_err(e.to_string()))?;
            }
            writer.into_inner().map_err(|e| ser_err(e.to_string()))
        }
    }
}

pub fn write_comments(path: &Path, comments: &[SurveyComment], format: CommentFormat) -> Result<(), CorpusError> {
    let bytes = render(comments, format)?;
    write_atomic(path, &bytes).map_err(io_err(path))
}

pub fn write_labeled(path: &Path, labeled: &[LabeledComment], format: CommentFormat) -> Result<(), CorpusError> {
    if format == CommentFormat::Csv {
        // csv cannot serialize flattened structs
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header = [
            "id",
            "month",
            "domain",
            "industry",
            "text",
            "kind",
            "relevance",
            "direction",
        ];
        let io = |e: csv::Error| CorpusError::Parse {
            line: 0,
            message: e.to_string(),
        };
        writer.write_record(header).map_err(io)?;
        for l in labeled {
            let c = &l.comment;
            writer
                .write_record([
                    c.id.as_str(),
                    &c.month.to_string(),
                    c.domain.as_str(),
                    &c.industry_raw,
                    &c.text,
                    c.survey_kind.as_str(),
                    l.relevance.map(Relevance::as_str).unwrap_or(""),
                    l.direction.map(Direction::as_str).unwrap_or(""),
                ])
                .map_err(io)?;
        }
        let bytes = writer.into_inner().map_err(|e| CorpusError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        return write_atomic(path, &bytes).map_err(io_err(path));
    }
    let rows: Vec<LabeledRow> = labeled
        .iter()
        .map(|l| LabeledRow {
            comment: &l.comment,
            relevance: l.relevance,
            direction: l.direction,
        })
        .collect();
    let bytes = render(&rows, format)?;
    write_atomic(path, &bytes).map_err(io_err(path))
}
