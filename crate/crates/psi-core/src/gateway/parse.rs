use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{ModelJudgment, Task, Verdict};
use crate::labels::{Direction, Relevance};
use crate::text::fold_width;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no label found in reply")]
    NoLabelFound,
    #[error("answer line names several labels: {0:?}")]
    AmbiguousLabel(Vec<String>),
    #[error("confidence {0:?} is not a percentage in 0..=100")]
    InvalidConfidence(String),
}

struct Patterns {
    direction: Regex,
    relevance: Regex,
    answer_prefix: Regex,
    confidence: Regex,
    reason: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        direction: Regex::new(
            r"(?i)\b(not[ _-]?related|rise|stable|fall)\b|(上昇|横ばい|下落|関係なし)",
        )
        .unwrap(),
        relevance: Regex::new(r"(?i)\b(yes|no)\b|(はい|いいえ)").unwrap(),
        answer_prefix: Regex::new(
            r"(?i)^\s*(answer|classification result(?: considering the above)?|回答|分類結果|以上を踏まえた分類結果)\s*:",
        )
        .unwrap(),
        confidence: Regex::new(r"(?i)^\s*(?:confidence|確信度)\s*:\s*(.*)$").unwrap(),
        reason: Regex::new(r"(?i)^\s*(?:reason|理由)\s*:\s*(.*)$").unwrap(),
    })
}

fn direction_token(token: &str) -> Direction {
    match token.to_lowercase().as_str() {
        "rise" | "上昇" => Direction::Rise,
        "stable" | "横ばい" => Direction::Stable,
        "fall" | "下落" => Direction::Fall,
        _ => Direction::NotRelated,
    }
}

fn relevance_token(token: &str) -> Relevance {
    match token.to_lowercase().as_str() {
        "yes" | "はい" => Relevance::PriceRelated,
        _ => Relevance::NotPriceRelated,
    }
}

/// Distinct labels on one line, in order of first appearance.
fn labels_on_line(line: &str, task: Task) -> Vec<Verdict> {
    let p = patterns();
    let mut out: Vec<Verdict> = Vec::new();
    let re = match task {
        Task::Filtration => &p.relevance,
        Task::Direction | Task::Integration => &p.direction,
    };
    for m in re.find_iter(line) {
        let v = match task {
            Task::Filtration => Verdict::Relevance(relevance_token(m.as_str())),
            _ => Verdict::Direction(direction_token(m.as_str())),
        };
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn parse_confidence(value: &str) -> Result<u8, ParseError> {
    let err = || ParseError::InvalidConfidence(value.to_string());
    let number = value.trim().trim_end_matches('%').trim();
    let parsed: f64 = number.parse().map_err(|_| err())?;
    if !(0.0..=100.0).contains(&parsed) {
        return Err(err());
    }
    // half-up rounding
    Ok((parsed + 0.5).floor() as u8)
}

/// Extracts a judgment from a free-text reply.
///
/// The label comes from the first answer-prefixed line (`Answer:`,
/// `Classification Result:`, ...) that names a label, falling back to the
/// first other line that does. `Confidence:` and `Reason:` lines never supply
/// the label. Matching ignores case and character width.
pub fn parse_judgment(raw: &str, task: Task, model_id: &str) -> Result<ModelJudgment, ParseError> {
    let p = patterns();
    let folded = fold_width(raw);
    let lines: Vec<&str> = folded.lines().collect();

    let mut confidence = None;
    let mut reason = None;
    let mut answer_lines = Vec::new();
    let mut other_lines = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if let Some(c) = p.confidence.captures(line) {
            if confidence.is_none() {
                confidence = Some(parse_confidence(&c[1])?);
            }
            continue;
        }
        if let Some(c) = p.reason.captures(line) {
            let mut tail = vec![c[1].to_string()];
            tail.extend(lines[i + 1..].iter().map(|l| l.to_string()));
            let text = tail.join("\n").trim().to_string();
            reason = (!text.is_empty()).then_some(text);
            break;
        }
        if p.answer_prefix.is_match(line) {
            answer_lines.push(*line);
        } else {
            other_lines.push(*line);
        }
    }

    let chosen = answer_lines
        .iter()
        .chain(other_lines.iter())
        .map(|line| labels_on_line(line, task))
        .find(|labels| !labels.is_empty())
        .ok_or(ParseError::NoLabelFound)?;
    if chosen.len() > 1 {
        return Err(ParseError::AmbiguousLabel(
            chosen.iter().map(|v| v.to_string()).collect(),
        ));
    }
    Ok(ModelJudgment {
        label: chosen[0],
        confidence,
        reason,
        model_id: model_id.to_string(),
        raw: raw.to_string(),
    })
}

/// Formats a judgment the way a well-behaved model would reply.
pub fn render_reply(label: Verdict, confidence: Option<u8>, reason: Option<&str>) -> String {
    let name = match label {
        Verdict::Direction(d) => d.prompt_name(),
        Verdict::Relevance(r) => r.prompt_name(),
    };
    let mut out = format!("Answer: {name}");
    if let Some(c) = confidence {
        out.push_str(&format!("\nConfidence: {c}%"));
    }
    if let Some(r) = reason {
        out.push_str(&format!("\nReason: {r}"));
    }
    out
}
