//! Combining several model judgments per comment into one label.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::gateway::{
    classify_batch, ChatClient, ChatRequest, ItemError, ModelJudgment, ParseError, PromptError, PromptSet, ReplyCache,
    RetryPolicy, Task, TransportError, Verdict,
};
use crate::labels::Direction;

/// Tie-break order used when no other is configured: least directional first.
pub const DEFAULT_PRIORITY: [Direction; 4] = [
    Direction::Stable,
    Direction::NotRelated,
    Direction::Rise,
    Direction::Fall,
];

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no judgments to integrate")]
    NoJudgments,
    #[error("judgment {index} is not a direction label")]
    NotDirectional { index: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("integrator transport failed: {0}")]
    Transport(TransportError),
    #[error("integrator reply carries no single label: {raw:?}")]
    UnintegrableReply { raw: String, cause: ParseError },
    #[error("integrator reply is not a usable label: {0}")]
    Parse(ParseError),
    #[error("{0}")]
    Cache(String),
    #[error("decisions file {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("decisions file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LlmIntegration,
    Vote,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleDecision {
    pub comment_id: String,
    pub label: Direction,
    pub method: Method,
    pub inputs: Vec<ModelJudgment>,
    pub integrator_model_id: Option<String>,
}

/// One line of the decisions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub comment_id: String,
    pub label: Direction,
    pub method: Method,
    pub integrator_model_id: Option<String>,
    pub inputs: Vec<InputSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSummary {
    pub model_id: String,
    pub label: Direction,
    pub confidence: Option<u8>,
}

impl EnsembleDecision {
    pub fn record(&self) -> DecisionRecord {
        DecisionRecord {
            comment_id: self.comment_id.clone(),
            label: self.label,
            method: self.method,
            integrator_model_id: self.integrator_model_id.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|j| InputSummary {
                    model_id: j.model_id.clone(),
                    label: j.label.direction().unwrap_or(Direction::NotRelated),
                    confidence: j.confidence,
                })
                .collect(),
        }
    }
}

fn direction_of(judgments: &[ModelJudgment]) -> Result<Vec<Direction>, EnsembleError> {
    judgments
        .iter()
        .enumerate()
        .map(|(index, j)| j.label.direction().ok_or(EnsembleError::NotDirectional { index }))
        .collect()
}

/// Confidence-weighted vote. A judgment without confidence weighs 100; ties go
/// to whichever label comes first in `priority` (labels missing from it rank
/// after those present, in declaration order).
pub fn integrate_vote(
    comment_id: &str,
    judgments: &[ModelJudgment],
    priority: &[Direction],
) -> Result<EnsembleDecision, EnsembleError> {
    if judgments.is_empty() {
        return Err(EnsembleError::NoJudgments);
    }
    let labels = direction_of(judgments)?;
    let mut order: Vec<Direction> = priority.to_vec();
    for d in Direction::ALL {
        if !order.contains(&d) {
            order.push(d);
        }
    }
    let weight = |d: Direction| -> u64 {
        labels
            .iter()
            .zip(judgments)
            .filter(|(l, _)| **l == d)
            .map(|(_, j)| u64::from(j.confidence.unwrap_or(100)))
            .sum()
    };
    let mut best = order[0];
    let mut best_weight = weight(best);
    for &d in &order[1..] {
        let w = weight(d);
        if w > best_weight {
            best = d;
            best_weight = w;
        }
    }
    // a label nobody voted for can only win if every vote had zero confidence
    if best_weight == 0 {
        let voted: Vec<Direction> = order.iter().copied().filter(|d| labels.contains(d)).collect();
        best = voted[0];
    }
    Ok(EnsembleDecision {
        comment_id: comment_id.to_string(),
        label: best,
        method: Method::Vote,
        inputs: judgments.to_vec(),
        integrator_model_id: None,
    })
}

/// One comment waiting for integration.
#[derive(Debug, Clone)]
pub struct IntegrationItem {
    pub comment_id: String,
    pub text: String,
    pub judgments: Vec<ModelJudgment>,
}

/// Builds integration prompts, sends them to `integrator` and parses each
/// reply into a label. Results are in input order.
pub fn integrate_llm_batch(
    items: &[IntegrationItem],
    set: &PromptSet,
    integrator: &dyn ChatClient,
    cache: &ReplyCache,
    max_in_flight: usize,
    retry: &RetryPolicy,
) -> Vec<Result<EnsembleDecision, EnsembleError>> {
    let mut out: Vec<Option<Result<EnsembleDecision, EnsembleError>>> = Vec::with_capacity(items.len());
    let mut requests = Vec::new();
    let mut positions = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let prepared =
            direction_of(&item.judgments).and_then(|_| Ok(set.integration_prompt(&item.text, &item.judgments)?));
        match prepared {
            Ok(prompt) => {
                requests.push(ChatRequest::user(prompt));
                positions.push(i);
                out.push(None);
            }
            Err(e) => out.push(Some(Err(e))),
        }
    }
    let batch = classify_batch(integrator, &requests, Task::Integration, cache, max_in_flight, retry);
    for (pos, result) in positions.into_iter().zip(batch.results) {
        let item = &items[pos];
        out[pos] = Some(match result {
            Ok(judgment) => match judgment.label {
                Verdict::Direction(label) => Ok(EnsembleDecision {
                    comment_id: item.comment_id.clone(),
                    label,
                    method: Method::LlmIntegration,
                    inputs: item.judgments.clone(),
                    integrator_model_id: Some(integrator.model_id().to_string()),
                }),
                Verdict::Relevance(_) => Err(EnsembleError::UnintegrableReply {
                    raw: judgment.raw,
                    cause: ParseError::NoLabelFound,
                }),
            },
            Err(ItemError::Parse { error, raw }) => match error {
                ParseError::NoLabelFound | ParseError::AmbiguousLabel(_) => {
                    Err(EnsembleError::UnintegrableReply { raw, cause: error })
                }
                other => Err(EnsembleError::Parse(other)),
            },
            Err(ItemError::Transport { error, .. }) => Err(EnsembleError::Transport(error)),
            Err(ItemError::Cache(message)) => Err(EnsembleError::Cache(message)),
        });
    }
    out.into_iter().map(|r| r.expect("every item resolved")).collect()
}

/// Integrates one comment's judgments through an LLM.
pub fn integrate_llm(
    comment_id: &str,
    text: &str,
    judgments: &[ModelJudgment],
    set: &PromptSet,
    integrator: &dyn ChatClient,
    cache: &ReplyCache,
    retry: &RetryPolicy,
) -> Result<EnsembleDecision, EnsembleError> {
    let item = IntegrationItem {
        comment_id: comment_id.to_string(),
        text: text.to_string(),
        judgments: judgments.to_vec(),
    };
    integrate_llm_batch(std::slice::from_ref(&item), set, integrator, cache, 1, retry)
        .pop()
        .expect("one result per item")
}

pub fn write_decisions(path: &Path, decisions: &[DecisionRecord]) -> Result<(), EnsembleError> {
    let mut buf = String::new();
    for d in decisions {
        buf.push_str(&serde_json::to_string(d).expect("decision serializes"));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes()).map_err(|source| EnsembleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRecord>, EnsembleError> {
    let io_err = |source| EnsembleError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EnsembleError::Format {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
